"""Physical constants (SI, 2018 CODATA exact values)."""

HBAR = 1.054571817e-34  # J s
K_B = 1.380649e-23  # J / K

TWO_PI = 6.283185307179586
