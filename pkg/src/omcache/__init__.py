"""Simulation and design tools for a cached optomechanical phonon-pair source.

The package models a sideband-resolved optomechanical cavity used as a
heralded quantum memory: blue-detuned pulses generate photon-phonon pairs,
a click on the emitted photon heralds a stored single phonon, and a later
red-detuned pulse retrieves it.  Layered on that single-source physics are
multiplexed heralding schedules, dual-rail phonon qubits, partial-retrieval
Bell/GHZ heralding with its bleeding variant, and a design optimizer that
searches device parameters for the best end-to-end fidelity.

Module map:

- :mod:`omcache.fock` / :mod:`omcache.lindblad` / :mod:`omcache.detection`
  — brute-force Fock-space oracle: states, operators, Lindblad evolution,
  beam-splitter networks, and imperfect photon counting.
- :mod:`omcache.params` — device parameters, drive pulses, INI presets.
- :mod:`omcache.dynamics` — linearized two-mode dynamics: cooling,
  squeezing, state swap, retrieval, and pulse-duration solves.
- :mod:`omcache.herald` — closed-form heralding statistics.
- :mod:`omcache.multiplex` — batch heralding order statistics, idling
  fidelity, and dual-rail lifetimes.
- :mod:`omcache.ghz` — partial-retrieval Bell/GHZ heralding, bleeding,
  and round-count estimates.
- :mod:`omcache.optimize` — total-fidelity maximization and minimum-g0
  search.
- :mod:`omcache.cli` — the ``omcache`` command.
"""

from .constants import HBAR, K_B, TWO_PI
from .errors import (
    ComplexityLimit,
    DimensionMismatch,
    Infeasible,
    IntegratorStall,
    InvalidState,
    NoCrossing,
    TruncationError,
    Unreachable,
)
from .params import DrivePulse, HeraldDefaults, Preset, SystemParams, load_preset

__version__ = "0.1.0"

__all__ = [
    "HBAR",
    "K_B",
    "TWO_PI",
    "ComplexityLimit",
    "DimensionMismatch",
    "Infeasible",
    "IntegratorStall",
    "InvalidState",
    "NoCrossing",
    "TruncationError",
    "Unreachable",
    "DrivePulse",
    "HeraldDefaults",
    "Preset",
    "SystemParams",
    "load_preset",
    "__version__",
]
