"""System parameters, drive pulses, and INI presets.

All rates and frequencies on :class:`SystemParams` are *angular* (rad/s).
Preset files and constructors use the lab convention of cyclic values
(``*_over_2pi_hz``); the loaders do the 2*pi.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .constants import HBAR, K_B, TWO_PI
from .errors import InvalidState


@dataclass(frozen=True)
class SystemParams:
    """Static device parameters (angular rates, rad/s; temperature in K)."""

    kappa_int: float  # intrinsic optical loss
    kappa_ex: float  # external coupling (collected port)
    mech_freq: float  # acoustic mode frequency
    gamma: float  # acoustic energy decay rate
    g0: float  # single-photon optomechanical coupling
    g_herald: float  # coupling of the herald/readout optical mode
    carrier_freq: float  # optical carrier
    bath_temperature: float = 2.0
    n_th_override: float | None = None  # set to bypass the Bose-factor calculation

    @classmethod
    def from_cyclic(
        cls,
        kappa_int_hz,
        kappa_ex_hz,
        mech_freq_hz,
        gamma_hz,
        g0_hz,
        g_herald_hz=None,
        carrier_freq_hz=193e12,
        bath_temperature_k=2.0,
    ):
        if g_herald_hz is None:
            g_herald_hz = g0_hz
        return cls(
            kappa_int=TWO_PI * kappa_int_hz,
            kappa_ex=TWO_PI * kappa_ex_hz,
            mech_freq=TWO_PI * mech_freq_hz,
            gamma=TWO_PI * gamma_hz,
            g0=TWO_PI * g0_hz,
            g_herald=TWO_PI * g_herald_hz,
            carrier_freq=TWO_PI * carrier_freq_hz,
            bath_temperature=bath_temperature_k,
        )

    @property
    def kappa(self):
        """Total optical linewidth."""
        return self.kappa_int + self.kappa_ex

    @property
    def eta_ex(self):
        """Fraction of cavity emission reaching the collected port."""
        return self.kappa_ex / self.kappa

    @property
    def single_photon_cooperativity(self):
        return 4.0 * self.g0**2 / (self.kappa * self.gamma)

    def n_thermal(self, temperature=None):
        """Bose occupation of the acoustic mode at the bath temperature."""
        if self.n_th_override is not None and temperature is None:
            return self.n_th_override
        t = self.bath_temperature if temperature is None else temperature
        if t < 0:
            raise InvalidState("negative temperature")
        if t == 0:
            return 0.0
        x = HBAR * self.mech_freq / (K_B * t)
        return 1.0 / np.expm1(x)

    def validate(self):
        for name in ("kappa_int", "kappa_ex", "mech_freq", "gamma", "g0", "g_herald"):
            if getattr(self, name) <= 0:
                raise InvalidState(f"{name} must be positive")
        if self.mech_freq <= self.kappa:
            raise InvalidState("needs sideband resolution: mech_freq > kappa")
        if self.kappa <= self.gamma:
            raise InvalidState("needs kappa > gamma")
        return self

    def with_(self, **changes):
        """Functional update; cyclic keys (``*_hz``) are converted."""
        conv = {}
        for k, v in changes.items():
            if k.endswith("_hz"):
                conv[k[:-3]] = TWO_PI * v
            else:
                conv[k] = v
        return replace(self, **conv)


@dataclass(frozen=True)
class HeraldDefaults:
    """Scenario-level numbers that ride along with a hardware preset."""

    dark_prob_single: float  # dark-count probability per herald window
    dark_prob_bell: float  # same, per Bell-pair window
    window: float  # herald window T_h, s
    init_fidelity: float  # fixed state-initialization fidelity
    retrieval_efficiency: float  # fixed retrieval efficiency


@dataclass(frozen=True)
class Preset:
    name: str
    system: SystemParams
    herald: HeraldDefaults
    drives: dict = None  # name -> DrivePulse, from [drives.<name>] sections


def _apply_overrides(cp, overrides):
    """Patch parsed INI values: ``key=value`` or ``section.key=value``.

    Bare keys must already exist in exactly one section; dotted keys may add
    new entries (e.g. ``drives.cool.power_w``) as long as the section exists
    or names a new ``drives.*`` pulse.
    """
    for key, value in overrides:
        if "." in key:
            section, opt = key.rsplit(".", 1)
            if not cp.has_section(section):
                if section.startswith("drives."):
                    cp.add_section(section)
                else:
                    raise InvalidState(f"override {key!r}: no section [{section}]")
            cp.set(section, opt, str(value))
            continue
        hits = [sec for sec in cp.sections() if cp.has_option(sec, key)]
        if key == "n_th" and not hits:
            hits = ["system"]  # optional override knob, absent from the files
        if len(hits) != 1:
            known = sorted(
                opt for sec in cp.sections() for opt in cp.options(sec)
            )
            raise InvalidState(
                f"override key {key!r} matches {len(hits)} sections; "
                f"known keys: {', '.join(known)}"
            )
        cp.set(hits[0], key, str(value))


def _read_ini(path_or_text, name, overrides=()):
    cp = configparser.ConfigParser()
    cp.read_string(path_or_text)
    _apply_overrides(cp, overrides)
    s = cp["system"]
    system = SystemParams.from_cyclic(
        kappa_int_hz=s.getfloat("kappa_int_over_2pi_hz"),
        kappa_ex_hz=s.getfloat("kappa_ex_over_2pi_hz"),
        mech_freq_hz=s.getfloat("mech_freq_over_2pi_hz"),
        gamma_hz=s.getfloat("gamma_over_2pi_hz"),
        g0_hz=s.getfloat("g0_over_2pi_hz"),
        g_herald_hz=s.getfloat("g_herald_over_2pi_hz", fallback=None),
        carrier_freq_hz=s.getfloat("carrier_freq_over_2pi_hz", fallback=193e12),
        bath_temperature_k=s.getfloat("bath_temperature_k", fallback=2.0),
    )
    if "n_th" in s:
        system = system.with_(n_th_override=s.getfloat("n_th"))
    system.validate()
    h = cp["herald"] if cp.has_section("herald") else {}

    def hget(key, default):
        return float(h.get(key, default)) if h else default

    herald = HeraldDefaults(
        dark_prob_single=hget("dark_prob_single", 0.0),
        dark_prob_bell=hget("dark_prob_bell", 0.0),
        window=hget("window_s", 10e-9),
        init_fidelity=hget("init_fidelity", 1.0),
        retrieval_efficiency=hget("retrieval_efficiency", 1.0),
    )
    drives = {}
    for section in cp.sections():
        if section.startswith("drives."):
            d = cp[section]
            drives[section.split(".", 1)[1]] = DrivePulse(
                power=d.getfloat("power_w"),
                duration=d.getfloat("duration_s"),
                shape=d.get("shape", "tanh"),
                carrier_role=d.get("carrier_role", "red"),
            )
    return Preset(name=name, system=system, herald=herald, drives=drives)


def load_preset(name, overrides=()):
    """Load a bundled preset by name or any INI file by path.

    ``overrides`` is a sequence of ``(key, value)`` pairs applied to the
    parsed INI before building the dataclasses; see :func:`_apply_overrides`.
    """
    p = Path(str(name))
    if p.suffix == ".ini" and p.exists():
        return _read_ini(p.read_text(), p.stem, overrides)
    name = str(name).replace("-", "_")
    ref = resources.files("omcache.presets").joinpath(f"{name}.ini")
    try:
        text = ref.read_text()
    except FileNotFoundError:
        bundled = sorted(
            f.stem for f in resources.files("omcache.presets").iterdir()
            if f.name.endswith(".ini")
        )
        raise InvalidState(
            f"no preset {name!r}; bundled presets: {', '.join(bundled)}"
        ) from None
    return _read_ini(text, name, overrides)


@dataclass(frozen=True)
class DrivePulse:
    """Optical power pulse: tanh turn-on (default) or hard-edged constant.

    With ``shape="tanh"``, ``power_at(t) = power/2 * (1 + tanh(t / tau))`` for
    ``0 <= t < duration`` and zero outside, with ``tau = ramp_fraction *
    duration`` (5% by default; nothing sharper is pinned down, so a fixed
    convention keeps results reproducible).  The drive cuts off hard at
    ``duration`` — the ramp is on the rise only.  ``carrier_role`` records
    which sideband the pump sits on: "red" drives the swap/cooling
    interaction, "blue" the pair-generation interaction.
    """

    power: float  # W
    duration: float  # s
    shape: str = "tanh"
    carrier_role: str = "red"
    ramp_fraction: float = 0.05

    def __post_init__(self):
        if self.power < 0 or self.duration <= 0:
            raise InvalidState("pulse needs power >= 0 and duration > 0")
        if self.shape not in ("constant", "tanh"):
            raise InvalidState(f"unknown pulse shape {self.shape!r}")
        if self.carrier_role not in ("red", "blue"):
            raise InvalidState(f"unknown carrier_role {self.carrier_role!r}")
        if not 0.0 <= self.ramp_fraction < 0.5:
            raise InvalidState("ramp_fraction outside [0, 0.5)")

    def power_at(self, t):
        t = np.asarray(t, dtype=float)
        inside = (t >= 0.0) & (t < self.duration)
        if self.shape == "constant" or self.ramp_fraction == 0.0:
            env = 1.0
        else:
            tau = self.ramp_fraction * self.duration
            env = 0.5 * (1.0 + np.tanh(t / tau))
        out = np.where(inside, self.power * env, 0.0)
        return float(out) if out.ndim == 0 else out
