"""Command-line front end: named experiments in, CSV + metadata out.

Every experiment writes two files into the output directory:

* ``<experiment>.csv`` — the sweep data.  Column names carry their unit as a
  suffix (``duration_ns``, ``power_mw``); dimensionless columns are plain.
  For a fixed config and seed the bytes are identical across runs.
* ``<experiment>.meta.json`` — the fully resolved parameter set, column
  descriptions, code version, seed, and wall time (wall time lives here so
  the CSV stays reproducible).

Exit codes: 0 success, 2 validation error (unknown experiment, bad override,
invalid value), 3 infeasible optimization (no design reaches the target).
Progress and diagnostics go to stderr; stdout stays machine-readable.

The environment variable ``OMCACHE_THREADS`` caps BLAS/LAPACK parallelism;
the resolved cap is recorded in the metadata.
"""

from __future__ import annotations

import difflib
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from importlib import metadata
from pathlib import Path

import click
import numpy as np

from .constants import TWO_PI
from .dynamics import (
    cooling_trajectory,
    optical_damping,
    pump_photon_number,
    solve_pulse_duration,
)
from .errors import Infeasible, InvalidState, NoCrossing, Unreachable
from .ghz import (
    GhzConfig,
    asymptotic_success,
    bleed_success_probability,
    expected_rounds,
    optimize_bleed_schedule,
    outcome_table,
    single_shot,
)
from .herald import (
    HeraldModel,
    ghz_herald_fidelity,
    ghz_herald_probability,
    sp_herald_fidelity,
    sp_herald_probability,
)
from .multiplex import (
    ScheduleParams,
    dual_rail_lifetimes,
    expected_max_cycle,
    idling_fidelity,
    monte_carlo_schedule,
)
from .optimize import GivenParams, maximize_fidelity, min_g0
from .params import DrivePulse, load_preset

try:
    __version__ = metadata.version("omcache")
except metadata.PackageNotFoundError:  # running from a source tree
    __version__ = "unknown"

_THREAD_CAP = None  # resolved OMCACHE_THREADS value, for the metadata


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything `run` needs; built by the CLI or directly in Python."""

    experiment: str
    preset: str = "target"
    overrides: tuple = ()  # (key, value) pairs applied to the preset INI
    output_dir: Path = Path(".")
    seed: int = 12345
    options: dict = field(default_factory=dict)  # dedicated-flag values


# ---------------------------------------------------------------------------
# output helpers


def _fmt(v):
    """Deterministic CSV cell text (shortest round-trip for floats)."""
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    x = float(v)
    return repr(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


def _write_outputs(config, preset, columns, rows, extra, wall_time):
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{config.experiment}.csv"
    meta_path = out_dir / f"{config.experiment}.meta.json"

    names = [name for name, _ in columns]
    lines = [",".join(names)]
    for row in rows:
        if len(row) != len(names):
            raise InvalidState(
                f"row width {len(row)} != {len(names)} columns"
            )
        lines.append(",".join(_fmt(v) for v in row))
    csv_path.write_text("\n".join(lines) + "\n")

    meta = {
        "experiment": config.experiment,
        "preset": preset.name,
        "seed": int(config.seed),
        "overrides": [f"{k}={v}" for k, v in config.overrides],
        "options": _jsonable(
            {k: v for k, v in config.options.items() if v is not None}
        ),
        "version": __version__,
        "threads_cap": _THREAD_CAP,
        "wall_time_s": wall_time,
        "csv": csv_path.name,
        "rows": len(rows),
        "columns": {name: desc for name, desc in columns},
        "parameters": {
            "system": _jsonable(asdict(preset.system)),
            "herald": _jsonable(asdict(preset.herald)),
            "drives": _jsonable(
                {k: asdict(v) for k, v in (preset.drives or {}).items()}
            ),
            "n_th": preset.system.n_thermal(),
        },
    }
    meta.update(_jsonable(extra))
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return csv_path, meta_path


def _opt(config, key, default):
    v = config.options.get(key)
    return default if v is None else v


def _bell_herald(preset, eta_d):
    """Detection model for the entangling experiments; None means ideal."""
    if eta_d is None:
        return None
    return HeraldModel.with_dark_prob(
        eta_d,
        preset.system.eta_ex,
        preset.herald.dark_prob_bell,
        window=preset.herald.window,
    )


# ---------------------------------------------------------------------------
# experiments; each returns (columns, rows, extra_meta)


def _exp_cool(config, preset, rng):
    params = preset.system
    pulse = preset.drives["cool"]
    n_th = params.n_thermal()
    starts = (("n_ph_from_thermal", n_th), ("n_ph_from_precooled", 0.06))
    times = np.linspace(0.0, 1.2 * pulse.duration, 241)
    curves = [cooling_trajectory(params, pulse, n0)(times) for _, n0 in starts]
    columns = [
        ("time_ns", "time since the cooling pulse starts, ns"),
        (starts[0][0], f"phonon population starting from n_th = {n_th:.4g}"),
        (starts[1][0], "phonon population starting from a pre-cooled n = 0.06"),
    ]
    rows = [
        (t * 1e9, curves[0][i], curves[1][i]) for i, t in enumerate(times)
    ]
    solved = {}
    for target in (1e-3, 1e-2):
        for label, n0 in starts:
            key = f"duration_to_n_{target:g}_{label}_ns"
            try:
                d = solve_pulse_duration(
                    params, pulse.power, target_population=target, n_init=n0
                )
                solved[key] = d * 1e9
            except Unreachable:
                solved[key] = None
    extra = {
        "drive_power_w": pulse.power,
        "drive_duration_ns": pulse.duration * 1e9,
        "solved_durations": solved,
    }
    return columns, rows, extra


def _exp_herald_tradeoff(config, preset, rng):
    eta_d_opt = _opt(config, "eta_d", None)
    eta_ds = [eta_d_opt] if eta_d_opt is not None else [0.90, 0.98]
    p1s = np.geomspace(1e-3, 0.24, 41)
    columns = [
        ("p1", "single-pair generation probability per squeeze pulse"),
        ("p_h_sp", "herald probability per attempt"),
        ("F_exact", "heralded single-phonon fidelity, exact Bayes"),
        ("F_simplified", "first-order expansion of the same fidelity"),
        ("eta_d", "detector quantum efficiency"),
    ]
    rows = []
    for eta_d in eta_ds:
        h = HeraldModel.with_dark_prob(
            eta_d,
            preset.system.eta_ex,
            preset.herald.dark_prob_single,
            window=preset.herald.window,
        )
        for p1 in p1s:
            r = sp_herald_fidelity(p1, h)
            rows.append(
                (p1, r.probability, r.fidelity, r.fidelity_simplified, eta_d)
            )
    extra = {
        "dark_prob_per_window": preset.herald.dark_prob_single,
        "window_ns": preset.herald.window * 1e9,
        "eta_ex": preset.system.eta_ex,
    }
    return columns, rows, extra


def _exp_retrieval(config, preset, rng):
    params = preset.system
    target = preset.herald.retrieval_efficiency
    powers_mw = (0.1, 0.25, 0.5, 0.75, 1.0)
    columns = [
        ("power_mw", "red retrieval drive power, mW"),
        ("duration_ns", "pulse duration reaching the target efficiency, ns"),
        ("eta_re", "retrieval efficiency achieved (the preset target)"),
        ("eta_re_bound", "cooperativity ceiling eta_ex * C / (C + 1)"),
    ]
    rows = []
    for p_mw in powers_mw:
        power = p_mw * 1e-3
        probe = DrivePulse(power=power, duration=1e-9, carrier_role="red")
        amp = pump_photon_number(params, probe)
        _, coop = optical_damping(params, amp.alpha)
        bound = params.eta_ex * coop / (coop + 1.0)
        try:
            d = solve_pulse_duration(params, power, target_efficiency=target)
            rows.append((p_mw, d * 1e9, target, bound))
        except Unreachable:
            rows.append((p_mw, math.nan, math.nan, bound))
    extra = {"target_eta_re": target}
    return columns, rows, extra


def _exp_schedule(config, preset, rng):
    params = preset.system
    eta_d = _opt(config, "eta_d", 0.98)
    p1 = _opt(config, "p1", 0.01)
    trials = _opt(config, "trials", 20000)
    h = HeraldModel.with_dark_prob(
        eta_d,
        params.eta_ex,
        preset.herald.dark_prob_single,
        window=preset.herald.window,
    )
    p_hsp = sp_herald_probability(p1, h)
    columns = [
        ("n_sources", "multiplexed sources heralded per batch"),
        ("p_hsp", "herald probability per source per cycle"),
        ("mean_max_cycle", "expected cycle of the last herald"),
        ("mean_cycle", "expected cycle of a single source"),
        ("f_idle", "closed-form idling fidelity factor"),
        ("mc_mean_max_cycle", "Monte Carlo mean of the last-herald cycle"),
        ("mc_stderr_max_cycle", "standard error of the previous column"),
        ("mc_f_idle", "Monte Carlo mean idling decay factor"),
    ]
    rows = []
    for n_src in (1, 2, 5, 10, 20, 50, 100, 200, 500, 1000):
        s = ScheduleParams(
            N=n_src,
            p_hsp=p_hsp,
            T_h=preset.herald.window,
            Gamma=params.gamma,
            n_th=params.n_thermal(),
        )
        m_big, m_small = expected_max_cycle(s)
        child_seed = int(rng.integers(2**63))
        mc = monte_carlo_schedule(s, trials, child_seed)
        rows.append(
            (
                n_src,
                p_hsp,
                m_big,
                m_small,
                idling_fidelity(s),
                mc.mean_max_cycle,
                mc.stderr_max_cycle,
                mc.decay_mean,
            )
        )
    extra = {"p1": p1, "eta_d": eta_d, "mc_trials": trials}
    return columns, rows, extra


def _exp_total_fidelity(config, preset, rng):
    params = preset.system
    eta_d_opt = _opt(config, "eta_d", None)
    eta_ds = (
        [eta_d_opt] if eta_d_opt is not None else [0.80, 0.85, 0.90, 0.95, 0.98, 0.99]
    )
    n_sources = _opt(config, "n_sources", 1000)
    n_th = _opt(config, "n_th", params.n_thermal())
    columns = [
        ("eta_d", "detector quantum efficiency"),
        ("bath_temperature_k", "bath temperature, K"),
        ("n_th", "thermal phonon occupation"),
        ("n_sources", "multiplexed sources per batch"),
        ("kappa_ex_over_2pi_hz", "optimal external coupling, Hz"),
        ("p1", "optimal pair probability per squeeze pulse"),
        ("t_init_s", "optimal re-initialization cooling time, s"),
        ("f_init", "initialization fidelity factor"),
        ("f_hsp", "heralded single-phonon fidelity factor"),
        ("f_idle", "idling fidelity factor"),
        ("eta_re", "retrieval efficiency factor"),
        ("f_tot", "product of the four factors"),
    ]
    rows = []
    feasible = 0
    for eta_d in eta_ds:
        given = GivenParams(
            g0=params.g0,
            eta_d=eta_d,
            n_th=n_th,
            N=n_sources,
            kappa_int=params.kappa_int,
            Gamma=params.gamma,
            mech_freq=params.mech_freq,
            carrier_freq=params.carrier_freq,
        )
        try:
            res = maximize_fidelity(given, points_per_decade=12)
        except Infeasible:
            rows.append(
                (eta_d, params.bath_temperature, n_th, n_sources)
                + (math.nan,) * 8
            )
            continue
        feasible += 1
        b = res.budget
        rows.append(
            (
                eta_d,
                params.bath_temperature,
                n_th,
                n_sources,
                res.free.kappa_ex / TWO_PI,
                res.free.p1,
                res.free.T_init,
                b.f_init,
                b.f_hsp,
                b.f_idle,
                b.eta_re,
                b.f_tot,
            )
        )
    if feasible == 0:
        raise Infeasible("no detector efficiency admits a feasible design")
    extra = {"grid_points_per_decade": 12}
    return columns, rows, extra


def _exp_min_g0(config, preset, rng):
    params = preset.system
    eta_d = _opt(config, "eta_d", 0.99)
    n_th = _opt(config, "n_th", params.n_thermal())
    n_sources = _opt(config, "n_sources", 10)
    target = _opt(config, "target_fidelity", 0.99)
    res = min_g0(
        eta_d,
        n_th,
        n_sources,
        target_fidelity=target,
        kappa_int=params.kappa_int,
        Gamma=params.gamma,
        mech_freq=params.mech_freq,
        carrier_freq=params.carrier_freq,
    )
    at = res.at_crossing
    columns = [
        ("g0_min_over_2pi_hz", "smallest coupling reaching the target, Hz"),
        ("target_f_tot", "total-fidelity target"),
        ("f_tot_at_g0", "best achievable total fidelity at that coupling"),
        ("eta_d", "detector quantum efficiency"),
        ("n_th", "thermal phonon occupation"),
        ("n_sources", "multiplexed sources per batch"),
        ("kappa_ex_over_2pi_hz", "external coupling at the optimum, Hz"),
        ("p1", "pair probability at the optimum"),
        ("t_init_s", "re-initialization time at the optimum, s"),
        ("evaluations", "optimizer solves used by the bisection"),
    ]
    rows = [
        (
            res.g0 / TWO_PI,
            res.target_fidelity,
            at.f_tot,
            eta_d,
            n_th,
            n_sources,
            at.free.kappa_ex / TWO_PI,
            at.free.p1,
            at.free.T_init,
            res.evaluations,
        )
    ]
    record = {
        "given": _jsonable(asdict(at.given)),
        "free_at_opt": _jsonable(asdict(at.free)),
        "budget": _jsonable(asdict(at.budget)),
        "g0_min_over_2pi_hz": res.g0 / TWO_PI,
        "f_tot_at_g0": at.f_tot,
        "bracket_over_2pi_hz": [b / TWO_PI for b in res.bracket],
        "evaluations": res.evaluations,
    }
    click.echo(json.dumps(_jsonable(record), indent=2, sort_keys=True))
    extra = {"result": record, "diagnostics": _jsonable(at.diagnostics)}
    return columns, rows, extra


def _exp_lifetimes(config, preset, rng):
    gamma = preset.system.gamma
    columns = [
        ("n_th", "thermal phonon occupation"),
        ("tau_leak_ms", "dual-rail subspace leakage lifetime, ms"),
        ("tau_x_ms", "conditional bit-flip lifetime, ms"),
        ("tau_z_ms", "conditional phase-flip lifetime, ms"),
        ("bias_x_over_z", "tau_x / tau_z"),
        ("tau_leak_formula_ms", "1 / ((4 n_th + 1) Gamma), ms"),
        ("tau_x_times_nth_ms", "tau_x * n_th, ms"),
    ]
    rows = []
    for n_th in (0.01, 0.03, 0.1, 0.3, 1.0):
        r = dual_rail_lifetimes(gamma, n_th)
        formula = 1.0 / ((4.0 * n_th + 1.0) * gamma)
        rows.append(
            (
                n_th,
                r.tau_leak * 1e3,
                r.tau_X * 1e3,
                r.tau_Z * 1e3,
                r.bias,
                formula * 1e3,
                r.tau_X * n_th * 1e3,
            )
        )
    extra = {"gamma_over_2pi_hz": gamma / TWO_PI}
    return columns, rows, extra


def _exp_bell(config, preset, rng):
    herald = _bell_herald(preset, _opt(config, "eta_d", None))
    columns = [
        ("p_re", "partial-retrieval probability per resonator"),
        ("pattern", "detector click pattern"),
        ("parity", "sign of the heralded superposition, when defined"),
        ("probability", "probability of the click pattern"),
        ("fidelity", "conditional fidelity vs the matching Bell state"),
    ]
    rows = []
    formula = []
    for p_re in np.linspace(0.1, 0.9, 9):
        cfg = GhzConfig(2, (float(p_re),)) if herald is None else GhzConfig(
            2, (float(p_re),), herald
        )
        dist = single_shot(cfg)
        for out in outcome_table(dist.observed()):
            rows.append(
                (
                    p_re,
                    out["pattern"],
                    out["parity"],
                    out["probability"],
                    out["fidelity"],
                )
            )
        summ = dist.summary()
        h = herald if herald is not None else HeraldModel(1.0, 1.0)
        formula.append(
            {
                "p_re": float(p_re),
                "herald_probability": summ.probability,
                "mean_fidelity": summ.fidelity,
                "wrong_basis_probability": summ.wrong_basis_probability,
                "formula_probability": ghz_herald_probability(2, float(p_re), h),
                "formula_fidelity": ghz_herald_fidelity(2, float(p_re), h),
            }
        )
    extra = {"summaries": formula}
    return columns, rows, extra


def _exp_bleed(config, preset, rng):
    n = _opt(config, "ghz_n", 2)
    iterations = _opt(config, "iterations", 2)
    eta_d = _opt(config, "eta_d", 0.98)
    schedule, ideal = optimize_bleed_schedule(n, iterations)
    herald = _bell_herald(preset, eta_d)
    res = bleed_success_probability(
        GhzConfig(n, tuple(dict(e) for e in schedule), herald)
    )
    columns = [
        ("pathway_clicks", "detections per round, semicolon separated"),
        ("probability", "probability of completing along this pathway"),
        ("weight", "pathway share of the total success probability"),
        ("effective_p_re", "retrieval probability the herald formula sees"),
        ("fidelity", "conditional fidelity for this pathway"),
    ]
    rows = []
    for path, weight in zip(res.pathways, res.pathway_weights()):
        rows.append(
            (
                ";".join(str(c) for c in path.clicks_per_round),
                path.probability,
                weight,
                path.effective_p_re,
                path.fidelity,
            )
        )
    extra = {
        "n": n,
        "iterations": iterations,
        "eta_d": eta_d,
        "schedule": [
            {str(c): r for c, r in entry.items()} for entry in schedule
        ],
        "success_probability": res.success_probability,
        "average_fidelity": res.average_fidelity,
        "wrong_basis_probability": res.wrong_basis_probability,
        "failure_probability": res.failure_probability,
        "unfinished_probability": res.unfinished_probability,
        "ideal_success_probability": ideal.success_probability,
    }
    return columns, rows, extra


def _exp_asymptotic(config, preset, rng):
    n_max = _opt(config, "ghz_n", 6)
    columns = [
        ("n_nodes", "GHZ size"),
        ("p_success", "herald probability of infinitely slow bleeding"),
        ("ratio_to_fit", "p_success / (0.759 / 2.24^(n-1))"),
        ("single_shot_rate", "single-shot herald probability 1 / 2^(2n-1)"),
    ]
    rows = []
    for n in range(2, n_max + 1):
        p = asymptotic_success(n)
        fit = 0.759 / 2.24 ** (n - 1)
        rows.append((n, p, p / fit, 0.5 / 4.0 ** (n - 1)))
    return columns, rows, {}


def _exp_rounds(config, preset, rng):
    ghz_n = _opt(config, "ghz_n", None)
    ns = (2, 3) if ghz_n is None else (ghz_n,)
    columns = [
        ("n_nodes", "GHZ size"),
        ("p_hsp", "herald probability per source per cycle"),
        ("expected_rounds", "mean retrieval rounds with the adaptive schedule"),
        ("single_shot_rounds", "mean rounds restarting at p_re = 1/2"),
        ("reset_cycles", "heralding cycles to refill all sources on failure"),
        ("schedule", "optimized p_re per detections-so-far, semicolon separated"),
    ]
    rows = []
    for n in ns:
        for p_hsp in (0.003, 0.01, 0.03, 0.1):
            r = expected_rounds(n, p_hsp)
            rows.append(
                (
                    n,
                    p_hsp,
                    r.expected_rounds,
                    r.single_shot_rounds,
                    r.reset_cycles,
                    ";".join(repr(float(x)) for x in r.schedule),
                )
            )
    return columns, rows, {}


_EXPERIMENTS = {
    "cool": (_exp_cool, "phonon cooling curves and solved pulse durations"),
    "herald-tradeoff": (
        _exp_herald_tradeoff,
        "herald probability vs conditional fidelity over p1 and eta_d",
    ),
    "retrieval": (
        _exp_retrieval,
        "pulse duration to reach the preset retrieval efficiency vs power",
    ),
    "schedule": (
        _exp_schedule,
        "multiplexed batch heralding: last-herald cycle and idling fidelity",
    ),
    "total-fidelity": (
        _exp_total_fidelity,
        "optimized end-to-end fidelity budget vs detector efficiency",
    ),
    "min-g0": (
        _exp_min_g0,
        "smallest optomechanical coupling reaching a fidelity target",
    ),
    "lifetimes": (
        _exp_lifetimes,
        "dual-rail qubit leakage / bit-flip / phase-flip lifetimes vs n_th",
    ),
    "bell": (
        _exp_bell,
        "single-shot Bell herald: click patterns, probabilities, fidelities",
    ),
    "bleed": (
        _exp_bleed,
        "iterated weak retrieval: optimized schedule and pathway breakdown",
    ),
    "asymptotic": (
        _exp_asymptotic,
        "success probability of infinitely slow bleeding vs GHZ size",
    ),
    "rounds-to-ghz": (
        _exp_rounds,
        "expected retrieval rounds to herald an n-GHZ state",
    ),
}


def run(config):
    """Execute one named experiment; returns (csv_path, meta_path)."""
    if config.experiment not in _EXPERIMENTS:
        close = difflib.get_close_matches(
            config.experiment, _EXPERIMENTS, n=1, cutoff=0.4
        )
        hint = f"; closest match: {close[0]!r}" if close else ""
        raise InvalidState(
            f"unknown experiment {config.experiment!r}{hint} "
            "(see `omcache list`)"
        )
    preset = load_preset(config.preset, config.overrides)
    tb = config.options.get("tb")
    if tb is not None:
        preset = replace(
            preset, system=preset.system.with_(bath_temperature=tb).validate()
        )
    seed = int(config.seed)
    if not 0 <= seed < 2**64:
        raise InvalidState("seed must fit in 64 bits")
    rng = np.random.Generator(np.random.Philox(key=seed))
    func, _ = _EXPERIMENTS[config.experiment]
    t0 = time.perf_counter()
    columns, rows, extra = func(config, preset, rng)
    wall = time.perf_counter() - t0
    return _write_outputs(config, preset, columns, rows, extra, wall)


def list_experiments():
    """Names and one-line summaries, in registry order."""
    return [(name, summary) for name, (_, summary) in _EXPERIMENTS.items()]


# ---------------------------------------------------------------------------
# click wiring


@click.group()
def main():
    """Cached phonon-pair source: simulation and design sweeps."""
    global _THREAD_CAP
    raw = os.environ.get("OMCACHE_THREADS")
    if raw is None:
        return
    try:
        cap = int(raw)
        if cap < 1:
            raise ValueError
    except ValueError:
        raise click.UsageError(
            f"OMCACHE_THREADS={raw!r} is not a positive integer"
        ) from None
    _THREAD_CAP = cap
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(cap)
    except ImportError:
        for var in (
            "OMP_NUM_THREADS",
            "OPENBLAS_NUM_THREADS",
            "MKL_NUM_THREADS",
        ):
            os.environ[var] = str(cap)


def _parse_overrides(pairs):
    out = []
    for item in pairs:
        if "=" not in item:
            raise click.UsageError(
                f"--set needs key=value, got {item!r}"
            )
        key, value = item.split("=", 1)
        out.append((key.strip(), value.strip()))
    return tuple(out)


@main.command(name="run")
@click.argument("experiment")
@click.option("--preset", default="target", show_default=True,
              help="Bundled preset name or a path to an INI file.")
@click.option("--out", "out_dir", default=".", show_default=True,
              type=click.Path(file_okay=False, path_type=Path),
              help="Directory for the CSV and metadata files.")
@click.option("--seed", default=12345, show_default=True, type=int,
              help="64-bit seed for every stochastic element.")
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
              help="Override a preset INI key (repeatable), e.g. "
                   "kappa_ex_over_2pi_hz=1e9 or drives.cool.power_w=2e-3.")
@click.option("--Tb", "tb", type=float, default=None,
              help="Bath temperature in K (overrides the preset).")
@click.option("--eta-d", "eta_d", type=float, default=None,
              help="Detector quantum efficiency, where the experiment uses one.")
@click.option("--n-th", "n_th", type=float, default=None,
              help="Thermal occupation for the optimizer experiments.")
@click.option("--N", "n_sources", type=int, default=None,
              help="Multiplexed source count for the optimizer experiments.")
@click.option("--ghz-n", type=int, default=None,
              help="GHZ size for the entangling experiments.")
@click.option("--iterations", type=int, default=None,
              help="Bleeding rounds for the bleed experiment.")
@click.option("--trials", type=int, default=None,
              help="Monte Carlo trials for the schedule experiment.")
@click.option("--target-fidelity", type=float, default=None,
              help="Total-fidelity target for min-g0.")
def run_command(experiment, preset, out_dir, seed, overrides, tb, eta_d,
                n_th, n_sources, ghz_n, iterations, trials, target_fidelity):
    """Run EXPERIMENT and write <experiment>.csv + <experiment>.meta.json."""
    config = ExperimentConfig(
        experiment=experiment,
        preset=preset,
        overrides=_parse_overrides(overrides),
        output_dir=out_dir,
        seed=seed,
        options={
            "tb": tb,
            "eta_d": eta_d,
            "n_th": n_th,
            "n_sources": n_sources,
            "ghz_n": ghz_n,
            "iterations": iterations,
            "trials": trials,
            "target_fidelity": target_fidelity,
        },
    )
    click.echo(
        f"running {experiment} (preset {preset}, seed {seed})", err=True
    )
    try:
        csv_path, meta_path = run(config)
    except (Infeasible, NoCrossing, Unreachable) as exc:
        click.echo(f"infeasible: {exc}", err=True)
        sys.exit(3)
    except InvalidState as exc:
        raise click.UsageError(str(exc)) from exc
    click.echo(f"wrote {csv_path} and {meta_path}", err=True)


@main.command(name="list")
def list_command():
    """List the available experiments."""
    for name, summary in list_experiments():
        click.echo(f"{name:<16} {summary}")


if __name__ == "__main__":
    main()
