"""Batch experiment runner: ``bhfluid run <experiment> [options]``.

Each experiment writes CSV files plus a ``manifest.json`` holding the tool
version, the fully resolved parameters, the seed and the lattice, which is
enough to re-run it. Parameters come from built-in defaults, then from an
optional ``--config`` JSON document, then from command-line overrides.

Exit codes: 0 success, 2 configuration error, 3 numerical/physics error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .dynamics import PropagatorSettings, evolve_sampled, melt, prepare_state, reversibility
from .errors import (
    AmbiguityError,
    ConditioningError,
    DegenerateConditionError,
    FitError,
    InternalError,
    LookupFailure,
    ParameterError,
    PropagationError,
)
from .io import write_csv, write_json
from .lattice import LatticeConfig, config_from_dict, in_tunnelling_times
from .observables import (
    conditional_probability,
    density,
    friedel_fit,
    global_entanglement,
    pair_correlation,
    rescaled_separation,
)
from .readout import ConfusionMatrix, estimate_densities, site_outcomes
from .schedule import TAU_FRACTION, boomerang_schedule, disorder_at, melt_schedule, ramp_shape
from .spectrum import fluid_ground_state, top_sites, track_eigenstate
from .tonks import free_fermion_density, free_fermion_g2

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PHYSICS = 3

PHYSICS_ERRORS = (
    AmbiguityError,
    PropagationError,
    DegenerateConditionError,
    FitError,
    ConditioningError,
    InternalError,
    ArithmeticError,
)


class ConfigError(Exception):
    """Invalid experiment configuration; the message carries a line number when known."""


# ---------------------------------------------------------------- parameters


@dataclass(frozen=True)
class Param:
    type: Callable
    default: Any
    help: str = ""


def _fock(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(v) for v in str(text).replace(",", " ").split()]


COMMON = {
    "n_max": Param(int, 3, "Fock cutoff per site"),
}

EXPERIMENTS: dict[str, dict[str, Param]] = {
    "spectrum": {
        "N": Param(int, 3, "photon number"),
        "n_slices": Param(int, 101, "number of ramp slices"),
        "stagger": Param(str, "small", "starting stagger: large or small"),
    },
    "melt": {
        "N": Param(int, 1, "photons on the highest-energy sites (ignored with --fock)"),
        "fock": Param(_fock, None, "explicit initial occupations, e.g. 0,1,0,0,0,0,0"),
        "t_ramp": Param(float, 20.0, "ramp duration in units of 1/J"),
        "n_samples": Param(int, 21, "evenly spaced density samples"),
        "stagger": Param(str, "small", "starting stagger"),
        "preparation": Param(str, "eigenstate", "eigenstate or fock"),
    },
    "reversibility": {
        "N": Param(int, 1, "photons on the highest-energy sites (ignored with --fock)"),
        "fock": Param(_fock, None, "explicit initial occupations"),
        "t_ramp": Param(float, 20.0, "ramp duration in units of 1/J"),
        "t_hold": Param(float, 0.0, "hold at degeneracy in units of 1/J"),
        "sweep": Param(str, None, "sweep a parameter (only t_ramp)"),
        "sweep_min": Param(float, 1e-3, "smallest swept t_ramp (1/J)"),
        "sweep_max": Param(float, 1e2, "largest swept t_ramp (1/J)"),
        "sweep_points": Param(int, 20, "log-spaced sweep points"),
        "loss": Param(bool, False, "enable per-site photon loss from the lattice file"),
        "n_traj": Param(int, 200, "quantum trajectories per point with loss"),
        "stagger": Param(str, "small", "starting stagger"),
        "preparation": Param(str, "eigenstate", "eigenstate or fock"),
    },
    "fluid": {
        "N_min": Param(int, 1, "smallest photon number"),
        "N_max": Param(int, 7, "largest photon number"),
    },
    "g2": {
        "N": Param(int, 3, "photon number"),
        "hardcore": Param(bool, False, "use the hardcore (n_max = 1) model"),
    },
    "conditional": {
        "N": Param(int, 2, "photon number"),
        "hardcore": Param(bool, False, "use the hardcore (n_max = 1) model"),
    },
    "entanglement": {
        "N": Param(int, 3, "photon number of the ramp trajectory"),
        "t_ramp": Param(float, 20.0, "ramp duration in units of 1/J"),
        "n_samples": Param(int, 21, "samples per ramp direction"),
        "stagger": Param(str, "large", "starting stagger"),
    },
    "readout-demo": {
        "N": Param(int, 3, "photon number of the fluid whose densities are read out"),
        "shots": Param(int, 2000, "shots per repeat"),
        "repeats": Param(int, 10, "repeats"),
        "fidelity": Param(float, None, "uniform assignment fidelity (default: per-site device values)"),
        "confusion": Param(str, None, "JSON file with a list of per-site 2x2 matrices {\"F\": [...]}"),
    },
}


def _line_of(text: str | None, key: str) -> int | None:
    if not text:
        return None
    needle = f'"{key}"'
    for n, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return n
    return None


def _where(path, text, key) -> str:
    line = _line_of(text, key)
    return f"{path}:{line}" if line else str(path)


def _load_json(path: str | Path) -> tuple[dict, str]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}:1: top level must be a JSON object")
    return doc, text


def _convert(p: Param, value, origin: str, key: str):
    if value is None:
        return None
    if p.type is bool:
        if isinstance(value, bool):
            return value
        raise ConfigError(f"{origin}: '{key}' must be true or false")
    try:
        if p.type in (int, float) and isinstance(value, bool):
            raise TypeError
        if p.type is int and isinstance(value, float) and not value.is_integer():
            raise TypeError
        return p.type(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{origin}: '{key}' has invalid value {value!r}") from None


@dataclass
class RunContext:
    experiment: str
    params: dict[str, Any]
    config: LatticeConfig
    lattice_doc: dict
    seed: int
    threads: int
    out: Path
    outputs: list[Path]

    def map(self, fn, items):
        """Ordered map, parallel across ``threads`` workers."""
        items = list(items)
        if self.threads <= 1 or len(items) <= 1:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            return list(pool.map(fn, items))

    def csv(self, name: str, header, rows) -> None:
        self.outputs.append(write_csv(self.out / name, header, rows))

    def json(self, name: str, obj) -> None:
        self.outputs.append(write_json(self.out / name, obj))


def resolve(args: argparse.Namespace) -> RunContext:
    """Merge defaults, config file and overrides; validate before any computation."""
    experiment = args.experiment
    spec = {**COMMON, **EXPERIMENTS[experiment]}
    doc, text, cfg_path = {}, None, args.config
    if cfg_path:
        doc, text = _load_json(cfg_path)
        # a manifest.json is itself a valid config
        unknown = set(doc) - {"experiment", "lattice", "parameters", "output_dir", "seed", "tool", "version", "outputs"}
        for key in sorted(unknown):
            raise ConfigError(f"{_where(cfg_path, text, key)}: unknown key '{key}'")
        if "experiment" in doc and doc["experiment"] != experiment:
            raise ConfigError(
                f"{_where(cfg_path, text, 'experiment')}: config is for '{doc['experiment']}', not '{experiment}'"
            )

    params = {k: p.default for k, p in spec.items()}
    file_params = doc.get("parameters", {})
    if not isinstance(file_params, dict):
        raise ConfigError(f"{_where(cfg_path, text, 'parameters')}: 'parameters' must be an object")
    for key, value in file_params.items():
        if key not in spec:
            raise ConfigError(f"{_where(cfg_path, text, key)}: unknown parameter '{key}' for {experiment}")
        params[key] = _convert(spec[key], value, _where(cfg_path, text, key), key)
    for key, p in spec.items():
        v = getattr(args, key, None)
        if v is not None:
            params[key] = _convert(p, v, f"--{key.replace('_', '-')}", key)

    # lattice: --lattice beats the config entry, which may be a path or inline
    lat = args.lattice if args.lattice is not None else doc.get("lattice")
    if lat is None:
        lat_doc = json.loads(resources.files("bhfluid.data").joinpath("device.json").read_text())
        origin = "bundled device.json"
    elif isinstance(lat, dict):
        lat_doc, origin = lat, _where(cfg_path, text, "lattice")
    else:
        lat_path = Path(lat)
        if cfg_path and not lat_path.is_absolute() and args.lattice is None:
            lat_path = Path(cfg_path).parent / lat_path
        lat_doc, lat_text = _load_json(lat_path)
        origin = str(lat_path)
    try:
        config = config_from_dict(lat_doc)
    except (ParameterError, TypeError, ValueError) as exc:
        raise ConfigError(f"{origin}: {exc}") from None

    seed = args.seed if args.seed is not None else doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError(f"{_where(cfg_path, text, 'seed')}: seed must be an integer in [0, 2^64)")
    out = args.out if args.out is not None else doc.get("output_dir", f"out/{experiment}")
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    _validate(experiment, params, config)
    return RunContext(experiment, params, config, lat_doc, int(seed), args.threads, Path(out), [])


def _validate(experiment: str, p: dict, config: LatticeConfig) -> None:
    L = config.L

    def need(cond, msg):
        if not cond:
            raise ConfigError(f"{experiment}: {msg}")

    need(p["n_max"] >= 1, "n_max must be >= 1")
    if "N" in p:
        need(0 <= p["N"] <= L, f"N must lie in 0..{L}")
    if p.get("fock") is not None:
        need(len(p["fock"]) == L and min(p["fock"]) >= 0, f"fock needs {L} non-negative entries")
    if "stagger" in p:
        need(p["stagger"] in ("large", "small"), "stagger must be 'large' or 'small'")
        prof = config.delta_large if p["stagger"] == "large" else config.delta_small
        need(prof is not None, f"the lattice defines no {p['stagger']} stagger")
    if "preparation" in p:
        need(p["preparation"] in ("eigenstate", "fock"), "preparation must be 'eigenstate' or 'fock'")
    for key in ("t_ramp", "sweep_min", "sweep_max"):
        if key in p:
            need(p[key] > 0, f"{key} must be positive")
    if "t_hold" in p:
        need(p["t_hold"] >= 0, "t_hold must be >= 0")
    for key in ("n_slices", "n_samples", "sweep_points"):
        if key in p:
            need(p[key] >= 2, f"{key} must be >= 2")
    if experiment == "reversibility":
        need(p["sweep"] in (None, "t_ramp"), "only t_ramp can be swept")
        need(p["sweep_min"] < p["sweep_max"], "sweep_min must be below sweep_max")
        need(p["n_traj"] >= 1, "n_traj must be >= 1")
        need(not p["loss"] or config.gamma1 is not None, "loss requested but the lattice has no gamma1")
        if p["fock"] is None:
            need(p["N"] >= 1, "N must be >= 1")
    if experiment == "fluid":
        need(0 <= p["N_min"] <= p["N_max"] <= L, f"need 0 <= N_min <= N_max <= {L}")
    if experiment in ("g2", "conditional", "entanglement", "readout-demo"):
        need(p["N"] >= 1, "N must be >= 1")
    if experiment == "readout-demo":
        need(p["shots"] >= 1, "shots must be >= 1")
        need(p["repeats"] >= 2, "repeats must be >= 2")
        if p["fidelity"] is not None:
            need(0.5 < p["fidelity"] <= 1.0, "fidelity must lie in (0.5, 1]")


# ---------------------------------------------------------------- experiments


def _initial_fock(ctx: RunContext) -> tuple[int, ...]:
    p = ctx.params
    if p.get("fock") is not None:
        return tuple(p["fock"])
    return top_sites(ctx.config.stagger(p["stagger"]), p["N"])


def run_spectrum(ctx: RunContext) -> dict:
    p, config = ctx.params, ctx.config
    fock = top_sites(config.stagger(p["stagger"]), p["N"])
    track = track_eigenstate(config, p["stagger"], fock, n_slices=p["n_slices"], n_max=p["n_max"])
    rows = []
    for sl, vec in zip(track.spectra, track.vectors):
        ov = np.abs(sl.eigenvectors.conj().T @ vec.amplitudes) ** 2
        for k, (e, o) in enumerate(zip(sl.eigenvalues, ov)):
            rows.append((sl.ramp_parameter, k, e, o))
    ctx.csv("spectrum.csv", ["s", "index", "energy_rad_per_us", "overlap_with_tracked"], rows)
    gaps = track.gaps()
    return {"initial_fock": list(fock), "tracked_final_energy": track.slices[-1].energy, "min_gap": float(np.min(gaps))}


def run_melt(ctx: RunContext) -> dict:
    p, config = ctx.params, ctx.config
    fock = _initial_fock(ctx)
    t_ramp = in_tunnelling_times(p["t_ramp"], config)
    times = np.linspace(0.0, t_ramp, p["n_samples"])
    records = melt(fock, config, t_ramp, times, p["stagger"], p["n_max"], preparation=p["preparation"])
    rows = [(t, i, n) for t, st in records for i, n in enumerate(density(st))]
    ctx.csv("density.csv", ["t_us", "site", "n"], rows)
    sched = melt_schedule(config, t_ramp, p["stagger"])
    ctx.csv(
        "schedule.csv",
        ["t_us", "site", "delta_rad_per_us"],
        [(t, i, d) for t in times for i, d in enumerate(disorder_at(sched, t))],
    )
    return {"initial_fock": list(fock), "t_ramp_us": t_ramp, "final_density": density(records[-1][1])}


def run_reversibility(ctx: RunContext) -> dict:
    p, config = ctx.params, ctx.config
    fock = _initial_fock(ctx)
    if p["sweep"] == "t_ramp":
        points = np.geomspace(p["sweep_min"], p["sweep_max"], p["sweep_points"])
    else:
        points = np.array([p["t_ramp"]])
    gamma = config.gamma1 if p["loss"] else None
    t_hold = in_tunnelling_times(p["t_hold"], config)
    # trajectory seeds depend on the point index only, never on scheduling
    seeds = np.random.SeedSequence(ctx.seed).generate_state(points.size, dtype=np.uint64)

    def one(k):
        t = in_tunnelling_times(points[k], config)
        return reversibility(
            fock, config, t, t_hold, p["stagger"], p["n_max"],
            preparation=p["preparation"], gamma1=gamma, n_traj=p["n_traj"], seed=int(seeds[k]),
        )

    results = ctx.map(one, range(points.size))
    ctx.csv(
        "reversibility.csv",
        ["t_ramp_J", "t_ramp_us", "fidelity", "occupation_product", "norm"],
        [(x, r.t_ramp, r.fidelity, r.occupation_product, r.norm) for x, r in zip(points, results)],
    )
    return {"initial_fock": list(fock), "fidelity": [r.fidelity for r in results]}


def run_fluid(ctx: RunContext) -> dict:
    p, config = ctx.params, ctx.config
    Ns = list(range(p["N_min"], p["N_max"] + 1))
    states = ctx.map(lambda N: fluid_ground_state(config, N, p["n_max"]), Ns)
    rows = []
    for N, st in zip(Ns, states):
        ff = free_fermion_density(config.L, N)
        rows.extend((N, i, n, f) for i, (n, f) in enumerate(zip(density(st), ff)))
    ctx.csv("fluid_density.csv", ["N", "site", "n", "n_free_fermion"], rows)
    return {"N": Ns}


def _fluid(ctx: RunContext):
    p = ctx.params
    return fluid_ground_state(ctx.config, p["N"], 1 if p["hardcore"] else p["n_max"])


def run_g2(ctx: RunContext) -> dict:
    p, L = ctx.params, ctx.config.L
    g2 = pair_correlation(_fluid(ctx))
    nbar = p["N"] / L
    ff = free_fermion_g2(L, p["N"])
    ctx.csv(
        "g2.csv",
        ["x", "g2", "x_rescaled", "g2_free_fermion"],
        [(x, g, xr, f) for x, (g, xr, f) in enumerate(zip(g2, rescaled_separation(L, nbar), ff))],
    )
    out: dict[str, Any] = {"nbar": nbar}
    try:
        fit = friedel_fit(g2, nbar)
        out["friedel"] = {"k": fit.k, "k_over_kF": fit.k / (np.pi * nbar), "amplitude": fit.amplitude,
                          "residual": fit.residual, "oscillating": fit.oscillating}
    except FitError as exc:
        out["friedel"] = {"error": str(exc)}
    return out


def run_conditional(ctx: RunContext) -> dict:
    P = conditional_probability(_fluid(ctx))
    L = P.shape[0]
    ctx.csv("pij.csv", ["i", "j", "p"], [(i, j, P[i, j]) for j in range(L) for i in range(L)])
    return {"max_diagonal": float(np.max(np.diag(P)))}


def run_entanglement(ctx: RunContext) -> dict:
    p, config = ctx.params, ctx.config
    fock = top_sites(config.stagger(p["stagger"]), p["N"])
    t_ramp = in_tunnelling_times(p["t_ramp"], config)
    sched = boomerang_schedule(config, t_ramp, 0.0, p["stagger"])
    fwd = np.linspace(0.0, t_ramp, p["n_samples"])
    times = sorted(set(fwd) | set(2.0 * t_ramp - fwd))
    psi0 = prepare_state(fock, config, p["stagger"], p["n_max"])
    records, _ = evolve_sampled(psi0, sched, config, times, PropagatorSettings())
    egl = {t: global_entanglement(st) for t, st in records}
    s = ramp_shape(fwd, t_ramp, TAU_FRACTION * t_ramp)
    ctx.csv(
        "egl.csv",
        ["s", "egl", "egl_reverse"],
        [(sv, egl[t], egl[2.0 * t_ramp - t]) for sv, t in zip(s, fwd)],
    )

    def filling(N):
        return (
            global_entanglement(fluid_ground_state(config, N, 1)),
            global_entanglement(fluid_ground_state(config, N, p["n_max"])),
        )

    Ns = list(range(config.L + 1))
    vals = ctx.map(filling, Ns)
    ctx.csv("egl_filling.csv", ["N", "egl_hardcore", "egl_full"], [(N, a, b) for N, (a, b) in zip(Ns, vals)])
    return {"initial_fock": list(fock), "egl_degeneracy": egl[t_ramp], "egl_return": egl[2.0 * t_ramp]}


def _confusions(ctx: RunContext) -> list[ConfusionMatrix]:
    p, L = ctx.params, ctx.config.L
    if p["confusion"] is not None:
        doc, text = _load_json(p["confusion"])
        mats = doc.get("F")
        if not isinstance(mats, list) or len(mats) != L:
            raise ConfigError(f"{_where(p['confusion'], text, 'F')}: 'F' must list {L} 2x2 matrices")
        try:
            return [ConfusionMatrix(m) for m in mats]
        except ParameterError as exc:
            raise ConfigError(f"{_where(p['confusion'], text, 'F')}: {exc}") from None
    if p["fidelity"] is not None:
        return [ConfusionMatrix.from_fidelity(p["fidelity"])] * L
    doc = json.loads(resources.files("bhfluid.data").joinpath("device.json").read_text())
    fids = doc.get("readout_fidelity_ge")
    if fids is None or len(fids) != L:
        return [ConfusionMatrix.identity()] * L
    return [ConfusionMatrix.from_fidelity(f) for f in fids]


def run_readout_demo(ctx: RunContext) -> dict:
    p = ctx.params
    confusion = _confusions(ctx)
    psi = fluid_ground_state(ctx.config, p["N"], p["n_max"])
    p_exc = np.array([site_outcomes(psi, i)[1] for i in range(ctx.config.L)])
    est = estimate_densities(p_exc, confusion, p["shots"], p["repeats"], ctx.seed)
    rows = []
    for r in range(p["repeats"]):
        for i in range(ctx.config.L):
            for b in (0, 1):
                rows.append((r, f"{i}:{b}", est.counts[r, i, b]))
    ctx.csv("readout.csv", ["repeat", "outcome", "count"], rows)
    ctx.csv(
        "readout_density.csv",
        ["site", "p_excited", "mean", "sem"],
        [(i, a, m, s) for i, (a, m, s) in enumerate(zip(p_exc, est.mean, est.sem))],
    )
    return {"confusion": [c.F for c in confusion]}


RUNNERS = {
    "spectrum": run_spectrum,
    "melt": run_melt,
    "reversibility": run_reversibility,
    "fluid": run_fluid,
    "g2": run_g2,
    "conditional": run_conditional,
    "entanglement": run_entanglement,
    "readout-demo": run_readout_demo,
}


# ---------------------------------------------------------------- entry point


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def execute(ctx: RunContext) -> Path:
    ctx.out.mkdir(parents=True, exist_ok=True)
    summary = RUNNERS[ctx.experiment](ctx)
    ctx.json("summary.json", summary)
    manifest = {
        "tool": "bhfluid",
        "version": __version__,
        "experiment": ctx.experiment,
        "parameters": ctx.params,
        "seed": ctx.seed,
        "lattice": ctx.lattice_doc,
        "outputs": {p.name: _sha256(p) for p in ctx.outputs},
    }
    return write_json(ctx.out / "manifest.json", manifest)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bhfluid", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment")
    exps = run.add_subparsers(dest="experiment", required=True)
    for name, spec in EXPERIMENTS.items():
        ep = exps.add_parser(name)
        ep.add_argument("--config", help="experiment config JSON")
        ep.add_argument("--lattice", help="lattice/device JSON (default: bundled device)")
        ep.add_argument("--seed", type=int, help="random seed (default 0)")
        ep.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
        ep.add_argument("--out", help="output directory")
        for key, p in {**COMMON, **spec}.items():
            flag = "--" + key.replace("_", "-")
            if p.type is bool:
                ep.add_argument(flag, dest=key, action="store_true", default=None, help=p.help)
            else:
                ep.add_argument(flag, dest=key, default=None, help=f"{p.help} (default {p.default})")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        ctx = resolve(args)
    except (ConfigError, ParameterError, LookupFailure) as exc:
        print(f"bhfluid: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        manifest = execute(ctx)
    except (ConfigError, ParameterError, LookupFailure) as exc:
        print(f"bhfluid: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PHYSICS_ERRORS as exc:
        where = f" at t={exc.t:.6g} us" if getattr(exc, "t", None) is not None else ""
        print(f"bhfluid: {ctx.experiment} failed{where}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    print(manifest)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
