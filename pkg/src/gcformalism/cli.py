"""Batch driver: ``gcf <subcommand> --config run.yaml --out results/``.

Exit codes: 0 success, 1 configuration error, 2 mathematical failure
(divergence, inadmissibility, failed identity), 3 inconclusive diagnostics.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from . import grandstats as gs
from . import potentials as pot
from . import thermo
from . import transfer as tr
from .symbolic import CylinderFunction, index_to_symbols

log = logging.getLogger("gcformalism")

EXIT_OK, EXIT_CONFIG, EXIT_MATH, EXIT_INCONCLUSIVE = 0, 1, 2, 3

DEFAULT_TOLERANCES = {
    "tol": 1e-10,
    "eps": 1e-12,
    "entropy_tol": 1e-3,
    "fd_step": 1e-4,
    "max_iter": 100_000,
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    raw: dict
    r: int
    depth: int
    betas: list
    mus: list
    tolerances: dict
    seed: int
    out: Path
    threads: int
    family_spec: dict = field(default_factory=dict)

    @property
    def beta(self) -> float:
        return self.betas[0]

    @property
    def mu(self) -> float:
        return self.mus[0]

    def section(self, name: str) -> dict:
        sec = self.raw.get(name) or {}
        if not isinstance(sec, dict):
            raise ConfigError(f"section '{name}' must be a mapping")
        return sec

    def echo(self) -> dict:
        return {
            "config": self.raw,
            "r": self.r,
            "depth": self.depth,
            "betas": self.betas,
            "mus": self.mus,
            "tolerances": self.tolerances,
            "seed": self.seed,
        }


def _grid(raw: dict, single: str, multi: str) -> list:
    if multi in raw:
        vals = raw[multi]
        if isinstance(vals, dict):
            vals = np.linspace(vals["start"], vals["stop"], int(vals["num"])).tolist()
        return [float(v) for v in vals]
    if single in raw:
        return [float(raw[single])]
    raise ConfigError(f"config needs '{single}' or '{multi}'")


def load_config(path: str | os.PathLike, *, out: str | None = None, threads: int | None = None,
                seed: int | None = None, require_family: bool = True) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    r = int(raw.get("r", 2))
    depth = int(raw.get("depth", 1))
    if r < 2:
        raise ConfigError("r must be >= 2")
    if depth < 1:
        raise ConfigError("depth must be >= 1")
    betas = _grid(raw, "beta", "betas") if ("beta" in raw or "betas" in raw) else [1.0]
    mus = _grid(raw, "mu", "mus") if ("mu" in raw or "mus" in raw) else [-1.0]
    if any(b <= 0 for b in betas):
        raise ConfigError("beta must be positive")
    if "mus" not in raw and any(m >= 0 for m in mus):
        raise ConfigError("chemical potential mu must be negative")
    tolerances = dict(DEFAULT_TOLERANCES)
    tolerances.update(raw.get("tolerances") or {})
    tolerances = {k: (int(v) if k == "max_iter" else float(v)) for k, v in tolerances.items()}
    seed = int(seed if seed is not None else raw.get("seed", 0))
    out_dir = out or os.environ.get("GCF_OUT") or (raw.get("output") or {}).get("dir") or "."
    n_threads = threads or int(os.environ.get("GCF_THREADS", 0) or 0) or (os.cpu_count() or 1)
    family = raw.get("family") or {}
    if require_family and not family:
        raise ConfigError("config needs a 'family' section")
    return ExperimentConfig(raw, r, depth, betas, mus, tolerances, seed, Path(out_dir),
                            n_threads, family)


def _observable(spec, r: int):
    if isinstance(spec, (int, float)):
        return float(spec)
    values = np.asarray(spec, dtype=float).reshape(-1)
    d = round(math.log(values.size, r)) if values.size > 1 else 0
    if r**d != values.size:
        raise ConfigError(f"observable table of length {values.size} is not a power of r={r}")
    return CylinderFunction(values, r, d)


def build_family(spec: dict, r: int) -> pot.PotentialFamily:
    kind = spec.get("kind")
    declared = {k: float(spec[k]) for k in ("M", "Kprime", "delta") if k in spec}
    try:
        if kind == "constant":
            return pot.constant(float(spec.get("c", 0.0)), r, **declared)
        E = _observable(spec.get("E", 0.0), r)
        if kind == "per_particle":
            return pot.per_particle(E, r, **declared)
        if kind == "shared":
            return pot.shared(E, r, **declared)
        if kind == "affine":
            return pot.affine(float(spec.get("a", 0.0)), float(spec.get("b", 0.0)), E, r,
                              **declared)
        if kind == "adversarial":
            # A_N(w) = N * scale * w_1: Lipschitz constants grow with N
            scale = float(spec.get("scale", 1.0))
            return pot.PotentialFamily(
                lambda N, words: N * scale * words[:, 0].astype(float), r,
                declared.get("M", 2.0 * scale), declared.get("Kprime", 0.0),
                declared.get("delta", 0.0), label="adversarial", monotone=True)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown family kind {kind!r}")


# ---------------------------------------------------------------------------
# output helpers

def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_clean(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_csv(path: Path, header: list, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                        for v in row])


def record(cfg: ExperimentConfig, command: str, results: dict) -> dict:
    return {
        "command": command,
        "version": __version__,
        "echo": cfg.echo(),
        "results": results,
    }


def _word_label(i: int, r: int, depth: int) -> str:
    return "".join(str(s) for s in index_to_symbols(i, r, depth))


# ---------------------------------------------------------------------------
# subcommands

def cmd_admissibility(cfg: ExperimentConfig) -> int:
    fam = build_family(cfg.family_spec, cfg.r)
    n_max = int(cfg.section("admissibility").get("n_max", 40))
    report = pot.admissibility_report(fam, cfg.beta, cfg.mu, cfg.depth, n_max)
    write_json(cfg.out / "admissibility.json", record(cfg, "admissibility", report.to_dict()))
    return {"pass": EXIT_OK, "fail": EXIT_MATH, "inconclusive": EXIT_INCONCLUSIVE}[report.overall]


def _solve(cfg: ExperimentConfig, fam: pot.PotentialFamily):
    t = cfg.tolerances
    weights = pot.finite_weights(fam, cfg.beta, cfg.mu, cfg.depth, t["eps"])
    T = tr.assemble_grand(weights)
    sol = tr.power_iterate(T, tol=t["tol"], max_iter=t["max_iter"])
    return weights, T, sol


def cmd_spectrum(cfg: ExperimentConfig) -> int:
    fam = build_family(cfg.family_spec, cfg.r)
    weights, T, sol = _solve(cfg, fam)
    results = sol.summary()
    results.update(n_max=weights.n_max, tail_bound=weights.tail_bound,
                   dual_lambda=tr.dual_eigen_lambda(T, sol.nu, tol=1e3 * cfg.tolerances["tol"]))
    write_json(cfg.out / "spectrum.json", record(cfg, "spectrum", results))
    write_csv(cfg.out / "spectrum_tables.csv", ["index", "word", "h", "nu"],
              ([i, _word_label(i, cfg.r, cfg.depth), sol.h.values[i], sol.nu.weights[i]]
               for i in range(T.size)))
    return EXIT_OK


def cmd_pressure(cfg: ExperimentConfig) -> int:
    fam = build_family(cfg.family_spec, cfg.r)
    sec = cfg.section("pressure")
    weights, T, sol = _solve(cfg, fam)
    m = thermo.equilibrium_holonomic(sol, T)
    classical = []
    if "classical_N" in sec:
        classical = thermo.classical_table(fam, sec["classical_N"], cfg.betas, cfg.depth,
                                           cfg.tolerances["tol"])
    rep = thermo.grand_pressure(sol, weights, m, cfg.tolerances["entropy_tol"], seed=cfg.seed,
                                restarts=int(sec.get("restarts", 5)), classical=classical)
    n = int(sec.get("n", 50))
    word = int(sec.get("word_index", 0))
    seq = tr.partition_iterate(T, n, word)
    results = rep.to_dict()
    results.update(lambda_=sol.lam, holonomy_renormalisation=m.renormalisation,
                   partition_final=float(seq.averages[-1]))
    write_json(cfg.out / "pressure.json", record(cfg, "pressure", results))
    write_csv(cfg.out / "partition_sequence.csv", ["n", "log_Z_over_n"],
              zip(seq.n.tolist(), seq.averages))
    return EXIT_OK if rep.success else EXIT_MATH


def cmd_sweep(cfg: ExperimentConfig) -> int:
    fam = build_family(cfg.family_spec, cfg.r)
    t = cfg.tolerances
    res = thermo.analyticity_sweep(fam, cfg.betas, cfg.mus, cfg.depth, t["eps"], t["tol"],
                                   threads=cfg.threads)
    rows = list(res.rows())
    header = ["beta", "mu", "status", "lambda", "log_lambda", "gap_estimate",
              "d_beta", "d2_beta", "d_mu", "d2_mu"]
    write_csv(cfg.out / "sweep.csv", header, ([row[h] for h in header] for row in rows))
    counts = {}
    for row in rows:
        counts[row["status"]] = counts.get(row["status"], 0) + 1
    write_json(cfg.out / "sweep.json", record(cfg, "sweep", {"status_counts": counts,
                                                            "nodes": rows}))
    return EXIT_OK if "ok" in counts else EXIT_MATH


def build_ensemble(cfg: ExperimentConfig) -> gs.GrandCanonicalEnsemble:
    sec = cfg.section("grandstats")
    spec = sec.get("energy") or {"kind": "per_particle", "E": 1.0}
    kind = spec.get("kind", "per_particle")
    eps = cfg.tolerances["eps"]
    V = float(sec.get("V", 1.0))
    if sec.get("si"):
        k_B = gs.BOLTZMANN_SI
        if "T" not in sec:
            raise ConfigError("SI mode needs a temperature T in kelvin")
        beta = 1.0 / (k_B * float(sec["T"]))
    else:
        k_B = float(sec.get("k_B", 1.0))
        beta = cfg.beta
    mu = float(sec.get("mu", cfg.mu))
    if mu >= 0:
        raise ConfigError("chemical potential mu must be negative")
    if kind == "per_particle":
        E = float(spec.get("E", 1.0))
        A, Kp, dl = (lambda N: N * E), E, 0.0
    elif kind == "constant":
        c = float(spec.get("c", 0.0))
        A, Kp, dl = (lambda N: np.full(np.shape(N), c)), 0.0, c
    elif kind == "affine":
        a, b = float(spec.get("a", 0.0)), float(spec.get("b", 0.0))
        A, Kp, dl = (lambda N: a * N + b), a, b
    elif kind == "shared":
        E = float(spec.get("E", 1.0))
        A, Kp, dl = (lambda N: E / (np.asarray(N) + 1.0)), 0.0, min(E, 0.0)
    else:
        raise ConfigError(f"unknown energy kind {kind!r}")
    try:
        return gs.GrandCanonicalEnsemble(beta, mu, A, float(spec.get("Kprime", Kp)),
                                         float(spec.get("delta", dl)), eps, V, k_B, kind)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_grandstats(cfg: ExperimentConfig) -> int:
    e = build_ensemble(cfg)
    step = float(cfg.section("grandstats").get("fd_step", cfg.tolerances["fd_step"]))
    if e.k_B != 1.0:
        step = step * e.beta
    P = gs.particle_distribution(e)
    Z = gs.grand_partition(e)
    mean_N, mean_A = gs.moments(e)
    results = {
        "beta": e.beta, "mu": e.mu, "V": e.V, "k_B": e.k_B, "temperature": e.temperature,
        "n_max": e.n_max, "Z": Z, "log_Z": math.log(Z), "mean_N": mean_N, "mean_A": mean_A,
        "gas_pressure": gs.gas_pressure(e), "pressure_units": "Pa" if e.k_B != 1.0 else "reduced",
        "P_sum": math.fsum(P),
    }
    if e.k_B == 1.0:
        d = gs.log_partition_derivatives(e, step)
        results.update(d_beta_fd=d.d_beta_fd, d_beta_expect=d.d_beta_expect, gap_beta=d.gap_beta,
                       d_mu_fd=d.d_mu_fd, d_mu_expect=d.d_mu_expect, gap_mu=d.gap_mu)
    write_json(cfg.out / "grandstats.json", record(cfg, "grandstats", results))
    write_csv(cfg.out / "particle_distribution.csv", ["N", "P_N"], enumerate(P))
    return EXIT_OK


def cmd_maxent(cfg: ExperimentConfig) -> int:
    sec = cfg.section("maxent")
    if "A" not in sec or "alpha" not in sec:
        raise ConfigError("maxent section needs 'A' and 'alpha'")
    c = gs.FiniteCanonical(sec["A"], float(sec.get("beta", cfg.beta)))
    results = {"canonical": gs.canonical_distribution(c).tolist(),
               "log_Z": gs.canonical_log_partition(c)}
    if c.beta > 0:
        fe = gs.free_energy_check(c, gs.canonical_distribution(c))
        results.update(free_energy=fe.value, minus_log_Z_over_beta=fe.minus_log_Z_over_beta,
                       free_energy_grid_gap=fe.minimality_gap)
    try:
        p, beta = gs.maxent_solve(c, float(sec["alpha"]))
    except gs.InfeasibleConstraint as exc:
        results["maxent"] = {"error": str(exc)}
        write_json(cfg.out / "maxent.json", record(cfg, "maxent", results))
        return EXIT_MATH
    results["maxent"] = {"p": p.tolist(), "beta": beta, "entropy": gs.shannon_entropy(p),
                         "mean": float(np.dot(p, c.energies))}
    write_json(cfg.out / "maxent.json", record(cfg, "maxent", results))
    return EXIT_OK


COMMANDS = {
    "admissibility": (cmd_admissibility, True),
    "spectrum": (cmd_spectrum, True),
    "pressure": (cmd_pressure, True),
    "sweep": (cmd_sweep, True),
    "grandstats": (cmd_grandstats, False),
    "maxent": (cmd_maxent, False),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gcf", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    func, needs_family = COMMANDS[args.command]
    start = time.perf_counter()
    try:
        cfg = load_config(args.config, out=args.out, threads=args.threads, seed=args.seed,
                          require_family=needs_family)
        code = func(cfg)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except (pot.AdmissibilityError, pot.OverflowDiagnostic, tr.ConvergenceError,
            tr.BudgetError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_MATH
    elapsed = time.perf_counter() - start
    # wall time lives in a sidecar so the result files stay byte-identical across reruns
    write_json(cfg.out / f"{args.command}.timing.json",
               {"command": args.command, "exit_code": code, "wall_time_s": elapsed})
    log.info("%s finished in %.3fs with exit code %d", args.command, elapsed, code)
    return code


if __name__ == "__main__":
    sys.exit(main())
