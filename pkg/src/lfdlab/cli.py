"""Command-line front end: config-driven batch runs with CSV outputs.

Subcommands: equilibrium (tabulate FD statistics over an epsilon list),
functionals (constants bundle + entropies of one family state), verify
(inequality suite -> CSV + summary), evolve (trajectory CSV + decay fit).
Exit codes: 0 success, 1 failed checks or runtime errors, 2 config errors.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np
import yaml

from .constants import constants_bundle
from .equilibria import SaturationError, solve_fd_statistics
from .functionals import boltzmann_entropy, fd_entropy, weighted_moment
from .grid import DegenerateDispersionError, build_grid
from .harness import (
    CHECKS,
    DEFAULT_TOL,
    TestStateFamily,
    run_suite,
    summarize,
    write_reports_csv,
)
from .production import entropy_production_projection
from .solver import SolverConfig, dt_auto, evolve, fit_decay_rate

THREADS_ENV = "LFDLAB_THREADS"


class ConfigError(Exception):
    """Invalid configuration; maps to exit code 2."""


# --- config parsing ---------------------------------------------------------
#
# The config document is YAML restricted to nested mappings of scalars and
# lists.  Duplicate keys are an error naming both occurrences, and every key
# is validated against the subcommand schema with its line number.


class _TrackedDict(dict):
    """Mapping that remembers the source line of each key."""

    def __init__(self):
        super().__init__()
        self.key_lines: dict = {}


class _Loader(yaml.SafeLoader):
    pass


def _construct_mapping(loader, node):
    mapping = _TrackedDict()
    for key_node, value_node in node.value:
        key = loader.construct_object(key_node, deep=True)
        line = key_node.start_mark.line + 1
        if key in mapping:
            raise ConfigError(
                f"duplicate key {key!r}: first at line "
                f"{mapping.key_lines[key]}, again at line {line}")
        mapping.key_lines[key] = line
        mapping[key] = loader.construct_object(value_node, deep=True)
    return mapping


_Loader.add_constructor(
    yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


def _load_document(text: str) -> _TrackedDict:
    try:
        doc = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config parse error: {exc}") from exc
    if doc is None:
        doc = _TrackedDict()
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a mapping")
    return doc


# allowed keys per section; None marks a nested section
_GRID_KEYS = {"n", "extent"}
_SOLVER_KEYS = {"dt", "t_end", "record_every", "clip",
                "conservation_projection", "method"}
_FAMILY_KEYS = {"seed", "n_random", "kappa_target"}
_SCHEMAS = {
    "equilibrium": {"grid": _GRID_KEYS, "epsilon": None, "output": None},
    "functionals": {"grid": _GRID_KEYS, "epsilon": None, "gamma": None,
                    "state": None, "output": None},
    "verify": {"grid": _GRID_KEYS, "epsilon": None, "gamma": None,
               "checks": None, "family": _FAMILY_KEYS, "tol": None,
               "reduction": None, "output": None},
    "evolve": {"grid": _GRID_KEYS, "epsilon": None, "gamma": None,
               "state": None, "family": _FAMILY_KEYS, "solver": _SOLVER_KEYS,
               "fit_t0": None, "output": None},
}


def _line_of(doc, key) -> str:
    line = getattr(doc, "key_lines", {}).get(key)
    return f" (line {line})" if line is not None else ""


def _validate_keys(doc: dict, subcommand: str) -> None:
    schema = _SCHEMAS[subcommand]
    for key in doc:
        if key not in schema:
            raise ConfigError(
                f"unknown key {key!r} for subcommand {subcommand!r}"
                f"{_line_of(doc, key)}")
        allowed = schema[key]
        if allowed is not None:
            section = doc[key]
            if not isinstance(section, dict):
                raise ConfigError(
                    f"key {key!r} must be a mapping{_line_of(doc, key)}")
            for sub in section:
                if sub not in allowed:
                    raise ConfigError(
                        f"unknown key {key!r}.{sub!r}"
                        f"{_line_of(section, sub)}")


def _as_list(value, name) -> list[float]:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return [float(value)]
    if isinstance(value, list) and value and all(
            isinstance(v, (int, float)) and not isinstance(v, bool)
            for v in value):
        return [float(v) for v in value]
    raise ConfigError(f"{name} must be a number or a nonempty number list")


def _validate_gamma(values: list[float]) -> list[float]:
    for g in values:
        if g <= -4.0:
            raise ConfigError(f"gamma {g:g} <= -4 unsupported")
    return values


def _validate_epsilon(values: list[float]) -> list[float]:
    for e in values:
        if e < 0.0:
            raise ConfigError(f"epsilon {e:g} must be nonnegative")
    return values


def _build_grid(doc: dict, args):
    section = doc.get("grid", {})
    n = args.n if args.n is not None else section.get("n", 16)
    extent = args.extent if args.extent is not None \
        else section.get("extent", 6.0)
    if not isinstance(n, int) or isinstance(n, bool) or n < 4:
        raise ConfigError(f"grid.n must be an integer >= 4, got {n!r}")
    if not isinstance(extent, (int, float)) or extent <= 0:
        raise ConfigError(f"grid.extent must be positive, got {extent!r}")
    return build_grid(n, float(extent))


def _output_path(doc: dict, args, default: str) -> str:
    if args.output is not None:
        return args.output
    return str(doc.get("output", default))


def _family(grid, doc: dict, args) -> TestStateFamily:
    section = doc.get("family", {})
    seed = args.seed if args.seed is not None else section.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError(f"family.seed must be an integer, got {seed!r}")
    n_random = section.get("n_random", 0)
    if not isinstance(n_random, int) or isinstance(n_random, bool) \
            or n_random < 0:
        raise ConfigError("family.n_random must be a nonnegative integer")
    kwargs = {}
    if "kappa_target" in section:
        kwargs["kappa_target"] = float(section["kappa_target"])
    return TestStateFamily(grid, seed=seed, n_random=n_random, **kwargs)


def _write_rows(path: str, header: tuple, rows: list) -> None:
    def fmt(x):
        if isinstance(x, float):
            return f"{x:.17g}"
        return x

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(x) for x in row])


# --- subcommands ------------------------------------------------------------


def _run_equilibrium(doc: dict, args) -> int:
    grid = _build_grid(doc, args)
    epsilons = _validate_epsilon(
        _as_list(doc.get("epsilon", [0.0, 1e-3, 1e-2, 1e-1]), "epsilon"))
    out = _output_path(doc, args, "equilibrium.csv")
    rows = []
    for eps in epsilons:
        params, _ = solve_fd_statistics(grid, eps)
        rows.append((f"{eps:.17g}", params.a_eps, params.b_eps,
                     params.residual_mass, params.residual_energy,
                     params.sup_norm))
    _write_rows(out, ("epsilon", "a_eps", "b_eps", "residual_mass",
                      "residual_energy", "sup_norm"), rows)
    print(f"wrote {len(rows)} equilibria to {out}")
    return 0


def _run_functionals(doc: dict, args) -> int:
    grid = _build_grid(doc, args)
    eps = _validate_epsilon(_as_list(doc.get("epsilon", 0.0), "epsilon"))
    gamma = _validate_gamma(_as_list(doc.get("gamma", 0.0), "gamma"))
    if len(eps) != 1 or len(gamma) != 1:
        raise ConfigError("functionals expects scalar epsilon and gamma")
    name = str(doc.get("state", "fd_equilibrium"))
    family = TestStateFamily(grid)
    states = dict(family.states(eps[0]))
    if name not in states:
        raise ConfigError(
            f"unknown state {name!r}; choose from {sorted(states)}")
    g = states[name]
    bundle = constants_bundle(g, gamma[0])
    D = max(entropy_production_projection(g, gamma[0],
                                          reduction="fast").value, 0.0)
    entropy = boltzmann_entropy(g) if eps[0] == 0.0 else fd_entropy(g)
    rows = [
        ("state", name), ("gamma", gamma[0]), ("epsilon", eps[0]),
        ("mass", g.mass), ("energy", g.energy), ("kappa0", g.kappa0),
        ("sup_norm", float(np.max(g.values))),
        ("entropy", entropy), ("production", D),
        ("K", bundle.K),
        ("a_x", float(bundle.a[0])), ("a_y", float(bundle.a[1])),
        ("a_z", float(bundle.a[2])),
        ("e_gamma", bundle.e_gamma), ("A_gamma", bundle.A_gamma),
        ("B_gamma", bundle.B_gamma),
        ("I0", bundle.I0), ("I2", bundle.I2), ("script_I", bundle.script_I),
        ("lambda", bundle.lam),
        ("m_2_plus_gamma", bundle.m_2_plus_gamma),
        ("m_2", weighted_moment(g, 2.0)),
    ]
    out = _output_path(doc, args, "functionals.csv")
    _write_rows(out, ("quantity", "value"), rows)
    print(f"wrote {len(rows)} quantities to {out}")
    return 0


def _run_verify(doc: dict, args) -> int:
    grid = _build_grid(doc, args)
    gammas = _validate_gamma(
        _as_list(doc.get("gamma", [0.0, 0.5, 1.0, -0.5, -1.0]), "gamma"))
    epsilons = _validate_epsilon(
        _as_list(doc.get("epsilon", [0.0, 1e-3, 1e-2]), "epsilon"))
    checks = doc.get("checks", sorted(CHECKS))
    if not isinstance(checks, list) or not checks:
        raise ConfigError("checks must be a nonempty list")
    for name in checks:
        if name not in CHECKS:
            raise ConfigError(
                f"unknown check {name!r}; choose from {sorted(CHECKS)}")
    tol = doc.get("tol", DEFAULT_TOL)
    if not isinstance(tol, (int, float)) or tol < 0:
        raise ConfigError("tol must be a nonnegative number")
    reduction = doc.get("reduction", "fast")
    if reduction not in ("fast", "deterministic"):
        raise ConfigError("reduction must be 'fast' or 'deterministic'")
    family = _family(grid, doc, args)
    reports = run_suite(family, list(checks), gammas, epsilons,
                        tol=float(tol), reduction=reduction)
    out = _output_path(doc, args, "verify.csv")
    write_reports_csv(reports, out)
    print(summarize(reports))
    print(f"wrote {len(reports)} reports to {out}")
    return 0 if all(r.passed for r in reports) else 1


def _run_evolve(doc: dict, args) -> int:
    grid = _build_grid(doc, args)
    eps = _validate_epsilon(_as_list(doc.get("epsilon", 1e-2), "epsilon"))
    gamma = _validate_gamma(_as_list(doc.get("gamma", 1.0), "gamma"))
    if len(eps) != 1 or len(gamma) != 1:
        raise ConfigError("evolve expects scalar epsilon and gamma")
    name = str(doc.get("state", "temperature_mixture"))
    family = _family(grid, doc, args)
    states = dict(family.states(eps[0]))
    if name not in states:
        raise ConfigError(
            f"unknown state {name!r}; choose from {sorted(states)}")
    f0 = states[name]

    section = doc.get("solver", {})
    dt = section.get("dt", "auto")
    if dt != "auto" and (not isinstance(dt, (int, float)) or dt <= 0):
        raise ConfigError("solver.dt must be 'auto' or a positive number")
    t_end = section.get("t_end", 1.0)
    if not isinstance(t_end, (int, float)) or t_end <= 0:
        raise ConfigError("solver.t_end must be positive")
    record_every = section.get("record_every", 50)
    if not isinstance(record_every, int) or record_every < 1:
        raise ConfigError("solver.record_every must be a positive integer")
    cfg = SolverConfig(
        gamma=gamma[0], epsilon=eps[0], dt=dt, t_end=float(t_end),
        record_every=record_every,
        clip=bool(section.get("clip", True)),
        conservation_projection=bool(
            section.get("conservation_projection", True)),
        method=str(section.get("method", "fft")),
    )
    rec = evolve(f0, cfg)
    rows = []
    for k, t in enumerate(rec.times):
        rows.append((t, rec.entropy[k], rec.production[k], rec.h_rel[k],
                     rec.mass[k], float(rec.momentum[k][0]),
                     float(rec.momentum[k][1]), float(rec.momentum[k][2]),
                     rec.energy[k], rec.kappa0[k], rec.sup_norm[k]))
    out = _output_path(doc, args, "trajectory.csv")
    _write_rows(out, ("t", "S_eps", "D_eps", "H_rel", "mass", "px", "py",
                      "pz", "energy", "kappa0", "f_inf"), rows)
    print(f"wrote {len(rows)} records to {out} (dt = {rec.dt:.6g}, "
          f"auto bound {dt_auto(f0, gamma[0]):.6g})")
    fit_t0 = doc.get("fit_t0", 0.5)
    if not isinstance(fit_t0, (int, float)) or fit_t0 < 0:
        raise ConfigError("fit_t0 must be nonnegative")
    try:
        mu, r2 = fit_decay_rate(rec, float(fit_t0))
        print(f"decay fit from t0 = {fit_t0:g}: mu = {mu:.6g}, r^2 = {r2:.6g}")
    except ValueError as exc:
        print(f"decay fit skipped (stationary or too short): {exc}")
    for flag in rec.flags:
        print(f"flag: {flag}")
    return 0


_SUBCOMMANDS = {
    "equilibrium": _run_equilibrium,
    "functionals": _run_functionals,
    "verify": _run_verify,
    "evolve": _run_evolve,
}


def _apply_thread_env() -> None:
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return
    try:
        count = int(raw)
        if count < 1:
            raise ValueError
    except ValueError:
        raise ConfigError(
            f"{THREADS_ENV} must be a positive integer, got {raw!r}"
        ) from None
    import numba

    numba.set_num_threads(count)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lfdlab",
        description="Entropy-production laboratory for the quantum Landau "
                    "collision dynamics")
    parser.add_argument("subcommand", choices=sorted(_SUBCOMMANDS))
    parser.add_argument("--config", help="YAML config file")
    parser.add_argument("--n", type=int, help="grid nodes per axis "
                                              "(overrides config)")
    parser.add_argument("--extent", type=float,
                        help="velocity box half-width (overrides config)")
    parser.add_argument("--output", help="output CSV path (overrides config)")
    parser.add_argument("--seed", type=int,
                        help="family seed (overrides config)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _apply_thread_env()
        if args.config is not None:
            try:
                with open(args.config) as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}") from None
            doc = _load_document(text)
        else:
            doc = _TrackedDict()
        _validate_keys(doc, args.subcommand)
        return _SUBCOMMANDS[args.subcommand](doc, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, RuntimeError, SaturationError,
            DegenerateDispersionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
