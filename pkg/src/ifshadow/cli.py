"""Command line harness: ``ifshadow run``, ``ifshadow sweep`` and ``ifshadow schema``.

Exit status: 0 every verdict passed (an expected negative verdict counts as
a pass), 1 a verdict failed, 2 malformed or invalid configuration, 3 a
hypothesis precondition was violated, 4 an internal invariant broke.
"""
import argparse
import copy
import csv
import io
import json
import logging
import os
from pathlib import Path
import sys
import tempfile
import time

import jsonschema
import numpy as np

from . import __version__
from .errors import (CertificateViolation, InternalInvariantError, NotInvertibleError,
                     PreconditionError, SizeCapError, UniquenessViolation)
from .ifs_core import IFSystem, SymbolWord, expansion_constants, power_system
from .orbits import PseudoOrbit, generate_decaying_pseudo_orbit, geometric_profile
from .shadowing.checks import expansivity_search, openness_check, separation_horizon
from .shadowing.experiments import (continuity_experiment, limit_shadow_experiment, paired_ensemble,
                                    random_pseudo_orbits)
from .shadowing.oracle import brute_force_shadow, cluster_contains, clusters
from .shadowing.solver import lipschitz_shadow, shadow_batch
from .spaces import TAU

log = logging.getLogger("ifshadow")

SCHEMA_VERSION = 1
EXPERIMENTS = ("shadow", "oracle_compare", "openness", "expansivity", "separation", "limit",
               "continuity", "derived_systems")

EXIT_OK, EXIT_FAIL, EXIT_SCHEMA, EXIT_PRECONDITION, EXIT_INTERNAL = 0, 1, 2, 3, 4

_pos = {"type": "number", "exclusiveMinimum": 0}
_int = {"type": "integer"}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "ifshadow experiment",
    "type": "object",
    "required": ["experiment", "system"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "experiment": {"enum": list(EXPERIMENTS)},
        "system": {
            "type": "object",
            "required": ["space", "maps"],
            "properties": {
                "space": {
                    "type": "object",
                    "required": ["kind"],
                    "properties": {
                        "kind": {"enum": ["circle", "interval", "binary_shift", "finite_table"]},
                        "params": {"type": "object"},
                    },
                },
                "maps": {"type": "array", "minItems": 1, "items": {
                    "type": "object", "required": ["family"]}},
            },
        },
        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "window": {"type": "array", "items": _int, "minItems": 2, "maxItems": 2},
        "delta": {"type": "number", "minimum": 0},
        "profile": {
            "type": "object",
            "required": ["scale"],
            "properties": {"kind": {"const": "geometric"}, "scale": {"type": "number", "minimum": 0},
                           "ratio": {"type": "number", "minimum": 0, "maximum": 1}},
        },
        "eps": _pos,
        "alpha": _pos,
        "e": _pos,
        "candidates": {"type": "array", "items": _pos, "minItems": 1},
        "count": {"type": "integer", "minimum": 1},
        "grid": {"type": "integer", "minimum": 1},
        "horizon": {"type": "integer", "minimum": 1},
        "pair_count": {"type": "integer", "minimum": 1},
        "trial_count": {"type": "integer", "minimum": 1},
        "mode": {"enum": ["positive", "two_sided"]},
        "strong": {"type": "boolean"},
        "power": {"type": "integer", "minimum": 1},
        "expected_N": {"type": "integer", "minimum": 0},
        "expected_verdict": {"type": "boolean"},
        "envelope": {
            "type": "object",
            "properties": {"threshold": _pos, "by_index": {"type": "integer", "minimum": 0}},
        },
        "pseudo_orbit": {
            "type": "object",
            "required": ["points", "word"],
            "properties": {
                "base": _int,
                "points": {"type": "array", "minItems": 1},
                "word": {"type": "object", "required": ["word"]},
                "delta": {"type": "number", "minimum": 0},
            },
        },
        "outputs": {
            "type": "object",
            "properties": {"report": {"type": "string"}, "trace": {"type": "string"}},
        },
    },
}


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------- helpers


def atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def load_config(path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from exc
    try:
        IFSystem.from_json(cfg["system"])
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"system: {exc}") from exc


def _verdict(name, passed, invariant):
    return {"name": name, "passed": bool(passed), "invariant": invariant}


def _window(cfg, default):
    lo, hi = cfg.get("window", default)
    if lo > hi:
        raise ConfigError("window must satisfy lo <= hi")
    return lo, hi


def _explicit_pseudo_orbit(sys_, cfg):
    spec = cfg["pseudo_orbit"]
    space = sys_.space
    pts = tuple(space.point_from_json(p) for p in spec["points"])
    sigma = SymbolWord.from_json(spec["word"])
    delta = spec.get("delta", cfg.get("delta", 0.0))
    return PseudoOrbit(spec.get("base", 0), pts, sigma, float(delta))


def _setup(sys_, cfg):
    constants = expansion_constants(sys_, seed=cfg["seed"])
    cert = openness_check(sys_, constants, trial_count=cfg.get("trial_count", 1000), seed=cfg["seed"])
    return constants, cert


def _pseudo_orbits(sys_, cfg, rng, default_window=(0, 199)):
    if "pseudo_orbit" in cfg:
        return [_explicit_pseudo_orbit(sys_, cfg)]
    if "delta" not in cfg:
        raise ConfigError("random pseudo-orbits need 'delta'")
    lo, hi = _window(cfg, default_window)
    return random_pseudo_orbits(sys_, cfg.get("count", 1), hi - lo + 1, cfg["delta"], rng, base=lo)


# ------------------------------------------------------------ experiments


def exp_shadow(sys_, cfg, rng):
    constants, cert = _setup(sys_, cfg)
    pos = _pseudo_orbits(sys_, cfg, rng)
    results = shadow_batch(sys_, pos, cert, constants)
    sups = [r.sup_deviation for r in results]
    bounds = [r.bound for r in results]
    first = results[0]
    metrics = {
        "runs": len(results),
        "sup_deviation": max(sups),
        "mean_sup_deviation": float(np.mean(sups)),
        "bound": max(bounds),
        "constants": first.constants,
        "truncation_bound": max(r.truncation_bound for r in results),
        "certificate": cert.to_json(),
    }
    if len(results) == 1:
        metrics["y0"] = sys_.space.point_to_json(first.y0)
        metrics["deviations"] = list(first.deviations)
    trace = [(first.base + k, d, first.bound) for k, d in enumerate(first.deviations)]
    ok = all(s <= b + TAU for s, b in zip(sups, bounds))
    return [_verdict("lipschitz_bound", ok, "sup_deviation <= L*eps + tau")], metrics, trace


def exp_oracle_compare(sys_, cfg, rng):
    constants, cert = _setup(sys_, cfg)
    cfg = dict(cfg)
    cfg.setdefault("window", [0, 19])
    pos = _pseudo_orbits(sys_, cfg, rng, (0, 19))
    grid = sys_.space.grid(cfg.get("grid", 100_000))
    rows = []
    all_ok = True
    for po in pos:
        res = lipschitz_shadow(sys_, po, cert, constants)
        eps = cfg.get("eps", res.bound)
        hits = brute_force_shadow(sys_, po, eps, grid)
        groups = clusters(sys_.space, hits, grid)
        single = len(groups) == 1
        near = single and cluster_contains(sys_.space, groups[0], res.y0, 2 * grid.resolution)
        all_ok &= bool(single and near)
        rows.append({"hits": len(hits), "clusters": len(groups), "contains_y0": bool(near),
                     "y0": sys_.space.point_to_json(res.y0)})
    metrics = {"instances": rows, "grid": len(grid), "resolution": grid.resolution}
    return [_verdict("oracle_agreement", all_ok, "single oracle cluster containing the solver's y0")], metrics, None


def exp_openness(sys_, cfg, rng):
    constants = expansion_constants(sys_, seed=cfg["seed"])
    cert = openness_check(sys_, constants, trial_count=cfg.get("trial_count", 1000), rng=rng)
    w = cert.to_json()
    if cert.witness is not None:
        lam, x, y = cert.witness
        w["witness"] = [lam, sys_.space.point_to_json(x), sys_.space.point_to_json(y)]
    metrics = {"certificate": w, "constants": constants.to_json()}
    return [_verdict("openness", cert.verdict, "preimage ball criterion")], metrics, None


def exp_expansivity(sys_, cfg, rng):
    cands = cfg.get("candidates") or ([cfg["e"]] if "e" in cfg else None)
    if not cands:
        raise ConfigError("expansivity needs 'candidates' or 'e'")
    est = expansivity_search(sys_, cands, horizon=cfg.get("horizon", 40),
                             pair_count=cfg.get("pair_count", 10_000), mode=cfg.get("mode", "positive"),
                             strong=cfg.get("strong", False), rng=rng)
    metrics = est.to_json()
    if est.witness is not None:
        metrics["witness"] = [sys_.space.point_to_json(p) for p in est.witness]
        for c in metrics["candidates"]:
            if c["witness"] is not None:
                c["witness"] = [sys_.space.point_to_json(p) for p in c["witness"]]
    ok = est.passed and est.refutations == 0
    return [_verdict("expansivity", ok, "no sampled pair stays within e")], metrics, None


def exp_separation(sys_, cfg, rng):
    for k in ("e", "alpha"):
        if k not in cfg:
            raise ConfigError(f"separation needs '{k}'")
    sep = separation_horizon(sys_, cfg["e"], cfg["alpha"], pair_count=cfg.get("pair_count", 10_000),
                             mode=cfg.get("mode", "positive"), strong=cfg.get("strong", False),
                             cap=cfg.get("horizon", 64), rng=rng)
    verdicts = [_verdict("separation_bounded", sep.bounded, "finite separation horizon")]
    if "expected_N" in cfg:
        verdicts.append(_verdict("separation_value", sep.N == cfg["expected_N"], "N matches expected_N"))
    return verdicts, sep.to_json(), None


def exp_limit(sys_, cfg, rng):
    constants, cert = _setup(sys_, cfg)
    prof = cfg.get("profile")
    if prof is None:
        raise ConfigError("limit needs 'profile'")
    lo, hi = _window(cfg, (0, 60))
    scale, ratio = prof["scale"], prof.get("ratio", 0.5)
    profile = geometric_profile(scale, ratio)
    sigma = SymbolWord.random(sys_.m, lo, hi, rng)
    x0 = sys_.space.random_point(rng)
    po = generate_decaying_pseudo_orbit(sys_, x0, sigma, lo, hi, profile, rng)
    rep = limit_shadow_experiment(sys_, po, [profile(k) for k in range(hi - lo)], cert, constants)
    verdicts = [_verdict("tail_bound", rep.ok, "tail deviation <= (L+1)*delta_I + tau")]
    env = cfg.get("envelope")
    metrics = rep.to_json()
    if env:
        first = rep.first_below(env.get("threshold", 1e-6))
        metrics["envelope_first_below"] = first
        if "by_index" in env:
            verdicts.append(_verdict("envelope_decay", first is not None and first <= env["by_index"],
                                     "envelope below threshold by the given index"))
    trace = [(lo + k, d, rep.L * profile(0)) for k, d in enumerate(rep.deviations)]
    if not rep.applicable:
        metrics["note"] = "profile does not decay; only the Lipschitz bound was checked"
    return verdicts, metrics, trace


def exp_continuity(sys_, cfg, rng):
    constants, cert = _setup(sys_, cfg)
    eps = cfg.get("eps", 0.01)
    alpha = cfg.get("alpha", 0.01)
    est = expansivity_search(sys_, cfg.get("candidates", [cfg.get("e", 0.2)]),
                             horizon=cfg.get("horizon", 40), pair_count=cfg.get("pair_count", 1000), rng=rng)
    if not est.passed:
        raise PreconditionError(f"expansivity refuted at every candidate (best {est.constant})")
    sep = separation_horizon(sys_, est.constant, alpha, rng=rng)
    if not sep.bounded:
        raise PreconditionError("no separation horizon")
    beta = 0.5 * (est.constant / 3) / 2 ** sep.N
    lo, hi = _window(cfg, (0, 39))
    if lo != 0:
        raise ConfigError("continuity ensembles use windows starting at 0")
    L = 2 * constants.alpha / (constants.alpha - 1) if constants.alpha > 1 else None
    if L is None:
        raise PreconditionError("continuity needs alpha > 1")
    delta = cfg.get("delta", min(eps / L, cert.delta1 / L))
    n_pairs = cfg.get("count", 200)
    ens = paired_ensemble(sys_, n_pairs, hi + 1, delta, beta, rng)
    grid = sys_.space.grid(cfg["grid"]) if "grid" in cfg else None
    rep = continuity_experiment(sys_, ens, eps, alpha, est, cert, constants,
                                pairs=[(2 * k, 2 * k + 1) for k in range(n_pairs)], grid=grid,
                                seed=cfg["seed"])
    metrics = rep.to_json()
    metrics["delta"] = delta
    ok = rep.ok and rep.aborts == 0
    return [_verdict("continuity", ok, "shadow displacement < alpha when tilde distance < beta")], metrics, None


def exp_derived(sys_, cfg, rng):
    k = cfg.get("power", 2)
    pw = power_system(sys_, k)
    constants, cert = _setup(pw, cfg)
    base = expansion_constants(sys_, seed=cfg["seed"])
    verdicts = [_verdict("beta_power", abs(constants.beta - base.beta ** k) <= TAU,
                         "beta of F^k equals beta^k")]
    metrics = {"power": k, "maps": pw.m, "constants": constants.to_json(), "base_beta": base.beta}
    if "delta" in cfg:
        pos = _pseudo_orbits(pw, cfg, rng)
        res = shadow_batch(pw, pos, cert, constants)
        sup = max(r.sup_deviation for r in res)
        metrics.update(runs=len(res), sup_deviation=sup, bound=res[0].bound, L=res[0].constants["L"])
        verdicts.append(_verdict("lipschitz_bound", all(r.sup_deviation <= r.bound + TAU for r in res),
                                 "sup_deviation <= L*eps + tau on F^k"))
    return verdicts, metrics, None


DISPATCH = {
    "shadow": exp_shadow,
    "oracle_compare": exp_oracle_compare,
    "openness": exp_openness,
    "expansivity": exp_expansivity,
    "separation": exp_separation,
    "limit": exp_limit,
    "continuity": exp_continuity,
    "derived_systems": exp_derived,
}


# -------------------------------------------------------------------- run


def apply_overrides(cfg, seed=None, grid=None, horizon=None):
    cfg = copy.deepcopy(cfg)
    if seed is not None:
        cfg["seed"] = seed
    if grid is not None:
        cfg["grid"] = grid
    if horizon is not None:
        cfg["horizon"] = horizon
    cfg.setdefault("seed", 0)
    cfg.setdefault("schema_version", SCHEMA_VERSION)
    return cfg


def execute(cfg):
    """Run one validated config; returns (report, trace rows or None, exit code)."""
    sys_ = IFSystem.from_json(cfg["system"])
    rng = np.random.default_rng(cfg["seed"])
    verdicts, metrics, trace = DISPATCH[cfg["experiment"]](sys_, cfg, rng)
    expected = cfg.get("expected_verdict", True)
    # the first verdict is the experiment's headline; expected_verdict applies to it
    head = verdicts[0]["passed"] == expected
    rest = all(v["passed"] for v in verdicts[1:])
    passed = bool(head and rest)
    report = {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "experiment": cfg["experiment"],
        "config": cfg,
        "verdicts": verdicts,
        "expected_verdict": expected,
        "passed": passed,
        "metrics": metrics,
    }
    return report, trace, EXIT_OK if passed else EXIT_FAIL


def classify(exc):
    if isinstance(exc, ConfigError):
        return EXIT_SCHEMA
    if isinstance(exc, (PreconditionError, CertificateViolation, NotInvertibleError, SizeCapError)):
        return EXIT_PRECONDITION
    if isinstance(exc, (InternalInvariantError, UniquenessViolation)):
        return EXIT_INTERNAL
    return EXIT_INTERNAL


def run_config(cfg, out_dir):
    """Run and write report.json, timing.json and (when present) trace.csv.
    Returns (exit code, report or None, error message or None)."""
    out_dir = Path(out_dir)
    outputs = cfg.get("outputs", {})
    t0 = time.perf_counter()
    try:
        report, trace, code = execute(cfg)
        text = dump_json(report)
    except Exception as exc:  # classified into exit codes below
        code = classify(exc)
        msg = f"{type(exc).__name__}: {exc}"
        err = {"schema_version": SCHEMA_VERSION, "version": __version__, "config": cfg,
               "error": msg, "exit_code": code}
        atomic_write(out_dir / outputs.get("report", "report.json"), dump_json(err))
        return code, None, msg
    atomic_write(out_dir / outputs.get("report", "report.json"), text)
    if trace:
        atomic_write(out_dir / outputs.get("trace", "trace.csv"),
                     csv_text(["index", "deviation", "bound"], [(i, repr(d), repr(b)) for i, d, b in trace]))
    atomic_write(out_dir / "timing.json", dump_json({"wall_seconds": time.perf_counter() - t0}))
    return code, report, None


def cmd_run(args):
    try:
        cfg = apply_overrides(load_config(args.config), args.seed, args.grid, args.horizon)
        validate_config(cfg)
    except ConfigError as exc:
        log.error("invalid config: %s", exc)
        return EXIT_SCHEMA
    out = Path(args.out) if args.out else Path(args.config).with_suffix("").parent / "out"
    code, report, err = run_config(cfg, out)
    if err:
        log.error("%s", err)
    else:
        for k, v in enumerate(report["verdicts"]):
            want = report["expected_verdict"] if k == 0 else True
            tag = "PASS" if v["passed"] == want else "FAIL"
            print(f"{tag} {v['name']}={str(v['passed']).lower()} expected={str(want).lower()} ({v['invariant']})")
        print(f"{'OK' if report['passed'] else 'FAILED'}: report in {out}")
    return code


def _summary_row(name, cfg, code, report):
    m = (report or {}).get("metrics", {})
    sup = m.get("sup_deviation")
    bound = m.get("bound")
    return [name, cfg.get("experiment"), cfg.get("seed"), code,
            "" if report is None else int(report["passed"]),
            "" if sup is None else repr(sup), "" if bound is None else repr(bound)]


def cmd_sweep(args):
    d = Path(args.dir)
    if not d.is_dir():
        log.error("%s is not a directory", d)
        return EXIT_SCHEMA
    out = Path(args.out) if args.out else d / "out"
    paths = sorted(p for p in d.glob("*.json") if p.is_file())
    cfgs = []
    try:
        for p in paths:
            cfgs.append((p.stem, apply_overrides(load_config(p), args.seed, args.grid, args.horizon)))
    except ConfigError as exc:
        log.error("invalid config: %s", exc)
        return EXIT_SCHEMA
    kinds = {c["experiment"] for _, c in cfgs}
    if len(kinds) > 1:
        log.error("sweep needs one experiment type, found %s", sorted(kinds))
        return EXIT_SCHEMA
    header = ["name", "experiment", "seed", "exit_code", "passed", "sup_deviation", "bound"]
    rows, sups, ratios = [], [], []
    final = EXIT_OK
    for name, cfg in cfgs:
        code, report, err = run_config(cfg, out / name)
        rows.append(_summary_row(name, cfg, code, report))
        if err:
            manifest = {"completed": [r[0] for r in rows[:-1]], "failed": name, "error": err, "exit_code": code}
            atomic_write(out / "partial.json", dump_json(manifest))
            atomic_write(out / "sweep.csv", csv_text(header, rows))
            log.error("run %s failed: %s", name, err)
            return code
        m = report["metrics"]
        if "sup_deviation" in m and "bound" in m:
            sups.append(m["sup_deviation"])
            ratios.append(m["sup_deviation"] / m["bound"] if m["bound"] else 0.0)
        if code != EXIT_OK:
            final = EXIT_FAIL
    atomic_write(out / "sweep.csv", csv_text(header, rows))
    summary = {
        "runs": len(rows),
        "experiment": next(iter(kinds)) if kinds else None,
        "passed": sum(1 for r in rows if r[4] == 1),
        "max_sup_deviation": max(sups) if sups else None,
        "mean_sup_deviation": float(np.mean(sups)) if sups else None,
        "max_deviation_to_bound": max(ratios) if ratios else None,
    }
    atomic_write(out / "summary.json", dump_json(summary))
    print(f"{summary['passed']}/{summary['runs']} runs passed; results in {out}")
    return final


def cmd_schema(args):
    sys.stdout.write(dump_json(CONFIG_SCHEMA))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="ifshadow", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--grid", type=int, help="oracle grid size")
        p.add_argument("--horizon", type=int, help="iteration horizon")

    p = sub.add_parser("run", help="run one experiment config")
    p.add_argument("config")
    common(p)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("sweep", help="run every *.json config in a directory")
    p.add_argument("dir")
    common(p)
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("schema", help="print the config JSON schema")
    p.set_defaults(func=cmd_schema)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_SCHEMA if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
