"""Scenario runner: ``mavol-lab run | sweep | catalog``.

A scenario is one JSON document. Reports are CSV with a JSON mirror, one row
per k (``run``) or per (eps, k) (``sweep``). Exit codes: 0 all gates pass,
1 a gate failed (report still written), 2 invalid config, 3 numerical abort.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .directimage import FamilyGram, ma_zhang_gap_at, numerical_degree
from .geometry import AUX_WEIGHTS, FIBER_VOLUMES, PERTURBATIONS, FiberedWeight
from .mavol import (
    BASE_VOLUMES,
    BOUND_TOL,
    DemaillyBoundViolation,
    asymptotic_rhs,
    demailly_gap,
    mavol_from_samples,
    mavol_rescaled,
    saturation_residual,
)
from .numerics import NumericalError, empirical_order, sphere_rule
from .sympow import ProjectivizedWeight, SplitBundle, sym_power_weights, sympow_mavol_rescaled
from .toeplitz import SYMBOL_IDS, det_lemma_ratio, product_defect, symbol, symbol_matrix

EXIT_OK, EXIT_GATE, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

COLUMNS = (
    "scenario",
    "k",
    "N_k",
    "mavol",
    "mavol_rescaled",
    "rhs_thm11",
    "ratio_thm11",
    "mz_gap",
    "bms_defect_times_k",
    "det_lemma_ratio",
    "sat_residual",
    "demailly_lhs",
    "demailly_rhs",
    "runtime_seconds",
)

HEAVY_K_CAP = 16
HEAVY_BASE_POINTS = 200
SYMPOW_FIBER = (128, 8)
# fibre used for the Toeplitz columns; every catalog perturbation vanishes over w = 0
FIBER_PROBE = 0.5 + 0.25j


class ConfigError(ValueError):
    pass


# -- configuration ------------------------------------------------------------------

_WEIGHT_KEYS = {"a", "b", "perturbation", "eps", "aux", "aux_eps", "fiber_volume"}
_GRID_KEYS = {"base_radial", "base_angular", "fd_step"}
_GATE_KEYS = {"demailly_tol", "min_order", "saturation_tol"}
_TOP_KEYS = {"scenario", "weight", "bundle", "symbols", "det_lemma", "k", "grid", "nu_b", "output", "gates"}


@dataclass
class ScenarioConfig:
    scenario: str
    k: list
    weight: dict | None = None
    bundle: tuple | None = None
    symbols: tuple = ("x", "x")
    det_lemma: str = "lemma-2x2"
    base_radial: int = 16
    base_angular: int = 8
    fd_step: float = 1e-2
    nu_b: str = "fs"
    output: str | None = None
    demailly_tol: float = BOUND_TOL
    min_order: float = 0.9
    saturation_tol: float = 1e-10
    source: Path | None = field(default=None, repr=False)

    @property
    def is_sympow(self) -> bool:
        return self.bundle is not None

    def make_weight(self) -> FiberedWeight:
        return FiberedWeight(**self.weight)


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


def _number(d, key, lo, hi, integer=False):
    v = d[key]
    _require(isinstance(v, (int, float)) and not isinstance(v, bool), f"{key} must be a number")
    _require(not integer or int(v) == v, f"{key} must be an integer")
    _require(lo <= v <= hi, f"{key}={v} outside [{lo}, {hi}]")
    return int(v) if integer else float(v)


def _unknown(d, allowed, where):
    extra = sorted(set(d) - allowed)
    _require(not extra, f"unknown key(s) in {where}: {', '.join(extra)}")


def parse_config(doc: dict, source: Path | None = None) -> ScenarioConfig:
    _require(isinstance(doc, dict), "config must be a JSON object")
    _unknown(doc, _TOP_KEYS, "config")
    _require("scenario" in doc and isinstance(doc["scenario"], str) and doc["scenario"], "scenario id required")
    _require(("weight" in doc) != ("bundle" in doc), "exactly one of 'weight' or 'bundle' is required")
    ks = doc.get("k", [8, 16, 32])
    _require(isinstance(ks, list) and ks, "k must be a nonempty list")
    ks = [_number({"k": v}, "k", 1, 256, integer=True) for v in ks]
    _require(all(b > a for a, b in zip(ks, ks[1:])), "k ladder must be strictly increasing")
    cfg = ScenarioConfig(doc["scenario"], ks, source=source)

    if "weight" in doc:
        w = doc["weight"]
        _require(isinstance(w, dict), "weight must be an object")
        _unknown(w, _WEIGHT_KEYS, "weight")
        spec = {
            "a": _number({"a": w.get("a", 1)}, "a", 1, 8, integer=True),
            "b": _number({"b": w.get("b", 1)}, "b", 1, 8, integer=True),
            "perturbation": w.get("perturbation", "none"),
            "eps": _number({"eps": w.get("eps", 0.0)}, "eps", -5.0, 5.0),
            "aux": w.get("aux", "none"),
            "aux_eps": _number({"aux_eps": w.get("aux_eps", 1.0)}, "aux_eps", -10.0, 10.0),
            "fiber_volume": w.get("fiber_volume", "omega"),
        }
        _require(spec["perturbation"] in PERTURBATIONS, f"unknown perturbation {spec['perturbation']!r}")
        _require(spec["aux"] in AUX_WEIGHTS, f"unknown auxiliary weight {spec['aux']!r}")
        _require(spec["fiber_volume"] in FIBER_VOLUMES, f"unknown fiber volume {spec['fiber_volume']!r}")
        cfg.weight = spec
    else:
        b = doc["bundle"]
        _require(isinstance(b, list) and len(b) == 2, "bundle must list two degrees")
        cfg.bundle = tuple(_number({"a": v}, "a", 1, 16, integer=True) for v in b)

    if "symbols" in doc:
        s = doc["symbols"]
        _require(isinstance(s, list) and len(s) == 2 and all(x in SYMBOL_IDS for x in s), "symbols must be two catalog ids")
        cfg.symbols = tuple(s)
    if "det_lemma" in doc:
        try:
            symbol_matrix(doc["det_lemma"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        cfg.det_lemma = doc["det_lemma"]
    grid = doc.get("grid", {})
    _require(isinstance(grid, dict), "grid must be an object")
    _unknown(grid, _GRID_KEYS, "grid")
    if "base_radial" in grid:
        cfg.base_radial = _number(grid, "base_radial", 2, 64, integer=True)
    if "base_angular" in grid:
        cfg.base_angular = _number(grid, "base_angular", 2, 64, integer=True)
    if "fd_step" in grid:
        cfg.fd_step = _number(grid, "fd_step", 1e-6, 0.1)
    if "nu_b" in doc:
        _require(doc["nu_b"] in BASE_VOLUMES, f"unknown base volume {doc['nu_b']!r}")
        cfg.nu_b = doc["nu_b"]
    if "output" in doc:
        _require(isinstance(doc["output"], str), "output must be a path string")
        cfg.output = doc["output"]
    gates = doc.get("gates", {})
    _require(isinstance(gates, dict), "gates must be an object")
    _unknown(gates, _GATE_KEYS, "gates")
    if "demailly_tol" in gates:
        cfg.demailly_tol = _number(gates, "demailly_tol", 0.0, 1e-2)
    if "min_order" in gates:
        cfg.min_order = _number(gates, "min_order", 0.0, 10.0)
    if "saturation_tol" in gates:
        cfg.saturation_tol = _number(gates, "saturation_tol", 0.0, 1e-2)
    return cfg


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(doc, path)


def bundled_scenarios() -> dict:
    root = resources.files("mavol_lab") / "scenarios"
    out = {}
    for entry in sorted(root.iterdir(), key=lambda p: p.name):
        if entry.name.endswith(".json"):
            out[entry.name[:-5]] = entry
    return out


def resolve_config_path(name: str) -> Path:
    """A path on disk, or the id of a bundled scenario."""
    p = Path(name)
    if p.exists():
        return p
    cat = bundled_scenarios()
    key = name[:-5] if name.endswith(".json") else name
    if key in cat:
        with resources.as_file(cat[key]) as f:
            return Path(f)
    return p


# -- evaluation ---------------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, int):
        return str(x)
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return format(float(x), ".12g")


@dataclass
class ScenarioResult:
    rows: list
    failures: list


def _weight_level(cfg: ScenarioConfig, weight):
    """k-independent quantities: RHS, saturation residual, Demailly pair."""
    if cfg.is_sympow:
        fine = sphere_rule(*SYMPOW_FIBER)
        rhs = asymptotic_rhs(weight, cfg.nu_b, fiber=fine)
        sat = saturation_residual(weight, fiber=fine, push_orders=SYMPOW_FIBER).residual
        lhs, drhs = demailly_gap(weight, cfg.nu_b, fiber=fine, push_orders=SYMPOW_FIBER)
    else:
        rhs = asymptotic_rhs(weight, cfg.nu_b)
        sat = saturation_residual(weight).residual
        lhs, drhs = demailly_gap(weight, cfg.nu_b)
    return rhs, sat, lhs, drhs


def _row_direct_image(cfg: ScenarioConfig, weight, k: int, rhs: float):
    base = sphere_rule(cfg.base_radial, cfg.base_angular)
    samples = FamilyGram(weight, k, base, cfg.fd_step, threads=1).samples()
    value = mavol_from_samples(samples, base)
    deg = numerical_degree(samples, base)
    N = weight.rank(k)
    resc = mavol_rescaled(value, N, deg, cfg.demailly_tol)
    mz = max(ma_zhang_gap_at(s, weight) for s in samples)
    f, g = (symbol(s) for s in cfg.symbols)
    bms = k * product_defect(weight, f, g, k, FIBER_PROBE)
    det = det_lemma_ratio(weight, symbol_matrix(cfg.det_lemma), k, FIBER_PROBE).ratio
    return N, value, resc, value / (k * rhs), mz, bms, det


def _row_sympow(cfg: ScenarioConfig, k: int, rhs: float):
    bundle = SplitBundle(cfg.bundle)
    spec = sym_power_weights(bundle, k)
    # every summand curvature is a multiple of the unit-mass base form
    value = spec.geometric_mean
    resc = sympow_mavol_rescaled(bundle, k)
    if resc > 1.0 + cfg.demailly_tol:
        raise DemaillyBoundViolation(f"rescaled MAVol {resc!r} exceeds 1 + {cfg.demailly_tol}")
    nan = float("nan")
    return spec.size, value, resc, value / (k * rhs), nan, nan, nan


def evaluate(cfg: ScenarioConfig, threads: int = 1, timing: bool = False, label: str | None = None) -> ScenarioResult:
    """Rows for every k in the ladder plus the list of gate failures."""
    label = label or cfg.scenario
    weight = ProjectivizedWeight(*cfg.bundle) if cfg.is_sympow else cfg.make_weight()
    weight.ensure_ample()
    ks = list(cfg.k)
    if not cfg.is_sympow and cfg.base_radial * cfg.base_angular > HEAVY_BASE_POINTS:
        dropped = [k for k in ks if k > HEAVY_K_CAP]
        if dropped:
            print(f"[{label}] base grid > {HEAVY_BASE_POINTS} points: capping k at {HEAVY_K_CAP}, dropping {dropped}", file=sys.stderr)
        ks = [k for k in ks if k <= HEAVY_K_CAP]
    rhs, sat, dlhs, drhs = _weight_level(cfg, weight)

    failures = []

    def cell(k):
        t0 = time.perf_counter()
        try:
            if cfg.is_sympow:
                vals = _row_sympow(cfg, k, rhs)
            else:
                vals = _row_direct_image(cfg, weight, k, rhs)
        except DemaillyBoundViolation as exc:
            return k, None, f"demailly_bound violated at ({label}, k={k}): {exc}"
        elapsed = time.perf_counter() - t0 if timing else float("nan")
        return k, vals + (elapsed,), None

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            cells = list(ex.map(cell, ks))
    else:
        cells = [cell(k) for k in ks]

    rows = []
    for k, vals, err in cells:
        if err:
            failures.append(err)
            continue
        N, value, resc, ratio, mz, bms, det, elapsed = vals
        rows.append(
            {
                "scenario": label,
                "k": k,
                "N_k": N,
                "mavol": value,
                "mavol_rescaled": resc,
                "rhs_thm11": rhs,
                "ratio_thm11": ratio,
                "mz_gap": mz,
                "bms_defect_times_k": bms,
                "det_lemma_ratio": det,
                "sat_residual": sat,
                "demailly_lhs": dlhs,
                "demailly_rhs": drhs,
                "runtime_seconds": elapsed,
            }
        )
    failures.extend(check_gates(cfg, rows, label, dlhs, drhs, sat))
    return ScenarioResult(rows, failures)


def check_gates(cfg: ScenarioConfig, rows, label, dlhs, drhs, sat) -> list:
    out = []
    if dlhs > drhs * (1 + 1e-8):
        out.append(f"demailly_integrated violated for ({label}, all k): lhs {dlhs!r} > rhs {drhs!r}")
    if not rows:
        return out
    saturated = sat <= cfg.saturation_tol
    last = rows[-1]
    near_one = abs(last["mavol_rescaled"] - 1.0) <= cfg.demailly_tol
    if cfg.is_sympow:
        # GM/AM is exactly 1 for equal degrees and strictly below otherwise
        flat = len(set(cfg.bundle)) == 1
        for r in rows:
            if flat != (r["mavol_rescaled"] == 1.0):
                out.append(f"sympow_flatness violated at ({label}, k={r['k']}): value {r['mavol_rescaled']!r}")
    elif saturated != near_one:
        out.append(
            f"saturation_equivalence violated at ({label}, k={last['k']}): residual {sat:.3e}, "
            f"rescaled {last['mavol_rescaled']!r}"
        )
    devs = [abs(r["ratio_thm11"] - 1.0) for r in rows]
    ks = [r["k"] for r in rows]
    if len(rows) >= 2 and max(devs) > 1e-6 and min(devs) > 0:
        order = empirical_order(ks, devs)
        if order < cfg.min_order:
            out.append(f"ratio_order violated for ({label}, k={ks}): empirical order {order:.3f} < {cfg.min_order}")
    return out


# -- reports --------------------------------------------------------------------------------


def render_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in COLUMNS])
    return buf.getvalue()


def render_json(rows) -> str:
    out = []
    for r in rows:
        rec = {}
        for c in COLUMNS:
            s = _fmt(r[c])
            if c in ("scenario",):
                rec[c] = s
            elif c in ("k", "N_k"):
                rec[c] = int(s)
            else:
                rec[c] = None if s == "nan" else float(s)
        out.append(rec)
    return json.dumps({"columns": list(COLUMNS), "rows": out}, indent=2, sort_keys=False) + "\n"


def write_report(rows, path) -> tuple[Path, Path]:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_csv(rows))
    mirror = path.with_suffix(".json")
    mirror.write_text(render_json(rows))
    return path, mirror


def _default_out(cfg: ScenarioConfig, suffix: str = "") -> Path:
    if cfg.output:
        return Path(cfg.output)
    return Path("reports") / f"{cfg.scenario}{suffix}.csv"


def _threads(arg) -> int:
    if arg is not None:
        return max(1, arg)
    try:
        return max(1, int(os.environ.get("MAVOL_LAB_THREADS", "1")))
    except ValueError:
        return 1


# -- commands ---------------------------------------------------------------------------------


def _finish(rows, failures, out) -> int:
    csv_path, _ = write_report(rows, out)
    for f in failures:
        print(f"GATE FAILURE: {f}", file=sys.stderr)
    print(f"wrote {csv_path} ({len(rows)} rows)")
    return EXIT_GATE if failures else EXIT_OK


def cmd_run(args) -> int:
    cfg = load_config(resolve_config_path(args.config))
    res = evaluate(cfg, _threads(args.threads), args.timing)
    return _finish(res.rows, res.failures, args.out or _default_out(cfg))


def _float_list(text) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse number list {text!r}") from None


def cmd_sweep(args) -> int:
    cfg = load_config(resolve_config_path(args.config))
    _require(not cfg.is_sympow, "sweep over eps needs a 'weight' scenario")
    eps_list = _float_list(args.eps) if args.eps else [cfg.weight["eps"]]
    ks = [int(k) for k in _float_list(args.k)] if args.k else list(cfg.k)
    _require(eps_list and ks, "sweep ladders must be nonempty")
    for e in eps_list:
        _require(-5.0 <= e <= 5.0, f"eps={e} outside [-5, 5]")
    rows, failures = [], []
    for e in eps_list:
        sub = replace(cfg, k=sorted(set(ks)), weight={**cfg.weight, "eps": e})
        res = evaluate(sub, _threads(args.threads), args.timing, label=f"{cfg.scenario}[eps={e:g}]")
        rows.extend(res.rows)
        failures.extend(res.failures)
    return _finish(rows, failures, args.out or _default_out(cfg, "-sweep"))


def cmd_catalog(args) -> int:
    for name, entry in bundled_scenarios().items():
        doc = json.loads(entry.read_text())
        if "weight" in doc:
            w = doc["weight"]
            desc = f"weight {w.get('perturbation', 'none')} eps={w.get('eps', 0.0)} aux={w.get('aux', 'none')}"
        else:
            desc = f"symmetric powers of O({doc['bundle'][0]}) + O({doc['bundle'][1]})"
        print(f"{name:<20} k={doc.get('k', [8, 16, 32])}  {desc}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mavol-lab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one scenario over its k ladder")
    r.add_argument("config", help="config path or bundled scenario id")
    r.add_argument("--out", help="CSV report path (JSON mirror written alongside)")
    r.add_argument("--threads", type=int, default=None)
    r.add_argument("--timing", action="store_true", help="fill runtime_seconds (reports become non-reproducible)")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="cross product of eps and k values")
    s.add_argument("config")
    s.add_argument("--eps", help="comma-separated eps values")
    s.add_argument("--k", help="comma-separated k values")
    s.add_argument("--out")
    s.add_argument("--threads", type=int, default=None)
    s.add_argument("--timing", action="store_true")
    s.set_defaults(func=cmd_sweep)

    c = sub.add_parser("catalog", help="list bundled scenarios")
    c.set_defaults(func=cmd_catalog)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
