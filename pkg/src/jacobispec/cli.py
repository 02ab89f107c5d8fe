"""Scenario runner: ``jacobispec run --config <path> --out <dir>``.

A scenario is a JSON document::

    {"schema_version": 1, "task": "<task>", "model": {...}, "params": {...}, "seed": 0}

``model`` is either an explicit coefficient model
(``{"window_start", "a", "b", "tail": {"kind", "params"}}``), ``{"free": true}``,
``{"random": {"seed", "n", "disorder", "hopping_spread"}}`` or
``{"symmetric": {"seed", "n", "disorder"} | {"b_half": [...]}}``. The report
``report.json`` embeds the resolved scenario, with the model written out
explicitly, and CSV traces are written next to it.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .decomposition import (AngleInterval, FunctionSpec, Partition, apply_function, build_q,
                            pure_point_sum, pvm_defects, rs_integral, rs_sweep)
from .expansion import expansion_report, gamma_estimate, reconstruct_singular
from .herglotz import (ConvergenceError, EpsSchedule, half_line_m, perturbation_formula,
                       whole_line_resolvent_entry)
from .operator_core import (CoefficientModel, IndexWindow, ModelError, build_whole_line,
                            build_window)
from .recurrence import CSV_HEADER as SUBORDINACY_HEADER
from .recurrence import detect_subordinate
from .resolvent_submatrix import ConditioningError, build_block, verify_inverse_structure
from .scenarios import random_model, symmetric_model
from .spectral_measures import (DegeneracyError, boundary_measure, eigendecompose, krylov_rank)

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NONCONVERGED = 3

TASKS = ("mfunc", "subordinacy-scan", "spectral", "expansion-check", "decompose", "rs-sweep",
         "lemma-f-check", "symmetric-demo", "pure-point-demo")

_NUM = {"type": "number"}
_COMPLEX = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}
_FUNCTION = {
    "type": "object",
    "properties": {"kind": {"enum": ["power", "unitary", "resolvent"]},
                   "n": {"type": "integer", "minimum": 1}, "t": _NUM, "z": _COMPLEX},
    "required": ["kind"],
}

SCHEMA = {
    "type": "object",
    "required": ["schema_version", "task", "model"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "task": {"enum": list(TASKS)},
        "seed": {"type": "integer"},
        "params": {"type": "object"},
        "model": {
            "oneOf": [
                {"type": "object", "required": ["free"], "additionalProperties": False,
                 "properties": {"free": {"const": True}}},
                {"type": "object", "required": ["random"], "additionalProperties": False,
                 "properties": {"random": {
                     "type": "object", "additionalProperties": False,
                     "properties": {"seed": {"type": "integer"}, "n": {"type": "integer", "minimum": 1},
                                    "disorder": _NUM, "hopping_spread": _NUM}}}},
                {"type": "object", "required": ["symmetric"], "additionalProperties": False,
                 "properties": {"symmetric": {
                     "type": "object", "additionalProperties": False,
                     "properties": {"seed": {"type": "integer"}, "n": {"type": "integer", "minimum": 0},
                                    "disorder": _NUM,
                                    "b_half": {"type": "array", "items": _NUM, "minItems": 1}}}}},
                {"type": "object", "required": ["a", "b"], "additionalProperties": False,
                 "properties": {"window_start": {"type": "integer"},
                                "a": {"type": "array", "items": _NUM},
                                "b": {"type": "array", "items": _NUM},
                                "tail": {"type": "object"}}},
            ]
        },
    },
}

# Per-task parameter schemas; defaults are filled in by ``resolve``.
PARAM_SCHEMAS = {
    "mfunc": {"side": {"enum": ["+", "-"]}, "theta": _NUM, "z": {"type": "array", "items": _COMPLEX},
              "depth": {"type": "integer", "minimum": 1}},
    "subordinacy-scan": {"side": {"enum": ["+", "-"]},
                         "energies": {"type": "array", "items": _NUM},
                         "L_max": {"type": "integer", "minimum": 16},
                         "threshold": _NUM},
    "spectral": {"n": {"type": "integer", "minimum": 1}},
    "expansion-check": {"n": {"type": "integer", "minimum": 1},
                        "gamma_n": {"type": "integer", "minimum": 1},
                        "eps_min": _NUM},
    "decompose": {"n": {"type": "integer", "minimum": 1}},
    "rs-sweep": {"n": {"type": "integer", "minimum": 1}, "F": _FUNCTION,
                 "levels": {"type": "integer", "minimum": 1, "maximum": 52},
                 "tag": {"enum": ["left", "mid", "atom"]}},
    "lemma-f-check": {"n": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                      "z": {"type": "array", "items": _COMPLEX},
                      "outer_depth": {"type": "integer", "minimum": 1}},
    "symmetric-demo": {},
    "pure-point-demo": {"n": {"type": "integer", "minimum": 1}, "F": _FUNCTION},
}

DEFAULTS = {
    "mfunc": {"side": "+", "theta": 0.0, "z": [[0.0, 1.0]], "depth": 64},
    "subordinacy-scan": {"side": "+", "energies": [0.0, 3.0], "L_max": 100000, "threshold": 1e-4},
    "spectral": {"n": 30},
    "expansion-check": {"n": 10, "gamma_n": None, "eps_min": 1e-7},
    "decompose": {"n": 10},
    "rs-sweep": {"n": 10, "F": {"kind": "power", "n": 1}, "levels": 48, "tag": "left"},
    "lemma-f-check": {"n": [1, 2, 3], "z": [[0.4, 0.7]], "outer_depth": 64},
    "symmetric-demo": {},
    "pure-point-demo": {"n": 10, "F": {"kind": "power", "n": 2}},
}

CSV_DOC = """\
CSV traces per task:
  mfunc               m.csv: z_re, z_im, m_re, m_im, formula_re, formula_im
  subordinacy-scan    subordinacy.csv: E, side, status, theta, final_ratio, L_max
                      ratio_trace.csv: E, L, ratio
  spectral            eigen.csv: energy, psi(lo), ..., psi(hi)
                      measure.csv: E, mu_mass
  expansion-check     expansion.csv: E, mu_mass, u0, u1, reconstruction_error
  decompose           angles.csv: theta, atom_count, energies
  rs-sweep            rs_sweep.csv: mesh, cells, defect, below_gap
  lemma-f-check       lemma.csv: n, z_re, z_im, off_band_max, band_deviation_max,
                      corner_error_minus, corner_error_plus
  symmetric-demo      angles.csv: theta, atom_count, energies
  pure-point-demo     angles.csv: theta, atom_count, energies
Environment: JACOBISPEC_THREADS sets the worker count for energy sweeps
(results are reduced in input order, so output does not depend on it).
"""


class ScenarioError(ValueError):
    """The scenario does not validate or cannot be resolved."""


# ------------------------------------------------------------ config handling

def resolve_model(spec: dict) -> CoefficientModel:
    if "free" in spec:
        return CoefficientModel.free()
    if "random" in spec:
        r = spec["random"]
        return random_model(int(r.get("seed", 0)), int(r.get("n", 30)), float(r.get("disorder", 2.0)),
                            float(r.get("hopping_spread", 0.3)))
    if "symmetric" in spec:
        s = spec["symmetric"]
        return symmetric_model(s.get("seed", 0), int(s.get("n", 10)), float(s.get("disorder", 2.0)),
                               s.get("b_half"))
    return CoefficientModel.from_dict(spec)


def resolve(config: dict) -> tuple[dict, CoefficientModel]:
    """Validate a raw config and return (resolved scenario, model)."""
    try:
        jsonschema.validate(config, SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ScenarioError(f"config invalid: {exc.message}") from exc
    task = config["task"]
    params = dict(DEFAULTS[task])
    params.update(config.get("params", {}))
    schema = {"type": "object", "properties": PARAM_SCHEMAS[task], "additionalProperties": False}
    clean = {k: v for k, v in params.items() if v is not None}
    try:
        jsonschema.validate(clean, schema)
    except jsonschema.ValidationError as exc:
        raise ScenarioError(f"params invalid for {task}: {exc.message}") from exc
    try:
        model = resolve_model(config["model"])
    except (ModelError, ValueError, KeyError) as exc:
        raise ScenarioError(f"model invalid: {exc}") from exc
    scenario = {"schema_version": SCHEMA_VERSION, "task": task, "seed": int(config.get("seed", 0)),
                "model": model.to_dict(), "model_source": config["model"], "params": params}
    return scenario, model


def _threads() -> int:
    raw = os.environ.get("JACOBISPEC_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _cx(z) -> complex:
    return complex(float(z[0]), float(z[1]))


def _pair(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def _atom_rows(q):
    return [[repr(a.theta), len(a.atom_indices),
             ";".join(repr(float(q.sys.energies[i])) for i in a.atom_indices)] for a in q.atoms]


# ------------------------------------------------------------ tasks

def task_mfunc(model, p, seed):
    rows, out = [], []
    for zz in p["z"]:
        z = _cx(zz)
        m = half_line_m(model, p["side"], float(p["theta"]), z, int(p["depth"]))
        entry = {"z": _pair(z), "m": _pair(m)}
        formula = None
        if p["side"] == "+" and abs(float(p["theta"]) - 0.5 * math.pi) > 1e-12:
            m0 = half_line_m(model, "+", 0.0, z, int(p["depth"]))
            formula = perturbation_formula(m0, float(p["theta"]))
            entry["perturbation_formula"] = _pair(formula)
            entry["formula_error"] = abs(formula - m)
        out.append(entry)
        f = formula if formula is not None else complex("nan")
        rows.append([repr(z.real), repr(z.imag), repr(m.real), repr(m.imag), repr(f.real), repr(f.imag)])
    csvs = {"m.csv": (["z_re", "z_im", "m_re", "m_im", "formula_re", "formula_im"], rows)}
    return {"values": out}, csvs, True


def task_subordinacy(model, p, seed):
    energies = [float(e) for e in p["energies"]]

    def one(E):
        return detect_subordinate(model, p["side"], E, int(p["L_max"]), float(p["threshold"]))

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        verdicts = list(pool.map(one, energies))
    rows = [[repr(v.energy), v.side, v.status, "" if v.theta is None else repr(v.theta),
             repr(v.final_ratio), v.L_max] for v in verdicts]
    trace = [[repr(v.energy), L, repr(r)] for v in verdicts for L, r in v.ratio_trace]
    report = {"verdicts": [{"E": v.energy, "side": v.side, "status": v.status, "theta": v.theta,
                            "final_ratio": v.final_ratio, "L_max": v.L_max} for v in verdicts]}
    csvs = {"subordinacy.csv": (SUBORDINACY_HEADER, rows),
            "ratio_trace.csv": (["E", "L", "ratio"], trace)}
    return report, csvs, True


def _whole_line_system(model, n):
    return eigendecompose(build_whole_line(model, int(n)))


def task_spectral(model, p, seed):
    sys_ = _whole_line_system(model, p["n"])
    mu = boundary_measure(sys_)
    op = sys_.op
    rank = krylov_rank(op, [op.delta(0), op.delta(1)])
    report = {"size": sys_.size, "residual": sys_.residual(), "mu": mu.to_dict(),
              "krylov_rank_delta01": rank,
              "m00_at_i": _pair(whole_line_resolvent_entry(model, 0, 0, 1j, int(p["n"])))}
    measure_rows = [[repr(E), repr(w)] for E, w in mu.atoms()]
    csvs = {"eigen.csv": (None, list(sys_.to_csv_rows())),
            "measure.csv": (["E", "mu_mass"], measure_rows)}
    return report, csvs, True


def task_expansion(model, p, seed):
    sys_ = _whole_line_system(model, p["n"])
    rep = expansion_report(sys_)
    eye = np.eye(sys_.size)
    rec, excluded = reconstruct_singular(sys_, range(sys_.size), eye)
    rep["identity_error"] = float(np.max(np.abs(rec - eye)))
    rep["excluded"] = excluded
    sched = EpsSchedule.down_to(float(p["eps_min"]))
    gamma_rows, converged = [], True
    for row in rep["atoms"]:
        if row["excluded"]:
            continue
        g = gamma_estimate(sys_, row["E"], p.get("gamma_n"), sched)
        sv = g.singular_values()
        i = int(np.searchsorted(sys_.energies, row["E"]))
        u = sys_.vectors[:, i] / math.sqrt(row["mu_mass"])
        sites = g.sites - sys_.window.lo
        gamma_rows.append({"E": row["E"], "sv_ratio": float(sv[1] / sv[0]),
                           "trace01": float(g.entries[np.searchsorted(g.sites, 0), np.searchsorted(g.sites, 0)]
                                            + g.entries[np.searchsorted(g.sites, 1),
                                                        np.searchsorted(g.sites, 1)]),
                           "factor_error": float(np.max(np.abs(g.entries - np.outer(u[sites], u[sites])))),
                           "converged": g.converged})
        converged &= g.converged
    rep["gamma"] = gamma_rows
    rows = [[repr(r["E"]), repr(r["mu_mass"]), repr(r["u0"]), repr(r["u1"]), repr(r["reconstruction_error"])]
            for r in rep["atoms"]]
    csvs = {"expansion.csv": (["E", "mu_mass", "u0", "u1", "reconstruction_error"], rows)}
    return rep, csvs, converged


def _q_report(q):
    half = 0.5 * math.pi
    return {"q": q.to_dict(),
            "pvm": pvm_defects(q, AngleInterval(0.0, half), AngleInterval(0.25 * math.pi, 0.75 * math.pi)),
            "min_gap": q.min_gap()}


def task_decompose(model, p, seed):
    q = build_q(_whole_line_system(model, p["n"]))
    return _q_report(q), {"angles.csv": (["theta", "atom_count", "energies"], _atom_rows(q))}, True


def task_rs_sweep(model, p, seed):
    q = build_q(_whole_line_system(model, p["n"]))
    F = FunctionSpec.from_dict(p["F"])
    rows = rs_sweep(q, F, levels=int(p["levels"]), tag=p["tag"])
    gap = q.min_gap()
    atom_part = Partition.uniform(0.0, math.pi, max(2, int(math.ceil(2 * math.pi / gap))), "atom")
    report = {"F": F.to_dict(), "min_gap": gap, "rows": rows,
              "atom_tagged_defect": rs_integral(q, F, atom_part).defect}
    csv_rows = [[repr(r["mesh"]), r["cells"], repr(r["defect"]), int(r["below_gap"])] for r in rows]
    return report, {"rs_sweep.csv": (["mesh", "cells", "defect", "below_gap"], csv_rows)}, True


def task_lemma(model, p, seed):
    reports, rows = [], []
    for n in p["n"]:
        for zz in p["z"]:
            z = _cx(zz)
            rep = verify_inverse_structure(build_block(model, int(n), z, int(p["outer_depth"])), model)
            reports.append(rep)
            rows.append([n, repr(z.real), repr(z.imag)] +
                        [repr(rep[k]) for k in ("off_band_max", "band_deviation_max",
                                                "corner_error_minus", "corner_error_plus")])
    header = ["n", "z_re", "z_im", "off_band_max", "band_deviation_max", "corner_error_minus",
              "corner_error_plus"]
    return {"structure": reports}, {"lemma.csv": (header, rows)}, True


def task_symmetric(model, p, seed):
    lo, hi = model.explicit_range
    op = build_window(model, IndexWindow(lo, hi))
    q = build_q(eigendecompose(op))
    n = op.size
    R = np.zeros((n, n))
    for i, site in enumerate(op.window.indices):
        R[i, op.window.pos(1 - int(site))] = 1.0
    sym, anti = 0.5 * (np.eye(n) + R), 0.5 * (np.eye(n) - R)
    rep = _q_report(q)
    rep["window"] = [lo, hi]
    rep["distance_antisymmetric_pi4"] = float(np.linalg.norm(q.projector([0.25 * math.pi]) - anti, 2))
    rep["distance_symmetric_3pi4"] = float(np.linalg.norm(q.projector([0.75 * math.pi]) - sym, 2))
    return rep, {"angles.csv": (["theta", "atom_count", "energies"], _atom_rows(q))}, True


def task_pure_point(model, p, seed):
    op = build_whole_line(model, int(p["n"]))
    q = build_q(eigendecompose(op))
    F = FunctionSpec.from_dict(p["F"])
    total = pure_point_sum(q, F)
    target = apply_function(op, F)
    rep = _q_report(q)
    rep["F"] = F.to_dict()
    rep["defect"] = float(np.linalg.norm(total - target, 2))
    rep["excluded"] = list(q.excluded)
    return rep, {"angles.csv": (["theta", "atom_count", "energies"], _atom_rows(q))}, True


RUNNERS = {
    "mfunc": task_mfunc,
    "subordinacy-scan": task_subordinacy,
    "spectral": task_spectral,
    "expansion-check": task_expansion,
    "decompose": task_decompose,
    "rs-sweep": task_rs_sweep,
    "lemma-f-check": task_lemma,
    "symmetric-demo": task_symmetric,
    "pure-point-demo": task_pure_point,
}


# ------------------------------------------------------------ output

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


def write_outputs(out_dir: Path, scenario: dict, report: dict, csvs: dict, status: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {"scenario": scenario, "status": status, "version": __version__, "report": report}
    with open(out_dir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")
    for name, (header, rows) in sorted(csvs.items()):
        with open(out_dir / name, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if header is not None:
                w.writerow(header)
            w.writerows(rows)


def run(config_path: str | os.PathLike, out_dir: str | os.PathLike) -> int:
    """Run one scenario; returns the process exit code."""
    try:
        with open(config_path, encoding="utf-8") as fh:
            config = json.load(fh)
        scenario, model = resolve(config)
    except (OSError, json.JSONDecodeError, ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if not os.access(out, os.W_OK):
            raise PermissionError(f"output directory {out} is not writable")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    task = scenario["task"]
    try:
        report, csvs, converged = RUNNERS[task](model, scenario["params"], scenario["seed"])
    except (ConvergenceError, DegeneracyError, ConditioningError) as exc:
        write_outputs(out, scenario, {"error": str(exc)}, {}, "nonconverged")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (ModelError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    write_outputs(out, scenario, report, csvs, "ok" if converged else "nonconverged")
    return EXIT_OK if converged else EXIT_NONCONVERGED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jacobispec",
        description="Numerical spectral theory for Jacobi operators: scenario runner.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="Tasks: " + ", ".join(TASKS) + "\n\n" + CSV_DOC +
               "\nExit codes: 0 success, 2 invalid config or output directory, 3 non-convergence.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run a scenario config",
                           formatter_class=argparse.RawDescriptionHelpFormatter, epilog=CSV_DOC)
    run_p.add_argument("--config", required=True, help="path to the scenario JSON")
    run_p.add_argument("--out", required=True, help="output directory for report.json and CSV traces")
    sub.add_parser("schema", help="print the scenario JSON schema")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "schema":
        print(json.dumps({"scenario": SCHEMA, "params": PARAM_SCHEMAS, "defaults": DEFAULTS},
                         indent=2, sort_keys=True))
        return EXIT_OK
    return run(args.config, args.out)


if __name__ == "__main__":
    sys.exit(main())
