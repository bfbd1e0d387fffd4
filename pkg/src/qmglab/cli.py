"""Batch front-end: run benchmark cases, emit report.json and figure CSVs.

Modes
-----
classical     assemble and solve one case; convergence series + report
qmg           classical run plus the full history-vector emulation,
              success probabilities, and resource accounting
tiny-quantum  explicit dilated-statevector check at tiny scale
tables        verify the built-in resource targets for all seven cases
figures       size sweep (qubit-multiple series) plus the per-case
              convergence, block-ratio, and p-versus-cycles series

Configuration comes from flags, optionally layered over a TOML file
(flags win).  Reports are deterministic except for the timestamp field.
Exit status: 0 on success, 1 when a check fails or a run diverges, 2 on
invalid usage.
"""

from __future__ import annotations

import argparse
import datetime
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

import jsonschema

from . import analysis, blockenc, cases, multigrid, qmg
from .fem import ProblemCase, assemble_1d, assemble_2d

__all__ = ["main", "build_parser", "REPORT_SCHEMA"]

MODES = ("classical", "qmg", "tiny-quantum", "tables", "figures")

#: Oracle-equivalence checks in qmg mode are skipped above this size.
EQUIVALENCE_LIMIT = 20000

REPORT_SCHEMA = {
    "type": "object",
    "required": ["mode", "spec", "checks", "timestamp"],
    "properties": {
        "mode": {"enum": list(MODES)},
        "spec": {"type": "object"},
        "timestamp": {"type": "string"},
        "resources": {
            "type": ["object", "null"],
            "properties": {
                "len_x": {"type": "integer"},
                "qubits_work": {"type": "integer"},
                "qubits_state": {"type": "integer"},
                "xi": {"type": "integer"},
                "Z": {"type": ["number", "null"]},
                "log2_Z": {"type": ["number", "null"]},
                "amplification_rounds": {"type": ["number", "null"]},
            },
        },
        "success": {
            "type": ["object", "null"],
            "properties": {
                "p_index": {"type": ["number", "null"]},
                "lemma5_bound": {"type": ["number", "null"]},
                "lemma6_bound": {"type": ["number", "null"]},
                "p_anc_estimate": {"type": ["number", "null"]},
            },
        },
        "convergence": {
            "type": ["object", "null"],
            "properties": {
                "cycles": {"type": "integer"},
                "epsilon_tilde": {"type": "number"},
            },
        },
        "checks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "pass"],
                "properties": {"name": {"type": "string"}, "pass": {"type": "boolean"}},
            },
        },
        "tables": {"type": ["array", "null"]},
        "tiny_quantum": {"type": ["object", "null"]},
        "figures": {"type": ["object", "null"]},
    },
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qmglab",
        description="Multigrid history-vector emulation lab",
    )
    parser.add_argument("--mode", choices=MODES, required=True)
    parser.add_argument("--dim", type=int, choices=(1, 2))
    parser.add_argument("--case", type=int, dest="case_id")
    parser.add_argument("--elements", type=str, help="E or E,E2 (powers of two)")
    parser.add_argument("--levels", type=int, help="grid level count")
    parser.add_argument("--cycles", type=int, help="total V-cycle count")
    parser.add_argument("--nu", type=int, help="smoothing step parameter")
    parser.add_argument("--copies", type=str, help="T, T-1, or an integer")
    parser.add_argument("--out", type=str, default="qmglab-out")
    parser.add_argument("--pessimism", type=float, default=1.0)
    parser.add_argument("--config", type=str, help="TOML key-value file")
    return parser


class UsageError(Exception):
    pass


def _merge_config(args: argparse.Namespace) -> dict:
    spec = {
        "mode": args.mode,
        "dim": args.dim,
        "case": args.case_id,
        "elements": args.elements,
        "levels": args.levels,
        "cycles": args.cycles,
        "nu": args.nu,
        "copies": args.copies,
        "out": args.out,
        "pessimism": args.pessimism,
    }
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        with open(path, "rb") as fh:
            filed = tomllib.load(fh)
        for key, value in filed.items():
            if key not in spec:
                raise UsageError(f"unknown config key: {key}")
            if spec[key] in (None, parser_default(key)):
                spec[key] = value
    return spec


def parser_default(key: str):
    return {"out": "qmglab-out", "pessimism": 1.0}.get(key)


def _parse_elements(raw, dim: int) -> tuple:
    if raw is None:
        return None
    if isinstance(raw, (list, tuple)):
        parts = [int(v) for v in raw]
    else:
        parts = [int(v) for v in str(raw).split(",") if v]
    if dim == 1 and len(parts) == 1:
        return (parts[0],)
    if dim == 2:
        if len(parts) == 1:
            return (parts[0], parts[0])
        if len(parts) == 2:
            return tuple(parts)
    raise UsageError(f"bad --elements for dim {dim}: {raw!r}")


def _resolve_run(spec: dict) -> dict:
    """Fill case defaults from the registry and validate the run spec."""
    dim = spec.get("dim") or 1
    case_id = spec.get("case") or 1
    key = (dim, case_id)
    if key not in cases.REFERENCE_CASES:
        raise UsageError(f"unknown case: dim={dim} case={case_id}")
    ref = cases.REFERENCE_CASES[key]
    elements = _parse_elements(spec.get("elements"), dim) or ref.elements
    levels = spec.get("levels") or ref.levels
    cycles = spec.get("cycles") or ref.cycles
    nu = spec.get("nu") or ref.nu
    for value, name in ((levels, "levels"), (cycles, "cycles"), (nu, "nu")):
        if int(value) <= 0:
            raise UsageError(f"{name} must be positive")
    for n_el in elements:
        if n_el < 2 or n_el & (n_el - 1):
            raise UsageError(f"element counts must be powers of two, got {n_el}")
    return {
        "dim": dim,
        "case": case_id,
        "elements": elements,
        "levels": int(levels),
        "cycles": int(cycles),
        "nu": int(nu),
        "copies": spec.get("copies") if spec.get("copies") is not None else "T",
        "pessimism": float(spec.get("pessimism") or 1.0),
        "ref": ref,
    }


def _assemble(run: dict):
    case = ProblemCase(dimension=run["dim"], case_id=run["case"])
    if run["dim"] == 1:
        return assemble_1d(run["elements"][0], case)
    return assemble_2d(run["elements"][0], run["elements"][1], case)


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else None
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_,)):
        return bool(value)
    return value


def _write_report(report: dict, out_dir: Path) -> None:
    report = _jsonable(report)
    jsonschema.validate(report, REPORT_SCHEMA)
    with open(out_dir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _base_report(mode: str, spec: dict) -> dict:
    clean = {k: v for k, v in spec.items() if k != "ref"}
    return {
        "mode": mode,
        "spec": _jsonable(clean),
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "resources": None,
        "success": None,
        "convergence": None,
        "tables": None,
        "tiny_quantum": None,
        "figures": None,
        "checks": [],
    }


def _is_monotone_to_target(errors, target: float) -> bool:
    """Non-increasing error until the target is first reached."""
    prev = float("inf")
    for eps in errors:
        if eps > prev:
            return False
        prev = eps
        if eps <= target:
            return True
    return False


def _run_classical(run: dict, out_dir: Path, report: dict):
    system = _assemble(run)
    config = multigrid.MgConfig(
        num_levels=run["levels"], num_cycles=run["cycles"], nu=run["nu"]
    )
    hierarchy = multigrid.build_hierarchy(system, config)
    solution, trace = multigrid.solve(system, config, hierarchy=hierarchy)
    multigrid.write_trace_csv(trace, out_dir / "convergence.csv")

    eps_target = run["ref"].epsilon_target
    report["convergence"] = {
        "cycles": run["cycles"],
        "epsilon_tilde": trace.errors[-1],
    }
    report["checks"].append(
        {
            "name": "epsilon_monotone_to_target",
            "pass": _is_monotone_to_target(trace.errors, eps_target),
        }
    )
    report["checks"].append(
        {"name": "epsilon_target_reached", "pass": min(trace.errors) <= eps_target}
    )
    return system, config, hierarchy, solution, trace


def _mode_classical(run: dict, out_dir: Path, report: dict) -> None:
    system, config, hierarchy, _, trace = _run_classical(run, out_dir, report)
    tv = 2 * config.num_levels * config.nu + 2 * (config.num_levels - 1) - 1
    indexer = qmg.BlockIndexer(
        cal_V=config.num_cycles - 1,
        cal_L=config.num_levels - 1,
        nu=config.nu,
        copies=qmg.resolve_copy_count(run["copies"], config.num_cycles * tv),
    )
    resource = analysis.qubit_report(
        indexer,
        system.free_dof_count,
        cycles_used=config.num_cycles,
        epsilon_tilde=trace.errors[-1],
    )
    report["resources"] = _resource_dict(resource, None, None)


def _resource_dict(resource, z, log2_z) -> dict:
    return {
        "len_x": resource.len_x,
        "qubits_work": resource.qubits_work,
        "qubits_state": resource.qubits_total_state,
        "xi": resource.xi,
        "Z": z,
        "log2_Z": log2_z,
        "amplification_rounds": resource.amplification_rounds,
    }


def _history_matches_trace(x, trace, config, rtol: float = 1e-12) -> bool:
    """Every history block equals its trace entry to relative rtol."""
    indexer = x.indexer
    nu = indexer.nu
    last = indexer.cal_L
    for cycle in range(indexer.cal_V + 1):
        for level in range(indexer.cal_L + 1):
            for step in range(0, 2 * nu):
                idx = (
                    indexer.i_pre(cycle, level, step)
                    if step < nu
                    else indexer.i_post(cycle, level, step)
                )
                expected = trace.iterate(cycle, level, step)
                got = x.blocks[idx]
                scale = max(float(np.linalg.norm(expected)), 1.0)
                if float(np.linalg.norm(got - expected)) > rtol * scale:
                    return False
            if level < last:
                r, rc = trace.residual_pair(cycle, level)
                for idx, expected in (
                    (indexer.i_pre(cycle, level, nu), r),
                    (indexer.i_pre(cycle, level, nu + 1), rc),
                ):
                    got = x.blocks[idx]
                    scale = max(float(np.linalg.norm(expected)), 1.0)
                    if float(np.linalg.norm(got - expected)) > rtol * scale:
                        return False
    return True


def _mode_qmg(run: dict, out_dir: Path, report: dict) -> None:
    system, config, hierarchy, _, trace = _run_classical(run, out_dir, report)
    x = qmg.run_qmg(system, config, copies=run["copies"], hierarchy=hierarchy)
    qmg.write_block_norms_csv(x, out_dir / "block_norms.csv")

    reference = multigrid.reference_solution(hierarchy, config)
    success = analysis.index_probability(
        x, reference=reference, initial_guess=np.zeros(x.finest_dim)
    )
    schedule = qmg.build_schedule(x.indexer)
    log2_z = analysis.z_factor_log2(schedule, hierarchy, run["pessimism"])
    z = analysis.z_factor(schedule, hierarchy, run["pessimism"])
    p_anc = 2.0 ** (-2.0 * log2_z) if log2_z < 500 else 0.0

    analysis.write_block_ratio_csv(success, out_dir / "block_ratios.csv")
    analysis.write_p_series_csv(
        analysis.p_versus_cycles(x), out_dir / "p_vs_cycles.csv"
    )

    resource = analysis.qubit_report(
        x.indexer,
        system.free_dof_count,
        z=z,
        cycles_used=config.num_cycles,
        epsilon_tilde=trace.errors[-1],
    )
    report["resources"] = _resource_dict(
        resource, z if math.isfinite(z) else None, log2_z
    )
    report["success"] = {
        "p_index": success.p_index,
        "lemma5_bound": success.lemma5_bound,
        "lemma6_bound": success.lemma6_bound,
        "p_anc_estimate": p_anc,
    }

    monotone = all(
        trace.errors[i + 1] <= trace.errors[i] or trace.errors[i] <= 1e-11
        for i in range(len(trace.errors) - 1)
    )
    if monotone:
        report["checks"].append(
            {"name": "index_probability_bound", "pass": success.p_index >= 0.5}
        )
    if system.free_dof_count <= EQUIVALENCE_LIMIT:
        report["checks"].append(
            {
                "name": "oracle_equivalence",
                "pass": _history_matches_trace(x, trace, config),
            }
        )
    report["checks"].append(
        {
            "name": "length_law",
            "pass": x.logical_length
            == cases.history_length(
                config.num_levels,
                config.num_cycles,
                config.nu,
                system.free_dof_count,
                copies=x.copy_count,
            ),
        }
    )


def _mode_tiny_quantum(spec: dict, run: dict, out_dir: Path, report: dict) -> None:
    # tiny defaults: two levels, nu=2, one cycle, 4 elements per direction
    default_elements = (4,) if run["dim"] == 1 else (4, 4)
    elements = _parse_elements(spec.get("elements"), run["dim"]) or default_elements
    levels = int(spec.get("levels") or 2)
    cycles = int(spec.get("cycles") or 1)
    nu = int(spec.get("nu") or 2)
    run = dict(run, elements=elements, levels=levels, cycles=cycles, nu=nu)
    system = _assemble(run)
    config = multigrid.MgConfig(num_levels=levels, num_cycles=cycles, nu=nu)

    result = blockenc.tiny_end_to_end(config, system, copies=None)

    hierarchy = multigrid.build_hierarchy(system, config)
    x = qmg.run_qmg(system, config, hierarchy=hierarchy)
    schedule = qmg.build_schedule(x.indexer)
    z_structured = analysis.z_factor(schedule, hierarchy, run["pessimism"])
    z_rel_err = abs(z_structured - result["Z"]) / result["Z"]

    report["tiny_quantum"] = _jsonable(dict(result, z_structured=z_structured))
    report["checks"].extend(
        [
            {"name": "direction_match", "pass": result["direction_residual"] <= 1e-10},
            {"name": "probability_identity", "pass": result["p_abs_diff"] <= 1e-12},
            {"name": "z_consistency", "pass": z_rel_err <= 1e-10},
        ]
    )
    resource = analysis.qubit_report(
        x.indexer, x.finest_dim, z=result["Z"], cycles_used=cycles
    )
    report["resources"] = _resource_dict(
        resource, result["Z"], math.log2(result["Z"])
    )


def _mode_tables(out_dir: Path, report: dict) -> None:
    rows = cases.tables_report()
    report["tables"] = rows
    for row in rows:
        tag = f"{row['dimension']}d_case{row['case_id']}"
        for cell in ("n", "len_x", "log2_n", "log2_len"):
            report["checks"].append(
                {"name": f"{cell}_{tag}", "pass": bool(row[f"{cell}_match"])}
            )
    header = [
        "dimension", "case_id", "n", "n_target", "n_match",
        "len_x", "len_x_target", "len_x_match",
        "log2_n", "log2_n_target", "log2_n_match",
        "log2_len", "log2_len_target", "log2_len_match",
    ]
    with open(out_dir / "tables.csv", "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(row[k]) for k in header) + "\n")


def _sweep_sizes(ref) -> list:
    sizes = []
    scale = 1
    while ref.elements[0] // scale >= 32 and all(e // scale >= 2 for e in ref.elements):
        sizes.append(tuple(e // scale for e in ref.elements))
        scale *= 2
    return list(reversed(sizes))


def _sweep_one(args) -> tuple:
    dim, case_id, elements, levels, cycles, nu, tol = args
    case = ProblemCase(dimension=dim, case_id=case_id)
    system = (
        assemble_1d(elements[0], case)
        if dim == 1
        else assemble_2d(elements[0], elements[1], case)
    )
    config = multigrid.MgConfig(num_levels=levels, num_cycles=cycles, nu=nu)
    _, trace = multigrid.solve(system, config)
    used = analysis.converged_cycles(trace, tol)
    return (
        system.free_dof_count,
        levels - 1,
        nu,
        used,
        trace.errors[used - 1],
    )


def _mode_figures(run: dict, out_dir: Path, report: dict) -> None:
    ref = run["ref"]
    tol = ref.epsilon_target
    jobs = []
    for elements in _sweep_sizes(ref):
        shrink = (ref.elements[0] // elements[0]).bit_length() - 1
        levels = ref.levels - shrink
        jobs.append(
            (run["dim"], run["case"], elements, levels, 2 * ref.nominal_cycles, ref.nu, tol)
        )

    workers = int(os.environ.get("QMG_THREADS", "1") or "1")
    if workers > 1 and len(jobs) > 1:
        import concurrent.futures

        with concurrent.futures.ProcessPoolExecutor(
            max_workers=min(workers, len(jobs))
        ) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(job) for job in jobs]

    points = [analysis.SweepPoint(*row) for row in results]
    rows = analysis.qubit_multiple_series(points, copies_policy=run["copies"])
    analysis.write_qubit_multiple_csv(rows, out_dir / "qubit_multiple.csv")

    # per-case series at the canonical size
    system, config, hierarchy, _, trace = _run_classical(run, out_dir, report)
    x = qmg.run_qmg(system, config, copies=run["copies"], hierarchy=hierarchy)
    success = analysis.index_probability(x)
    analysis.write_block_ratio_csv(success, out_dir / "block_ratios.csv")
    analysis.write_p_series_csv(
        analysis.p_versus_cycles(x), out_dir / "p_vs_cycles.csv"
    )
    report["figures"] = {
        "qubit_multiple": rows,
        "sweep_sizes": [list(j[2]) for j in jobs],
    }
    report["checks"].append(
        {
            "name": "qubit_multiple_trend",
            "pass": rows[-1]["ratio"] <= rows[0]["ratio"],
        }
    )


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        spec = _merge_config(args)
        mode = spec["mode"]
        run = None
        if mode != "tables":
            run = _resolve_run(spec)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2

    out_dir = Path(spec["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    report = _base_report(mode, spec)

    try:
        if mode == "classical":
            _mode_classical(run, out_dir, report)
        elif mode == "qmg":
            _mode_qmg(run, out_dir, report)
        elif mode == "tiny-quantum":
            _mode_tiny_quantum(spec, run, out_dir, report)
        elif mode == "tables":
            _mode_tables(out_dir, report)
        elif mode == "figures":
            _mode_figures(run, out_dir, report)
    except multigrid.DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    _write_report(report, out_dir)
    failed = [c["name"] for c in report["checks"] if not c["pass"]]
    if failed:
        print("failed checks: " + ", ".join(failed), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
