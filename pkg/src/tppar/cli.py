"""Command line front end: ``tppar <command> <spec.yaml> [options]``.

Exit codes: 0 all checks passed, 2 a structural condition failed, 3 a
numerical error or a tolerance violation.
"""

import argparse
import os
import sys
import warnings

import numpy as np

from .errors import ConditionFailure, TPParError
from .io import (dumps_json, fmt_float, parse_spec, read_field, wire_to_symbol_traces,
                 write_csv, write_field, write_json)

EXIT_OK, EXIT_CONDITION, EXIT_NUMERICAL = 0, 2, 3


def _cap_threads():
    n = os.environ.get("TPPAR_THREADS")
    if not n:
        return
    try:
        import numba
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
    except (ImportError, ValueError):
        pass


def _fields(spec, grid):
    from .grid import take_half
    from .oracles import boundary_from_modes, field_from_modes
    half = spec.domain == "half"
    if spec.f_file:
        f = read_field(spec.f_file)
        if f.data.shape != grid.shape:
            raise TPParError(f"field file {spec.f_file} does not match the spec grid")
        f = type(f)(grid, f.data, f.state)
        f = take_half(f) if half else f
    else:
        f = field_from_modes(grid, spec.f_modes, half=half)
    g = [boundary_from_modes(grid, gm) for gm in wire_to_symbol_traces(spec, spec.g_modes)]
    return f, g


def _task_check(spec, out):
    from .symbols import check_all
    target = spec.tuple_ if spec.domain == "half" else spec.interior
    report = check_all(target)
    d = report.to_dict()
    d["domain"] = spec.domain
    write_json(os.path.join(out, "check.json"), d)
    return EXIT_OK if report.ok else EXIT_CONDITION, d


def _solve(spec):
    grid = spec.grid()
    f, g = _fields(spec, grid)
    if spec.domain == "whole":
        from .wholespace import WholeSpaceProblem, solve_wholespace
        return grid, f, g, solve_wholespace(WholeSpaceProblem(spec.interior, grid, f))
    from .halfspace import HalfSpaceProblem, solve_general
    prob = HalfSpaceProblem(spec.tuple_, grid, f, g, spec.boundary_kind)
    return grid, f, g, solve_general(prob)


def _norm_rows(spec, f, g, u):
    from .grid import TraceSpaceSpec, lp_norm, sobolev_norm
    from .oracles import manufactured_residual
    rows = [("lp_norm_u", lp_norm(u, spec.p)),
            ("sobolev_norm_u", sobolev_norm(u, spec.p, spec.m)),
            ("lp_norm_f", lp_norm(f, spec.p))]
    if spec.domain == "whole":
        from .wholespace import estimate_ratio_ws
        rows.append(("residual", manufactured_residual(u, f, spec.interior, u.grid, "whole")))
        if np.any(u.data):
            rows.append(("estimate_ratio", estimate_ratio_ws(u, f, 2 * spec.m, spec.p, spec.m)))
    else:
        from .halfspace import estimate_ratio_hs
        rows.append(("residual", manufactured_residual(u, f, spec.interior, u.grid, "half")))
        ts = TraceSpaceSpec(spec.m, spec.p, tuple(spec.tuple_.boundary_orders))
        rows.append(("estimate_ratio", estimate_ratio_hs(u, f, g, spec.p, ts)))
    return rows


def _task_solve(spec, out):
    grid, f, g, u = _solve(spec)
    write_field(os.path.join(out, "solution.tpf"), u)
    rows = _norm_rows(spec, f, g, u)
    write_csv(os.path.join(out, "norms.csv"), ["quantity", "value"], rows)
    res = dict(rows)["residual"]
    ok = res <= spec.tolerances["residual"]
    return EXIT_OK if ok else EXIT_NUMERICAL, {"residual": res}


def _task_verify(spec, out):
    from .oracles import manufactured_residual, oracle_disagreement
    grid, f, g, u = _solve(spec)
    rows = [("residual", manufactured_residual(u, f, spec.interior, grid, spec.domain),
             spec.tolerances["residual"])]
    if spec.domain == "half":
        kind = spec.boundary_kind
        dis = oracle_disagreement(u, spec.tuple_, spec.f_modes,
                                  wire_to_symbol_traces(spec, spec.g_modes), kind)
        rows.append(("oracle_disagreement", dis, spec.tolerances["oracle"]))
    table = [(name, val, tol, "pass" if val <= tol else "fail") for name, val, tol in rows]
    write_csv(os.path.join(out, "verify.csv"), ["check", "value", "tolerance", "status"], table)
    ok = all(r[3] == "pass" for r in table)
    return EXIT_OK if ok else EXIT_NUMERICAL, {r[0]: r[1] for r in table}


def _task_oracle_compare(spec, out):
    from .halfspace import HalfSpaceProblem, solve_general
    from .oracles import boundary_from_modes, field_from_modes, oracle_disagreement
    if spec.domain != "half":
        raise TPParError("oracle-compare needs a half-space spec")
    base = spec.grid()
    g_modes = wire_to_symbol_traces(spec, spec.g_modes)
    rows = []
    for factor in (1, 2, 4):
        grid = base.refined(factor, [spec.n - 1]) if factor > 1 else base
        f = field_from_modes(grid, spec.f_modes, half=True)
        g = [boundary_from_modes(grid, gm) for gm in g_modes]
        u = solve_general(HalfSpaceProblem(spec.tuple_, grid, f, g, spec.boundary_kind))
        rows.append([grid.N[-1], oracle_disagreement(u, spec.tuple_, spec.f_modes, g_modes,
                                                    spec.boundary_kind)])
    for i in range(len(rows)):
        rows[i].append(float(np.log2(rows[i - 1][1] / rows[i][1])) if i else float("nan"))
    write_csv(os.path.join(out, "oracle_compare.csv"), ["N_n", "disagreement", "order"], rows)
    ok = rows[0][1] <= spec.tolerances["oracle"]
    return EXIT_OK if ok else EXIT_NUMERICAL, {"disagreement": rows[0][1]}


def _task_sweep(spec, out, samples=None, seed=None):
    from .oracles import estimate_sweep
    samples = int(samples if samples is not None else spec.sweep.get("samples", 100))
    seed = int(seed if seed is not None else spec.sweep.get("seed", 0))
    grid = spec.grid()
    if spec.domain == "whole":
        rep = estimate_sweep(spec.interior, grid, samples, spec.p, seed, "whole")
    else:
        rep = estimate_sweep(spec.tuple_, grid, samples, spec.p, seed, "half",
                             spec.boundary_kind, refine_axes=[spec.n - 1])
    write_json(os.path.join(out, "sweep.json"), rep.to_dict())
    write_csv(os.path.join(out, "sweep.csv"), ["sample", "ratio", "ratio_refined"],
              [(i, a, b) for i, (a, b) in enumerate(zip(rep.ratios, rep.ratios_refined))])
    ok = np.isfinite(rep.supremum) and rep.drift < spec.tolerances["sweep_drift"]
    return EXIT_OK if ok else EXIT_NUMERICAL, {"supremum": rep.supremum, "drift": rep.drift}


TASKS = {"check": _task_check, "solve": _task_solve, "verify": _task_verify,
         "sweep": _task_sweep, "oracle-compare": _task_oracle_compare}


def _failure_report(out, task, exc):
    rep = {"task": task, "error": type(exc).__name__, "message": str(exc),
           "witness": getattr(exc, "witness", None)}
    write_json(os.path.join(out, f"{task}_error.json"), rep)
    return rep


def run(spec, out_dir, tasks=None, **opts):
    """Execute the spec's task list; returns (exit code, summary dict)."""
    os.makedirs(out_dir, exist_ok=True)
    code = EXIT_OK
    summary = {}
    for task in tasks or spec.tasks:
        try:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                kw = opts if task == "sweep" else {}
                c, info = TASKS[task](spec, out_dir, **kw)
            if caught:
                info = dict(info, warnings=sorted({str(w.message) for w in caught}))
        except ConditionFailure as exc:
            c, info = exc.exit_code, _failure_report(out_dir, task, exc)
        except TPParError as exc:
            c, info = exc.exit_code, _failure_report(out_dir, task, exc)
        summary[task] = dict(info, exit_code=c)
        code = max(code, c)
    return code, summary


def _summarise(summary):
    lines = []
    for task, info in summary.items():
        status = "ok" if info["exit_code"] == 0 else f"exit {info['exit_code']}"
        extras = ", ".join(f"{k}={fmt_float(v)}" for k, v in info.items()
                           if isinstance(v, float))
        lines.append(f"{task}: {status}" + (f" ({extras})" if extras else ""))
        if "message" in info:
            lines.append(f"  {info['error']}: {info['message']}")
            if info.get("witness"):
                lines.append(f"  witness: {dumps_json(info['witness'], indent=0).strip()}")
    return "\n".join(lines)


def main(argv=None):
    parser = argparse.ArgumentParser(prog="tppar", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("check", "solve", "verify", "sweep", "oracle-compare", "run"):
        p = sub.add_parser(name)
        p.add_argument("spec")
        p.add_argument("-o", "--out", default=None, help="output directory (default: next to spec)")
        if name == "sweep":
            p.add_argument("--samples", type=int, default=None)
            p.add_argument("--seed", type=int, default=None)
    args = parser.parse_args(argv)
    _cap_threads()
    try:
        with open(args.spec, encoding="utf-8") as fh:
            spec = parse_spec(fh.read())
    except TPParError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    out = args.out or os.path.splitext(args.spec)[0] + "_out"
    tasks = None if args.command == "run" else [args.command]
    opts = {}
    if args.command == "sweep":
        opts = {"samples": args.samples, "seed": args.seed}
    code, summary = run(spec, out, tasks, **opts)
    print(_summarise(summary))
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
