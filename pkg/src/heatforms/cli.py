"""Scenario-driven batch runner.

Subcommands:
    run         execute the pipelines requested by a scenario config
    selftest    quick (exact identities) or full (Monte Carlo oracles)
    paths-dump  write per-grid-point path records for a scenario

Exit codes: 0 success, 2 config validation failure, 3 runtime error,
4 criterion verdict divergent-at-resolution when the scenario demands a
finite integral.
"""

import argparse
import os
import sys

import numpy as np

from .reporting import write_csv, write_meta, write_report

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_DIVERGENT = 4


def _parser():
    p = argparse.ArgumentParser(prog="heatforms")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run scenario pipelines")
    run.add_argument("--config", required=True)
    run.add_argument("--seed-override", type=int, default=None)
    run.add_argument("--workers", type=int, default=None)
    run.add_argument("--output", default=None)
    run.add_argument("--allow-kato-override", action="store_true")

    st = sub.add_parser("selftest", help="run the built-in check suites")
    st.add_argument("--level", choices=["quick", "full"], default="quick")
    st.add_argument("--n-scale", type=float, default=1.0,
                    help="scale Monte Carlo path counts in the full suite")
    st.add_argument("--workers", type=int, default=1)
    st.add_argument("--output", default=None)

    pd = sub.add_parser("paths-dump", help="dump path records for a scenario")
    pd.add_argument("--config", required=True)
    pd.add_argument("--seed-override", type=int, default=None)
    pd.add_argument("--output", default=None)
    pd.add_argument("--n-paths", type=int, default=4)
    pd.add_argument("--format", choices=["csv", "npz"], default="csv")
    return p


def _run_pipelines(scn, workers, allow_kato, outdir):
    from .bismut import bismut_d, bismut_delta, semigroup_estimate
    from .bounds import criterion_integral, gradient_bound_check
    from .paths import kato_test
    from .scenario import build_potential

    report = {"id": scn.id, "seed": scn.seed, "pipelines": list(scn.pipelines)}
    exit_code = EXIT_OK
    est = scn.estimator
    x0 = np.asarray(est.get("x0", scn.g_model.default_point()), dtype=float)
    n_paths = int(est["n_paths"])
    dt = float(est["dt"])

    for s in scn.s_values:
        key = f"s={s:g}"
        block = {}
        if "semigroup" in scn.pipelines:
            r = semigroup_estimate(scn.g_model, scn.field, x0, s, n_paths, dt,
                                   seed=scn.seed, workers=workers,
                                   allow_kato_override=allow_kato)
            block["semigroup"] = r.to_dict()
        if "bismut" in scn.pipelines:
            rd = bismut_d(scn.g_model, scn.field, x0, s, n_paths, dt,
                          seed=scn.seed, workers=workers,
                          allow_kato_override=allow_kato)
            rdel = bismut_delta(scn.g_model, scn.field, x0, s, n_paths, dt,
                                seed=scn.seed, workers=workers,
                                allow_kato_override=allow_kato)
            block["bismut_d"] = rd.to_dict()
            block["bismut_delta"] = rdel.to_dict()
        if "bounds" in scn.pipelines:
            block["gradient_bounds"] = gradient_bound_check(
                scn.g_model, scn.field, x0, s, n_paths, dt, seed=scn.seed,
                workers=workers)
        if "criterion" in scn.pipelines:
            if scn.h_model is None:
                raise ValueError("criterion pipeline needs an h_model")
            q = scn.quadrature
            rep = criterion_integral(
                scn.g_model, scn.h_model, s,
                n_per_dim=int(q.get("n_per_dim", 16)),
                refine_levels=int(q.get("refine_levels", 2)),
                truncation_threshold=float(q.get("truncation_threshold", 1e-10)),
                radius=q.get("radius"))
            block["criterion"] = rep.to_dict()
            write_csv(os.path.join(outdir, f"criterion_{key}.csv"), rep.rows)
            if rep.verdict != "finite" and q.get("require_finite", False):
                exit_code = EXIT_DIVERGENT
        report[key] = block

    if "kato" in scn.pipelines:
        kspec = scn.kato
        w = build_potential(kspec, scn.g_model)
        rep = kato_test(
            scn.g_model, w,
            tuple(kspec.get("t_grid", (0.025, 0.05, 0.1))),
            [np.asarray(v, dtype=float) for v in
             kspec.get("x_samples", [scn.g_model.default_point()])],
            int(kspec.get("n_paths", 10000)),
            float(kspec.get("dt", 1e-3)), scn.seed)
        report["kato"] = {
            "t_grid": list(rep.t_grid),
            "sup_estimates": rep.sup_estimates.tolist(),
            "standard_errors": rep.standard_errors.tolist(),
            "verdict": rep.verdict, "c_gamma": rep.c_gamma,
            "gamma": rep.gamma, "intercept": rep.intercept,
            "intercept_se": rep.intercept_se, "note": rep.resolution_note}

    if "paths" in scn.pipelines:
        from .paths import sample_path
        p = sample_path(scn.g_model, x0, scn.s_values[0], dt, scn.seed,
                        transport_degrees=(0, 1))
        report["paths"] = {
            "n_grid": len(p.times),
            "final_point": p.points[-1].tolist(),
            "fk_integral": p.fk_integral,
            "substream": p.substream}
    return report, exit_code


def cmd_run(args):
    from .scenario import ConfigError, load_scenario
    try:
        scn = load_scenario(args.config)
    except (ConfigError, FileNotFoundError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    seed = args.seed_override if args.seed_override is not None else scn.seed
    if args.seed_override is not None:
        scn = type(scn)(**{**scn.__dict__, "seed": seed})
    workers = args.workers if args.workers is not None else scn.workers
    outdir = args.output or scn.output.get("directory", "out")
    outdir = os.path.join(outdir, scn.id)
    try:
        report, code = _run_pipelines(scn, workers, args.allow_kato_override,
                                      outdir)
    except Exception as e:  # noqa: BLE001 - map to the runtime exit code
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    write_report(os.path.join(outdir, "report.json"), report)
    write_meta(os.path.join(outdir, "meta.json"),
               {"workers": workers, "config": os.path.abspath(args.config)})
    print(f"report written to {os.path.join(outdir, 'report.json')}")
    return code


def cmd_selftest(args):
    from .selftest import run_full, run_quick
    if args.level == "quick":
        results = run_quick()
        for r in results:
            print(r.line())
    else:
        results = run_full(n_scale=args.n_scale, workers=args.workers)
    n_fail = sum(1 for r in results if not r.passed)
    if args.output:
        payload = [{"name": r.name, "passed": r.passed, "detail": r.detail,
                    "tolerance": r.tolerance} for r in results]
        write_report(os.path.join(args.output, f"selftest_{args.level}.json"),
                     {"level": args.level, "n_scale": args.n_scale,
                      "checks": payload, "failures": n_fail})
    print(f"{len(results) - n_fail}/{len(results)} checks passed")
    return EXIT_OK if n_fail == 0 else EXIT_RUNTIME


def cmd_paths_dump(args):
    from .paths import sample_path
    from .scenario import ConfigError, load_scenario
    try:
        scn = load_scenario(args.config)
    except (ConfigError, FileNotFoundError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    seed = args.seed_override if args.seed_override is not None else scn.seed
    outdir = args.output or scn.output.get("directory", "out")
    outdir = os.path.join(outdir, scn.id)
    os.makedirs(outdir, exist_ok=True)
    est = scn.estimator
    x0 = np.asarray(est.get("x0", scn.g_model.default_point()), dtype=float)
    try:
        rows = []
        arrays = {}
        for i in range(args.n_paths):
            p = sample_path(scn.g_model, x0, scn.s_values[0],
                            float(est["dt"]), seed, path_index=i,
                            transport_degrees=(0, 1))
            if args.format == "npz":
                arrays[f"path{i}_points"] = p.points
                arrays[f"path{i}_frames"] = p.frames
                arrays[f"path{i}_transport"] = p.transport
            else:
                for j, t in enumerate(p.times):
                    rows.append({
                        "path": i, "t": float(t),
                        "coords": p.points[j].tolist(),
                        "frame": p.frames[j].ravel().tolist(),
                        "q_diag": np.diag(p.transport[j]).tolist()})
        if args.format == "npz":
            np.savez(os.path.join(outdir, "paths.npz"), **arrays)
            print(f"wrote {os.path.join(outdir, 'paths.npz')}")
        else:
            write_csv(os.path.join(outdir, "paths.csv"), rows,
                      ["path", "t", "coords", "frame", "q_diag"])
            print(f"wrote {os.path.join(outdir, 'paths.csv')}")
    except Exception as e:  # noqa: BLE001
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    if args.command == "selftest":
        return cmd_selftest(args)
    if args.command == "paths-dump":
        return cmd_paths_dump(args)
    return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
