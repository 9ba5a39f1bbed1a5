"""Command-line interface.

Every subcommand reads CSV inputs (or simulates), writes a JSON summary
plus CSV tables into --out-dir, and renders matplotlib figures next to
the delimited output where a figure is meaningful.  All randomness is
controlled by --seed.  Exit codes: 0 success, 2 usage, 3 data errors,
4 numerical failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import estimator, inference, io, plots, simulate, weighted
from .errors import DyadlinkError
from .smoothing import SmoothingPlan, select_bandwidth


def _data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--edges", required=True, help="edge list CSV (i,j,a)")
    p.add_argument("--covariates", help="pairwise covariate CSV (i,j,<name>...)")
    p.add_argument("--node-attrs", help="node attribute CSV (i,<name>...)")
    p.add_argument("--constructors",
                   help="attr:kind[,attr:kind...] with kind in "
                        "absdiff/equality/raw (node-attribute mode)")
    p.add_argument("--special-regressor", required=True,
                   help="covariate column with the +/-1-normalized coefficient")
    p.add_argument("--discrete", default="",
                   help="comma-separated covariate names treated as discrete")
    p.add_argument("--nodes", type=int, help="node count (sparse edge mode)")
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--drop-isolated", action="store_true")
    p.add_argument("--weighted-levels",
                   help="comma-separated ascending tie levels (weighted mode)")


def _run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out-dir", default=".")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bandwidth", type=float)
    p.add_argument("--B", type=int, default=2000, dest="n_draws")
    p.add_argument("--level", type=float, default=0.05)
    p.add_argument("--threshold-t", type=float, default=2.0)
    p.add_argument("--m-tilde", type=int, default=1)
    p.add_argument("--kernel", choices=["bw2", "bw4"], default="bw2")
    p.add_argument("--m-floor", type=float, default=1e-3)
    p.add_argument("--sign", type=int, choices=[-1, 1],
                   help="skip data-driven sign determination")


def _load_network(args):
    n, a = io.load_edges(args.edges, n=args.nodes)
    if args.covariates:
        names, X = io.load_pairwise_covariates(args.covariates, n)
    elif args.node_attrs and args.constructors:
        attr_names, W = io.load_node_attributes(args.node_attrs, n)
        ctors = []
        for item in args.constructors.split(","):
            name, _, kind = item.partition(":")
            ctors.append((name.strip(), kind.strip()))
        from .design import PairIndexing
        names, X = io.build_pairwise_from_nodes(attr_names, W, ctors,
                                                PairIndexing(n))
    else:
        raise DyadlinkError(
            "provide --covariates, or --node-attrs with --constructors")
    return io.assemble_network(n, a, names, X, args.special_regressor,
                               standardize=args.standardize,
                               drop_isolated=args.drop_isolated)


def _fit_options(args) -> estimator.FitOptions:
    discrete = ()
    return estimator.FitOptions(bandwidth=args.bandwidth, kernel=args.kernel,
                                m_floor=args.m_floor, sign=args.sign,
                                discrete_z=discrete)


def _discrete_indices(net, args):
    names = [s.strip() for s in args.discrete.split(",") if s.strip()]
    return tuple(net.znames.index(nm) for nm in names if nm in net.znames)


def _fit(args):
    net = _load_network(args)
    opts = _fit_options(args)
    if args.discrete:
        opts.discrete_z = _discrete_indices(net, args)
        opts.auto_discrete = False
    return net, estimator.fit(net, opts)


def _fit_summary(f) -> dict:
    return {
        "n": f.n,
        "sign": f.sign,
        "bandwidth": f.bandwidth,
        "alpha": f.alpha,
        "beta": f.beta,
        "eta": f.eta,
        "sigma_eps2": f.sigma_eps2,
        "znames": list(f.net.znames),
    }


def cmd_simulate(args) -> int:
    spec = simulate.DgpSpec(n=args.n, schedule=args.schedule, knob=args.knob,
                            noise=args.noise)
    net, truth = simulate.generate_network(spec, args.seed)
    out = args.out_dir
    io.write_network(net, os.path.join(out, "edges.csv"),
                     os.path.join(out, "covariates.csv"))
    io.write_json(os.path.join(out, "truth.json"), {
        "n": spec.n, "schedule": spec.schedule, "knob": spec.knob,
        "noise": spec.noise, "seed": args.seed, "alpha": truth["alpha"],
        "beta": truth["beta"], "eta": truth["eta"],
        "omega": truth["omega"] if truth["omega"] is not None else None,
    })
    return 0


def cmd_fit(args) -> int:
    _, f = _fit(args)
    out = args.out_dir
    io.write_json(os.path.join(out, "fit.json"), _fit_summary(f))
    io.write_csv(os.path.join(out, "effects.csv"),
                 ["node", "alpha", "beta"],
                 ((i + 1, f.alpha[i], f.beta[i]) for i in range(f.n)))
    return 0


def cmd_select_bandwidth(args) -> int:
    net = _load_network(args)
    opts = _fit_options(args)
    if args.discrete:
        opts.discrete_z = _discrete_indices(net, args)
        opts.auto_discrete = False
    cont, disc = estimator._split_z_columns(net.z, opts)
    plan = SmoothingPlan.build(net.x1,
                               zc=net.z[:, cont] if cont else None,
                               zd=net.z[:, disc] if disc else None,
                               kernel=opts.kernel)
    h, grid, losses = select_bandwidth(plan, net.x1, floor=opts.m_floor)
    out = args.out_dir
    io.write_json(os.path.join(out, "bandwidth.json"),
                  {"bandwidth": h, "kernel": opts.kernel})
    io.write_csv(os.path.join(out, "bandwidth.csv"), ["h", "loss"],
                 zip(grid, losses))
    plots.render_loss_curve(grid, losses, h,
                            os.path.join(out, "bandwidth.png"))
    return 0


def cmd_test_sparse(args) -> int:
    _, f = _fit(args)
    rep = inference.test_sparse(f, block=args.which, B=args.n_draws,
                                seed=args.seed, level=args.level)
    io.write_json(os.path.join(args.out_dir, "test_sparse.json"),
                  {**rep.to_dict(), "bandwidth": f.bandwidth})
    return 0


def cmd_recover_support(args) -> int:
    _, f = _fit(args)
    est = inference.recover_support(f, t=args.threshold_t)
    out = args.out_dir
    io.write_json(os.path.join(out, "support.json"), {
        "threshold_t": est.threshold_t,
        "alpha_nodes": est.alpha_nodes,
        "beta_nodes": est.beta_nodes,
    })
    io.write_csv(os.path.join(out, "support.csv"),
                 ["node", "alpha", "alpha_cut", "alpha_selected",
                  "beta", "beta_cut", "beta_selected"],
                 ((i + 1, f.alpha[i], est.alpha_cut[i],
                   int(i + 1 in est.alpha_nodes),
                   f.beta[i] if i < f.n - 1 else 0.0,
                   est.beta_cut[i] if i < f.n - 1 else 0.0,
                   int(i + 1 in est.beta_nodes) if i < f.n - 1 else 0)
                  for i in range(f.n)))
    return 0


def cmd_test_heterogeneity(args) -> int:
    _, f = _fit(args)
    rep = inference.test_heterogeneity(f, block=args.which,
                                       m_tilde=args.m_tilde, B=args.n_draws,
                                       seed=args.seed, level=args.level,
                                       full=args.full)
    io.write_json(os.path.join(args.out_dir, "test_heterogeneity.json"),
                  {**rep.to_dict(), "bandwidth": f.bandwidth})
    return 0


def cmd_ci(args) -> int:
    _, f = _fit(args)
    lo_t, hi_t = inference.ci_effects(f, args.level)
    lo_e, hi_e = inference.ci_slopes(f, args.level)
    out = args.out_dir
    rows = [(f"alpha_{i + 1}", f.theta[i], lo_t[i], hi_t[i])
            for i in range(f.n)]
    rows += [(f"beta_{j + 1}", f.theta[f.n + j], lo_t[f.n + j], hi_t[f.n + j])
             for j in range(f.n - 1)]
    rows += [(f"eta_{k + 1}", f.eta[k], lo_e[k], hi_e[k])
             for k in range(f.eta.size)]
    io.write_csv(os.path.join(out, "ci.csv"),
                 ["parameter", "estimate", "lower", "upper"], rows)
    io.write_json(os.path.join(out, "ci.json"), {
        "level": args.level, "bandwidth": f.bandwidth,
        "parameters": [r[0] for r in rows],
        "estimate": [r[1] for r in rows],
        "lower": [r[2] for r in rows],
        "upper": [r[3] for r in rows],
    })
    plots.render_effects(f.theta, lo_t, hi_t, f.n,
                         os.path.join(out, "effects.png"))
    return 0


def cmd_gof(args) -> int:
    net, f = _fit(args)
    rows, summary = io.gof_degrees(net, f.fitted_ties())
    out = args.out_dir
    io.write_csv(os.path.join(out, "gof.csv"),
                 ["node", "out_obs", "out_fit", "in_obs", "in_fit"], rows)
    io.write_json(os.path.join(out, "gof.json"),
                  {**summary, "bandwidth": f.bandwidth, "sign": f.sign})
    plots.render_gof_scatter(rows, os.path.join(out, "gof.png"))
    return 0


def cmd_montecarlo(args) -> int:
    spec = simulate.DgpSpec(n=args.n, schedule=args.schedule, knob=args.knob,
                            noise=args.noise)
    kwargs = {}
    if args.study in ("sparse-test", "heterogeneity-test"):
        kwargs.update(B=args.n_draws, level=args.level)
    if args.study == "heterogeneity-test":
        kwargs.update(m_tilde=args.m_tilde)
    if args.study == "support":
        kwargs.update(t=args.threshold_t)
    if args.study in ("estimation", "weighted"):
        kwargs.update(level=args.level)
    opts = estimator.FitOptions(bandwidth=args.bandwidth, kernel=args.kernel,
                                m_floor=args.m_floor,
                                sign=args.sign if args.sign else 1)
    report = simulate.run_mc(spec, args.study, args.reps, seed=args.seed,
                             options=opts, **kwargs)
    out = args.out_dir
    io.write_json(os.path.join(out, "mc.json"), report.to_dict())
    if report.targets:
        io.write_csv(os.path.join(out, "mc_targets.csv"),
                     ["target", "truth", "bias", "sd", "cp"],
                     ((k, v["truth"], v["bias"], v["sd"], v["cp"])
                      for k, v in report.targets.items()))
        plots.render_mc_targets(report.targets, args.level,
                                os.path.join(out, "mc.png"))
    if report.tests:
        io.write_csv(os.path.join(out, "mc_tests.csv"),
                     ["test", "reject_rate"],
                     ((k, v["reject_rate"]) for k, v in report.tests.items()))
    if report.support:
        io.write_csv(os.path.join(out, "mc_support.csv"),
                     ["block", "m_mean", "m_sd", "fp_mean", "fn_mean",
                      "exact_rate"],
                     ((k, v["m_mean"], v["m_sd"], v["fp_mean"], v["fn_mean"],
                       v["exact_rate"]) for k, v in report.support.items()))
    return 0


def cmd_fit_weighted(args) -> int:
    net = _load_network(args)
    if not args.weighted_levels:
        raise DyadlinkError("--weighted-levels is required for fit-weighted")
    levels = [float(v) for v in args.weighted_levels.split(",")]
    opts = _fit_options(args)
    if args.discrete:
        opts.discrete_z = _discrete_indices(net, args)
        opts.auto_discrete = False
    f = weighted.fit_weighted(net, levels, opts)
    cis = weighted.ci_weighted(f, args.level)
    out = args.out_dir
    io.write_json(os.path.join(out, "fit_weighted.json"), {
        "n": f.n, "sign": f.sign, "bandwidth": f.bandwidth,
        "levels": f.levels, "alpha": f.alpha, "beta": f.beta,
        "omega": f.omega, "eta": f.eta, "sigma_weps2": f.sigma_weps2,
        "sigma_wq2": f.sigma_wq2,
    })
    rows = [(f"omega_{l + 1}", f.omega[l], cis["omega"][0][l],
             cis["omega"][1][l]) for l in range(f.omega.size)]
    rows += [(f"eta_{k + 1}", f.eta[k], cis["eta"][0][k], cis["eta"][1][k])
             for k in range(f.eta.size)]
    io.write_csv(os.path.join(out, "ci_weighted.csv"),
                 ["parameter", "estimate", "lower", "upper"], rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dyadlink",
        description="Semiparametric estimation and inference for directed "
                    "dyadic link-formation models")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="generate a synthetic network")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--schedule", default="consistency",
                    choices=["consistency", "sparse", "support",
                             "heterogeneity", "weighted"])
    sp.add_argument("--knob", type=float, default=0.0)
    sp.add_argument("--noise", default="normal",
                    choices=sorted(simulate.NOISES))
    sp.add_argument("--out-dir", default=".")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_simulate)

    for name, func, extra in [
        ("fit", cmd_fit, None),
        ("select-bandwidth", cmd_select_bandwidth, None),
        ("test-sparse", cmd_test_sparse, "which"),
        ("recover-support", cmd_recover_support, None),
        ("test-heterogeneity", cmd_test_heterogeneity, "which-full"),
        ("ci", cmd_ci, None),
        ("gof", cmd_gof, None),
        ("fit-weighted", cmd_fit_weighted, None),
    ]:
        sp = sub.add_parser(name)
        _data_flags(sp)
        _run_flags(sp)
        if extra:
            sp.add_argument("--which", default="alpha",
                            choices=["alpha", "beta", "both"])
        if extra == "which-full":
            sp.add_argument("--full", action="store_true",
                            help="maximize over all pairwise contrasts")
        sp.set_defaults(func=func)

    sp = sub.add_parser("montecarlo", help="run a Monte-Carlo study")
    sp.add_argument("--study", required=True,
                    choices=["estimation", "sparse-test", "support",
                             "heterogeneity-test", "weighted"])
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--schedule", default="consistency",
                    choices=["consistency", "sparse", "support",
                             "heterogeneity", "weighted"])
    sp.add_argument("--knob", type=float, default=0.0)
    sp.add_argument("--noise", default="normal", choices=sorted(simulate.NOISES))
    sp.add_argument("--reps", type=int, required=True)
    _run_flags(sp)
    sp.set_defaults(func=cmd_montecarlo)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DyadlinkError as exc:
        payload = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(payload), file=sys.stderr)
        return exc.exit_code
    except np.linalg.LinAlgError as exc:
        print(json.dumps({"error": "LinAlgError", "message": str(exc)}),
              file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
