"""Command-line entry point.

Two families of subcommands share one binary:

- validation experiments (`symbranch <experiment> --config FILE [--seed N]
  [--out DIR]`), each printing one PASS/FAIL line per check and exiting 0 on
  success, 1 on a criterion failure, 2 on a config error;
- module runners (`exitlaw validate`, `sbm run`, `sbminf run`,
  `dual moment|coalesce|selfdual`, `voter run|compare`) that emit raw CSV
  samples and JSON summaries for ad-hoc use.
"""

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from symbranch import rng as rngmod
from symbranch.config import (ExperimentConfig, apply_overrides, build_graph,
                              config_from_dict)
from symbranch.duals import (coalescing_dual_estimate, moment_dual_estimate,
                             selfdual_check)
from symbranch.exitlaw import (U_AXIS, V_AXIS, ExitLawParams, exit_axis_prob,
                               exit_magnitude_cdf, sample_exit_batch)
from symbranch.experiments import (EXPERIMENTS, EXPERIMENT_DEFAULTS,
                                   run_experiment)
from symbranch.lattice import as_field
from symbranch.sbm_finite import (PairField, SdeConfig, default_dt,
                                  realized_brackets, simulate)
from symbranch.sbm_infinite import BoundaryField, pdmp_simulate, trotter_simulate
from symbranch.stats import hill_exponent, ks_statistic, pooled_mean_se
from symbranch.voter import gillespie_simulate, voter_vs_sbminf


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "handler"):
        parser.print_help()
        return 2
    try:
        return args.handler(args)
    except (ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="symbranch",
        description="Simulators and validation experiments for finite- and "
                    "infinite-rate symbiotic branching on finite graphs.")
    sub = parser.add_subparsers(dest="command")

    for name in EXPERIMENTS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        _common_flags(sp)
        sp.set_defaults(handler=_cmd_experiment, experiment=name)

    exitlaw = sub.add_parser("exitlaw", help="exit-law utilities")
    esub = exitlaw.add_subparsers(dest="subcommand")
    ev = esub.add_parser("validate", help="sample the exit law and summarize")
    ev.add_argument("--rho", type=float, required=True)
    ev.add_argument("--start", default="1,1", metavar="U,V")
    ev.add_argument("--samples", type=int, default=100000)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--out", default=None, metavar="DIR")
    ev.set_defaults(handler=_cmd_exitlaw_validate)

    sbm = sub.add_parser("sbm", help="finite-rate simulator")
    ssub = sbm.add_subparsers(dest="subcommand")
    sr = ssub.add_parser("run", help="simulate and emit fields + summary")
    _common_flags(sr)
    sr.set_defaults(handler=_cmd_sbm_run)

    sbminf = sub.add_parser("sbminf", help="infinite-rate simulator")
    isub = sbminf.add_subparsers(dest="subcommand")
    ir = isub.add_parser("run", help="simulate (method = trotter | pdmp)")
    _common_flags(ir)
    ir.set_defaults(handler=_cmd_sbminf_run)

    dual = sub.add_parser("dual", help="duality estimators")
    dsub = dual.add_subparsers(dest="subcommand")
    for kind in ("moment", "coalesce", "selfdual"):
        dp = dsub.add_parser(kind)
        _common_flags(dp)
        dp.set_defaults(handler=_cmd_dual, dual_kind=kind)

    voter = sub.add_parser("voter", help="voter process")
    vsub = voter.add_subparsers(dest="subcommand")
    vr = vsub.add_parser("run", help="Gillespie simulation")
    _common_flags(vr)
    vr.set_defaults(handler=_cmd_voter_run)
    vc = vsub.add_parser("compare", help="voter vs infinite-rate routes")
    _common_flags(vc)
    vc.set_defaults(handler=_cmd_voter_compare)

    return parser


def _common_flags(sp):
    sp.add_argument("--config", default=None, metavar="FILE",
                    help="JSON config; overrides built-in defaults")
    sp.add_argument("--seed", type=int, default=None,
                    help="override the config seed")
    sp.add_argument("--out", default=None, metavar="DIR",
                    help="directory for CSV/JSON artifacts")
    sp.add_argument("--set", action="append", default=[], metavar="KEY=VAL",
                    dest="overrides", help="dotted config override (JSON value)")


def _load_config(args, defaults=None, experiment=""):
    merged = dict(defaults or {})
    if args.config:
        with open(args.config) as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise ValueError("config file must hold a JSON object")
        loaded.pop("experiment", None)
        merged.update(loaded)
    merged["experiment"] = experiment
    cfg = config_from_dict(merged)
    if args.overrides:
        cfg = apply_overrides(cfg, args.overrides)
    if args.seed is not None:
        cfg = apply_overrides(cfg, [f"seed={args.seed}"])
    return cfg


def _emit_json(obj, out_dir, name):
    text = json.dumps(obj, indent=2, sort_keys=True)
    print(text)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, name), "w", newline="\n") as fh:
            fh.write(text + "\n")


def _emit_csv(header, rows, out_dir, name):
    if out_dir is None:
        return
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, name), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(c) if isinstance(c, float) else c for c in row])


def _cmd_experiment(args):
    cfg = _load_config(args, EXPERIMENT_DEFAULTS[args.experiment],
                       experiment=args.experiment)
    report = run_experiment(cfg, out_dir=args.out)
    for line in report.lines():
        print(line)
    print(f"RESULT: {'PASS' if report.passed else 'FAIL'} "
          f"({sum(r.passed for r in report.criteria)}/"
          f"{len(report.criteria)} checks)")
    return 0 if report.passed else 1


# ---------------------------------------------------------------------------
# module runners


def _pair_initial(cfg, g, field="initial", default=None):
    blk = getattr(cfg, field)
    if blk and ("u" in blk or "v" in blk):
        u = as_field(g, np.asarray(blk.get("u", np.zeros(g.n_sites)), float))
        v = as_field(g, np.asarray(blk.get("v", np.zeros(g.n_sites)), float))
        return PairField(u, v)
    if blk and "eta" in blk:
        eta = as_field(g, np.asarray(blk["eta"], float))
        return PairField(eta, 1.0 - eta)
    if default is not None:
        return default
    n = g.n_sites
    u = np.zeros(n)
    v = np.zeros(n)
    u[: n // 2] = 1.0
    v[n // 2:] = 1.0
    return PairField(u, v)


def _cmd_exitlaw_validate(args):
    try:
        u0, v0 = (float(x) for x in args.start.split(","))
    except Exception:
        raise ValueError(f"--start must be 'U,V', got {args.start!r}")
    if u0 < 0 or v0 < 0:
        raise ValueError("start must lie in the closed quadrant")
    params = ExitLawParams(args.rho)
    rng = rngmod.stream(args.seed, "exitlaw-cli")
    uu, vv = sample_exit_batch(params, np.full(args.samples, u0),
                               np.full(args.samples, v0), rng)
    on_u = uu > 0
    mags = np.maximum(uu, vv)
    summary = {
        "rho": args.rho,
        "start": [u0, v0],
        "samples": args.samples,
        "seed": args.seed,
        "axis_prob_u_empirical": float(on_u.mean()),
    }
    interior = u0 > 0 and v0 > 0 and abs(args.rho) < 1
    if interior:
        summary["axis_prob_u_exact"] = exit_axis_prob(params, (u0, v0), U_AXIS)
        for axis, sel in ((U_AXIS, on_u), (V_AXIS, ~on_u)):
            m = mags[sel]
            summary[f"ks_{axis.lower()}"] = ks_statistic(
                m, lambda r: exit_magnitude_cdf(params, (u0, v0), axis, r))
        summary["hill_exponent"] = hill_exponent(mags)
        summary["hill_target_p"] = params.p
        mean_u, se_u = pooled_mean_se(uu)
        summary.update(mean_u=mean_u, mean_u_se=se_u, mean_u_expected=u0,
                       mean_u_z=(mean_u - u0) / se_u if se_u > 0 else 0.0)
    _emit_csv(("axis", "magnitude"),
              [(U_AXIS if up else V_AXIS, float(m))
               for up, m in zip(on_u, mags)],
              args.out, "exitlaw_samples.csv")
    _emit_json(summary, args.out, "exitlaw_summary.json")
    return 0


def _cmd_sbm_run(args):
    cfg = _load_config(args, experiment="sbm-run")
    g = build_graph(cfg.graph)
    initial = _pair_initial(cfg, g)
    times = list(cfg.times) if cfg.times else [cfg.horizon]
    probes = list(cfg.probes) if cfg.probes else list(range(g.n_sites))
    sde = SdeConfig(gamma=cfg.gamma, rho=cfg.rho, horizon=cfg.horizon,
                    dt=cfg.dt if cfg.dt else default_dt(cfg.gamma),
                    replicas=cfg.replicas, seed=cfg.seed, scheme=cfg.scheme)
    obs = simulate(g, sde, initial, probes=probes, times=times)
    rows = []
    for r in range(cfg.replicas):
        for ti, t in enumerate(obs.times):
            for pi, site in enumerate(probes):
                rows.append((r, float(t), site,
                             float(obs.probe_u[r, ti, pi]),
                             float(obs.probe_v[r, ti, pi])))
    _emit_csv(("replica", "time", "site", "u", "v"), rows, args.out,
              "sbm_fields.csv")
    ok = ~obs.aborted
    mean_u, se_u = pooled_mean_se(obs.total_u[ok])
    mean_v, se_v = pooled_mean_se(obs.total_v[ok])
    br = realized_brackets(obs)
    _emit_json({
        "config": cfg.to_dict(),
        "mean_total_u": mean_u, "se_total_u": se_u,
        "mean_total_v": mean_v, "se_total_v": se_v,
        "bracket_ratio": br["ratio"],
        "bracket_quad_u": br["quad_u"],
        "bracket_quad_v": br["quad_v"],
        "bracket_cross": br["cross"],
        "predicted_quad": br["predicted_quad"],
        "clamp_total": int(np.sum(obs.clamp_count)),
        "aborted": int(obs.aborted.sum()),
    }, args.out, "sbm_summary.json")
    return 0


def _cmd_sbminf_run(args):
    cfg = _load_config(args, experiment="sbminf-run")
    g = build_graph(cfg.graph)
    pair = _pair_initial(cfg, g)
    initial = BoundaryField(pair.u, pair.v)
    summary = {"config": cfg.to_dict(), "method": cfg.method}
    if cfg.method == "trotter":
        res = trotter_simulate(g, cfg.rho, initial, cfg.horizon, cfg.eps,
                               replicas=cfg.replicas, seed=cfg.seed,
                               times=cfg.times)
        if len(res["times"]):
            times = res["times"]
            snaps_u, snaps_v = res["snapshots_u"], res["snapshots_v"]
        else:
            times = [res["effective_horizon"]]
            snaps_u = res["u"][:, None, :]
            snaps_v = res["v"][:, None, :]
        summary["effective_horizon"] = res["effective_horizon"]
    else:
        res = pdmp_simulate(g, cfg.rho, initial, cfg.horizon, cfg.trunc_eps,
                            replicas=cfg.replicas, seed=cfg.seed,
                            flow_substep=cfg.flow_substep)
        times = [cfg.horizon]
        snaps_u = res["u"][:, None, :]
        snaps_v = res["v"][:, None, :]
        summary["jumps_total"] = int(res["n_jumps"].sum())
        summary["swaps_total"] = int(res["n_swaps"].sum())
        summary["violations_total"] = int(res["violations"].sum())
        summary["zeroed_mass_total"] = float(res["zeroed_mass"].sum())
        _emit_csv(("replica", "n_jumps", "n_swaps", "violations",
                   "zeroed_mass"),
                  [(r, int(res["n_jumps"][r]), int(res["n_swaps"][r]),
                    int(res["violations"][r]), float(res["zeroed_mass"][r]))
                   for r in range(cfg.replicas)],
                  args.out, "sbminf_diagnostics.csv")
    rows = []
    for r in range(cfg.replicas):
        for ti, t in enumerate(times):
            for site in range(g.n_sites):
                rows.append((r, float(t), site,
                             float(snaps_u[r, ti, site]),
                             float(snaps_v[r, ti, site])))
    _emit_csv(("replica", "time", "site", "u", "v"), rows, args.out,
              "sbminf_fields.csv")
    u, v = res["u"], res["v"]
    mean_u, se_u = pooled_mean_se(u.sum(axis=1))
    mean_v, se_v = pooled_mean_se(v.sum(axis=1))
    summary.update(mean_total_u=mean_u, se_total_u=se_u,
                   mean_total_v=mean_v, se_total_v=se_v,
                   max_product=float(np.max(u * v)))
    _emit_json(summary, args.out, "sbminf_summary.json")
    return 0


def _cmd_dual(args):
    cfg = _load_config(args, experiment=f"dual-{args.dual_kind}")
    g = build_graph(cfg.graph)
    if args.dual_kind == "moment":
        initial = _pair_initial(cfg, g, default=PairField(
            np.full(g.n_sites, 1.0), np.full(g.n_sites, 0.5)))
        u_sites = list(cfg.u_sites) if cfg.u_sites else [0]
        v_sites = list(cfg.v_sites) if cfg.v_sites else [min(1, g.n_sites - 1)]
        mean, se = moment_dual_estimate(
            g, cfg.gamma, cfg.rho, initial, u_sites, v_sites, cfg.horizon,
            replicas=cfg.replicas, seed=cfg.seed)
        _emit_json({"config": cfg.to_dict(), "estimate": mean, "se": se,
                    "replicas": cfg.replicas, "u_sites": u_sites,
                    "v_sites": v_sites}, args.out, "dual_moment.json")
    elif args.dual_kind == "coalesce":
        initial = _pair_initial(cfg, g)
        sites = list(cfg.sites) if cfg.sites else [0, min(1, g.n_sites - 1)]
        mean, se = coalescing_dual_estimate(g, initial.u, sites, cfg.horizon,
                                            replicas=cfg.replicas,
                                            seed=cfg.seed)
        _emit_json({"config": cfg.to_dict(), "estimate": mean, "se": se,
                    "replicas": cfg.replicas, "sites": sites}, args.out,
                   "dual_coalesce.json")
    else:
        x0 = _pair_initial(cfg, g)
        y0 = _pair_initial(cfg, g, field="initial_y", default=None)
        if getattr(cfg, "initial_y") is None:
            raise ValueError("selfdual needs an initial_y block")
        sde = SdeConfig(gamma=cfg.gamma, rho=cfg.rho, horizon=cfg.horizon,
                        dt=cfg.dt if cfg.dt else default_dt(cfg.gamma),
                        replicas=cfg.replicas, seed=cfg.seed,
                        scheme=cfg.scheme)
        chk = selfdual_check(g, sde, x0, y0)
        _emit_json({
            "config": cfg.to_dict(),
            "evolved_x": [chk["mean_evolved_x"].real,
                          chk["mean_evolved_x"].imag],
            "evolved_y": [chk["mean_evolved_y"].real,
                          chk["mean_evolved_y"].imag],
            "gap_re": chk["gap_re"], "gap_im": chk["gap_im"],
            "se_gap_re": chk["se_gap_re"], "se_gap_im": chk["se_gap_im"],
            "replicas": cfg.replicas, "aborted": chk["aborted"],
        }, args.out, "dual_selfdual.json")
    return 0


def _voter_eta(cfg, g):
    if cfg.initial and "eta" in cfg.initial:
        return np.asarray(cfg.initial["eta"], dtype=int)
    n = g.n_sites
    eta = np.zeros(n, dtype=int)
    eta[: n // 2] = 1
    return eta


def _cmd_voter_run(args):
    cfg = _load_config(args, experiment="voter-run")
    g = build_graph(cfg.graph)
    eta0 = _voter_eta(cfg, g)
    res = gillespie_simulate(g, eta0, cfg.horizon, replicas=cfg.replicas,
                             seed=cfg.seed, times=cfg.times)
    snaps = res["opinions"]
    rows = []
    for r in range(cfg.replicas):
        for ti, t in enumerate(res["times"]):
            for site in range(g.n_sites):
                rows.append((r, float(t), site, int(snaps[r, ti, site])))
    _emit_csv(("replica", "time", "site", "opinion"), rows, args.out,
              "voter_fields.csv")
    final = snaps[:, -1, :]
    consensus = float(np.mean((final == final[:, :1]).all(axis=1)))
    _emit_json({
        "config": cfg.to_dict(),
        "mean_density": float(final.mean()),
        "consensus_fraction": consensus,
        "mean_flips": float(res["flips"].mean()),
    }, args.out, "voter_summary.json")
    return 0


def _cmd_voter_compare(args):
    cfg = _load_config(args, experiment="voter-compare")
    g = build_graph(cfg.graph)
    eta0 = _voter_eta(cfg, g)
    pairs = [tuple(p) for p in cfg.pairs] if cfg.pairs else \
        [(0, 1), (0, g.n_sites // 2)]
    cmp = voter_vs_sbminf(g, eta0, cfg.horizon, pairs, replicas=cfg.replicas,
                          seed=cfg.seed, trotter_eps=cfg.eps)
    report = {"config": cfg.to_dict(),
              "pdmp_magnitudes_exact": cmp["pdmp_magnitudes_exact"],
              "pdmp_rates_exact": cmp["pdmp_rates_exact"]}
    for route in ("voter", "coalescing", "trotter", "pdmp"):
        report[route] = {f"{x}-{y}": list(cmp[route][(x, y)])
                         for (x, y) in pairs}
    gaps = {}
    for ra, rb in (("voter", "trotter"), ("voter", "pdmp"),
                   ("trotter", "pdmp")):
        for pair in pairs:
            ma, sa = cmp[ra][pair]
            mb, sb = cmp[rb][pair]
            gaps[f"{ra}/{rb}/{pair[0]}-{pair[1]}"] = {
                "gap": abs(ma - mb),
                "combined_se": math.hypot(sa, sb),
            }
    report["gaps"] = gaps
    _emit_json(report, args.out, "voter_compare.json")
    return 0


if __name__ == "__main__":
    sys.exit(main())
