"""Command-line entry point: reproducible runs of every pipeline stage.

Subcommands: flow (events file -> flow CSV), observe (flow or events ->
observables log), land (closed-loop landing sim), eval (accuracy
scenarios), bench (throughput sweep).  Global flags --config/--seed/
--out work on every subcommand; each run writes its outputs plus the
fully resolved configuration next to them.  Exit codes: 0 success,
1 runtime failure, 2 usage/config/IO error.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import metrics
from .config import (ConfigError, RunConfig, build_run_config, dump_config,
                     load_config)
from .events import EventFormatError, read_events
from .landing import run_closed_loop, write_run_log_csv
from .observables import read_rates_csv, write_observables_csv
from .planefit import read_flow_csv, write_flow_csv
from .render import DomainError

USAGE_EXIT = 2
RUNTIME_EXIT = 1


class CliError(Exception):
    """Invalid input surfaced to the user (exits with USAGE_EXIT)."""


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", type=Path, default=None,
                    help="flat key=value config file")
    sp.add_argument("--seed", type=int, default=None,
                    help="override the run seed")
    sp.add_argument("--out", type=Path, default=Path("."),
                    help="output directory (created if missing)")


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else build_run_config({})
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _outdir(args) -> Path:
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_sidecar(out: Path, cfg: RunConfig, name: str) -> None:
    (out / f"{name}_config.txt").write_text(dump_config(cfg))


def cmd_flow(args) -> int:
    cfg = _resolve_config(args)
    fcfg = cfg.flow
    if args.rho_f_max is not None:
        fcfg = replace(fcfg, rho_f_max=args.rho_f_max)
    if not args.events.exists():
        raise CliError(f"no such input: {args.events}")
    events = read_events(args.events, width=cfg.camera.width,
                         height=cfg.camera.height)
    flow, stats = metrics.run_flow(events, cfg.camera, fcfg)
    out = _outdir(args)
    write_flow_csv(out / "flow.csv", flow)
    _write_sidecar(out, replace(cfg, flow=fcfg), "flow")
    span_s = ((events["t"][-1] - events["t"][0]) * 1e-6
              if events.shape[0] > 1 else 0.0)
    rate = flow.shape[0] / span_s if span_s > 0 else 0.0
    print(f"events: {stats.n_events}  (post-refractory {stats.n_accepted})")
    print(f"flow vectors: {stats.n_emitted}  ({rate:.1f}/s)")
    print(f"density: {metrics.stream_density(stats):.2f}%")
    return 0


def cmd_observe(args) -> int:
    cfg = _resolve_config(args)
    if (args.flow is None) == (args.events is None):
        raise CliError("give exactly one of --flow or --events")
    if args.flow is not None:
        if not args.flow.exists():
            raise CliError(f"no such input: {args.flow}")
        flow = read_flow_csv(args.flow)
    else:
        if not args.events.exists():
            raise CliError(f"no such input: {args.events}")
        events = read_events(args.events, width=cfg.camera.width,
                             height=cfg.camera.height)
        flow, _ = metrics.run_flow(events, cfg.camera, cfg.flow)

    rates_fn = None
    if args.rates is not None:
        rates = read_rates_csv(args.rates)
        if flow.shape[0]:
            t_end = flow["t"][-1] * 1e-6
            if rates["t_s"][-1] < t_end - 1e-9:
                raise CliError(
                    f"rates file ends at {rates['t_s'][-1]:.3f}s but flow "
                    f"runs to {t_end:.3f}s")

        def rates_fn(t, _r=rates):
            return (float(np.interp(t, _r["t_s"], _r["p"])),
                    float(np.interp(t, _r["t_s"], _r["q"])),
                    float(np.interp(t, _r["t_s"], _r["r"])))

    samples = metrics.run_estimator_over_flow(flow, cfg.camera, cfg.estimator,
                                              rates_fn=rates_fn)
    out = _outdir(args)
    write_observables_csv(out / "observables.csv", samples)
    _write_sidecar(out, cfg, "observe")
    print(f"flow vectors in: {flow.shape[0]}")
    print(f"observable samples out: {len(samples)}")
    return 0


def cmd_land(args) -> int:
    cfg = _resolve_config(args)
    lcfg = cfg.resolved_landing()
    over = {}
    if args.setpoint is not None:
        over["vz_setpoint"] = args.setpoint
    if args.texture is not None:
        over["texture"] = args.texture
    if args.z0 is not None:
        over["z0_m"] = args.z0
    if args.ideal:
        over["ideal_observables"] = True
    if over:
        lcfg = replace(lcfg, **over)
    result = run_closed_loop(lcfg, cfg.camera)
    out = _outdir(args)
    write_run_log_csv(out / "run_log.csv", result.log)
    _write_sidecar(out, replace(cfg, landing=lcfg), "land")
    for key, val in result.summary().items():
        print(f"{key}: {val}")
    return 0


def _eval_translation(cfg: RunConfig, out: Path) -> None:
    rows = []
    cases = [("checkerboard", 100.0), ("checkerboard", 300.0),
             ("checkerboard", 500.0), ("roadmap", 300.0)]
    for texture, speed in cases:
        events, truth = metrics.make_translation_scenario(
            speed, duration_s=min(1.0, 120.0 / speed), texture_name=texture,
            seed=cfg.seed, intr=cfg.camera, rcfg=cfg.render)
        flow, stats = metrics.run_flow(events, cfg.camera, cfg.flow)
        u_gt, v_gt = metrics.gt_flow_pps(cfg.camera, truth[0], flow["x_u"],
                                         flow["y_u"])
        mean, sd = metrics.pee_stats(flow["u"], flow["v"], u_gt, v_gt)
        rows.append((texture, speed, flow.shape[0],
                     metrics.stream_density(stats), mean, sd))
        print(f"{texture} @ {speed:.0f} px/s: PEE {mean:.2f} +/- {sd:.2f} "
              f"px/s, density {rows[-1][3]:.1f}%")
    with open(out / "pee_table.csv", "w") as fh:
        fh.write("texture,gt_flow_pps,n_flow,density_pct,pee_mean_pps,"
                 "pee_sd_pps\n")
        for r in rows:
            fh.write("%s,%g,%d,%.4g,%.6g,%.6g\n" % r)


def _eval_div_sweep(cfg: RunConfig, out: Path) -> None:
    th_all, er_all = [], []
    for w, z0, z1 in ((0.4, 3.5, 0.4), (1.1, 3.0, 0.72)):
        events, truth = metrics.make_descent_scenario(
            w, z0, z1, texture_name="roadmap", seed=cfg.seed,
            intr=cfg.camera, rcfg=cfg.render)
        flow, _ = metrics.run_flow(events, cfg.camera, cfg.flow)
        samples = metrics.run_estimator_over_flow(
            flow, cfg.camera, cfg.estimator,
            t_end_s=float(truth["t_s"][-1]))
        th, er = metrics.divergence_errors(samples, truth)
        th_all.append(th)
        er_all.append(er)
    th = np.concatenate(th_all)
    er = np.concatenate(er_all)
    model = metrics.fit_quadratic(th, er)
    with open(out / "quadratic_model.csv", "w") as fh:
        fh.write("p0,p1,p2,eps_at_1\n")
        fh.write("%.6g,%.6g,%.6g,%.6g\n" % (model.p0, model.p1, model.p2,
                                            model.predict(1.0)))
    with open(out / "error_percentiles.csv", "w") as fh:
        fh.write("theta_z,eps_q25,eps_q50,eps_q75\n")
        for row in model.percentiles:
            fh.write("%.6g,%.6g,%.6g,%.6g\n" % tuple(row))
    print(f"quadratic model: eps = {model.p0:.4f} + {model.p1:.4f}|tz| "
          f"+ {model.p2:.4f} tz^2")
    print(f"predicted eps at |theta_z|=1: {model.predict(1.0):.4f}")


def cmd_eval(args) -> int:
    cfg = _resolve_config(args)
    out = _outdir(args)
    if args.scenario == "translation":
        _eval_translation(cfg, out)
    elif args.scenario == "div_sweep":
        _eval_div_sweep(cfg, out)
    else:
        raise CliError(f"unknown scenario '{args.scenario}'")
    _write_sidecar(out, cfg, "eval")
    return 0


def cmd_bench(args) -> int:
    cfg = _resolve_config(args)
    if args.events is not None:
        if not args.events.exists():
            raise CliError(f"no such input: {args.events}")
        events = read_events(args.events, width=cfg.camera.width,
                             height=cfg.camera.height)
    else:
        events, _ = metrics.make_translation_scenario(
            12.0, duration_s=args.duration, texture_name="checkerboard",
            seed=cfg.seed, intr=cfg.camera, rcfg=cfg.render)
    caps = metrics.DEFAULT_CAPS if args.sweep else (math.inf,)
    rows = metrics.bench_throughput(events, cfg.camera, cfg.flow, caps=caps,
                                    repetitions=args.repetitions)
    out = _outdir(args)
    metrics.write_sweep_csv(out / "bench_sweep.csv", rows)
    _write_sidecar(out, cfg, "bench")
    for r in rows:
        cap = "inf" if math.isinf(r["rho_f_max"]) else f"{r['rho_f_max']:.0f}"
        print(f"rho_f_max={cap}: {r['us_per_event_mean']:.3f} "
              f"+/- {r['us_per_event_sd']:.3f} us/event")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="evflow",
        description="Event-based normal flow, visual observables, and "
                    "constant-divergence landing tools")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("flow", help="events file -> normal flow CSV")
    p.add_argument("events", type=Path, help="input .csv or .evb event file")
    p.add_argument("--rho-f-max", type=float, default=None,
                   help="cap on emitted flow vectors per second")
    _add_common(p)
    p.set_defaults(fn=cmd_flow)

    p = sub.add_parser("observe", help="flow or events -> observables log")
    p.add_argument("--flow", type=Path, default=None, help="flow CSV input")
    p.add_argument("--events", type=Path, default=None,
                   help="event file input (runs the flow stage first)")
    p.add_argument("--rates", type=Path, default=None,
                   help="attitude-rates CSV for derotation")
    _add_common(p)
    p.set_defaults(fn=cmd_observe)

    p = sub.add_parser("land", help="closed-loop constant-divergence landing")
    p.add_argument("--setpoint", type=float, default=None,
                   help="commanded divergence (1/s)")
    p.add_argument("--texture", type=str, default=None,
                   choices=("checkerboard", "roadmap"))
    p.add_argument("--z0", type=float, default=None, help="start height (m)")
    p.add_argument("--ideal", action="store_true",
                   help="bypass vision; feed true divergence to the loop")
    _add_common(p)
    p.set_defaults(fn=cmd_land)

    p = sub.add_parser("eval", help="accuracy scenarios")
    p.add_argument("--scenario", type=str, default="div_sweep",
                   choices=("div_sweep", "translation"))
    _add_common(p)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("bench", help="throughput benchmark")
    p.add_argument("--events", type=Path, default=None,
                   help="event file to benchmark (default: synthesized)")
    p.add_argument("--sweep", action="store_true",
                   help="sweep the output-rate cap")
    p.add_argument("--repetitions", type=int, default=10)
    p.add_argument("--duration", type=float, default=4.0,
                   help="synthesized stream length (s)")
    _add_common(p)
    p.set_defaults(fn=cmd_bench)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (CliError, ConfigError, EventFormatError, FileNotFoundError,
            IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except (ValueError, ArithmeticError, DomainError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return RUNTIME_EXIT


if __name__ == "__main__":
    sys.exit(main())
