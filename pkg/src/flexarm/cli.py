"""Command-line front end: ``flexarm <subcommand> [--config PATH] [--out DIR] ...``.

Exit status: 0 success, 2 configuration error, 3 LQR design failure,
4 simulation divergence.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import os
import sys

import numpy as np

from . import __version__
from .config import Config, load_config, snapshot
from .dynamics import SingleLinkPlant, beam_modes
from .errors import ConfigError, DesignError, DivergenceError, IntegrationError, ModelError
from .fastctl import design_fast
from .sim import epsilon_sweep, fit_slope, metrics, run, write_csv

EXIT_OK, EXIT_CONFIG, EXIT_DESIGN, EXIT_DIVERGED = 0, 2, 3, 4

METRIC_KEYS = (
    "rms_error",
    "max_error",
    "steady_max_error",
    "steady_deflection_rms",
    "transient_deflection_peak",
    "control_effort",
    "cost",
    "n_steady_samples",
)


def make_plant(cfg: Config) -> SingleLinkPlant:
    return SingleLinkPlant(cfg.modal, cfg.sim.viscous, cfg.sim.coulomb)


def simulate(cfg: Config, controller: str):
    """Run one controller on the configured scenario; returns (trace, metrics)."""
    plant = make_plant(cfg)
    tr = run(plant, cfg.reference, cfg.sliding, cfg.sim, controller, cfg.weights)
    return tr, metrics(tr, cfg.weights)


def compare_runs(cfg: Config, controllers=("slow-only", "composite")):
    """Run each controller on the identical scenario and seed.

    Returns ``(traces, metrics, ratio)`` where ratio is the steady deflection
    RMS of the first controller over that of the second.
    """
    traces, mets = {}, {}
    for i, c in enumerate(controllers):
        key = c if c not in traces else f"{c}#{i}"
        traces[key], mets[key] = simulate(cfg, c)
    a, b = (mets[k].steady_deflection_rms for k in traces)
    ratio = None if (a is None or b is None or b == 0) else a / b
    return traces, mets, ratio


def _fmt(v) -> str:
    if v is None:
        return "absent"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_manifest(path, cfg: Config, command: str, args) -> None:
    snap = snapshot(cfg)
    lines = [
        "# run manifest; usable as --config to reproduce the run",
        "[manifest]",
        f"command = {command}",
        f"controller = {getattr(args, 'controller', '') or ''}",
        f"config = {args.config or '(defaults)'}",
        f"out = {args.out}",
        f"version = {__version__}",
        f"timestamp = {_dt.datetime.now(_dt.timezone.utc).isoformat(timespec='seconds')}",
        "",
    ]
    for section, items in snap.items():
        lines.append(f"[{section}]")
        lines += [f"{k} = {v}" for k, v in items.items()]
        lines.append("")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))


def _ensure_out(path) -> str:
    os.makedirs(path, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(cfg: Config, args) -> int:
    from .plotting import plot_panels

    tr, mt = simulate(cfg, args.controller)
    out = _ensure_out(args.out)
    write_csv(tr, os.path.join(out, "trace.csv"))
    with open(os.path.join(out, "metrics.txt"), "w", encoding="utf-8") as fh:
        for k in METRIC_KEYS:
            fh.write(f"{k} = {_fmt(getattr(mt, k))}\n")
    write_manifest(os.path.join(out, "manifest.txt"), cfg, "simulate", args)
    plot_panels(tr, os.path.join(out, "fig_panels.svg"), title=f"{args.controller} control")
    for k in METRIC_KEYS:
        print(f"{k:28s} {_fmt(getattr(mt, k))}")
    return EXIT_OK


def cmd_compare(cfg: Config, args) -> int:
    from .plotting import plot_deflection_comparison

    traces, mets, ratio = compare_runs(cfg)
    out = _ensure_out(args.out)
    names = list(traces)
    for name in names:
        write_csv(traces[name], os.path.join(out, f"trace_{name}.csv"))
    with open(os.path.join(out, "metrics.txt"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", *names])
        for k in METRIC_KEYS:
            w.writerow([k, *(_fmt(getattr(mets[n], k)) for n in names)])
        w.writerow(["steady_rms_ratio", _fmt(ratio), ""])
    write_manifest(os.path.join(out, "manifest.txt"), cfg, "compare", args)
    plot_deflection_comparison(traces, os.path.join(out, "fig_deflection_compare.svg"))
    print(f"{'metric':28s} " + " ".join(f"{n:>22s}" for n in names))
    for k in METRIC_KEYS:
        print(f"{k:28s} " + " ".join(f"{_fmt(getattr(mets[n], k)):>22s}" for n in names))
    print(f"steady deflection RMS ratio ({names[0]} / {names[1]}): {_fmt(ratio)}")
    return EXIT_OK


def _matrix(name, M) -> str:
    rows = [" ".join(f"{v: .10e}" for v in row) for row in np.atleast_2d(M)]
    return f"{name}:\n" + "\n".join("  " + r for r in rows)


def cmd_design_lqr(cfg: Config, args) -> int:
    dec, g = design_fast(make_plant(cfg), cfg.weights)
    eig = np.linalg.eigvals(g.closed_loop(dec.fast.A_F, dec.fast.B_F))
    eig = eig[np.lexsort((eig.imag, eig.real))]
    print(f"epsilon  {dec.epsilon!r}")
    print(_matrix("A_F", dec.fast.A_F))
    print(_matrix("B_F", dec.fast.B_F))
    print(_matrix("P", g.P))
    print(_matrix("K_pf", g.K_pf))
    print(_matrix("K_df", g.K_df))
    print("closed-loop eigenvalues (fast time):")
    for e in eig:
        print(f"  {e.real: .10e} {e.imag:+.10e}j")
    print(f"CARE residual (max abs)  {g.residual:.3e}")
    print(f"Newton iterations        {g.iterations}")
    write_manifest(os.path.join(_ensure_out(args.out), "manifest.txt"), cfg, "design-lqr", args)
    return EXIT_OK


def cmd_modes(cfg: Config, args) -> int:
    n = cfg.modal.n_modes
    bm = beam_modes(cfg.arm, n)
    print(f"{'mode':>4s} {'beta_L':>14s} {'omega (rad/s)':>16s} {'phi_prime0':>16s} {'configured omega':>18s}")
    for i in range(n):
        print(f"{i + 1:4d} {bm.beta_l[i]:14.8f} {bm.omega[i]:16.6f} {bm.phi_prime0[i]:16.6f} "
              f"{cfg.modal.omega[i]:18.6f}")
    write_manifest(os.path.join(_ensure_out(args.out), "manifest.txt"), cfg, "modes", args)
    return EXIT_OK


def _parse_factors(text: str):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad factor list {text!r}", key="--factors") from None
    if len(vals) < 2 or any(v < 1 for v in vals):
        raise ConfigError("need at least two factors, all >= 1", key="--factors")
    return vals


def cmd_sweep_epsilon(cfg: Config, args) -> int:
    from dataclasses import replace

    from .plotting import plot_sweep

    factors = _parse_factors(args.factors)
    sim = replace(cfg.sim, horizon=cfg.sweep_horizon)
    rows = epsilon_sweep(make_plant(cfg), factors, cfg.reference, cfg.sliding, cfg.weights, sim)
    slope = fit_slope([r[1] for r in rows], [r[2] for r in rows])
    out = _ensure_out(args.out)
    with open(os.path.join(out, "sweep.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["factor", "epsilon", "gap"])
        for r in rows:
            w.writerow([repr(v) for v in r])
    write_manifest(os.path.join(out, "manifest.txt"), cfg, "sweep-epsilon", args)
    plot_sweep(rows, slope, os.path.join(out, "fig_sweep.svg"))
    print(f"{'factor':>8s} {'epsilon':>12s} {'gap (rad)':>14s}")
    for f, e, g in rows:
        print(f"{f:8g} {e:12.6f} {g:14.6e}")
    print(f"log-log slope {slope:.4f}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "design-lqr": cmd_design_lqr,
    "modes": cmd_modes,
    "sweep-epsilon": cmd_sweep_epsilon,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flexarm", description="Composite sliding-mode + LQR control of a flexible arm.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="configuration file (defaults: reference rig)")
        sp.add_argument("--out", default="flexarm_out", help="output directory")
        sp.add_argument("--seed", type=int, help="override [sim] seed")
        return sp

    s = common(sub.add_parser("simulate", help="run one controller, write trace, metrics and figure"))
    s.add_argument("--controller", choices=("composite", "slow-only"), default="composite")
    common(sub.add_parser("compare", help="slow-only versus composite on the same scenario"))
    common(sub.add_parser("design-lqr", help="print fast-subsystem LQR design"))
    common(sub.add_parser("modes", help="print analytic clamped-free modes"))
    s = common(sub.add_parser("sweep-epsilon", help="Tikhonov gap versus stiffness factor"))
    s.add_argument("--factors", default="1,4,16,64", help="comma-separated stiffness factors")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("must be an unsigned 64-bit integer", key="--seed")
            cfg = cfg.with_seed(args.seed)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DesignError as exc:
        print(f"design failure: {exc}", file=sys.stderr)
        return EXIT_DESIGN
    except (DivergenceError, IntegrationError) as exc:
        print(f"simulation diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except ModelError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
