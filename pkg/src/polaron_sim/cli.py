"""Command-line front end: ``polaron-sim {rates|evolve|sweep|cavity-sweep|photons}``."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import os
import shlex
import sys

import numpy as np

from polaron_sim import __version__
from polaron_sim.dynamics import SOLVERS, integrate, population_metric
from polaron_sim.kernel import tabulate_kernel
from polaron_sim.photons import SCHEMES, HorizonError, photon_source, scheme_config
from polaron_sim.pulses import exciton_rabi, rate_detuning
from polaron_sim.rates import RATE_NAMES, averaged_rates, rate_arrays
from polaron_sim.sweep import (
    DEFAULT_COUNT_1D,
    DEFAULT_COUNT_2D,
    Axis,
    RunManifest,
    SweepPlan,
    fmt,
    plot_script,
    sweep_cavity,
    sweep_photon_source,
    sweep_population,
    write_table,
)
from polaron_sim.units import (
    ConfigError,
    SimulationConfig,
    dump_config,
    load_config,
    replace_document_value,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
_COMPLEX_RATES = ("gamma_u", "gamma_g")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="configuration document (INI)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--solver", choices=SOLVERS, default="analytic")
    common.add_argument("--threads", type=int, default=1, help="worker processes for sweeps")
    common.add_argument("--rate-cache", action="store_true", help="interpolate rates on a fixed time grid")
    common.add_argument("--significant-rates-only", action="store_true",
                        help="keep only Gamma+-, Gamma_cd and Gamma_u")

    p = _Parser(prog="polaron-sim", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("rates", parents=[common], help="phonon rates over the pulse")
    r.add_argument("--dt", type=float, default=0.25, help="time step of rates.csv, ps")
    r.add_argument("--axis", help="detuning sweep for pulse-averaged rates, e.g. drive.delta_lx=-2:2:81")
    r.add_argument("--model", choices=("full", "effective"), default="full")

    e = sub.add_parser("evolve", parents=[common], help="density matrix over the pulse window")
    e.add_argument("--dt", type=float, default=0.1, help="output step, ps")
    e.add_argument("--t-end", type=float, help="end time, ps")
    e.add_argument("--no-phonons", action="store_true")

    for name, helptext in (("sweep", "population metric sweep"), ("cavity-sweep", "cavity-driven population sweep")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("--axis", action="append", required=True,
                       help="path=lo:hi[:count] in config-file units, e.g. drive.theta_pi=0:40:81 (repeatable)")
        if name == "sweep":
            s.add_argument("--no-phonons", action="store_true")

    ph = sub.add_parser("photons", parents=[common], help="G2, indistinguishability, beta, n_ems")
    ph.add_argument("--scheme", choices=tuple(SCHEMES), help="preset drive; default uses the config drive")
    ph.add_argument("--purcell", type=float, help="Purcell factor F_P (overrides the config)")
    ph.add_argument("--axis", action="append", help="sweep instead, e.g. cavity.purcell=1:100:34")
    ph.add_argument("--step", type=float, default=0.1, help="regression time step, ps")
    return p


def _load(args) -> SimulationConfig:
    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    cfg = load_config(text)
    q = cfg.quadrature
    if args.rate_cache or args.significant_rates_only:
        q = dataclasses.replace(q, rate_cache=q.rate_cache or args.rate_cache,
                                significant_rates_only=q.significant_rates_only or args.significant_rates_only)
        cfg = dataclasses.replace(cfg, quadrature=q)
    return cfg


def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([x if isinstance(x, str) else fmt(float(x)) for x in row])


def _cmd_rates(cfg: SimulationConfig, args, manifest: RunManifest) -> None:
    bath = tabulate_kernel(cfg.bath, cfg.quadrature)
    d = cfg.drive
    t = np.arange(d.center - 5 * d.tau_p, d.center + 5 * d.tau_p + args.dt / 2, args.dt)
    arr = rate_arrays(exciton_rabi(t, d), rate_detuning(d), bath, args.model)
    rows = []
    for i, ti in enumerate(t):
        for name in RATE_NAMES:
            v = arr[name][i]
            if name in _COMPLEX_RATES:
                rows += [(ti, f"{name}_re", v.real), (ti, f"{name}_im", v.imag)]
            else:
                rows.append((ti, name, v))
    _write_csv(os.path.join(args.out, "rates.csv"), ("t_ps", "rate_name", "value_per_ps"), rows)
    manifest.outputs.append("rates.csv")

    if args.axis:
        axis = Axis.parse(args.axis)
        plan = SweepPlan(cfg, (axis,))
        names = [n for r in RATE_NAMES for n in ((f"{r}_re", f"{r}_im") if r in _COMPLEX_RATES else (r,))]
        out = []
        for (v,) in plan.points():
            avg = averaged_rates(plan.config_at((v,)).drive, bath, args.model)
            vals = []
            for r in RATE_NAMES:
                x = getattr(avg, r)
                vals += [x.real, x.imag] if r in _COMPLEX_RATES else [x]
            out.append([v] + vals)
            manifest.status.append("ok")
        _write_csv(os.path.join(args.out, "rates_averaged.csv"), [axis.path] + names, out)
        manifest.outputs.append("rates_averaged.csv")


def _cmd_evolve(cfg: SimulationConfig, args, manifest: RunManifest) -> None:
    d = cfg.drive
    t0 = d.center - 5 * d.tau_p if cfg.integrator.t_start is None else cfg.integrator.t_start
    t1 = args.t_end if args.t_end is not None else (
        d.center + 5 * d.tau_p if cfg.integrator.t_end is None else cfg.integrator.t_end)
    grid = np.arange(t0, t1 + args.dt / 2, args.dt)
    grid[-1] = min(grid[-1], t1)
    traj = integrate(cfg, solver=args.solver, t_eval=grid, t_end=t1, phonons=not args.no_phonons)
    rho = traj.states
    rows = zip(traj.times, rho[:, 0, 0].real, rho[:, 0, 1].real, rho[:, 0, 1].imag, rho[:, 1, 1].real)
    _write_csv(os.path.join(args.out, "evolve.csv"), ("t_ps", "rho_gg", "re_rho_ge", "im_rho_ge", "rho_ee"), rows)
    with open(os.path.join(args.out, "plot_evolve.py"), "w") as fh:
        fh.write(plot_script("evolve.csv", x="t_ps", ys=("rho_ee",)))
    manifest.outputs += ["evolve.csv", "plot_evolve.py"]
    if t0 <= d.center + 2 * d.tau_p <= t1:
        print(f"population_metric = {population_metric(traj, d):.9g}")


def _sweep_axes(specs) -> tuple[Axis, ...]:
    default = DEFAULT_COUNT_2D if len(specs) > 1 else DEFAULT_COUNT_1D
    return tuple(Axis.parse(s, default) for s in specs)


def _cmd_sweep(cfg: SimulationConfig, args, manifest: RunManifest) -> None:
    plan = SweepPlan(cfg, _sweep_axes(args.axis), args.solver)
    if args.command == "sweep":
        table = sweep_population(plan, phonons=not args.no_phonons, threads=args.threads)
        name = "population"
    else:
        table = sweep_cavity(plan, threads=args.threads)
        name = "cavity_population"
    manifest.config_hash = plan.fingerprint(args.command)
    manifest.outputs += write_table(table, args.out, name)
    manifest.status += table.status


def _cmd_photons(cfg: SimulationConfig, args, manifest: RunManifest) -> None:
    if args.purcell is not None:
        cfg = replace_document_value(cfg, "cavity.purcell", args.purcell)
    if args.axis:
        plan = SweepPlan(cfg, _sweep_axes(args.axis), args.solver)
        table = sweep_photon_source(plan, args.scheme, threads=args.threads, step=args.step)
        manifest.config_hash = plan.fingerprint("photons")
        manifest.outputs += write_table(table, args.out, "photon_source")
        manifest.status += table.status
        return

    if args.scheme is not None:
        cfg = scheme_config(cfg, args.scheme)
    manifest.config_hash = _hash(cfg, f"photons {args.solver} {args.step!r}")
    summary, surface = photon_source(cfg, step=args.step, solver=args.solver)
    tau, g2 = surface.symmetric()
    keep = _output_grid(tau)
    _write_csv(os.path.join(args.out, "g2.csv"), ("tau_ps", "g2_integrated"), zip(tau[keep], g2[keep]))
    with open(os.path.join(args.out, "photons_summary.txt"), "w") as fh:
        fh.write(f"scheme = {args.scheme or summary.scheme}\n")
        fh.writelines(f"{key} = {fmt(val)}\n" for key, val in (("I", summary.indistinguishability), ("beta", summary.beta),
                         ("n_ems", summary.n_ems), ("F_P", summary.purcell)))
    with open(os.path.join(args.out, "plot_g2.py"), "w") as fh:
        fh.write(plot_script("g2.csv", x="tau_ps", ys=("g2_integrated",)))
    manifest.outputs += ["g2.csv", "photons_summary.txt", "plot_g2.py"]
    manifest.status.append("ok")
    print(f"I = {summary.indistinguishability:.6f}  beta = {summary.beta:.6f}  n_ems = {summary.n_ems:.6f}")


def _output_grid(tau: np.ndarray) -> np.ndarray:
    """Rows of the written G2(tau): 0.5 ps within 100 ps of zero delay, 5 ps beyond, plus both ends."""
    a = np.abs(tau)
    fine = (a <= 100.0 + 1e-9) & (np.abs(a / 0.5 - np.round(a / 0.5)) < 1e-6)
    coarse = (a > 100.0) & (np.abs(a / 5.0 - np.round(a / 5.0)) < 1e-6)
    keep = fine | coarse
    keep[[0, -1]] = True
    return keep


_COMMANDS = {
    "rates": _cmd_rates,
    "evolve": _cmd_evolve,
    "sweep": _cmd_sweep,
    "cavity-sweep": _cmd_sweep,
    "photons": _cmd_photons,
}


def _hash(cfg: SimulationConfig, command: str) -> str:
    return hashlib.sha256((command + "\n" + dump_config(cfg)).encode()).hexdigest()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = _load(args)
        os.makedirs(args.out, exist_ok=True)
        manifest = RunManifest(config_hash=_hash(cfg, args.command), version=__version__,
                               command=shlex.join(["polaron-sim", *argv]))
        _COMMANDS[args.command](cfg, args, manifest)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, RuntimeError, HorizonError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    manifest.write(args.out)
    failed = sum(s != "ok" for s in manifest.status)
    if failed:
        print(f"{failed} of {len(manifest.status)} points failed; see manifest.txt", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
