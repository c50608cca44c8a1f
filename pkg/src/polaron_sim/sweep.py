"""Parameter sweeps, run manifests and CSV output.

A sweep is the Cartesian product of one or more axes applied to a base
configuration.  Points are independent single-threaded simulations; with
``threads > 1`` they run in a process pool, and results are always gathered
in grid order so the output does not depend on the worker count.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import itertools
import math
import os
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from functools import partial

import numpy as np

from polaron_sim.units import (
    ConfigValidationError,
    SimulationConfig,
    document_path_exists,
    dump_config,
    replace_document_value,
)

DEFAULT_COUNT_1D = 81
DEFAULT_COUNT_2D = 61


def fmt(x) -> str:
    return "nan" if isinstance(x, float) and math.isnan(x) else f"{x:.9g}"


@dataclass(frozen=True)
class Axis:
    """Linear axis over a document-unit parameter, e.g. ``drive.theta_pi``."""

    path: str
    lo: float
    hi: float
    count: int = DEFAULT_COUNT_1D

    def __post_init__(self):
        if self.count < 2:
            raise ConfigValidationError(f"axis {self.path}: count must be >= 2, got {self.count}")
        if not document_path_exists(self.path):
            raise ConfigValidationError(f"axis {self.path}: not a configuration parameter")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.count)

    @classmethod
    def parse(cls, text: str, default_count: int = DEFAULT_COUNT_1D) -> Axis:
        """``path=lo:hi[:count]``."""
        path, sep, rng = text.partition("=")
        parts = rng.split(":")
        if not sep or len(parts) not in (2, 3):
            raise ConfigValidationError(f"axis {text!r}: expected path=lo:hi[:count]")
        try:
            lo, hi = float(parts[0]), float(parts[1])
            count = int(parts[2]) if len(parts) == 3 else default_count
        except ValueError:
            raise ConfigValidationError(f"axis {text!r}: bad number") from None
        return cls(path.strip(), lo, hi, count)


@dataclass(frozen=True)
class SweepPlan:
    base: SimulationConfig
    axes: tuple[Axis, ...]
    solver: str = "analytic"

    def __post_init__(self):
        if not self.axes:
            raise ConfigValidationError("a sweep needs at least one axis")

    def points(self) -> list[tuple[float, ...]]:
        return list(itertools.product(*(a.values for a in self.axes)))

    def config_at(self, point: Sequence[float]) -> SimulationConfig:
        cfg = self.base
        for axis, v in zip(self.axes, point):
            cfg = replace_document_value(cfg, axis.path, float(v))
        return cfg

    def fingerprint(self, kind: str) -> str:
        h = hashlib.sha256()
        h.update(dump_config(self.base).encode())
        h.update(repr((kind, self.solver, [dataclasses.astuple(a) for a in self.axes])).encode())
        return h.hexdigest()


@dataclass
class SweepTable:
    axis_names: tuple[str, ...]
    value_names: tuple[str, ...]
    points: list[tuple[float, ...]]
    values: np.ndarray  # (n_points, n_values), NaN where a point failed
    status: list[str] = field(default_factory=list)

    @property
    def n_failed(self) -> int:
        return sum(s != "ok" for s in self.status)

    def column(self, name: str) -> np.ndarray:
        if name in self.axis_names:
            return np.array([p[self.axis_names.index(name)] for p in self.points])
        return self.values[:, self.value_names.index(name)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(self.axis_names) + list(self.value_names))
        for p, row in zip(self.points, self.values):
            w.writerow([fmt(float(x)) for x in p] + [fmt(float(x)) for x in row])
        return buf.getvalue()


def _guarded(fn: Callable[[SimulationConfig], tuple], cfg: SimulationConfig) -> tuple[tuple, str]:
    try:
        return tuple(float(v) for v in fn(cfg)), "ok"
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        return (), f"error: {type(exc).__name__}: {exc}".replace("\n", " ")


def run_plan(plan: SweepPlan, fn: Callable[[SimulationConfig], tuple], value_names: Sequence[str],
             threads: int = 1) -> SweepTable:
    """Evaluate ``fn`` at every grid point; failures become NaN rows."""
    points = plan.points()
    configs = [plan.config_at(p) for p in points]
    task = partial(_guarded, fn)
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(task, configs, chunksize=1))
    else:
        results = [task(c) for c in configs]
    values = np.full((len(points), len(value_names)), np.nan)
    status = []
    for i, (vals, st) in enumerate(results):
        if vals:
            values[i] = vals
        status.append(st)
    return SweepTable(tuple(a.path for a in plan.axes), tuple(value_names), points, values, status)


# -- point evaluators (module level so they pickle) ------------------------


def _population_point(cfg: SimulationConfig, solver: str, phonons: bool) -> tuple[float]:
    from polaron_sim.dynamics import population_at

    return (population_at(cfg, solver=solver, phonons=phonons),)


def _photon_point(cfg: SimulationConfig, solver: str, step: float) -> tuple[float, float, float]:
    from polaron_sim.photons import photon_source

    s, _ = photon_source(cfg, step=step, solver=solver)
    return s.indistinguishability, s.beta, s.n_ems


def sweep_population(plan: SweepPlan, *, phonons: bool = True, threads: int = 1) -> SweepTable:
    """Population metric over a grid of pulse areas and/or detunings."""
    fn = partial(_population_point, solver=plan.solver, phonons=phonons)
    return run_plan(plan, fn, ("population",), threads)


def sweep_cavity(plan: SweepPlan, *, threads: int = 1) -> SweepTable:
    """Population metric for cavity driving; the base config must be in cavity mode."""
    if plan.base.drive.mode != "cavity":
        raise ConfigValidationError("cavity sweep needs drive.mode = cavity and a [cavity] section")
    return run_plan(plan, partial(_population_point, solver=plan.solver, phonons=True), ("population",), threads)


def sweep_photon_source(plan: SweepPlan, scheme: str | None = None, *, threads: int = 1,
                        step: float = 0.1) -> SweepTable:
    """Indistinguishability, beta and n_ems per point (typically over ``cavity.purcell``)."""
    if scheme is not None:
        from polaron_sim.photons import scheme_config

        plan = dataclasses.replace(plan, base=scheme_config(plan.base, scheme))
    fn = partial(_photon_point, solver=plan.solver, step=step)
    return run_plan(plan, fn, ("indistinguishability", "beta", "n_ems"), threads)


# -- artefacts --------------------------------------------------------------


@dataclass
class RunManifest:
    config_hash: str
    version: str
    command: str
    outputs: list[str] = field(default_factory=list)
    status: list[str] = field(default_factory=list)
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"))

    def render(self) -> str:
        lines = [
            f"config_hash = {self.config_hash}",
            f"version = {self.version}",
            f"command = {self.command}",
            f"timestamp = {self.timestamp}",
            f"outputs = {', '.join(self.outputs)}",
            f"points = {len(self.status)}",
            f"failed = {sum(s != 'ok' for s in self.status)}",
        ]
        lines += [f"point.{i} = {s}" for i, s in enumerate(self.status)]
        return "\n".join(lines) + "\n"

    def write(self, out_dir: str) -> str:
        path = os.path.join(out_dir, "manifest.txt")
        with open(path, "w") as fh:
            fh.write(self.render())
        return path


_PLOT_TEMPLATE = """\
# Convenience plot of {csv}; regenerate data with polaron-sim, not from this figure.
import csv

import matplotlib.pyplot as plt

with open({csv!r}) as fh:
    rows = list(csv.reader(fh))
head, data = rows[0], [[float(x) for x in r] for r in rows[1:]]
cols = list(zip(*data))
fig, ax = plt.subplots()
{body}
fig.savefig({png!r}, dpi=150)
"""


def plot_script(csv_name: str, table: SweepTable | None = None, x: str | None = None,
                ys: Sequence[str] = ()) -> str:
    """Plain-text matplotlib script that plots ``csv_name``."""
    png = os.path.splitext(csv_name)[0] + ".png"
    if table is not None and len(table.axis_names) == 2:
        a, b = table.axis_names
        na = len({p[0] for p in table.points})
        body = (f"nb = len(cols[0]) // {na}\n"
                f"z = [cols[2][i * nb:(i + 1) * nb] for i in range({na})]\n"
                f"m = ax.imshow(z, origin='lower', aspect='auto', "
                f"extent=[cols[1][0], cols[1][-1], cols[0][0], cols[0][-1]])\n"
                f"fig.colorbar(m, label=head[2])\n"
                f"ax.set_xlabel({b!r})\nax.set_ylabel({a!r})")
    else:
        body = "\n".join(f"ax.plot(cols[head.index({x!r})], cols[head.index({y!r})], label={y!r})" for y in ys)
        body += f"\nax.set_xlabel({x!r})\nax.legend()"
    return _PLOT_TEMPLATE.format(csv=csv_name, png=png, body=body)


def write_table(table: SweepTable, out_dir: str, name: str) -> list[str]:
    """CSV plus its plot script; returns the file names written."""
    os.makedirs(out_dir, exist_ok=True)
    csv_name = f"{name}.csv"
    with open(os.path.join(out_dir, csv_name), "w", newline="") as fh:
        fh.write(table.to_csv())
    script = plot_script(csv_name, table, table.axis_names[0], table.value_names)
    with open(os.path.join(out_dir, f"plot_{name}.py"), "w") as fh:
        fh.write(script)
    return [csv_name, f"plot_{name}.py"]


__all__ = [
    "Axis",
    "RunManifest",
    "SweepPlan",
    "SweepTable",
    "plot_script",
    "run_plan",
    "sweep_cavity",
    "sweep_photon_source",
    "sweep_population",
    "write_table",
]
