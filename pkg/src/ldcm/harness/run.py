"""Run orchestration: time loop, scripted regridding, diagnostics and outputs."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..amr import Hierarchy, advance_hierarchy, regrid, save_checkpoint
from ..grid import ConfigurationError, IndexBox
from ..sources import TranslatingCharge, electrostatic_field
from . import output
from .config import RunConfig, phys_to_index, phys_to_index_inner
from .diagnostics import constraint_diagnostics, l2, linf, richardson_rate, sampled_difference

log = logging.getLogger(__name__)

COMPONENTS = {"x": 0, "y": 1, "z": 2}


class RunError(RuntimeError):
    """A run aborted; the message carries the step and time."""


@dataclass
class RunResult:
    config: RunConfig
    rows: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)  # (step, t, array) on the norm box
    regrid_steps: list = field(default_factory=list)
    hierarchy: Hierarchy | None = None
    norm_level: int = 0
    norm_index_box: IndexBox | None = None
    wall_time: float = 0.0


def initialize(cfg: RunConfig, hier: Hierarchy, source) -> None:
    if cfg.init_kind() == "electrostatic":
        if not isinstance(source, TranslatingCharge):
            raise ConfigurationError("electrostatic initialization needs a charge source")
        hier.set_fields(E=source.initial_E)
    else:
        hier.set_fields()
    if hier.J > 1:
        hier.sync(("E", "B"))
    hier.levels[0].fill_physical_ghosts(("E", "B"))
    for lev in hier.levels:
        lev.reinit_curls()


def _norm_level(cfg: RunConfig, hier: Hierarchy):
    box = cfg.norm_box()
    for j in range(hier.J - 1, -1, -1):
        lev = hier.levels[j]
        ib = phys_to_index_inner(box, lev.h)
        if any(lo > hi for lo, hi in zip(ib.lo, ib.hi)):
            continue
        if any(b.contains(ib) for b in lev.region):
            return j, ib
    raise ConfigurationError(f"no level covers the norm region {box}")


def _static_reference(source, lev, box: IndexBox, t: float):
    axes = lev.coords_of(box)
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    return electrostatic_field((X, Y, Z), source.params, source.center(t))


class _RegridDriver:
    def __init__(self, cfg: RunConfig, source):
        self.s = cfg.regrid
        self.cfg = cfg
        self.source = source
        self.current = 0
        self.next_time = 0
        if self.s is not None and self.s.trigger == "center_crossing":
            if not isinstance(source, TranslatingCharge):
                raise ConfigurationError("center_crossing regridding needs a charge source")
            self.side = self._side(0.0)
        elif self.s is not None and self.s.trigger != "times":
            raise ConfigurationError(f"unknown regrid trigger {self.s.trigger!r}")

    def _side(self, t):
        return bool(self.source.center(t)[self.s.axis] > self.s.value)

    def due(self, t_prev: float, t: float) -> bool:
        if self.s is None:
            return False
        if self.s.trigger == "center_crossing":
            side = self._side(t)
            if side != self.side:
                self.side = side
                return True
            return False
        times = self.s.times
        if self.next_time < len(times) and t_prev < times[self.next_time] <= t + 1e-12:
            self.next_time += 1
            return True
        return False

    def apply(self, hier: Hierarchy, t: float) -> None:
        self.current = (self.current + 1) % len(self.s.regions)
        j = self.s.level
        boxes = [phys_to_index(b, self.cfg.h / self.cfg.r**j, self.cfg.r, self.cfg.length)
                 for b in self.s.regions[self.current]]
        regrid(hier, j, boxes, self.source, t, self.cfg.eta)


def record(cfg: RunConfig, hier: Hierarchy, source, step: int, t: float, scales, result: RunResult):
    """Append one time-series row and a snapshot of the tracked component."""
    E_scale, rho_scale = scales
    if hier.J > 1:
        hier.sync(("E", "B"))
    hier.levels[0].fill_physical_ghosts(("E", "B"))
    row = {"step": step, "t": t}
    for j, lev in enumerate(hier.levels):
        d = constraint_diagnostics(lev, source, t).norms(rho_scale)
        for k, v in d.items():
            row[f"L{j}_{k}"] = v
    name, comp = cfg.track[0], COMPONENTS[cfg.track[2]]
    j, ib = result.norm_level, result.norm_index_box
    lev = hier.levels[j]
    vals = lev.state[name].values[(comp,) + ib.slices(lev.storage)]
    row["track_linf"] = linf(vals) / E_scale
    row["track_l2"] = l2(vals) / E_scale
    if isinstance(source, TranslatingCharge):
        ref = _static_reference(source, lev, ib, t)
        E = lev.state.E.values[(slice(None),) + ib.slices(lev.storage)]
        row["E_static_err_linf"] = linf(E - ref) / E_scale
    result.rows.append(row)
    result.snapshots.append((step, t, np.array(vals)))


def run(cfg: RunConfig, out: str | Path | None = None, workers: int | None = None,
        progress=None) -> RunResult:
    """Execute a configured run; writes outputs to ``out`` when given."""
    cfg.validate()
    source = cfg.build_source()
    hier = cfg.build_hierarchy(workers)
    initialize(cfg, hier, source)
    scales = cfg.scales(source)
    result = RunResult(cfg, hierarchy=hier)
    result.norm_level, result.norm_index_box = _norm_level(cfg, hier)
    driver = _RegridDriver(cfg, source)
    dt = hier.dt
    nsteps = cfg.n_steps
    log.info("run: N=%d J=%d r=%d dt=%.6g steps=%d CFL(finest)=%.4g",
             cfg.N, hier.J, cfg.r, dt, nsteps, cfg.cfl_finest)
    t0 = time.perf_counter()
    record(cfg, hier, source, 0, 0.0, scales, result)
    for n in range(nsteps):
        t = n * dt
        try:
            advance_hierarchy(hier, source, t, cfg.eta)
            if driver.due(t, t + dt):
                driver.apply(hier, t + dt)
                result.regrid_steps.append(n + 1)
                log.info("regrid at step %d (t=%.6g)", n + 1, t + dt)
        except (ConfigurationError, RuntimeError, ValueError) as e:
            raise RunError(f"step {n + 1} (t={t + dt:.6g}): {type(e).__name__}: {e}") from e
        if (n + 1) % cfg.cadence == 0 or n + 1 == nsteps:
            record(cfg, hier, source, n + 1, (n + 1) * dt, scales, result)
        if progress is not None:
            progress(n + 1, nsteps)
    result.wall_time = time.perf_counter() - t0
    if out is not None:
        write_run_outputs(result, out, source)
    return result


def write_run_outputs(result: RunResult, out, source=None) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    output.write_timeseries(result.rows, out / "timeseries.csv")
    cfg = result.config
    hier = result.hierarchy
    if cfg.slice_z is not None:
        source = cfg.build_source() if source is None else source
        t = result.rows[-1]["t"] if result.rows else 0.0
        output.write_slices(hier, cfg.slice_z, out, source, t)
    if cfg.checkpoint:
        save_checkpoint(hier, out / "checkpoint.bin", result.rows[-1]["t"] if result.rows else 0.0)
    output.write_config(cfg, out / "config.yaml")


def converge(cfg: RunConfig, Ns=None, out=None, workers: int | None = None, progress=None):
    """Run the configuration at successive resolutions ``Ns`` (each doubling
    the previous), then compute sampled differences of the tracked component
    and Richardson rates at common times. Returns ``(rate_rows, results)``."""
    Ns = list(Ns) if Ns is not None else [cfg.N, 2 * cfg.N - 1, 4 * cfg.N - 3]
    for a, b in zip(Ns, Ns[1:]):
        if b - 1 != 2 * (a - 1):
            raise ConfigurationError(f"resolutions must double: {Ns}")
    base = cfg.with_resolution(Ns[0])
    # pin the norm box to nodes of the coarsest run's norm level so every run
    # samples it at coincident nodes
    probe = base.build_hierarchy(1)
    j, ib = _norm_level(base, probe)
    hj = probe.levels[j].h
    pinned = [[v * hj for v in ib.lo], [v * hj for v in ib.hi]]
    results = []
    for k, N in enumerate(Ns):
        c = cfg.with_resolution(N)
        c.norm_region = pinned
        c.cadence = cfg.cadence * 2**k
        sub = None if out is None else Path(out) / f"N{N}"
        results.append(run(c, sub, workers, progress))
    rows = rate_table(results)
    if out is not None:
        output.write_rates(rows, Path(out) / "rates.csv")
    return rows, results


def rate_table(results) -> list[dict]:
    """Errors between successive resolutions and their Richardson rates."""
    scales = [r.config.scales() for r in results]
    nsnap = min(len(r.snapshots) for r in results)
    rows = []
    for s in range(nsnap):
        step, t, _ = results[0].snapshots[s]
        row = {"step": step, "t": t}
        errs = []
        for k in range(len(results) - 1):
            a, b = results[k], results[k + 1]
            if abs(a.snapshots[s][1] - b.snapshots[s][1]) > 1e-9 * max(1.0, abs(t)):
                raise ConfigurationError("snapshots are not at common times")
            diff = sampled_difference(b.snapshots[s][2], a.snapshots[s][2])
            e = linf(diff) / scales[k][0]
            errs.append(e)
            row[f"err_{a.config.N}_{b.config.N}"] = e
        for k in range(len(errs) - 1):
            row[f"rate_{k}"] = richardson_rate(errs[k], errs[k + 1])
        # absolute rates of the normalized Gauss-law residual on the finest level
        last = [r.rows[s][f"L{r.hierarchy.J - 1}_D_E_linf"] for r in results]
        for k, r in enumerate(results):
            row[f"DE_N{r.config.N}"] = last[k]
        for k in range(len(last) - 1):
            row[f"DE_rate_{k}"] = richardson_rate(last[k], last[k + 1])
        rows.append(row)
    return rows
