"""Run configuration: validated dataclasses, YAML loading and named presets.

Level boxes are given in physical coordinates so the same configuration can be
run at several resolutions; they are converted to node indices (snapped
outward to the parent grid) when a hierarchy is built.
"""
from __future__ import annotations

import copy
import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from ..amr import Hierarchy
from ..grid import ConfigurationError, IndexBox
from ..sources import (
    DivFreeCurrent,
    DivFreeCurrentParams,
    SourceModel,
    TranslatingCharge,
    TranslatingChargeParams,
    ZeroSource,
    divfree_normalization,
    electrostatic_max,
)
from ..stencil import FILTER_ETA

SOURCE_KINDS = ("translating_charge", "stopped_charge", "regrid_charge", "divfree_loop", "none")


@dataclass
class RegridSchedule:
    """Alternate level ``level`` between the box sets in ``regions``.

    ``trigger`` is ``"center_crossing"`` (switch whenever the charge center's
    coordinate ``axis`` crosses ``value``) or ``"times"`` (switch at each entry
    of ``times``).
    """

    level: int
    regions: list
    trigger: str = "center_crossing"
    axis: int = 0
    value: float = 0.5
    times: list = field(default_factory=list)


@dataclass
class RunConfig:
    source: str = "none"
    params: dict = field(default_factory=dict)
    source_scale: float = 1.0
    init: str = "auto"  # "electrostatic", "zero" or "auto" (by source)
    N: int = 33
    length: float = 1.0
    r: int = 2
    levels: list = field(default_factory=list)  # per refined level: list of [[lo], [hi]]
    regrid: RegridSchedule | None = None
    dt: float | None = None
    cfl: float = 1.0
    t_final: float = 0.0
    steps: int | None = None
    M: int = 4
    eta: float = FILTER_ETA
    patch_nodes: int = 33
    workers: int = 1
    cadence: int = 1
    track: str = "E_x"
    norm_region: list | None = None  # physical box; default: the finest level's initial region
    E_scale: float | None = None
    rho_scale: float | None = None
    slice_z: float | None = 0.5
    checkpoint: bool = False
    analytic_derivatives: bool = False

    # -- derived quantities -------------------------------------------------------

    @property
    def J(self) -> int:
        return 1 + len(self.levels)

    @property
    def h(self) -> float:
        return self.length / (self.N - 1)

    @property
    def h_finest(self) -> float:
        return self.h / self.r ** (self.J - 1)

    @property
    def time_step(self) -> float:
        return self.dt if self.dt is not None else self.cfl * self.h_finest

    @property
    def cfl_finest(self) -> float:
        return self.time_step / self.h_finest

    @property
    def n_steps(self) -> int:
        if self.steps is not None:
            return int(self.steps)
        n = self.t_final / self.time_step
        k = int(round(n))
        if abs(n - k) > 1e-9 * max(1.0, n):
            k = int(math.ceil(n))
        return k

    def validate(self):
        if self.source not in SOURCE_KINDS:
            raise ConfigurationError(f"unknown source {self.source!r}; choose from {SOURCE_KINDS}")
        if self.N < 9 or (self.N - 1) % 2:
            raise ConfigurationError("N must be odd and at least 9")
        if self.r < 2:
            raise ConfigurationError("refinement ratio r must be >= 2")
        if self.time_step <= 0:
            raise ConfigurationError("time step must be positive")
        if self.M < 4 or (self.M - 1) % 3:
            raise ConfigurationError("M must be 3k+1 >= 4")
        if self.eta < 0:
            raise ConfigurationError("filter coefficient must be non-negative")
        if self.patch_nodes < 5:
            raise ConfigurationError("patch_nodes must be >= 5")
        if self.cadence < 1:
            raise ConfigurationError("cadence must be >= 1")
        if self.init not in ("auto", "electrostatic", "zero"):
            raise ConfigurationError(f"unknown init {self.init!r}")
        if self.track[:2] not in ("E_", "B_") or self.track[2:] not in ("x", "y", "z"):
            raise ConfigurationError(f"track must look like E_x or B_z, got {self.track!r}")
        for j, boxes in enumerate(self.levels, start=1):
            for b in boxes:
                _check_phys_box(b, f"level {j}")
        if self.regrid is not None and not 1 <= self.regrid.level < self.J:
            raise ConfigurationError("regrid level must be a refined level")
        self.level_index_boxes()
        return self

    # -- construction -------------------------------------------------------------

    def level_index_boxes(self, regions=None):
        """Index boxes per refined level (snapped outward to the parent grid)."""
        out = []
        regions = self.levels if regions is None else regions
        for j, boxes in enumerate(regions, start=1):
            out.append([phys_to_index(b, self.h / self.r**j, self.r, self.length) for b in boxes])
        return out

    def build_source(self) -> SourceModel:
        p = dict(self.params)
        if self.source in ("translating_charge", "stopped_charge", "regrid_charge"):
            for k in ("x0", "vhat"):
                if k in p:
                    p[k] = tuple(p[k])
            tp = TranslatingChargeParams(**p)
            if self.source_scale != 1.0:
                tp = tp.scaled(self.source_scale)
            return TranslatingCharge(tp, analytic_derivatives=self.analytic_derivatives)
        if self.source == "divfree_loop":
            dp = DivFreeCurrentParams(**p)
            if self.source_scale != 1.0:
                dp = dp.scaled(self.source_scale)
            return DivFreeCurrent(dp)
        return ZeroSource()

    def init_kind(self) -> str:
        if self.init != "auto":
            return self.init
        return "electrostatic" if isinstance(self.build_source(), TranslatingCharge) else "zero"

    def build_hierarchy(self, workers: int | None = None) -> Hierarchy:
        return Hierarchy(
            self.N, self.level_index_boxes(), self.r, self.time_step, self.M, 1.0,
            self.length, patch_nodes=self.patch_nodes,
            workers=self.workers if workers is None else workers,
        )

    def scales(self, source: SourceModel | None = None) -> tuple[float, float]:
        """Normalizations for the tracked field and for ``div E - 4 pi rho``."""
        source = self.build_source() if source is None else source
        es, rs = self.E_scale, self.rho_scale
        if isinstance(source, TranslatingCharge):
            es = electrostatic_max(source.params) if es is None else es
            rs = 4 * np.pi * source.rho_max() if rs is None else rs
        elif isinstance(source, DivFreeCurrent):
            a, b = divfree_normalization(source.params)
            es = a if es is None else es
            rs = b if rs is None else rs
        return (1.0 if es is None else es), (1.0 if rs is None else rs)

    def norm_box(self):
        if self.norm_region is not None:
            return self.norm_region
        if self.levels:
            lo = np.min([b[0] for b in self.levels[-1]], axis=0).tolist()
            hi = np.max([b[1] for b in self.levels[-1]], axis=0).tolist()
            return [lo, hi]
        return [[0.0] * 3, [self.length] * 3]

    def with_resolution(self, N: int) -> "RunConfig":
        """Same physical problem on a coarse grid with ``N`` nodes per axis; the
        time step keeps the configured CFL (or scales with ``h`` if ``dt`` was
        given)."""
        c = copy.deepcopy(self)
        if c.dt is not None:
            c.dt = c.dt * (self.N - 1) / (N - 1)
        c.N = N
        return c

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return d


def _check_phys_box(b, what):
    if len(b) != 2 or len(b[0]) != 3 or len(b[1]) != 3:
        raise ConfigurationError(f"{what}: boxes are [[x0, y0, z0], [x1, y1, z1]]")
    if any(lo > hi for lo, hi in zip(b[0], b[1])):
        raise ConfigurationError(f"{what}: box has lo > hi: {b}")


def phys_to_index(b, h: float, r: int, length: float) -> IndexBox:
    """Nodes of spacing ``h`` covering the physical box ``b``, widened so that
    both corners lie on the parent grid (multiples of ``r``)."""
    lo = [int(math.floor(x / h / r + 1e-9)) * r for x in b[0]]
    hi = [int(math.ceil(x / h / r - 1e-9)) * r for x in b[1]]
    return IndexBox(lo, hi)


def phys_to_index_inner(b, h: float) -> IndexBox:
    """Nodes of spacing ``h`` inside the physical box ``b``."""
    lo = [int(math.ceil(x / h - 1e-9)) for x in b[0]]
    hi = [int(math.floor(x / h + 1e-9)) for x in b[1]]
    return IndexBox(lo, hi)


# ----------------------------------------------------------------------------
# presets

_OMEGA1 = [[3 / 8] * 3, [5 / 8] * 3]
_OMEGA2 = [[15 / 32] * 3, [17 / 32] * 3]
_OMEGA2A = [[29 / 64, 15 / 32, 15 / 32], [33 / 64, 17 / 32, 17 / 32]]


def _paper_charge(**kw):
    return RunConfig(source="translating_charge", N=65, r=4, levels=[[_OMEGA1], [_OMEGA2]],
                     cfl=1.0, t_final=200 / 1024, **kw)


def _regrid(**kw):
    return RunConfig(
        source="regrid_charge",
        params=dict(profile="sin", vhat=(1.0, 0.0, 0.0), R0=1 / 160, d=1 / 64,
                    x0=(31 / 64, 0.5, 0.5)),
        N=65, r=4, levels=[[_OMEGA1], [_OMEGA2A]], cfl=1.0, t_final=800 / 1024,
        regrid=RegridSchedule(level=2, regions=[[_OMEGA2A], [_OMEGA2]], trigger="center_crossing",
                              axis=0, value=63 / 128),
        norm_region=[[15 / 32] * 3, [17 / 32] * 3], **kw,
    )


def _desk_charge(**kw):
    # lengths and times scaled up 9x so the charge is resolved on a two-level
    # hierarchy with a factor-2 refinement
    return RunConfig(source="translating_charge", source_scale=9.0, N=33, r=2,
                     levels=[[[[0.25] * 3, [0.75] * 3]]], cfl=1.0, t_final=25 / 64, **kw)


def _desk_regrid(**kw):
    # oscillating refined box around a resolved charge; the box follows the
    # charge in x and is swapped whenever the center crosses x = 1/2
    a = [[0.25, 0.25, 0.25], [0.625, 0.75, 0.75]]
    b = [[0.375, 0.25, 0.25], [0.75, 0.75, 0.75]]
    return RunConfig(
        source="regrid_charge",
        params=dict(profile="sin", vhat=(1.0, 0.0, 0.0), R0=0.1, d=0.1 / np.pi, nu=5.0,
                    x0=(0.45, 0.5, 0.5)),
        N=33, r=2, levels=[[a]], cfl=1.0, t_final=32 / 64,
        regrid=RegridSchedule(level=1, regions=[[a], [b]], trigger="center_crossing", axis=0,
                              value=0.5),
        norm_region=[[0.375, 0.25, 0.25], [0.625, 0.75, 0.75]], **kw,
    )


PRESETS = {
    "translating_charge": lambda: _paper_charge(),
    "stopped_charge": lambda: RunConfig(
        source="stopped_charge", params=dict(t_stop=40 / 1024), N=65, r=4,
        levels=[[_OMEGA1], [_OMEGA2]], cfl=1.0, t_final=100 / 1024,
    ),
    "regrid_charge": _regrid,
    "divfree_loop": lambda: RunConfig(source="divfree_loop", N=65, r=4, levels=[[_OMEGA1], [_OMEGA2]],
                                      cfl=1.0, t_final=200 / 1024),
    "translating_charge_desk": _desk_charge,
    "stopped_charge_desk": lambda: RunConfig(
        source="stopped_charge", source_scale=9.0, params=dict(t_stop=40 / 1024), N=33, r=2,
        levels=[[[[0.25] * 3, [0.75] * 3]]], cfl=1.0, t_final=100 / 1024 * 9,
    ),
    "regrid_charge_desk": _desk_regrid,
    "divfree_loop_desk": lambda: RunConfig(source="divfree_loop", source_scale=8.0, N=33, r=2,
                                           levels=[[[[0.25] * 3, [0.75] * 3]]], cfl=1.0,
                                           t_final=25 / 64),
}


def preset(name: str, scale: int = 1) -> RunConfig:
    """Named setup; ``scale`` divides the node count per axis (keeping the
    physical problem and the CFL number)."""
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    cfg = PRESETS[name]()
    if scale != 1:
        if scale < 1 or (cfg.N - 1) % scale:
            raise ConfigurationError(f"scale {scale} does not divide N-1 = {cfg.N - 1}")
        cfg = cfg.with_resolution((cfg.N - 1) // scale + 1)
    return cfg


def _regrid_from(d):
    if d is None:
        return None
    if isinstance(d, RegridSchedule):
        return d
    return RegridSchedule(**d)


def config_from_dict(d: dict, base: RunConfig | None = None) -> RunConfig:
    """Build a config from nested sections (``domain, levels, source, time,
    filter, output, parallel``) or flat keys; unknown keys are errors."""
    cfg = copy.deepcopy(base) if base is not None else RunConfig()
    flat = {}
    sections = {
        "domain": {"N": "N", "length": "length"},
        "levels": None,
        "source": {"preset": "source", "kind": "source", "params": "params", "scale": "source_scale",
                   "init": "init", "analytic_derivatives": "analytic_derivatives"},
        "time": {"dt": "dt", "cfl": "cfl", "t_final": "t_final", "steps": "steps", "M": "M"},
        "filter": {"eta": "eta"},
        "output": {"cadence": "cadence", "track": "track", "norm_region": "norm_region",
                   "E_scale": "E_scale", "rho_scale": "rho_scale", "slice_z": "slice_z",
                   "checkpoint": "checkpoint"},
        "parallel": {"workers": "workers", "patch_nodes": "patch_nodes"},
    }
    names = {f.name for f in dataclasses.fields(RunConfig)}
    for key, val in (d or {}).items():
        if key == "levels" and isinstance(val, dict):
            if "r" in val:
                flat["r"] = val["r"]
            if "boxes" in val:
                flat["levels"] = val["boxes"]
            if "regrid" in val:
                flat["regrid"] = val["regrid"]
            extra = set(val) - {"r", "boxes", "regrid"}
            if extra:
                raise ConfigurationError(f"unknown keys in levels: {sorted(extra)}")
        elif key in sections and isinstance(val, dict) and sections[key] is not None:
            for k, v in val.items():
                if k not in sections[key]:
                    raise ConfigurationError(f"unknown key {key}.{k}")
                flat[sections[key][k]] = v
        elif key in names:
            flat[key] = val
        else:
            raise ConfigurationError(f"unknown configuration key {key!r}")
    for k, v in flat.items():
        if k == "params":
            cfg.params = {**cfg.params, **v}
        elif k == "regrid":
            cfg.regrid = _regrid_from(v)
        else:
            setattr(cfg, k, v)
    return cfg.validate()


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    with open(path) as fh:
        d = yaml.safe_load(fh) or {}
    if not isinstance(d, dict):
        raise ConfigurationError("configuration file must hold a mapping")
    if base is None and "preset" in d:
        base = preset(d.pop("preset"), int(d.pop("scale", 1)))
    return config_from_dict(d, base)
