"""CSV tables, z-slices and the structured-grid text format."""
from __future__ import annotations

import csv
import dataclasses
from pathlib import Path

import numpy as np
import yaml

from .diagnostics import residual_arrays


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_table(rows: list[dict], path) -> None:
    """Rows of dicts with a common key set, full float precision."""
    path = Path(path)
    if not rows:
        path.write_text("")
        return
    keys = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        for r in rows:
            w.writerow([_fmt(r.get(k, "")) for k in keys])


def read_table(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        out.append({k: (float(v) if v not in ("", None) else float("nan")) for k, v in r.items()})
    return out


write_timeseries = write_table
write_rates = write_table


def write_config(cfg, path) -> None:
    d = dataclasses.asdict(cfg)
    with open(path, "w") as fh:
        yaml.safe_dump(_plain(d), fh, sort_keys=False)


def _plain(v):
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    return v


SLICE_FIELDS = ("Ex", "Ey", "Ez", "Bx", "By", "Bz", "div_E_res", "div_B")


def slice_arrays(level, z: float, source, t: float):
    """Fields on the node plane of ``level`` nearest to ``z`` within its region
    bounding box; ``None`` if the plane misses the box."""
    box = level.bbox
    k = int(round((z - level.origin[2]) / level.h))
    if not box.lo[2] <= k <= box.hi[2]:
        return None
    st = level.state
    rho = level.source_terms(source, t)[0] if source is not None else None
    _, _, D_B, D_E = residual_arrays(st.E.values, st.B.values, st.Phi.values, st.Psi.values, rho, level.h)
    sl = box.slices(level.storage)
    kz = k - level.storage.lo[2]
    sxy = (sl[0], sl[1], kz)
    data = {
        "Ex": st.E.values[(0,) + sxy], "Ey": st.E.values[(1,) + sxy], "Ez": st.E.values[(2,) + sxy],
        "Bx": st.B.values[(0,) + sxy], "By": st.B.values[(1,) + sxy], "Bz": st.B.values[(2,) + sxy],
        "div_E_res": D_E[sxy], "div_B": D_B[sxy],
    }
    mask = level.region_mask[sxy]
    x = level.origin[0] + box.axis_indices(0) * level.h
    y = level.origin[1] + box.axis_indices(1) * level.h
    return x, y, level.origin[2] + k * level.h, data, mask


def write_slices(hier, z: float, out, source=None, t: float = 0.0) -> None:
    """``slice_z.csv`` with all levels and one ``slice_L<j>.vtk`` per level."""
    out = Path(out)
    with open(out / "slice_z.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "x", "y", "z", "in_region"] + list(SLICE_FIELDS))
        for j, lev in enumerate(hier.levels):
            s = slice_arrays(lev, z, source, t)
            if s is None:
                continue
            x, y, zz, data, mask = s
            for a in range(len(x)):
                for b in range(len(y)):
                    w.writerow([j, repr(float(x[a])), repr(float(y[b])), repr(float(zz)), int(mask[a, b])]
                               + [repr(float(data[f][a, b])) for f in SLICE_FIELDS])
            write_vtk_slice(out / f"slice_L{j}.vtk", x, y, zz, lev.h, data)


def write_vtk_slice(path, x, y, z, h, data: dict) -> None:
    """Legacy ASCII VTK structured-points file for one plane."""
    nx, ny = len(x), len(y)
    lines = [
        "# vtk DataFile Version 3.0",
        "field slice",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {nx} {ny} 1",
        f"ORIGIN {x[0]!r} {y[0]!r} {z!r}",
        f"SPACING {h!r} {h!r} {h!r}",
        f"POINT_DATA {nx * ny}",
    ]
    for name, arr in data.items():
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        # VTK ordering: x fastest
        lines.extend(repr(float(v)) for v in np.asarray(arr).T.ravel())
    Path(path).write_text("\n".join(lines) + "\n")
