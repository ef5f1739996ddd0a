"""Grid evaluation against the analytic vortex and plot-ready file export.

A *predictor* is any callable mapping points of shape ``(N, 3)`` ordered
``t, x, y`` to ``(omega, u)`` with ``omega`` of shape ``(N,)`` and ``u`` of
shape ``(2, N)`` (``u`` may be ``None``).  Model, oracle and static
predictors are provided; the latter two are reference hooks for tests and
diagnostics.
"""

from __future__ import annotations

import concurrent.futures
import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .losses import model_fields, planar_curl
from .taylor_green import analytic_velocity, analytic_vorticity, decay_factor
from .train import worker_count

DEFAULT_TIMES = (0.0, 0.25, 0.5, 0.75, 1.0)
CSV_HEADER = ("x", "y", "t", "pred", "true", "abs_err")
EVAL_CHUNK = 4096


def rel_l2(pred, true):
    """``||pred - true||_2 / ||true||_2``.

    A reference that has underflowed to zero (late snapshots at low Re) gives
    ``inf`` against any nonzero prediction and 0 against an exact one.
    """
    pred, true = np.asarray(pred, dtype=float), np.asarray(true, dtype=float)
    norm = np.linalg.norm(true)
    diff = np.linalg.norm(pred - true)
    if norm == 0:
        return 0.0 if diff == 0 else math.inf
    return float(diff / norm)


@dataclass
class EvalGrid:
    """Predicted and analytic vorticity on a periodic ``nx x ny`` grid at ``nt`` times.

    Arrays are indexed ``[time, y, x]``; the grid nodes are ``x = i / nx`` and
    ``y = j / ny``.  ``u_pred``/``u_true`` (shape ``(nt, 2, ny, nx)``) are kept
    when the predictor supplies velocity.
    """

    x: np.ndarray
    y: np.ndarray
    times: np.ndarray
    pred: np.ndarray
    true: np.ndarray
    u_pred: np.ndarray = None
    u_true: np.ndarray = None

    def __post_init__(self):
        self.x, self.y, self.times = (np.asarray(a, dtype=float) for a in (self.x, self.y, self.times))
        self.pred, self.true = np.asarray(self.pred, dtype=float), np.asarray(self.true, dtype=float)
        shape = (self.times.size, self.y.size, self.x.size)
        if self.pred.shape != shape or self.true.shape != shape:
            raise ConfigurationError(f"grid fields must have shape {shape}")

    @property
    def nx(self):
        return self.x.size

    @property
    def ny(self):
        return self.y.size

    @property
    def nt(self):
        return self.times.size

    @property
    def abs_err(self):
        return np.abs(self.pred - self.true)

    @property
    def rel_l2_per_time(self):
        return np.array([rel_l2(p, t) for p, t in zip(self.pred, self.true)])

    @property
    def rel_l2_overall(self):
        return rel_l2(self.pred, self.true)

    @property
    def velocity_rel_l2_per_time(self):
        if self.u_pred is None:
            return None
        return np.array([rel_l2(p, t) for p, t in zip(self.u_pred, self.u_true)])

    @property
    def velocity_rel_l2_overall(self):
        return None if self.u_pred is None else rel_l2(self.u_pred, self.u_true)

    def decay_ratio(self, which="pred"):
        """``||omega(t_last)|| / ||omega(t_first)||`` of the predicted or analytic field."""
        field = {"pred": self.pred, "true": self.true}[which]
        first = np.linalg.norm(field[0])
        if first == 0:
            raise ConfigurationError("decay ratio is undefined for a zero initial field")
        return float(np.linalg.norm(field[-1]) / first)

    def error_location(self, t):
        """Where ``|error|`` peaks at the snapshot closest to ``t``.

        Returns the peak's grid index, its ``|omega|`` and whether it lies in
        the lowest quartile of ``|omega|`` over the grid cells.
        """
        k = int(np.argmin(np.abs(self.times - t)))
        err = self.abs_err[k]
        j, i = np.unravel_index(int(np.argmax(err)), err.shape)
        magnitude = np.abs(self.true[k])
        threshold = float(np.quantile(magnitude, 0.25))
        return {"time": float(self.times[k]), "index": (int(i), int(j)),
                "x": float(self.x[i]), "y": float(self.y[j]),
                "abs_omega": float(magnitude[j, i]), "quartile_threshold": threshold,
                "in_low_quartile": bool(magnitude[j, i] <= threshold)}


def grid_points(nx, ny, t):
    """Points ``(t, x, y)`` of one snapshot, row-major with ``y`` outer."""
    if nx < 1 or ny < 1:
        raise ConfigurationError("grid dimensions must be positive")
    x = np.arange(nx) / nx
    y = np.arange(ny) / ny
    yy, xx = np.meshgrid(y, x, indexing="ij")
    return np.stack([np.full(xx.size, float(t)), xx.ravel(), yy.ravel()], axis=-1)


def _chunked(predict, points):
    parts = [points[i:i + EVAL_CHUNK] for i in range(0, len(points), EVAL_CHUNK)]
    workers = worker_count()
    if workers > 1 and len(parts) > 1:
        with concurrent.futures.ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(predict, parts))
    else:
        results = [predict(p) for p in parts]
    omega = np.concatenate([r[0] for r in results])
    u = None if results[0][1] is None else np.concatenate([r[1] for r in results], axis=1)
    return omega, u


def evaluate_grid(predict, re, nx=64, ny=64, times=DEFAULT_TIMES):
    """Run ``predict`` on the grid and pair it with the analytic vortex."""
    times = np.asarray(times, dtype=float).reshape(-1)
    if times.size == 0:
        raise ConfigurationError("at least one evaluation time is required")
    pred, true, u_pred, u_true = [], [], [], []
    for t in times:
        pts = grid_points(nx, ny, t)
        omega, u = _chunked(predict, pts)
        pred.append(omega.reshape(ny, nx))
        true.append(analytic_vorticity(pts[:, 1], pts[:, 2], t, re).reshape(ny, nx))
        if u is not None:
            u_pred.append(u.reshape(2, ny, nx))
            u_true.append(np.stack(analytic_velocity(pts[:, 1], pts[:, 2], t, re)).reshape(2, ny, nx))
    return EvalGrid(np.arange(nx) / nx, np.arange(ny) / ny, times, np.array(pred), np.array(true),
                    np.array(u_pred) if u_pred else None, np.array(u_true) if u_true else None)


# -- predictors ------------------------------------------------------------------

def model_predictor(params, spec, model, variant="potential", re=1.0, eps_div=1e-4,
                    source="curl"):
    """Predictor backed by a network.

    ``source="curl"`` reports ``d_x u_y - d_y u_x`` of the (recovered or
    predicted) velocity, which is comparable across models; ``"head"``
    reports the TENN vorticity output itself.
    """
    if source not in ("curl", "head"):
        raise ConfigurationError(f"unknown vorticity source {source!r}")
    if source == "head" and model != "tenn":
        raise ConfigurationError("only TENN models have a vorticity head")
    # the potential variant loses two orders between heads and u
    order = 1
    if model == "tenn" and variant == "potential":
        order = 3 if source == "curl" else 2

    def predict(points):
        f = model_fields(params, spec, points, order, model, variant, re, eps_div)
        omega = planar_curl(f.u) if source == "curl" else f.omega
        u = np.stack([c.value for c in f.u])
        return np.asarray(omega.value, dtype=float), u

    return predict


def oracle_predictor(re, scale=1.0):
    """Analytic fields times ``scale``; a self-comparison reference."""

    def predict(points):
        t, x, y = points[:, 0], points[:, 1], points[:, 2]
        return (scale * analytic_vorticity(x, y, t, re),
                scale * np.stack(analytic_velocity(x, y, t, re)))

    return predict


def static_predictor(re):
    """The initial fields frozen in time: the static-solution failure mode."""

    def predict(points):
        x, y = points[:, 1], points[:, 2]
        zero = np.zeros_like(x)
        return analytic_vorticity(x, y, zero, re), np.stack(analytic_velocity(x, y, zero, re))

    return predict


def expected_decay_ratio(re, t):
    """Analytic ``||omega(t)|| / ||omega(0)||``."""
    return float(decay_factor(t, re))


# -- export ------------------------------------------------------------------------

def write_grid_csv(grid, path):
    """One row per cell, ``t`` outermost then ``y`` then ``x``, 17 significant digits."""
    path = Path(path)
    err = grid.abs_err
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for k, t in enumerate(grid.times):
            for j, y in enumerate(grid.y):
                for i, x in enumerate(grid.x):
                    w.writerow([f"{v:.17g}" for v in
                                (x, y, t, grid.pred[k, j, i], grid.true[k, j, i], err[k, j, i])])
    return path


def read_grid_csv(path):
    """Rebuild an :class:`EvalGrid` (without velocity) from :func:`write_grid_csv` output."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ConfigurationError(f"{path}: not a grid CSV (header {rows[:1]})")
    data = np.array(rows[1:], dtype=float).reshape(-1, len(CSV_HEADER))
    x, y, t = (np.unique(data[:, c]) for c in range(3))
    shape = (t.size, y.size, x.size)
    if data.shape[0] != np.prod(shape):
        raise ConfigurationError(f"{path}: rows do not form a full grid")
    return EvalGrid(x, y, t, data[:, 3].reshape(shape), data[:, 4].reshape(shape))


def write_summary_csv(grid, path):
    """Per-time and overall vorticity rel-L2, velocity rel-L2 as a secondary column."""
    path = Path(path)
    vel = grid.velocity_rel_l2_per_time
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("t", "rel_l2", "velocity_rel_l2"))
        for k, (t, e) in enumerate(zip(grid.times, grid.rel_l2_per_time)):
            w.writerow((f"{t:.17g}", f"{e:.17g}", "" if vel is None else f"{vel[k]:.17g}"))
        overall_vel = grid.velocity_rel_l2_overall
        w.writerow(("overall", f"{grid.rel_l2_overall:.17g}",
                    "" if overall_vel is None else f"{overall_vel:.17g}"))
    return path


def write_pgm(field, path):
    """Binary 8-bit PGM of a 2-D field, min-max normalised.

    Image row ``j`` is ``field[j]``.  A sidecar ``<path>.txt`` records the
    scale; a constant field is written as gray level 0 with ``constant=1``.
    """
    field = np.asarray(field, dtype=float)
    if field.ndim != 2:
        raise ConfigurationError("a PGM image needs a 2-D field")
    lo, hi = float(field.min()), float(field.max())
    constant = hi == lo
    if constant:
        pixels = np.zeros(field.shape, dtype=np.uint8)
    else:
        pixels = np.rint((field - lo) / (hi - lo) * 255.0).astype(np.uint8)
    ny, nx = field.shape
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{nx} {ny}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())
    sidecar = path.with_name(path.name + ".txt")
    sidecar.write_text(f"min={lo!r}\nmax={hi!r}\nconstant={int(constant)}\n")
    return path, sidecar


def read_pgm(path):
    """Pixels of a file written by :func:`write_pgm` as a ``(ny, nx)`` uint8 array."""
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if len(parts) != 4 or parts[0] != b"P5" or parts[2] != b"255":
        raise ConfigurationError(f"{path}: not an 8-bit binary PGM")
    nx, ny = (int(v) for v in parts[1].split())
    pixels = np.frombuffer(parts[3], dtype=np.uint8)
    if pixels.size != nx * ny:
        raise ConfigurationError(f"{path}: pixel count does not match header")
    return pixels.reshape(ny, nx)


def read_sidecar(path):
    out = {}
    for line in Path(path).read_text().splitlines():
        key, _, value = line.partition("=")
        out[key] = float(value)
    return out


def export_heatmaps(grid, out_dir, fmt="csv"):
    """Write ``grid`` as one CSV, or as PGM images of prediction, truth and error per time."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        return [write_grid_csv(grid, out_dir / "vorticity_grid.csv")]
    if fmt != "pgm":
        raise ConfigurationError(f"unknown export format {fmt!r}; pick csv or pgm")
    written = []
    err = grid.abs_err
    for k in range(grid.nt):
        for name, field in (("pred", grid.pred[k]), ("true", grid.true[k]), ("abs_err", err[k])):
            written.extend(write_pgm(field, out_dir / f"{name}_t{k}.pgm"))
    return written
