"""ADAM training loop, collocation sampling and checkpoint persistence."""

from __future__ import annotations

import concurrent.futures
import dataclasses
import hashlib
import io
import json
import logging
import math
import os
import struct
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import (ConfigurationError, CheckpointVersionError, CorruptCheckpointError,
                     DivergenceError, NumericError, SpecMismatchError)
from .graph import ParamGraph, ParamVector
from .losses import TERMS, LossWeights, loss_terms, weighted_total
from .network import NetworkSpec, PeriodicDictionary, init_params

log = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e12
WORKERS_ENV = "TENN_WORKERS"


# -- optimizer -----------------------------------------------------------

@dataclass(frozen=True)
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, size, config=AdamConfig()):
        return cls(np.zeros(size), np.zeros(size), 0, config.lr, config.beta1,
                   config.beta2, config.eps)


def adam_step(state, params, grad):
    """One bias-corrected ADAM update; returns ``(new_params, new_state)``."""
    g = grad.values if isinstance(grad, ParamVector) else np.asarray(grad, dtype=float)
    if g.shape != params.values.shape or state.m.shape != g.shape:
        raise ConfigurationError("gradient, moments and parameters must have the same length")
    if not np.all(np.isfinite(g)):
        raise NumericError(f"non-finite gradient at ADAM step {state.step + 1}")
    step = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * g
    v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    m_hat = m / (1.0 - state.beta1**step)
    v_hat = v / (1.0 - state.beta2**step)
    values = params.values - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    new_state = dataclasses.replace(state, m=m, v=v, step=step)
    return params.with_values(values), new_state


# -- configuration ---------------------------------------------------------

def default_network(model, variant="potential"):
    heads = "vanilla" if model == "vanilla" else f"tenn_{variant}"
    return NetworkSpec(PeriodicDictionary(2), ((64, "tanh"),) * 4, heads)


@dataclass
class TrainConfig:
    model: str = "tenn"
    variant: str = "potential"
    re: float = 100.0
    t_end: float = 1.0
    epochs: int = 1000
    interior_points: int = 4096
    ic_points: int = 1024
    batch_size: int = 1024
    seed: int = 0
    weights: LossWeights = None
    network: NetworkSpec = None
    adam: AdamConfig = field(default_factory=AdamConfig)
    # velocity-recovery regulariser used in training; see the README on its choice
    eps_div: float = 1.0
    deterministic: bool = True
    chunks: int = 1

    def __post_init__(self):
        if self.model not in ("vanilla", "tenn"):
            raise ConfigurationError(f"model must be 'vanilla' or 'tenn', got {self.model!r}")
        if self.variant not in ("potential", "split"):
            raise ConfigurationError(f"variant must be 'potential' or 'split', got {self.variant!r}")
        if self.network is None:
            self.network = default_network(self.model, self.variant)
        if self.weights is None:
            self.weights = LossWeights.preset(self.model, self.variant)
        if self.re <= 0 or self.t_end <= 0:
            raise ConfigurationError("re and t_end must be positive")
        if self.epochs < 0:
            raise ConfigurationError("epochs must be non-negative")
        for name in ("interior_points", "ic_points", "batch_size", "chunks"):
            if int(getattr(self, name)) < 1:
                raise ConfigurationError(f"{name} must be positive")
        if self.eps_div < 0:
            raise ConfigurationError("eps_div must be non-negative")

    @property
    def steps_per_epoch(self):
        return math.ceil(self.interior_points / self.batch_size)

    def to_dict(self):
        return {
            "model": self.model, "variant": self.variant, "re": self.re, "t_end": self.t_end,
            "epochs": self.epochs, "interior_points": self.interior_points,
            "ic_points": self.ic_points, "batch_size": self.batch_size, "seed": self.seed,
            "weights": self.weights.as_dict(), "network": self.network.to_dict(),
            "adam": dataclasses.asdict(self.adam), "eps_div": self.eps_div,
            "deterministic": self.deterministic, "chunks": self.chunks,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "weights" in d:
            d["weights"] = LossWeights.from_dict(d["weights"])
        if "network" in d:
            d["network"] = NetworkSpec.from_dict(d["network"])
        if "adam" in d:
            d["adam"] = AdamConfig(**d["adam"])
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


# -- sampling ----------------------------------------------------------------

def sample_collocation(n, seed, t_end=1.0, at_t0=False):
    """``n`` uniform points ``(t, x, y)`` in ``[0, t_end] x [0, 1)^2``.

    ``seed`` may be an integer or a sequence of integers (mixed by
    :class:`numpy.random.SeedSequence`).
    """
    if n < 1:
        raise ConfigurationError("need at least one collocation point")
    rng = np.random.default_rng(seed)
    pts = rng.random((n, 3))
    if at_t0:
        pts[:, 0] = 0.0
    else:
        pts[:, 0] *= t_end
    return pts


# -- report ------------------------------------------------------------------

CSV_COLUMNS = ("epoch",) + TERMS + ("total",)


@dataclass
class TrainReport:
    history: np.ndarray
    totals: np.ndarray
    wall_time: float = 0.0
    checksum: str = ""
    message: str = ""

    def csv_text(self):
        buf = io.StringIO()
        buf.write(",".join(CSV_COLUMNS) + "\n")
        for epoch, (row, total) in enumerate(zip(self.history, self.totals)):
            buf.write(",".join([str(epoch)] + [repr(float(v)) for v in row]
                               + [repr(float(total))]) + "\n")
        return buf.getvalue()

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.csv_text())


def read_history_csv(path):
    with open(path) as fh:
        rows = fh.read().splitlines()[1:]
    data = np.array([r.split(",") for r in rows], dtype=float).reshape(-1, len(CSV_COLUMNS))
    return TrainReport(history=data[:, 1:1 + len(TERMS)], totals=data[:, -1])


def params_checksum(params):
    return hashlib.sha256(params.values.astype("<f8").tobytes()).hexdigest()


# -- training ---------------------------------------------------------------

_IC_TERMS = np.array([t in ("ic_vanilla", "ic_tenn") for t in TERMS])


def _chunk_gradient(params, config, interior, ic, shares=(1.0, 1.0)):
    """Share-weighted term values and gradient of one chunk.

    Every term is a mean over its points, so scaling interior terms by the
    chunk's share of interior points (and IC terms by its share of IC points)
    makes chunk results add up to the full-batch ones.
    """
    scale = np.where(_IC_TERMS, shares[1], shares[0])
    graph = ParamGraph()
    terms = loss_terms(params, config.network, interior, ic, config.model, config.variant,
                       config.re, config.eps_div, graph)
    total = weighted_total(terms, LossWeights(config.weights.alpha * scale))
    grad = graph.backward(total).values
    values = np.array([0.0 if terms[t] is None else float(terms[t].value) for t in TERMS])
    return values * scale, grad


def _step_gradient(params, config, interior, ic, pool):
    """Per-term values and gradient of one batch, reduced over fixed chunks.

    The chunk partition depends only on ``config.chunks``; the worker count
    changes scheduling, never the arithmetic.  In deterministic mode chunk
    results are summed in chunk order, otherwise in completion order.
    """
    n = max(1, min(config.chunks, len(interior), len(ic)))
    parts = list(zip(np.array_split(interior, n), np.array_split(ic, n)))
    jobs = [(a, b, (len(a) / len(interior), len(b) / len(ic))) for a, b in parts]
    if pool is None:
        results = [_chunk_gradient(params, config, *job) for job in jobs]
    else:
        futures = [pool.submit(_chunk_gradient, params, config, *job) for job in jobs]
        if config.deterministic:
            results = [f.result() for f in futures]
        else:
            results = [f.result() for f in concurrent.futures.as_completed(futures)]
    values, grad = results[0]
    for v, g in results[1:]:
        values = values + v
        grad = grad + g
    return values, grad


def worker_count():
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        raise ConfigurationError(f"{WORKERS_ENV} must be an integer") from None


def train(config, params=None, callback=None):
    """Run ``config.epochs`` epochs of resampled-batch ADAM.

    Each epoch draws fresh interior and initial-condition points, splits them
    into ``steps_per_epoch`` batches and takes one ADAM step per batch.  The
    logged per-term losses are the batch averages measured before each
    update.  Returns ``(params, report)``.
    """
    start = time.perf_counter()
    if params is None:
        params = init_params(config.network, config.seed)
    elif params.layout != config.network.layout:
        raise ConfigurationError("initial parameters do not match the configured network")
    state = AdamState.fresh(len(params), config.adam)
    steps = config.steps_per_epoch
    history = np.zeros((config.epochs, len(TERMS)))
    totals = np.zeros(config.epochs)
    workers = worker_count()
    pool = concurrent.futures.ThreadPoolExecutor(workers) if workers > 1 and config.chunks > 1 else None

    def partial_report(epochs_done, message):
        return TrainReport(history[:epochs_done], totals[:epochs_done],
                           time.perf_counter() - start, params_checksum(params), message)

    try:
        for epoch in range(config.epochs):
            interior = sample_collocation(config.interior_points, [config.seed, epoch, 0],
                                          config.t_end)
            ic = sample_collocation(config.ic_points, [config.seed, epoch, 1], config.t_end,
                                    at_t0=True)
            row = np.zeros(len(TERMS))
            for a, b in zip(np.array_split(interior, steps), np.array_split(ic, steps)):
                values, grad = _step_gradient(params, config, a, b, pool)
                total = float(np.dot(config.weights.alpha, values))
                if not np.isfinite(total) or total > DIVERGENCE_LIMIT:
                    history[epoch] = row / steps
                    raise DivergenceError(
                        f"loss {total!r} at epoch {epoch} exceeded the divergence guard",
                        partial_report(epoch, "diverged"), params)
                row += values
                try:
                    params, state = adam_step(state, params, grad)
                except NumericError as exc:
                    raise NumericError(f"epoch {epoch}: {exc}") from None
            history[epoch] = row / steps
            totals[epoch] = float(np.dot(config.weights.alpha, history[epoch]))
            if callback is not None:
                callback(epoch, history[epoch], totals[epoch], params)
            if epoch % 100 == 0:
                log.info("epoch %d total %.6g", epoch, totals[epoch])
    finally:
        if pool is not None:
            pool.shutdown()
    return params, TrainReport(history, totals, time.perf_counter() - start,
                               params_checksum(params))


# -- checkpoints --------------------------------------------------------------

MAGIC = b"TENNCKPT"
VERSION = 1


@dataclass
class Checkpoint:
    params: ParamVector
    spec: NetworkSpec
    config: dict


def save_checkpoint(path, params, spec, config=None):
    """Write ``params`` with a header identifying the architecture.

    Layout (little-endian): magic, uint32 version, 32-byte spec hash, uint32
    layer count, three uint32 per layer, uint32 metadata length + UTF-8 JSON
    metadata (network description and training config), uint64 parameter
    count, then the raw float64 parameters.
    """
    if params.layout != spec.layout:
        raise ConfigurationError("parameters do not match the network spec")
    if isinstance(config, TrainConfig):
        config = config.to_dict()
    meta = json.dumps({"network": spec.to_dict(), "config": config or {}},
                      sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(spec.digest())
        fh.write(struct.pack("<I", len(spec.layout)))
        for entry in spec.layout:
            fh.write(struct.pack("<III", *entry))
        fh.write(struct.pack("<I", len(meta)))
        fh.write(meta)
        fh.write(struct.pack("<Q", len(params)))
        fh.write(params.values.astype("<f8").tobytes())


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise CorruptCheckpointError("checkpoint is truncated")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(path, spec=None):
    """Read a checkpoint; with ``spec`` given, refuse files of another architecture."""
    with open(path, "rb") as fh:
        r = _Reader(fh.read())
    if r.take(len(MAGIC)) != MAGIC:
        raise CorruptCheckpointError("not a checkpoint file (bad magic)")
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise CheckpointVersionError(f"checkpoint version {version}, expected {VERSION}")
    digest = r.take(32)
    (n_layers,) = r.unpack("<I")
    layout = tuple(r.unpack("<III") for _ in range(n_layers))
    (meta_len,) = r.unpack("<I")
    try:
        meta = json.loads(r.take(meta_len).decode())
        stored = NetworkSpec.from_dict(meta["network"])
    except (ValueError, KeyError) as exc:
        raise CorruptCheckpointError(f"unreadable checkpoint metadata: {exc}") from None
    (count,) = r.unpack("<Q")
    values = np.frombuffer(r.take(8 * count), dtype="<f8").astype(np.float64)
    if r.pos != len(r.data):
        raise CorruptCheckpointError("trailing bytes after parameter block")
    if stored.digest() != digest or stored.layout != layout:
        raise CorruptCheckpointError("header hash does not match stored network description")
    if spec is not None and spec.digest() != digest:
        raise SpecMismatchError("checkpoint was written for a different network spec")
    return Checkpoint(ParamVector(values, layout), stored, meta.get("config", {}))
