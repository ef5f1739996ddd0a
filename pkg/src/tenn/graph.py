"""Recorded computation over network parameters.

Jets built from watched parameters register every operation here, so a
scalar loss assembled from jet entries (values *and* input-derivatives) can
be differentiated with respect to the weights by a single reverse sweep.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericError


@dataclass
class ParamVector:
    """Flat float64 parameter storage with a per-layer layout.

    ``layout`` holds one ``(rows, cols, bias_len)`` triple per layer; the
    weight block (row-major, ``rows x cols``) comes first, then the bias.
    """

    values: np.ndarray
    layout: tuple

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.layout = tuple(tuple(int(n) for n in entry) for entry in self.layout)
        if self.values.ndim != 1:
            raise ConfigurationError("parameter values must be a flat array")
        expected = sum(r * c + b for r, c, b in self.layout)
        if expected != self.values.size:
            raise ConfigurationError(
                f"layout describes {expected} parameters, array holds {self.values.size}"
            )

    def __len__(self):
        return self.values.size

    def layers(self):
        """Yield ``(weight, bias)`` views into :attr:`values`."""
        offset = 0
        for rows, cols, nb in self.layout:
            w = self.values[offset:offset + rows * cols].reshape(rows, cols)
            offset += rows * cols
            b = self.values[offset:offset + nb]
            offset += nb
            yield w, b

    def copy(self):
        return ParamVector(self.values.copy(), self.layout)

    def with_values(self, values):
        return ParamVector(values, self.layout)

    @classmethod
    def zeros(cls, layout):
        size = sum(r * c + b for r, c, b in layout)
        return cls(np.zeros(size), layout)


class ParamGraph:
    """Single-writer tape of jet operations.

    Node ids are assigned in creation order, which is a topological order
    because an operation can only consume jets that already exist.
    """

    def __init__(self):
        self._kinds = []
        self._parents = []
        self._vjps = []
        self._watched = None
        self._roots = None
        self._leaf_slices = {}

    def __len__(self):
        return len(self._kinds)

    def _new_node(self, kind, parents, vjp):
        self._kinds.append(kind)
        self._parents.append(tuple(parents))
        self._vjps.append(vjp)
        return len(self._kinds) - 1

    def record(self, kind, parents, vjp):
        """Append an operation; ``parents`` may contain ``None`` for constants."""
        return self._new_node(kind, parents, vjp)

    def watch(self, params):
        """Register ``params`` as the graph roots.

        Returns one ``(weight, bias)`` pair of order-0 jets per layer.  Watching
        the same vector again returns the same jets.
        """
        from .jets import Jet3

        if self._watched is params:
            return self._roots
        if self._watched is not None:
            raise ConfigurationError("a ParamGraph watches exactly one ParamVector")
        self._watched = params
        out = []
        offset = 0
        for (rows, cols, nb), (w, b) in zip(params.layout, params.layers()):
            w_node = self._new_node("param", (), None)
            self._leaf_slices[w_node] = (offset, offset + rows * cols)
            offset += rows * cols
            b_node = self._new_node("param", (), None)
            self._leaf_slices[b_node] = (offset, offset + nb)
            offset += nb
            out.append((Jet3(w[None], 0, self, w_node), Jet3(b[None], 0, self, b_node)))
        self._roots = out
        return out

    def backward(self, loss):
        """Gradient of the scalar jet ``loss`` with respect to the watched parameters.

        Parameters never reached from ``loss`` receive exactly zero.
        """
        if self._watched is None:
            raise ConfigurationError("no parameters watched on this graph")
        if loss.graph is not self or loss.node is None:
            raise ConfigurationError("loss was not recorded on this graph")
        if loss.order != 0 or loss.c.size != 1:
            raise ConfigurationError("backward needs a scalar order-0 jet")

        adjoints = [None] * len(self._kinds)
        adjoints[loss.node] = np.ones_like(loss.c)
        for node in range(loss.node, -1, -1):
            g = adjoints[node]
            vjp = self._vjps[node]
            if g is None or vjp is None:
                continue
            parents = self._parents[node]
            needs = tuple(p is not None for p in parents)
            grads = vjp(g, needs)
            for parent, gp in zip(parents, grads):
                if parent is None or gp is None:
                    continue
                if not np.all(np.isfinite(gp)):
                    raise NumericError(
                        f"non-finite adjoint produced by '{self._kinds[node]}' node {node}"
                    )
                if adjoints[parent] is None:
                    adjoints[parent] = gp
                else:
                    adjoints[parent] = adjoints[parent] + gp
            if node not in self._leaf_slices:
                adjoints[node] = None

        flat = np.zeros(len(self._watched))
        for node, (lo, hi) in self._leaf_slices.items():
            if adjoints[node] is not None:
                flat[lo:hi] = adjoints[node].reshape(-1)
        return self._watched.with_values(flat)
