"""Forward jets in the three spacetime inputs ``(t, x, y)``.

A :class:`Jet3` stores a value together with all partial derivatives up to a
fixed order (at most 3).  Coefficients live on the leading axis of ``c`` in
graded order::

    0        value
    1..3     d/dt, d/dx, d/dy
    4..9     tt, tx, ty, xx, xy, yy
    10..19   ttt, ttx, tty, txx, txy, tyy, xxx, xxy, xyy, yyy

so a lower-order jet is a prefix of a higher-order one.  Only one entry per
unordered index tuple is stored, which makes the symmetry of the Hessian and
of the third-derivative tensor structural.  Every trailing axis of ``c`` is a
batch axis; arithmetic broadcasts over it.

When an operand is attached to a :class:`~tenn.graph.ParamGraph` the result
is recorded together with its vector-Jacobian product, which is how losses
containing input-derivatives are differentiated with respect to weights.
"""

from __future__ import annotations

import functools
import itertools
import math

import numpy as np

from .errors import ConfigurationError, SingularityError

N_INPUTS = 3
MAX_ORDER = 3
INPUT_NAMES = ("t", "x", "y")


def _build_multi_indices():
    out = []
    for degree in range(MAX_ORDER + 1):
        for combo in itertools.combinations_with_replacement(range(N_INPUTS), degree):
            out.append(tuple(combo.count(i) for i in range(N_INPUTS)))
    return tuple(out)


MULTI_INDICES = _build_multi_indices()
_POSITION = {m: i for i, m in enumerate(MULTI_INDICES)}
_NCOEF = tuple(math.comb(N_INPUTS + k, k) for k in range(MAX_ORDER + 1))


def ncoef(order):
    return _NCOEF[order]


def check_order(order):
    if not isinstance(order, (int, np.integer)) or not 0 <= order <= MAX_ORDER:
        raise ConfigurationError(f"jet order must be an integer in 0..{MAX_ORDER}, got {order!r}")
    return int(order)


def coef_index(*axes):
    """Storage position of the derivative along ``axes`` (e.g. ``coef_index(1, 2)`` for d2/dxdy)."""
    counts = [0] * N_INPUTS
    for a in axes:
        counts[a] += 1
    return _POSITION[tuple(counts)]


def _degree(m):
    return sum(m)


class _Table:
    """Pair lists of the truncated Leibniz product.

    ``groups`` maps each output entry to its ``(a_index, b_index, weight)``
    terms, always in the same order so that a given entry is summed
    identically at every truncation order.  Pairs whose operand degree is
    below ``min_a``/``min_b`` are dropped (those entries are known to be
    zero).  With ``square`` the two operands are the same array and mirrored
    pairs are merged.
    """

    def __init__(self, order, min_a=0, min_b=0, square=False):
        n = ncoef(order)
        self.n = n
        groups = []
        by_a = {}
        for g, gam in enumerate(MULTI_INDICES[:n]):
            terms = []
            for a, alp in enumerate(MULTI_INDICES[:n]):
                if any(x > y for x, y in zip(alp, gam)):
                    continue
                bet = tuple(y - x for x, y in zip(alp, gam))
                b = _POSITION[bet]
                if _degree(alp) < min_a or _degree(bet) < min_b:
                    continue
                w = float(np.prod([math.comb(y, x) for x, y in zip(alp, gam)]))
                if square:
                    if b < a:
                        continue
                    if b > a:
                        w *= 2.0
                terms.append((a, b, w))
                by_a.setdefault(a, []).append((g, b, w))
            if terms:
                groups.append((g, terms))
        self.groups = groups
        self.adjoint_groups = sorted(by_a.items())


@functools.lru_cache(maxsize=None)
def _table(order, min_a=0, min_b=0, square=False):
    return _Table(order, min_a, min_b, square)


def _accumulate(out_shape, groups, left, right, n):
    out = np.zeros((n,) + out_shape)
    tmp = np.empty(out_shape)
    for target, terms in groups:
        acc = out[target, ...]  # a view even for unbatched jets
        first = True
        for i, j, w in terms:
            dest = acc if first else tmp
            np.multiply(left[i], right[j], out=dest)
            if w != 1.0:
                dest *= w
            if not first:
                acc += tmp
            first = False
    return out


def poly_mul(a, b, order, min_a=0, min_b=0):
    """Leibniz product of two coefficient arrays at ``order``."""
    t = _table(order, min_a, min_b)
    return _accumulate(np.broadcast_shapes(a.shape[1:], b.shape[1:]), t.groups, a, b, t.n)


def poly_square(a, order, min_deg=0):
    """``poly_mul(a, a)`` with mirrored pairs merged."""
    t = _table(order, min_deg, min_deg, True)
    return _accumulate(a.shape[1:], t.groups, a, a, t.n)


def poly_mul_adjoint(g, b, order):
    """Adjoint of ``a -> poly_mul(a, b)`` applied to the cotangent ``g``."""
    t = _table(order)
    return _accumulate(np.broadcast_shapes(g.shape[1:], b.shape[1:]),
                       t.adjoint_groups, g, b, t.n)


def _unbroadcast(g, shape):
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    lead = g.ndim - len(shape)
    g = g.sum(axis=tuple(range(lead))) if lead else g
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# derivative tables: f, f', f'', ... evaluated at x, up to n-th derivative

def _sin_table(x, n):
    s, c = np.sin(x), np.cos(x)
    cyc = (s, c, -s, -c)
    return [cyc[k % 4] for k in range(n + 1)]


def _cos_table(x, n):
    s, c = np.sin(x), np.cos(x)
    cyc = (c, -s, -c, s)
    return [cyc[k % 4] for k in range(n + 1)]


def _scaled(table, freq):
    def fn(x, n):
        base = table(freq * x, n)
        return [base[k] * freq**k for k in range(n + 1)]
    return fn


def _tanh_table(x, n):
    t = np.tanh(x)
    s = 1.0 - t * t
    full = [t, s, -2.0 * t * s, s * (6.0 * t * t - 2.0), 8.0 * t * s * (2.0 - 3.0 * t * t)]
    return full[:n + 1]


def _softplus_table(x, n):
    sig = 0.5 * (1.0 + np.tanh(0.5 * x))
    d2 = sig * (1.0 - sig)
    full = [np.logaddexp(0.0, x), sig, d2, d2 * (1.0 - 2.0 * sig),
            d2 * (1.0 - 6.0 * sig + 6.0 * sig * sig)]
    return full[:n + 1]


def _exp_table(x, n):
    e = np.exp(x)
    return [e] * (n + 1)


def _reciprocal_table(x, n):
    inv = 1.0 / x
    out = [inv]
    for k in range(1, n + 1):
        out.append(out[-1] * inv * (-k))
    return out


TWO_PI = 2.0 * np.pi

ELEMENTWISE = {
    "sin": _sin_table,
    "cos": _cos_table,
    "tanh": _tanh_table,
    "softplus": _softplus_table,
    "exp": _exp_table,
    "sin2pi": _scaled(_sin_table, TWO_PI),
    "cos2pi": _scaled(_cos_table, TWO_PI),
    "reciprocal": _reciprocal_table,
}


def _as_constant(other):
    """Plain numbers/arrays are constants: value-only, zero derivatives."""
    return np.asarray(other, dtype=np.float64)


class Jet3:
    """Value and partial derivatives up to ``order`` in ``(t, x, y)``.

    ``c`` has shape ``(ncoef(order), *batch)``.  Instances are treated as
    immutable; all operations return new jets.
    """

    __slots__ = ("c", "order", "graph", "node")
    __array_priority__ = 100

    def __init__(self, c, order, graph=None, node=None):
        self.order = check_order(order)
        c = np.asarray(c, dtype=np.float64)
        if c.shape[:1] != (ncoef(self.order),):
            raise ConfigurationError(
                f"order-{self.order} jet needs {ncoef(self.order)} coefficients, got shape {c.shape}"
            )
        self.c = c
        self.graph = graph
        self.node = node

    # -- construction -----------------------------------------------------

    @classmethod
    def constant(cls, value, order):
        value = _as_constant(value)
        c = np.zeros((ncoef(order),) + value.shape)
        c[0] = value
        return cls(c, order)

    @property
    def shape(self):
        return self.c.shape[1:]

    @property
    def tracked(self):
        return self.node is not None

    def __repr__(self):
        return f"Jet3(order={self.order}, shape={self.shape}, tracked={self.tracked})"

    # -- reading ----------------------------------------------------------

    @property
    def value(self):
        return self.c[0]

    @property
    def grad(self):
        """``(3, *batch)`` array of first derivatives, ``None`` at order 0."""
        if self.order < 1:
            return None
        return self.c[1:4]

    @property
    def hess(self):
        """Full symmetric ``(3, 3, *batch)`` Hessian, ``None`` below order 2."""
        if self.order < 2:
            return None
        idx = np.array([[coef_index(i, j) for j in range(3)] for i in range(3)])
        return self.c[idx]

    @property
    def third(self):
        """Full symmetric ``(3, 3, 3, *batch)`` third-derivative tensor."""
        if self.order < 3:
            return None
        idx = np.array([[[coef_index(i, j, k) for k in range(3)] for j in range(3)]
                        for i in range(3)])
        return self.c[idx]

    def d(self, *axes):
        """Plain array of the derivative along ``axes`` (``d()`` is the value)."""
        if len(axes) > self.order:
            raise ConfigurationError(
                f"derivative of degree {len(axes)} not carried by an order-{self.order} jet"
            )
        return self.c[coef_index(*axes)]

    def detach(self):
        return Jet3(self.c, self.order)

    # -- recording helper -------------------------------------------------

    @staticmethod
    def _result(c, order, kind, parents, vjp):
        graph = None
        for p in parents:
            if p.graph is not None:
                if graph is not None and p.graph is not graph:
                    raise ConfigurationError("operands belong to different ParamGraphs")
                graph = p.graph
        if graph is None:
            return Jet3(c, order)
        node = graph.record(kind, [p.node for p in parents], vjp)
        return Jet3(c, order, graph, node)

    def _same_order(self, other):
        if other.order != self.order:
            raise ConfigurationError(
                f"order mismatch: {self.order} vs {other.order}; truncate explicitly"
            )

    # -- linear structure -------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, Jet3):
            k = _as_constant(other)
            c = np.broadcast_to(
                self.c, self.c.shape[:1] + np.broadcast_shapes(self.shape, k.shape)).copy()
            c[0] += k
            shape = self.c.shape
            return self._result(c, self.order, "add_const", (self,),
                                lambda g, needs: (_unbroadcast(g, shape),))
        self._same_order(other)
        sa, sb = self.c.shape, other.c.shape
        return self._result(self.c + other.c, self.order, "add", (self, other),
                            lambda g, needs: (_unbroadcast(g, sa) if needs[0] else None,
                                              _unbroadcast(g, sb) if needs[1] else None))

    __radd__ = __add__

    def __neg__(self):
        return self._result(-self.c, self.order, "neg", (self,), lambda g, needs: (-g,))

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, k):
        """Multiply by a constant (scalar or batch-shaped array)."""
        k = _as_constant(k)
        shape = self.c.shape
        return self._result(self.c * k, self.order, "scale", (self,),
                            lambda g, needs: (_unbroadcast(g * k, shape),))

    # -- products ---------------------------------------------------------

    def __mul__(self, other):
        if not isinstance(other, Jet3):
            return self.scale(other)
        self._same_order(other)
        a, b, k = self.c, other.c, self.order
        out = poly_mul(a, b, k)

        def vjp(g, needs):
            return (_unbroadcast(poly_mul_adjoint(g, b, k), a.shape) if needs[0] else None,
                    _unbroadcast(poly_mul_adjoint(g, a, k), b.shape) if needs[1] else None)

        return self._result(out, k, "mul", (self, other), vjp)

    __rmul__ = __mul__

    def square(self):
        return self * self

    def reciprocal(self):
        zero = self.c[0] == 0
        if np.any(zero):
            raise SingularityError("division by a jet with zero value",
                                   where=np.argwhere(zero))
        return self.apply("reciprocal")

    def __truediv__(self, other):
        if not isinstance(other, Jet3):
            k = _as_constant(other)
            if np.any(k == 0):
                raise SingularityError("division by zero constant", where=np.argwhere(k == 0))
            return self.scale(1.0 / k)
        self._same_order(other)
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal().scale(other)

    def __pow__(self, n):
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise ConfigurationError("only positive integer powers are supported")
        out = self
        for _ in range(int(n) - 1):
            out = out * self
        return out

    # -- elementwise functions (Faa di Bruno) ----------------------------

    def apply(self, kind):
        """Compose with one of :data:`ELEMENTWISE` through order ``self.order``."""
        try:
            table = ELEMENTWISE[kind]
        except KeyError:
            raise ConfigurationError(f"unknown elementwise function {kind!r}") from None
        k = self.order
        tracked = self.graph is not None
        ders = table(self.c[0], k + 1 if tracked else k)
        if k == 0:
            out = ders[0][None]
            slope = ders[1][None] if tracked else None
        else:
            h = self.c.copy()
            h[0] = 0.0
            # h**n vanishes below degree n, so only the upper slices are touched
            lo2, lo3 = ncoef(1), ncoef(2)
            out = h * ders[1]
            powers = [h]
            if k >= 2:
                powers.append(poly_square(h, k, min_deg=1))
                out[lo2:] += powers[1][lo2:] * (ders[2] * 0.5)
            if k >= 3:
                powers.append(poly_mul(powers[1], h, k, min_a=2, min_b=1))
                out[lo3:] += powers[2][lo3:] * (ders[3] * (1.0 / 6.0))
            out[0] = ders[0]
            slope = None
            if tracked:
                # d(out) = f'(self) * d(self) as a jet product
                slope = h * ders[2]
                if k >= 2:
                    slope[lo2:] += powers[1][lo2:] * (ders[3] * 0.5)
                if k >= 3:
                    slope[lo3:] += powers[2][lo3:] * (ders[4] * (1.0 / 6.0))
                slope[0] = ders[1]

        if not tracked:
            return Jet3(out, k)
        shape = self.c.shape

        def vjp(g, needs):
            return (_unbroadcast(poly_mul_adjoint(g, slope, k), shape),)

        return self._result(out, k, kind, (self,), vjp)

    def sin(self):
        return self.apply("sin")

    def cos(self):
        return self.apply("cos")

    def tanh(self):
        return self.apply("tanh")

    def softplus(self):
        return self.apply("softplus")

    def exp(self):
        return self.apply("exp")

    # -- structural -------------------------------------------------------

    def diff(self, axis):
        """Jet of the partial derivative along ``axis``, one order lower."""
        if self.order < 1:
            raise ConfigurationError("cannot differentiate an order-0 jet")
        idx = _shift_index(self.order - 1, axis)
        shape = self.c.shape

        def vjp(g, needs):
            out = np.zeros(shape)
            out[idx] = g
            return (out,)

        return self._result(self.c[idx], self.order - 1, "diff", (self,), vjp)

    def truncate(self, order):
        order = check_order(order)
        if order > self.order:
            raise ConfigurationError(f"cannot raise jet order {self.order} to {order}")
        if order == self.order:
            return self
        n = ncoef(order)
        shape = self.c.shape

        def vjp(g, needs):
            out = np.zeros(shape)
            out[:n] = g
            return (out,)

        return self._result(self.c[:n], order, "truncate", (self,), vjp)

    def take(self, index, axis=-1):
        """Select one entry along a batch axis (negative axes count from the end)."""
        ax = axis if axis < 0 else axis + 1
        shape = self.c.shape

        def vjp(g, needs):
            out = np.zeros(shape)
            sl = [slice(None)] * len(shape)
            sl[ax] = index
            out[tuple(sl)] = g
            return (out,)

        return self._result(np.take(self.c, index, axis=ax), self.order, "take", (self,), vjp)

    def mean(self):
        """Average over every batch axis."""
        shape = self.c.shape
        count = int(np.prod(shape[1:]))
        out = self.c.reshape(shape[0], -1).mean(axis=1) if count else np.zeros(shape[0])

        def vjp(g, needs):
            return (np.broadcast_to((g / count).reshape((shape[0],) + (1,) * (len(shape) - 1)),
                                    shape).copy(),)

        return self._result(out, self.order, "mean", (self,), vjp)

    def sum(self):
        shape = self.c.shape
        out = self.c.reshape(shape[0], -1).sum(axis=1)

        def vjp(g, needs):
            return (np.broadcast_to(g.reshape((shape[0],) + (1,) * (len(shape) - 1)),
                                    shape).copy(),)

        return self._result(out, self.order, "sum", (self,), vjp)


Jet = Jet3


@functools.lru_cache(maxsize=None)
def _shift_index(order, axis):
    out = []
    for m in MULTI_INDICES[:ncoef(order)]:
        bumped = list(m)
        bumped[axis] += 1
        out.append(_POSITION[tuple(bumped)])
    return np.array(out)


def stack(jets, axis=-1):
    """Stack equal-order jets along a new batch axis."""
    jets = list(jets)
    if not jets:
        raise ConfigurationError("nothing to stack")
    order = jets[0].order
    for j in jets[1:]:
        if j.order != order:
            raise ConfigurationError("stack needs jets of equal order")
    c = np.stack([j.c for j in jets], axis=axis if axis < 0 else axis + 1)
    ax = axis if axis < 0 else axis + 1
    shapes = [j.c.shape for j in jets]

    def vjp(g, needs):
        parts = np.moveaxis(g, ax, 0)
        return tuple(_unbroadcast(parts[i], shapes[i]) if needs[i] else None
                     for i in range(len(jets)))

    return Jet3._result(c, order, "stack", jets, vjp)


def dense(a, weight, bias=None):
    """Affine map ``a @ W + b`` over the last batch axis.

    ``weight`` and ``bias`` are order-0 jets (or plain arrays); only the value
    coefficient receives the bias.
    """
    w = weight.c[0] if isinstance(weight, Jet3) else np.asarray(weight, dtype=np.float64)
    out = np.matmul(a.c, w)
    if bias is not None:
        bv = bias.c[0] if isinstance(bias, Jet3) else np.asarray(bias, dtype=np.float64)
        out[0] += bv
    parents = [a]
    if isinstance(weight, Jet3):
        parents.append(weight)
    if isinstance(bias, Jet3):
        parents.append(bias)
    a_c = a.c
    lead = tuple(range(a_c.ndim - 1))

    def vjp(g, needs):
        grads = [np.matmul(g, w.T) if needs[0] else None]
        if isinstance(weight, Jet3):
            grads.append(np.tensordot(a_c, g, axes=(lead, lead))[None] if needs[1] else None)
        if isinstance(bias, Jet3):
            gb = g[0].reshape(-1, g.shape[-1]).sum(axis=0)
            grads.append(gb[None] if needs[len(grads)] else None)
        return tuple(grads)

    return Jet3._result(out, a.order, "dense", parents, vjp)


def seed_inputs(point, order):
    """Independent-variable jets for ``point[..., 0:3] = (t, x, y)``."""
    order = check_order(order)
    point = np.asarray(point, dtype=np.float64)
    if point.shape[-1:] != (N_INPUTS,):
        raise ConfigurationError(f"points need a trailing axis of length 3, got {point.shape}")
    jets = []
    for i in range(N_INPUTS):
        c = np.zeros((ncoef(order),) + point.shape[:-1])
        c[0] = point[..., i]
        if order >= 1:
            c[1 + i] = 1.0
        jets.append(Jet3(c, order))
    return tuple(jets)


def finite_diff_check(f, point, h=1e-4, orders=(1, 2, 3)):
    """Worst relative mismatch between jet derivatives and central differences.

    ``f(point)`` must return a scalar (unbatched) jet.  The gradient is checked
    against differences of values, the Hessian against differences of the
    gradient and the third tensor against differences of the Hessian, each
    with a central stencil of step ``h``.  Errors are measured per order as
    ``max|jet - fd| / max(max|fd|, 1e-8)``.
    """
    point = np.asarray(point, dtype=np.float64)
    base = f(point)
    worst = 0.0
    getters = {1: lambda j: j.value, 2: lambda j: j.grad, 3: lambda j: j.hess}
    exact = {1: lambda j: j.grad, 2: lambda j: j.hess, 3: lambda j: j.third}
    for order in orders:
        if order > base.order:
            continue
        fd = []
        for i in range(N_INPUTS):
            step = np.zeros(N_INPUTS)
            step[i] = h
            plus = np.asarray(getters[order](f(point + step)))
            minus = np.asarray(getters[order](f(point - step)))
            fd.append((plus - minus) / (2.0 * h))
        fd = np.stack(fd)
        # fd[i, ...] = d_i of the lower tensor; jets store the same index layout
        mismatch = np.max(np.abs(np.asarray(exact[order](base)) - fd))
        scale = max(float(np.max(np.abs(fd))), 1e-8)
        worst = max(worst, mismatch / scale)
    return worst
