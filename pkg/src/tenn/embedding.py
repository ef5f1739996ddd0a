"""Transport embedding: divergence-free spacetime fluxes built from a potential.

Index convention: 0 = t, 1 = x, 2 = y.  For a three-component potential ``v``
the flux ``T_j = eps_ijk d_i v_k`` is divergence-free in spacetime, and
adding the diffusive correction ``R = gamma * (0, d_x T_0, d_y T_0)`` gives a
flux ``M`` whose spacetime divergence is exactly ``gamma * lap(T_0)``.  Read
as ``M = (phi, phi u_x, phi u_y)`` this is the conservative transport
equation for ``phi = T_0`` with velocity ``u``, and with ``phi`` the vorticity
it is the planar vorticity equation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, SingularityError
from .jets import Jet3

VARIANTS = ("potential", "split")


def _levi_civita_table():
    eps = np.zeros((3, 3, 3), dtype=int)
    eps[0, 1, 2] = eps[1, 2, 0] = eps[2, 0, 1] = 1
    eps[0, 2, 1] = eps[2, 1, 0] = eps[1, 0, 2] = -1
    return eps


LEVI_CIVITA = _levi_civita_table()
LEVI_CIVITA.setflags(write=False)


def levi_civita(i, j, k):
    return int(LEVI_CIVITA[i, j, k])


def _as_jet(x):
    return x if isinstance(x, Jet3) else Jet3.constant(x, 0)


def curl_spacetime(v, eps=LEVI_CIVITA):
    """``T_j = sum_ik eps[i, j, k] * d_i v_k``; one order lower than ``v``.

    ``eps`` is exposed so that a corrupted table can be injected in
    self-checks.
    """
    v = list(v)
    if len(v) != 3:
        raise ConfigurationError("the spacetime potential needs three components")
    order = v[0].order
    if order < 1 or any(c.order != order for c in v):
        raise ConfigurationError("potential jets must share an order of at least 1")
    dv = [[v[k].diff(i) for k in range(3)] for i in range(3)]
    out = []
    for j in range(3):
        acc = None
        for i in range(3):
            for k in range(3):
                e = int(eps[i, j, k])
                if e == 0:
                    continue
                term = dv[i][k] if e == 1 else (dv[i][k].scale(float(e)) if e != -1 else -dv[i][k])
                acc = term if acc is None else acc + term
        out.append(acc if acc is not None else Jet3.constant(np.zeros(v[0].shape), order - 1))
    return out


def spacetime_div(F):
    """``d_t F_0 + d_x F_1 + d_y F_2`` as a jet one order lower than ``F``."""
    F = list(F)
    if len(F) != 3 or min(f.order for f in F) < 1:
        raise ConfigurationError("spacetime divergence needs three jets of order >= 1")
    return F[0].diff(0) + F[1].diff(1) + F[2].diff(2)


@dataclass
class FluxFields:
    """Embedding outputs at a batch of spacetime points.

    ``T`` keeps the order it was built with; ``R`` and ``M`` are one order
    lower (they contain first derivatives of ``T_0``).  ``omega`` is ``T_0``.
    """

    T: list
    R: list
    M: list
    omega: Jet3
    gamma: float
    u: list = field(default=None)


def assemble_M(T, gamma):
    """Add the diffusion correction to ``T``: ``M = T + gamma * (0, d_x T_0, d_y T_0)``."""
    T = list(T)
    if gamma < 0:
        raise ConfigurationError("diffusion constant must be non-negative")
    if T[0].order < 1:
        raise ConfigurationError("T must carry first derivatives to assemble M")
    lower = T[0].order - 1
    zero = Jet3.constant(np.zeros(T[0].shape), lower)
    R = [zero, T[0].diff(1).scale(gamma), T[0].diff(2).scale(gamma)]
    M = [T[0].truncate(lower)] + [T[i].truncate(lower) + R[i] for i in (1, 2)]
    return FluxFields(T=T, R=R, M=M, omega=T[0], gamma=gamma)


def recover_velocity(M, omega, eps_div):
    """``u_i = M_i * omega / (omega**2 + eps_div**2)`` for ``i = 1, 2``.

    With ``eps_div == 0`` this is the plain quotient ``M_i / omega``, which
    raises :class:`SingularityError` where ``omega`` vanishes.  ``M`` may hold
    three components (the temporal one is ignored) or just the two spatial
    fluxes.  Plain numbers are accepted and treated as order-0 jets.
    """
    if eps_div < 0:
        raise ConfigurationError("eps_div must be non-negative")
    plain = not isinstance(omega, Jet3)
    M = [_as_jet(m) for m in M]
    omega = _as_jet(omega)
    spatial = M[1:] if len(M) == 3 else M
    order = spatial[0].order
    w = omega.truncate(order)
    if eps_div == 0:
        zero = w.value == 0
        if np.any(zero):
            raise SingularityError("vorticity vanishes and eps_div is 0",
                                   where=np.argwhere(np.atleast_1d(zero)))
        inv = w.reciprocal()
        u = [m * inv for m in spatial]
    else:
        factor = w * (w * w + eps_div * eps_div).reciprocal()
        u = [m * factor for m in spatial]
    if plain:
        return np.array([float(c.value) for c in u])
    return u


@dataclass
class TennOutput:
    omega: Jet3
    u: list
    flux: FluxFields
    diagnostics: dict


def tenn_heads(raw, variant="potential", gamma=0.0, eps_div=1e-4):
    """Turn the three raw TENN heads into vorticity and velocity jets.

    ``potential``: the heads are the spacetime potential, ``omega = T_0`` and
    ``u`` comes from :func:`recover_velocity`; needs order >= 2.

    ``split``: the heads are ``(v_0, u_x, u_y)``; velocity is read directly,
    ``omega = T_0`` (which equals minus the planar curl of ``u`` under this
    index convention) and ``diagnostics['flux']`` holds the flux-consistency
    residual ``T_i + gamma d_i T_0 - T_0 u_i`` when order >= 2.
    """
    raw = list(raw)
    if len(raw) != 3:
        raise ConfigurationError(f"TENN needs 3 raw heads, got {len(raw)}")
    order = raw[0].order
    if variant == "potential":
        if order < 2:
            raise ConfigurationError("the potential variant needs heads of order >= 2")
        T = curl_spacetime(raw)
        flux = assemble_M(T, gamma)
        u = recover_velocity(flux.M, flux.omega, eps_div)
        flux.u = u
        return TennOutput(omega=flux.omega, u=u, flux=flux, diagnostics={})
    if variant == "split":
        if order < 1:
            raise ConfigurationError("the split variant needs heads of order >= 1")
        T = curl_spacetime(raw)
        u = raw[1:]
        diagnostics = {}
        if order >= 2:
            flux = assemble_M(T, gamma)
            diagnostics["flux"] = flux_residual(T, u, gamma)
        else:
            flux = FluxFields(T=T, R=None, M=None, omega=T[0], gamma=gamma)
        flux.u = u
        return TennOutput(omega=T[0], u=u, flux=flux, diagnostics=diagnostics)
    raise ConfigurationError(f"unknown TENN variant {variant!r}; pick from {VARIANTS}")


def flux_residual(T, u, gamma):
    """``r_i = T_i + gamma d_i T_0 - T_0 u_i`` for ``i = 1, 2`` (order of ``T`` minus 1)."""
    T = [_as_jet(t) for t in T]
    u = [_as_jet(c) for c in u]
    lower = T[0].order - 1
    if lower < 0:
        lower = 0
        grads = [0.0, 0.0]
    else:
        grads = [T[0].diff(1).scale(gamma), T[0].diff(2).scale(gamma)]
    w = T[0].truncate(lower)
    out = []
    for i in (1, 2):
        r = T[i].truncate(lower) + grads[i - 1] - w * u[i - 1].truncate(lower)
        out.append(r)
    return out


def transport_residual(omega, u, gamma, form="conservative"):
    """Scalar transport residual of ``omega`` carried by ``u`` with diffusion ``gamma``.

    ``conservative``: ``d_t w + div(w u) - gamma lap(w)``.
    ``advective``: ``d_t w + u . grad(w) - gamma lap(w)``; the two differ by
    ``w div(u)``.  Needs ``omega`` of order >= 2 and ``u`` of order >= 1.
    """
    if omega.order < 2 or min(c.order for c in u) < 1:
        raise ConfigurationError("transport residual needs omega order >= 2 and u order >= 1")
    w1 = omega.truncate(1)
    u1 = [c.truncate(1) for c in u]
    lap = omega.diff(1).diff(1) + omega.diff(2).diff(2)
    dt = omega.diff(0).truncate(0)
    if form == "conservative":
        flux = (w1 * u1[0]).diff(1) + (w1 * u1[1]).diff(2)
    elif form == "advective":
        flux = (u1[0].truncate(0) * w1.diff(1)) + (u1[1].truncate(0) * w1.diff(2))
    else:
        raise ConfigurationError(f"unknown transport form {form!r}")
    return dt + flux - lap.truncate(0).scale(gamma)
