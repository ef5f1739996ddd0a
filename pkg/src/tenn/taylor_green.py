"""Closed-form decaying Taylor-Green vortex on the unit 2-torus.

Velocity ``u = (cos 2pi x sin 2pi y, -cos 2pi y sin 2pi x) * F(t)`` with
``F = exp(-8 pi^2 t / Re)``, vorticity ``-4 pi cos 2pi x cos 2pi y * F`` and
pressure ``-(cos 4pi x + cos 4pi y) / 4 * F^2`` (density 1, zero mean).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

K = 2.0 * np.pi
RE_PRESETS = (0.1, 1.0, 10.0, 100.0)


def _check_re(re):
    if not np.all(np.asarray(re) > 0):
        raise ConfigurationError(f"Reynolds number must be positive, got {re!r}")


def decay_factor(t, re):
    """Velocity/vorticity amplitude ``exp(-8 pi^2 t / Re)``."""
    _check_re(re)
    return np.exp(-2.0 * K * K * np.asarray(t, dtype=float) / re)


def initial_velocity(x, y):
    return (np.cos(K * x) * np.sin(K * y), -np.cos(K * y) * np.sin(K * x))


def initial_vorticity(x, y):
    return -2.0 * K * np.cos(K * x) * np.cos(K * y)


def analytic_velocity(x, y, t, re):
    f = decay_factor(t, re)
    ux, uy = initial_velocity(x, y)
    return ux * f, uy * f


def analytic_vorticity(x, y, t, re):
    return initial_vorticity(x, y) * decay_factor(t, re)


def analytic_pressure(x, y, t, re):
    f = decay_factor(t, re)
    return -0.25 * (np.cos(2.0 * K * x) + np.cos(2.0 * K * y)) * f * f


@dataclass
class FlowState:
    u: tuple
    p: np.ndarray
    omega: np.ndarray
    re: float
    t: np.ndarray


def flow_state(x, y, t, re):
    return FlowState(u=analytic_velocity(x, y, t, re), p=analytic_pressure(x, y, t, re),
                     omega=analytic_vorticity(x, y, t, re), re=re, t=np.asarray(t))


@dataclass
class FieldDerivatives:
    """Closed-form values and derivatives needed by the residual checks."""

    u: np.ndarray
    u_t: np.ndarray
    u_x: np.ndarray
    u_y: np.ndarray
    u_xx: np.ndarray
    u_yy: np.ndarray
    v: np.ndarray
    v_t: np.ndarray
    v_x: np.ndarray
    v_y: np.ndarray
    v_xx: np.ndarray
    v_yy: np.ndarray
    p_x: np.ndarray
    p_y: np.ndarray

    @classmethod
    def zeros(cls, shape=()):
        return cls(**{name: np.zeros(shape) for name in cls.__dataclass_fields__})


def taylor_green_derivatives(x, y, t, re, static=False):
    """Derivatives of the analytic fields.

    ``static=True`` freezes the initial velocity and pressure in time, which
    is the stagnant solution a failing PINN tends to return.
    """
    _check_re(re)
    x, y, t = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, y, t)))
    rate = 2.0 * K * K / re
    f = np.ones_like(t) if static else np.exp(-rate * t)
    d_t = 0.0 if static else -rate
    cx, sx, cy, sy = np.cos(K * x), np.sin(K * x), np.cos(K * y), np.sin(K * y)
    u = cx * sy * f
    v = -sx * cy * f
    return FieldDerivatives(
        u=u, u_t=d_t * u, u_x=-K * sx * sy * f, u_y=K * cx * cy * f,
        u_xx=-K * K * u, u_yy=-K * K * u,
        v=v, v_t=d_t * v, v_x=-K * cx * cy * f, v_y=K * sx * sy * f,
        v_xx=-K * K * v, v_yy=-K * K * v,
        p_x=0.5 * K * np.sin(2.0 * K * x) * f * f,
        p_y=0.5 * K * np.sin(2.0 * K * y) * f * f,
    )


def ns_residual_check(x, y, t, re, fields=None):
    """Momentum (x, y) and continuity residuals of incompressible Navier-Stokes.

    ``fields`` defaults to the analytic solution; pass another
    :class:`FieldDerivatives` to check a candidate.
    """
    _check_re(re)
    d = taylor_green_derivatives(x, y, t, re) if fields is None else fields
    nu = 1.0 / re
    mx = d.u_t + d.u * d.u_x + d.v * d.u_y + d.p_x - nu * (d.u_xx + d.u_yy)
    my = d.v_t + d.u * d.v_x + d.v * d.v_y + d.p_y - nu * (d.v_xx + d.v_yy)
    div = d.u_x + d.v_y
    return np.stack(np.broadcast_arrays(mx, my, div))


def vorticity_transport_check(x, y, t, re):
    """``w_t + u . grad w - lap(w) / Re`` for the analytic fields, in closed form."""
    _check_re(re)
    x, y, t = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, y, t)))
    rate = 2.0 * K * K / re
    f = np.exp(-rate * t)
    cx, sx, cy, sy = np.cos(K * x), np.sin(K * x), np.cos(K * y), np.sin(K * y)
    w = -2.0 * K * cx * cy * f
    w_t = -rate * w
    w_x = 2.0 * K * K * sx * cy * f
    w_y = 2.0 * K * K * cx * sy * f
    lap = -2.0 * K * K * w
    u, v = cx * sy * f, -sx * cy * f
    return w_t + u * w_x + v * w_y - lap / re
