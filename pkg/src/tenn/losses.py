"""Residual terms for the vanilla PINN and the transport-embedded network.

Every norm is realised as a mean over collocation points of the squared
residual (summed over vector components).  Residual helpers take jets and
return order-0 jets, so the same code serves evaluation and training.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .embedding import flux_residual, tenn_heads
from .errors import ConfigurationError
from .network import mlp_forward
from .taylor_green import initial_velocity, initial_vorticity

TERMS = ("pde", "curl", "incmp", "ic_vanilla", "ic_tenn", "flux")
MODELS = ("vanilla", "tenn")


def _d(jet, *axes):
    for a in axes:
        jet = jet.diff(a)
    return jet.truncate(0)


@dataclass
class LossWeights:
    """Non-negative weights for the six terms, in :data:`TERMS` order."""

    alpha: np.ndarray = field(default_factory=lambda: np.ones(len(TERMS)))

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float).reshape(-1)
        if self.alpha.shape != (len(TERMS),):
            raise ConfigurationError(f"need {len(TERMS)} loss weights, got {self.alpha.size}")
        if np.any(self.alpha < 0) or not np.all(np.isfinite(self.alpha)):
            raise ConfigurationError("loss weights must be finite and non-negative")

    @classmethod
    def preset(cls, model, variant="potential"):
        on = {"vanilla": ("pde", "incmp", "ic_vanilla"),
              "tenn": ("curl", "incmp", "ic_tenn") + (("flux",) if variant == "split" else ())}
        if model not in on:
            raise ConfigurationError(f"unknown model {model!r}")
        return cls(np.array([1.0 if t in on[model] else 0.0 for t in TERMS]))

    def as_dict(self):
        return dict(zip(TERMS, self.alpha.tolist()))

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(TERMS)
        if unknown:
            raise ConfigurationError(f"unknown loss terms: {sorted(unknown)}")
        return cls(np.array([float(d.get(t, 0.0)) for t in TERMS]))


@dataclass
class ResidualBatch:
    """Per-term mean-squared residuals of one batch."""

    values: np.ndarray
    counts: tuple = (0, 0)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(TERMS),):
            raise ConfigurationError("a residual batch has exactly six terms")
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise ConfigurationError("residual terms must be finite and non-negative")

    def as_dict(self):
        return dict(zip(TERMS, self.values.tolist()))


def total_loss(batch, weights):
    return float(np.dot(weights.alpha, batch.values))


# -- residual operators ---------------------------------------------------

def residual_vanilla_pde(u, p, re, rho=1.0):
    """Momentum residual ``u_t + (u . grad) u + grad(p) / rho - lap(u) / Re``."""
    ux, uy = u
    if min(ux.order, uy.order) < 2 or p.order < 1:
        raise ConfigurationError("momentum residual needs u of order 2 and p of order 1")
    nu = 1.0 / re
    vx, vy = ux.truncate(0), uy.truncate(0)
    out = []
    for comp, axis in ((ux, 1), (uy, 2)):
        r = (_d(comp, 0) + vx * _d(comp, 1) + vy * _d(comp, 2)
             + _d(p, axis).scale(1.0 / rho) - (_d(comp, 1, 1) + _d(comp, 2, 2)).scale(nu))
        out.append(r)
    return out


def planar_curl(u):
    """``d_x u_y - d_y u_x`` as an order-0 jet."""
    return _d(u[1], 1) - _d(u[0], 2)


def residual_curl(omega, u):
    return omega.truncate(0) - planar_curl(u)


def residual_incomp(u):
    return _d(u[0], 1) + _d(u[1], 2)


def residual_ic(u, points, omega=None, mode="vanilla"):
    """Deviation from the initial condition at ``t = 0`` points.

    Returns ``[u_x - u0_x, u_y - u0_y]`` and, in ``tenn`` mode, also
    ``omega - omega0`` with ``omega0 = d_x u0_y - d_y u0_x``.
    """
    points = np.asarray(points, dtype=float)
    x, y = points[..., 1], points[..., 2]
    u0x, u0y = initial_velocity(x, y)
    out = [u[0].truncate(0) - u0x, u[1].truncate(0) - u0y]
    if mode == "tenn":
        if omega is None:
            raise ConfigurationError("tenn initial condition needs a vorticity jet")
        out.append(omega.truncate(0) - initial_vorticity(x, y))
    elif mode != "vanilla":
        raise ConfigurationError(f"unknown initial-condition mode {mode!r}")
    return out


def residual_flux(T, u, gamma):
    return flux_residual(T, u, gamma)


def mean_square(residuals):
    """Mean over points of the summed squares of ``residuals`` (a jet or a list)."""
    if not isinstance(residuals, (list, tuple)):
        residuals = [residuals]
    acc = None
    for r in residuals:
        sq = r * r
        acc = sq if acc is None else acc + sq
    return acc.mean()


# -- model wiring ---------------------------------------------------------

@dataclass
class ModelFields:
    """Velocity and (optionally) vorticity/pressure jets of a model at some points."""

    u: list
    omega: object = None
    p: object = None
    flux: list = None


def interior_order(model, variant):
    return 3 if (model == "tenn" and variant == "potential") else 2


def ic_order(model, variant):
    if model == "vanilla":
        return 0
    return 2 if variant == "potential" else 1


def model_fields(params, spec, points, order, model, variant="potential", re=1.0,
                 eps_div=1e-4, graph=None):
    """Run the network and map its heads to physical fields.

    For the split TENN variant the returned vorticity is ``-T_0``, i.e. the
    planar curl of the velocity heads, so it can be compared with the
    oracle directly.
    """
    heads = mlp_forward(params, spec, points, order, graph)
    if model == "vanilla":
        if spec.heads != "vanilla":
            raise ConfigurationError("vanilla model needs a network with vanilla heads")
        return ModelFields(u=heads[:2], p=heads[2])
    if model != "tenn":
        raise ConfigurationError(f"unknown model {model!r}; pick from {MODELS}")
    expected = {"potential": "tenn_potential", "split": "tenn_split"}.get(variant)
    if spec.heads != expected:
        raise ConfigurationError(f"TENN variant {variant!r} needs {expected!r} heads")
    out = tenn_heads(heads, variant, 1.0 / re, eps_div)
    if variant == "potential":
        return ModelFields(u=out.u, omega=out.omega)
    return ModelFields(u=out.u, omega=-out.omega, flux=out.diagnostics.get("flux"))


def loss_terms(params, spec, interior, ic, model, variant="potential", re=1.0,
               eps_div=1e-4, graph=None):
    """Scalar jets for every term applicable to ``model``; others are ``None``."""
    terms = dict.fromkeys(TERMS)
    f = model_fields(params, spec, interior, interior_order(model, variant), model, variant,
                     re, eps_div, graph)
    g = model_fields(params, spec, ic, ic_order(model, variant), model, variant,
                     re, eps_div, graph)
    terms["incmp"] = mean_square(residual_incomp(f.u))
    if model == "vanilla":
        terms["pde"] = mean_square(residual_vanilla_pde(f.u, f.p, re))
        terms["ic_vanilla"] = mean_square(residual_ic(g.u, ic, mode="vanilla"))
    else:
        terms["curl"] = mean_square(residual_curl(f.omega, f.u))
        ic_res = residual_ic(g.u, ic, omega=g.omega, mode="tenn")
        terms["ic_tenn"] = mean_square(ic_res[:2]) + mean_square(ic_res[2])
        if variant == "split":
            terms["flux"] = mean_square(f.flux)
    return terms


def weighted_total(terms, weights):
    """Tracked ``sum(alpha_i * term_i)`` over the terms that were evaluated."""
    total = None
    for name, a in zip(TERMS, weights.alpha):
        jet = terms.get(name)
        if jet is None or a == 0.0:
            continue
        part = jet.scale(a)
        total = part if total is None else total + part
    if total is None:
        raise ConfigurationError("every evaluated loss term has zero weight")
    return total


def residual_batch(terms, counts=(0, 0)):
    return ResidualBatch(np.array([0.0 if terms.get(t) is None else float(terms[t].value)
                                   for t in TERMS]), counts)
