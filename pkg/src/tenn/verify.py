"""Executable identity checks run by ``tenn verify``.

Every check returns a :class:`CheckResult` with the worst value seen and the
tolerance it is held to; none of them needs training.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedding import LEVI_CIVITA, assemble_M, curl_spacetime, recover_velocity, spacetime_div, \
    transport_residual
from .jets import finite_diff_check
from .network import ACTIVATIONS, NetworkSpec, PeriodicDictionary, init_params, mlp_forward
from .taylor_green import RE_PRESETS, ns_residual_check, vorticity_transport_check
from .train import sample_collocation

LEMMA1_TOL = 1e-10
LEMMA2_TOL = 1e-9
LEMMA2_GAMMAS = (0.0, 0.01, 1.0, 10.0)
TRANSPORT_TOL = 1e-6
TRANSPORT_MIN_OMEGA = 1e-3
FD_TOLS = {1: 1e-5, 2: 1e-3, 3: 1e-2}
FD_STEPS = {1: 1e-5, 2: 1e-4, 3: 1e-4}
PERIODICITY_TOL = 1e-13
ORACLE_TOL = 1e-10


@dataclass
class CheckResult:
    name: str
    worst: float
    tol: float

    @property
    def passed(self):
        return bool(np.isfinite(self.worst) and self.worst <= self.tol)

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: worst {self.worst:.3e} (tol {self.tol:.0e})"


def random_network(seed, activation, heads="tenn_potential", width=16, depth=2):
    spec = NetworkSpec(PeriodicDictionary(2), ((width, activation),) * depth, heads)
    params = init_params(spec, seed)
    # non-zero biases so every activation is exercised away from the origin
    rng = np.random.default_rng([seed, 1])
    values = params.values.copy()
    offset = 0
    for rows, cols, nb in spec.layout:
        offset += rows * cols
        values[offset:offset + nb] = rng.uniform(-0.5, 0.5, nb)
        offset += nb
    return spec, params.with_values(values)


def _sweep(networks, seed):
    for n in range(networks):
        act = ACTIVATIONS[n % len(ACTIVATIONS)]
        yield n, random_network([seed, n], act)


def check_lemma1(networks=20, points=1000, seed=0, eps=LEVI_CIVITA):
    """``Div(T) = 0`` for ``T`` the spacetime curl of random network potentials."""
    worst = 0.0
    for n, (spec, params) in _sweep(networks, seed):
        pts = sample_collocation(points, [seed, n, 2])
        T = curl_spacetime(mlp_forward(params, spec, pts, 2), eps)
        worst = max(worst, float(np.max(np.abs(spacetime_div(T).value))))
    return CheckResult("lemma1 div(T)=0", worst, LEMMA1_TOL)


def check_lemma2(networks=20, points=1000, seed=0, gammas=LEMMA2_GAMMAS, eps=LEVI_CIVITA):
    """``Div(M) = gamma * lap(T_0)`` for every ``gamma`` in the sweep."""
    worst = 0.0
    for n, (spec, params) in _sweep(networks, seed):
        pts = sample_collocation(points, [seed, n, 3])
        T = curl_spacetime(mlp_forward(params, spec, pts, 3), eps)
        lap = (T[0].diff(1).diff(1) + T[0].diff(2).diff(2)).value
        for gamma in gammas:
            div = spacetime_div(assemble_M(T, gamma).M).value
            worst = max(worst, float(np.max(np.abs(div - gamma * lap))))
    return CheckResult("lemma2 div(M)=gamma*lap(T0)", worst, LEMMA2_TOL)


def transport_residuals(spec, params, points, gamma, form="conservative"):
    """Vorticity transport residual of the potential construction with exact division.

    Points where ``|omega| <= 1e-3`` are dropped first; returns the residual
    values at the kept points.
    """
    omega = curl_spacetime(mlp_forward(params, spec, points, 1))[0].value
    kept = points[np.abs(omega) > TRANSPORT_MIN_OMEGA]
    flux = assemble_M(curl_spacetime(mlp_forward(params, spec, kept, 3)), gamma)
    u = recover_velocity(flux.M, flux.omega, 0.0)
    return transport_residual(flux.omega, u, gamma, form).value


def check_transport(networks=20, points=1000, seed=0, gamma=0.01, form="conservative"):
    """Untrained potential networks carry their vorticity by construction.

    Only the conservative form is exact; the advective form differs from it
    by ``omega * div(u)``, which the construction does not control.
    """
    worst = 0.0
    for n, (spec, params) in _sweep(networks, seed):
        pts = sample_collocation(points, [seed, n, 4])
        res = transport_residuals(spec, params, pts, gamma, form)
        worst = max(worst, float(np.max(np.abs(res))))
    return CheckResult(f"transport by construction ({form})", worst, TRANSPORT_TOL)


def check_finite_differences(networks=100, seed=0):
    """Jet derivatives of random scalar heads against central differences, per order."""
    worst = {k: 0.0 for k in FD_TOLS}
    rng = np.random.default_rng([seed, 5])
    for n, (spec, params) in _sweep(networks, seed):
        point = rng.uniform(0.0, 1.0, 3)

        def head(p, spec=spec, params=params):
            return mlp_forward(params, spec, p, 3)[0]

        for k in FD_TOLS:
            worst[k] = max(worst[k], finite_diff_check(head, point, FD_STEPS[k], orders=(k,)))
    ratio = max(worst[k] / FD_TOLS[k] for k in FD_TOLS)
    return CheckResult("finite differences (worst error / tolerance)", ratio, 1.0), worst


def dyadic_points(n, seed, bits=20):
    """Random points on a ``2**-bits`` grid, so that ``x +- 1`` is exact in floating point."""
    return np.floor(sample_collocation(n, seed) * 2.0 ** bits) / 2.0 ** bits


def check_periodicity(networks=20, points=200, seed=0):
    """Head entries agree at ``(x, y)`` and ``(x +- 1, y +- 1)``.

    Every derivative entry is compared at dyadic points.  At arbitrary points
    ``x + 1`` itself is rounded, and high derivatives amplify that input
    perturbation, so only values are compared there.
    """
    worst = 0.0
    for n, (spec, params) in _sweep(networks, seed):
        for pts, entries in ((dyadic_points(points, [seed, n, 6]), slice(None)),
                             (sample_collocation(points, [seed, n, 7]), slice(0, 1))):
            base = np.stack([h.c[entries] for h in mlp_forward(params, spec, pts, 3)])
            for shift in (1.0, -1.0):
                moved = pts.copy()
                moved[:, 1:] += shift
                other = np.stack([h.c[entries] for h in mlp_forward(params, spec, moved, 3)])
                worst = max(worst, float(np.max(np.abs(other - base))))
    return CheckResult("spatial periodicity", worst, PERIODICITY_TOL)


def check_oracle(points=1000, seed=0):
    """Analytic vortex against the momentum, continuity and vorticity equations."""
    rng = np.random.default_rng([seed, 7])
    x, y, t = rng.uniform(0.0, 1.0, (3, points))
    worst = 0.0
    for re in RE_PRESETS:
        worst = max(worst, float(np.max(np.abs(ns_residual_check(x, y, t, re)))),
                    float(np.max(np.abs(vorticity_transport_check(x, y, t, re)))))
    return CheckResult("oracle residuals", worst, ORACLE_TOL)


def corrupted_levi_civita():
    """A Levi-Civita table with one sign flipped; the lemma checks must catch it."""
    eps = LEVI_CIVITA.copy()
    eps[0, 1, 2] = -eps[0, 1, 2]
    return eps


def run_verify(networks=20, points=1000, seed=0, eps=LEVI_CIVITA):
    """All checks in a fixed order."""
    fd, _ = check_finite_differences(max(networks, 1) * 5, seed)
    return [
        check_lemma1(networks, points, seed, eps),
        check_lemma2(networks, points, seed, eps=eps),
        check_transport(networks, points, seed),
        fd,
        check_periodicity(networks, min(points, 200), seed),
        check_oracle(points, seed),
    ]
