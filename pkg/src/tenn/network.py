"""Periodic prior-dictionary MLP evaluated on jets.

The first layer is a fixed trigonometric dictionary in space, so every
output (and every input-derivative of it) is exactly 1-periodic in ``x`` and
``y``.  Time is passed through unchanged.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .graph import ParamVector
from .jets import Jet3, dense, seed_inputs, stack

ACTIVATIONS = ("sin", "tanh", "softplus")

# output head layout for every supported role
HEAD_ROLES = {
    "vanilla": ("u_x", "u_y", "p"),
    "tenn_potential": ("v_0", "v_1", "v_2"),
    "tenn_split": ("v_0", "u_x", "u_y"),
}


@dataclass(frozen=True)
class PeriodicDictionary:
    harmonics: int = 2
    periods: tuple = (1.0, 1.0)

    def __post_init__(self):
        if int(self.harmonics) < 1:
            raise ConfigurationError("the dictionary needs at least one harmonic")
        if len(self.periods) != 2 or min(self.periods) <= 0:
            raise ConfigurationError("periods must be two positive lengths")

    @property
    def size(self):
        return 4 * self.harmonics + 1


@dataclass(frozen=True)
class NetworkSpec:
    dictionary: PeriodicDictionary = field(default_factory=PeriodicDictionary)
    hidden: tuple = ((64, "tanh"),) * 4
    heads: str = "vanilla"

    def __post_init__(self):
        hidden = tuple((int(w), str(a)) for w, a in self.hidden)
        object.__setattr__(self, "hidden", hidden)
        if not hidden:
            raise ConfigurationError("at least one hidden layer is required")
        for width, act in hidden:
            if width < 1:
                raise ConfigurationError(f"hidden width must be positive, got {width}")
            if act not in ACTIVATIONS:
                raise ConfigurationError(f"unknown activation {act!r}; pick from {ACTIVATIONS}")
        if self.heads not in HEAD_ROLES:
            raise ConfigurationError(f"unknown head role {self.heads!r}")

    @property
    def head_names(self):
        return HEAD_ROLES[self.heads]

    @property
    def layout(self):
        sizes = [self.dictionary.size] + [w for w, _ in self.hidden] + [len(self.head_names)]
        return tuple((a, b, b) for a, b in zip(sizes[:-1], sizes[1:]))

    def to_dict(self):
        return {
            "harmonics": self.dictionary.harmonics,
            "periods": list(self.dictionary.periods),
            "hidden": [[w, a] for w, a in self.hidden],
            "heads": self.heads,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            dictionary=PeriodicDictionary(int(d["harmonics"]), tuple(float(p) for p in d["periods"])),
            hidden=tuple((int(w), a) for w, a in d["hidden"]),
            heads=d["heads"],
        )

    def digest(self):
        """SHA-256 of the canonical JSON description."""
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).digest()


def _wrap(jet, period):
    # reduce the value into [0, period); derivatives are unaffected
    c = jet.c.copy()
    c[0] = np.remainder(c[0], period)
    return Jet3(c, jet.order)


def build_periodic_features(inputs, dictionary):
    """``[t, sin(2 pi k x), cos(2 pi k x), sin(2 pi k y), cos(2 pi k y)]`` for k = 1..K."""
    t, x, y = inputs
    px, py = dictionary.periods
    x, y = _wrap(x, px), _wrap(y, py)
    features = [t]
    for k in range(1, dictionary.harmonics + 1):
        xs = x.scale(k / px)
        ys = y.scale(k / py)
        features += [xs.apply("sin2pi"), xs.apply("cos2pi"),
                     ys.apply("sin2pi"), ys.apply("cos2pi")]
    return features


def init_params(spec, seed):
    """Glorot-uniform weights, zero biases, deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    chunks = []
    for fan_in, fan_out, nb in spec.layout:
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        chunks.append(rng.uniform(-bound, bound, size=fan_in * fan_out))
        chunks.append(np.zeros(nb))
    return ParamVector(np.concatenate(chunks), spec.layout)


def mlp_forward(params, spec, points, order, graph=None):
    """Head jets at ``points`` (shape ``(..., 3)`` ordered ``t, x, y``).

    With ``graph`` given, ``params`` are watched on it and every operation is
    recorded so that :meth:`ParamGraph.backward` can differentiate losses
    built from the returned jets.
    """
    if params.layout != spec.layout:
        raise ConfigurationError(
            f"parameter layout {params.layout} does not match network layout {spec.layout}"
        )
    if graph is not None:
        layers = graph.watch(params)
    else:
        layers = list(params.layers())
    h = stack(build_periodic_features(seed_inputs(points, order), spec.dictionary))
    for (w, b), (_, act) in zip(layers[:-1], spec.hidden):
        h = dense(h, w, b).apply(act)
    out = dense(h, *layers[-1])
    return [out.take(j) for j in range(len(spec.head_names))]
