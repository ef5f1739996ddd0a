"""Plain-text experiment configuration (INI sections of ``key = value``).

Sections and keys::

    [train]    model, variant, re, t_end, epochs, interior_points, ic_points,
               batch_size, seed, eps_div, deterministic, chunks
    [network]  harmonics, hidden (e.g. ``64:tanh, 64:tanh``), periods (``1, 1``)
    [adam]     lr, beta1, beta2, eps
    [weights]  pde, curl, incmp, ic_vanilla, ic_tenn, flux

Unset training keys take the :class:`TrainConfig` defaults, the network
defaults to four tanh layers of 64 with two harmonics, and unset weights
take the preset of the chosen model (1 for its active terms, 0 otherwise).
"""

from __future__ import annotations

import configparser
import dataclasses
from pathlib import Path

from .errors import ConfigurationError
from .losses import TERMS, LossWeights
from .network import NetworkSpec, PeriodicDictionary
from .train import AdamConfig, TrainConfig, default_network

TRAIN_KEYS = {
    "model": str, "variant": str, "re": float, "t_end": float, "epochs": int,
    "interior_points": int, "ic_points": int, "batch_size": int, "seed": int,
    "eps_div": float, "deterministic": "bool", "chunks": int,
}
NETWORK_KEYS = ("harmonics", "hidden", "periods")
ADAM_KEYS = tuple(f.name for f in dataclasses.fields(AdamConfig))
SECTIONS = {"train": tuple(TRAIN_KEYS), "network": NETWORK_KEYS, "adam": ADAM_KEYS,
            "weights": TERMS}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _bool(text):
    low = text.strip().lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise ConfigurationError(f"not a boolean: {text!r}")


def parse_hidden(text):
    """``"64:tanh, 32:sin"`` -> ``((64, "tanh"), (32, "sin"))``."""
    layers = []
    for item in text.split(","):
        width, _, act = item.strip().partition(":")
        try:
            layers.append((int(width), act.strip() or "tanh"))
        except ValueError:
            raise ConfigurationError(f"bad hidden layer {item.strip()!r}; use WIDTH:ACTIVATION") from None
    return tuple(layers)


def read_sections(path):
    """Raw ``{section: {key: text}}`` from an INI file, rejecting unknown names."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigurationError(f"cannot parse {path}: {exc}") from None
    unknown = [s for s in parser.sections() if s not in SECTIONS]
    unknown += [f"{s}.{k}" for s in parser.sections() if s in SECTIONS
                for k in parser[s] if k not in SECTIONS[s]]
    if unknown:
        raise ConfigurationError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return {s: dict(parser[s]) for s in parser.sections()}


def build_config(sections=None, overrides=None):
    """A :class:`TrainConfig` from raw sections plus already-typed ``[train]`` overrides."""
    sections = sections or {}
    train = {}
    for key, text in sections.get("train", {}).items():
        kind = TRAIN_KEYS[key]
        try:
            train[key] = _bool(text) if kind == "bool" else kind(text.strip())
        except ValueError:
            raise ConfigurationError(f"train.{key}: cannot read {text!r}") from None
    for key, value in (overrides or {}).items():
        if key not in TRAIN_KEYS:
            raise ConfigurationError(f"unknown override {key!r}")
        if value is not None:
            train[key] = value
    model = train.get("model", TrainConfig.model)
    variant = train.get("variant", TrainConfig.variant)

    net = sections.get("network", {})
    base = default_network(model, variant)
    try:
        dictionary = PeriodicDictionary(
            int(net.get("harmonics", base.dictionary.harmonics)),
            tuple(float(p) for p in net["periods"].split(",")) if "periods" in net
            else base.dictionary.periods)
    except ValueError as exc:
        raise ConfigurationError(f"network: {exc}") from None
    hidden = parse_hidden(net["hidden"]) if "hidden" in net else base.hidden
    train["network"] = NetworkSpec(dictionary, hidden, base.heads)

    try:
        train["adam"] = AdamConfig(**{k: float(v) for k, v in sections.get("adam", {}).items()})
        alpha = LossWeights.preset(model, variant).as_dict()
        alpha.update({k: float(v) for k, v in sections.get("weights", {}).items()})
    except ValueError as exc:
        raise ConfigurationError(f"bad numeric value: {exc}") from None
    train["weights"] = LossWeights.from_dict(alpha)
    return TrainConfig(**train)


def load_config(path, overrides=None):
    return build_config(read_sections(path), overrides)


def config_help():
    """One line per key with its default, for ``--help``."""
    d = TrainConfig()
    lines = ["[train]"] + [f"  {k} = {getattr(d, k)}" for k in TRAIN_KEYS]
    lines += ["[network]", f"  harmonics = {d.network.dictionary.harmonics}",
              "  hidden = " + ", ".join(f"{w}:{a}" for w, a in d.network.hidden),
              "  periods = 1, 1", "[adam]"]
    lines += [f"  {k} = {getattr(d.adam, k)}" for k in ADAM_KEYS]
    lines += ["[weights]  (default: 1 for the model's active terms, 0 otherwise)"]
    lines += [f"  {t}" for t in TERMS]
    return "\n".join(lines)
