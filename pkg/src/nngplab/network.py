"""Forward evaluation of random fully connected networks.

A network of depth L maps an input x in R^{n_0} through L hidden layers to
an output in R^{n_{L+1}} by

    z^(1) = W^(1) x + b^(1),
    z^(l) = W^(l) sigma(z^(l-1)) + b^(l),   l = 2..L+1,

with fresh weights every call: W^(l) has iid entries of variance C_W/n_{l-1}
and biases are N(0, c_b).  First-layer weights are always Gaussian.  The
hidden and output layers use ``hidden_law`` unless a switch index K is set,
in which case layers L-K+1..L+1 use Gaussian weights instead (K = -1 leaves
every layer on the original law, K = L-1 switches all layers above the
first).

Stream layout
-------------
Each realization owns one :class:`~nngplab.distributions.RandomStream`.  The
draw for layer ``l`` is taken from the child stream ``l*8 + code`` where
``code`` is 0 for the bias and the law code (gaussian 1, laplace 2,
rademacher 3, uniform 4) for the weights.  Keying weight draws by (layer,
law) makes switched and unswitched variants of one realization share every
draw except at layers whose law differs, which is exactly the
common-random-numbers coupling the paired diagnostics rely on.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy import special

from .distributions import LAW_KINDS, RandomStream, WeightLaw, sample_bias, sample_matrix
from .errors import ConfigError

__all__ = [
    "Activation",
    "ACTIVATIONS",
    "get_activation",
    "NetworkConfig",
    "LayerOutputs",
    "SampleBatch",
    "layer_law",
    "forward",
    "forward_projected",
    "forward_switch_family",
    "sample_outputs",
    "network_document",
    "network_from_document",
    "canonical_json",
    "config_digest",
    "resolve_input",
]

#: Smoothness classes: bounded with bounded derivatives of all orders,
#: smooth but unbounded, or not differentiable everywhere.
CB_SMOOTH = "cb_smooth"
UNBOUNDED = "unbounded"
NONSMOOTH = "nonsmooth"

_LAW_CODE = {"gaussian": 1, "laplace": 2, "rademacher": 3, "uniform": 4}


@dataclass(frozen=True)
class Activation:
    """An activation function with its smoothness annotation."""

    name: str
    fn: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    smoothness_class: str
    sup_norm: float | None


ACTIVATIONS: Mapping[str, Activation] = {
    "sigmoid": Activation("sigmoid", special.expit, CB_SMOOTH, 1.0),
    "tanh": Activation("tanh", np.tanh, CB_SMOOTH, 1.0),
    "arctan": Activation("arctan", np.arctan, CB_SMOOTH, np.pi / 2.0),
    "erf": Activation("erf", special.erf, CB_SMOOTH, 1.0),
    "identity": Activation("identity", lambda z: np.asarray(z, dtype=float), UNBOUNDED, None),
    "constant_zero": Activation("constant_zero", np.zeros_like, CB_SMOOTH, 0.0),
    "relu": Activation("relu", lambda z: np.maximum(z, 0.0), NONSMOOTH, None),
}


def get_activation(activation: Activation | str) -> Activation:
    if isinstance(activation, Activation):
        return activation
    try:
        return ACTIVATIONS[activation]
    except KeyError:
        raise ConfigError(
            f"activation: unknown activation {activation!r}; "
            f"expected one of {tuple(ACTIVATIONS)}"
        ) from None


def warn_if_outside_smooth_class(activation: Activation | str, context: str) -> None:
    """Warn when a diagnostic assumes bounded smooth activations."""
    act = get_activation(activation)
    if act.smoothness_class != CB_SMOOTH:
        warnings.warn(
            f"{context} assumes a bounded smooth activation; "
            f"{act.name!r} is {act.smoothness_class} so the quantitative "
            "guarantees being checked do not apply to it",
            RuntimeWarning,
            stacklevel=3,
        )


@dataclass(frozen=True)
class NetworkConfig:
    """Architecture and law of one random network.

    ``widths`` lists n_0..n_{L+1}, so it has depth+2 entries.  ``switch_index``
    is either None (no switching) or an integer K in {-1..L-1}.
    """

    depth: int
    widths: tuple[int, ...]
    c_w: float
    c_b: float
    activation: str
    hidden_law: str
    switch_index: int | None = None

    def __post_init__(self) -> None:
        if self.depth < 1:
            raise ConfigError(f"depth: must be >= 1, got {self.depth}")
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if len(self.widths) != self.depth + 2:
            raise ConfigError(
                f"widths: need depth+2 = {self.depth + 2} entries, got {len(self.widths)}"
            )
        if any(w < 1 for w in self.widths):
            raise ConfigError(f"widths: all entries must be >= 1, got {self.widths}")
        if not self.c_w > 0.0:
            raise ConfigError(f"c_w: must be positive, got {self.c_w}")
        if self.c_b < 0.0:
            raise ConfigError(f"c_b: must be nonnegative, got {self.c_b}")
        get_activation(self.activation)
        WeightLaw(self.hidden_law)
        if self.switch_index is not None and not (
            -1 <= self.switch_index <= self.depth - 1
        ):
            raise ConfigError(
                f"switch_index: must be None or in [-1, {self.depth - 1}], "
                f"got {self.switch_index}"
            )

    @property
    def output_dim(self) -> int:
        return self.widths[-1]

    def with_hidden_widths(self, n: int) -> "NetworkConfig":
        """Copy with every hidden width n_1..n_L set to n."""
        widths = (self.widths[0],) + (int(n),) * self.depth + (self.widths[-1],)
        return replace(self, widths=widths)


@dataclass(frozen=True)
class LayerOutputs:
    """Pre-activations z^(1)..z^(L+1) of one realization."""

    preactivations: tuple[np.ndarray, ...]

    @property
    def final(self) -> np.ndarray:
        return self.preactivations[-1]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LayerOutputs):
            return NotImplemented
        return len(self.preactivations) == len(other.preactivations) and all(
            np.array_equal(a, b)
            for a, b in zip(self.preactivations, other.preactivations)
        )


@dataclass(frozen=True)
class SampleBatch:
    """Independent output realizations, one per row."""

    values: np.ndarray
    digest: str
    master_seed: int
    source: str
    input_point: np.ndarray | None = None
    projection: tuple[int, ...] | None = None

    @property
    def count(self) -> int:
        return self.values.shape[0]


def layer_law(config: NetworkConfig, layer: int) -> str:
    """Law of the weights of 1-based layer ``layer`` in 1..L+1."""
    if layer == 1:
        return "gaussian"
    if config.switch_index is None:
        return config.hidden_law
    # Layers L-K+1..L+1 are switched to Gaussian.
    if layer >= config.depth - config.switch_index + 1:
        return "gaussian"
    return config.hidden_law


def _weight_stream(realization: RandomStream, layer: int, law: str) -> RandomStream:
    return realization.child(layer * 8 + _LAW_CODE[law])


def _bias_stream(realization: RandomStream, layer: int) -> RandomStream:
    return realization.child(layer * 8)


def resolve_input(input_spec: str | Sequence[float] | np.ndarray, n_0: int) -> np.ndarray:
    """Materialize an input spec: the token "ones" or an explicit vector."""
    if isinstance(input_spec, str):
        if input_spec != "ones":
            raise ConfigError(f'input: unknown token {input_spec!r}; expected "ones"')
        return np.ones(n_0)
    x = np.asarray(input_spec, dtype=float)
    if x.ndim != 1 or x.size != n_0:
        raise ConfigError(f"input: need a vector of length n_0 = {n_0}, got shape {x.shape}")
    return x


def forward(
    config: NetworkConfig,
    input: str | Sequence[float] | np.ndarray,
    stream: RandomStream,
) -> LayerOutputs:
    """One realization of the network; pure given the stream."""
    x = resolve_input(input, config.widths[0])
    act = get_activation(config.activation).fn
    layers: list[np.ndarray] = []
    h = x
    for layer in range(1, config.depth + 2):
        n_out, n_in = config.widths[layer], config.widths[layer - 1]
        law = layer_law(config, layer)
        w = sample_matrix(law, n_out, n_in, config.c_w / n_in, _weight_stream(stream, layer, law))
        z = w @ h
        if config.c_b > 0.0:
            z += sample_bias(n_out, config.c_b, _bias_stream(stream, layer))
        layers.append(z)
        if layer <= config.depth:
            h = act(z)
    return LayerOutputs(tuple(layers))


def _check_projection(indices: Sequence[int], dim: int) -> tuple[int, ...]:
    idx = tuple(int(i) for i in indices)
    if len(idx) == 0:
        raise ConfigError("projection_indices: must not be empty")
    if len(set(idx)) != len(idx):
        raise ConfigError(f"projection_indices: repeated indices in {idx}")
    for i in idx:
        if not 0 <= i < dim:
            raise ConfigError(
                f"projection_indices: index {i} out of range for output dimension {dim}"
            )
    return idx


def forward_projected(
    config: NetworkConfig,
    input: str | Sequence[float] | np.ndarray,
    projection_indices: Sequence[int],
    stream: RandomStream,
) -> np.ndarray:
    """Selected output coordinates of one realization (0-based indices)."""
    idx = _check_projection(projection_indices, config.output_dim)
    return forward(config, input, stream).final[list(idx)]


def forward_switch_family(
    config: NetworkConfig,
    input: str | Sequence[float] | np.ndarray,
    switch_indices: Iterable[int | None],
    stream: RandomStream,
    _buffers: dict | None = None,
) -> dict[int | None, np.ndarray]:
    """Outputs of several switched variants of one realization.

    All family members share the draws of every layer whose law they agree
    on, exactly as if each had been run through :func:`forward` with the
    same stream; layers that differ use the per-law streams.  Returns the
    final pre-activation vector for each requested switch index.
    """
    members = list(dict.fromkeys(switch_indices))
    configs = {k: replace(config, switch_index=k) for k in members}
    x = resolve_input(input, config.widths[0])
    act = get_activation(config.activation).fn
    buffers = _buffers if _buffers is not None else {}

    hs: dict[int | None, np.ndarray] = {k: x for k in members}
    outs: dict[int | None, np.ndarray] = {}
    for layer in range(1, config.depth + 2):
        n_out, n_in = config.widths[layer], config.widths[layer - 1]
        laws = {k: layer_law(configs[k], layer) for k in members}
        weights: dict[str, np.ndarray] = {}
        for law in dict.fromkeys(laws.values()):
            buf = buffers.get((layer, law))
            if buf is None or buf.shape != (n_out, n_in):
                buf = np.empty((n_out, n_in))
                buffers[(layer, law)] = buf
            weights[law] = sample_matrix(
                law, n_out, n_in, config.c_w / n_in, _weight_stream(stream, layer, law), out=buf
            )
        bias = (
            sample_bias(n_out, config.c_b, _bias_stream(stream, layer))
            if config.c_b > 0.0
            else None
        )
        for k in members:
            z = weights[laws[k]] @ hs[k]
            if bias is not None:
                z += bias
            if layer <= config.depth:
                hs[k] = act(z)
            else:
                outs[k] = z
    return outs


def sample_outputs(
    config: NetworkConfig,
    input: str | Sequence[float] | np.ndarray,
    count: int,
    projection_indices: Sequence[int],
    master_seed: int,
) -> SampleBatch:
    """Independent realizations of the projected output.

    Realization r draws from ``RandomStream(master_seed, r)``, so the batch
    is bit-reproducible from the master seed alone, in any evaluation order.
    """
    if count < 1:
        raise ConfigError(f"count: must be >= 1, got {count}")
    idx = _check_projection(projection_indices, config.output_dim)
    x = resolve_input(input, config.widths[0])
    act = get_activation(config.activation).fn
    values = np.empty((count, len(idx)))
    col = list(idx)

    depth = config.depth
    widths = config.widths
    laws = [layer_law(config, layer) for layer in range(1, depth + 2)]
    wbufs = [np.empty((widths[l + 1], widths[l])) for l in range(depth + 1)]
    for r in range(count):
        rs = RandomStream(master_seed, r)
        h = x
        for layer in range(1, depth + 2):
            law = laws[layer - 1]
            n_out, n_in = widths[layer], widths[layer - 1]
            w = sample_matrix(
                law, n_out, n_in, config.c_w / n_in,
                _weight_stream(rs, layer, law), out=wbufs[layer - 1],
            )
            z = w @ h
            if config.c_b > 0.0:
                z += sample_bias(n_out, config.c_b, _bias_stream(rs, layer))
            h = act(z) if layer <= depth else z
        values[r] = h[col]
    doc = network_document(config, input)
    return SampleBatch(
        values=values,
        digest=config_digest(doc),
        master_seed=master_seed,
        source="network",
        input_point=x,
        projection=idx,
    )


def network_document(
    config: NetworkConfig, input_spec: str | Sequence[float] | np.ndarray = "ones"
) -> dict:
    """Canonical JSON-ready document for a config and its input point."""
    if isinstance(input_spec, str):
        resolve_input(input_spec, config.widths[0])
        input_value: str | list[float] = "ones"
    else:
        input_value = [float(v) for v in resolve_input(input_spec, config.widths[0])]
    return {
        "depth": config.depth,
        "widths": list(config.widths),
        "c_w": float(config.c_w),
        "c_b": float(config.c_b),
        "activation": config.activation,
        "hidden_law": config.hidden_law,
        "switch_index": config.switch_index,
        "input": input_value,
    }


_DOCUMENT_KEYS = ("depth", "widths", "c_w", "c_b", "activation", "hidden_law",
                  "switch_index", "input")


def network_from_document(doc: Mapping) -> tuple[NetworkConfig, str | list[float]]:
    """Parse a network document; returns the config and the input spec."""
    unknown = set(doc) - set(_DOCUMENT_KEYS)
    if unknown:
        raise ConfigError(f"config: unknown keys {sorted(unknown)}")
    missing = [k for k in _DOCUMENT_KEYS if k not in doc]
    if missing:
        raise ConfigError(f"config: missing keys {missing}")
    config = NetworkConfig(
        depth=int(doc["depth"]),
        widths=tuple(doc["widths"]),
        c_w=float(doc["c_w"]),
        c_b=float(doc["c_b"]),
        activation=doc["activation"],
        hidden_law=doc["hidden_law"],
        switch_index=None if doc["switch_index"] is None else int(doc["switch_index"]),
    )
    input_spec = doc["input"]
    resolve_input(input_spec, config.widths[0])
    return config, input_spec


def canonical_json(doc: Mapping) -> str:
    """Key-sorted, whitespace-free JSON; the digest and file-header form."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def config_digest(doc: Mapping) -> str:
    """Stable 16-hex-digit identifier of a canonical document."""
    return hashlib.sha256(canonical_json(doc).encode("ascii")).hexdigest()[:16]
