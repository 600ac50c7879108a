"""Standardized weight laws, analytic moments, and reproducible random streams.

Every supported law has mean zero and variance one exactly, so a single
``variance`` argument controls the scale of the sampled entries.  Supported
kinds and their standardizations:

==============  =======================================  ==================
kind            standardization                          E|X|^3
==============  =======================================  ==================
``gaussian``    N(0, 1)                                  2*sqrt(2)/sqrt(pi)
``laplace``     density scale 1/sqrt(2)                  3/sqrt(2)
``rademacher``  uniform on {-1, +1}                      1
``uniform``     uniform on [-sqrt(3), +sqrt(3)]          3*sqrt(3)/4
==============  =======================================  ==================

Reproducibility contract
------------------------
A :class:`RandomStream` is the value ``(master_seed, stream_id)``.  Its
generator state is derived by the fixed 64-bit mixing function

    ``derive_seed(m, s) = splitmix64(splitmix64(m) XOR (s mod 2**64))``

where ``splitmix64`` is the standard finalizer (add golden-ratio constant,
two xor-shift-multiply rounds, final xor-shift).  The derived key seeds a
numpy ``SFC64`` bit generator.  The mixing function, the bit generator, and
the per-law sampling methods below are all part of the output-stability
contract and must not change within a release:

* ``gaussian``: ``Generator.standard_normal`` (ziggurat).
* ``laplace``: inverse CDF ``-(1/sqrt(2)) * sign(u - 1/2) * log1p(-2|u - 1/2|)``
  applied to one uniform draw per entry, evaluated in cache-sized blocks
  (blocking changes nothing: the map is elementwise).
* ``rademacher``: ``copysign(1, u - 1/2)`` on one uniform draw per entry.
* ``uniform``: affine map ``2*sqrt(3) * (u - 1/2)``.

Sampling is a pure function of ``(law, shape, variance, stream)``: calling a
sampler twice with the same stream returns bit-identical output.  Distinct
``(master_seed, stream_id)`` pairs give statistically independent streams, so
parallel tasks need no shared counter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

__all__ = [
    "LAW_KINDS",
    "LAPLACE_SCALE",
    "UNIFORM_HALF_WIDTH",
    "WeightLaw",
    "MomentSummary",
    "RandomStream",
    "derive_seed",
    "law_moments",
    "sample_matrix",
    "sample_bias",
]

LAW_KINDS = ("gaussian", "laplace", "rademacher", "uniform")

#: Laplace density scale b with variance 2 b^2 = 1.
LAPLACE_SCALE = 2.0 ** -0.5
#: Half-width a of the centered uniform law with variance a^2 / 3 = 1.
UNIFORM_HALF_WIDTH = 3.0 ** 0.5

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
# Block length for the in-place Laplace transform; fits comfortably in L2.
_BLOCK = 131072


@dataclass(frozen=True)
class WeightLaw:
    """A standardized weight distribution, identified by its kind."""

    kind: str

    def __post_init__(self) -> None:
        if self.kind not in LAW_KINDS:
            raise ConfigError(
                f"hidden_law: unknown law kind {self.kind!r}; expected one of {LAW_KINDS}"
            )


@dataclass(frozen=True)
class MomentSummary:
    """Exact moments of a standardized law."""

    mean: float
    variance: float
    abs_third_moment: float


def _splitmix64(x: int) -> int:
    x = (x + _GOLDEN) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(master_seed: int, stream_id: int) -> int:
    """Derive the 64-bit generator key for (master_seed, stream_id).

    For a fixed master seed the map ``stream_id -> key`` is injective on
    64-bit inputs (a bijective finalizer composed with an xor), so distinct
    stream ids can never collide under one master seed.
    """
    return _splitmix64(_splitmix64(master_seed & _MASK64) ^ (stream_id & _MASK64))


@dataclass(frozen=True)
class RandomStream:
    """Value-type handle for one reproducible random sequence."""

    master_seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        return np.random.Generator(
            np.random.SFC64(derive_seed(self.master_seed, self.stream_id))
        )

    def child(self, index: int) -> "RandomStream":
        """Sub-stream ``index`` of this stream, disjoint from all siblings."""
        return RandomStream(derive_seed(self.master_seed, self.stream_id), index)


_MOMENTS = {
    "gaussian": MomentSummary(0.0, 1.0, 2.0 * 2.0 ** 0.5 / np.pi ** 0.5),
    "laplace": MomentSummary(0.0, 1.0, 3.0 / 2.0 ** 0.5),
    "rademacher": MomentSummary(0.0, 1.0, 1.0),
    "uniform": MomentSummary(0.0, 1.0, 3.0 * 3.0 ** 0.5 / 4.0),
}


def _law_kind(law: WeightLaw | str) -> str:
    if isinstance(law, WeightLaw):
        return law.kind
    return WeightLaw(law).kind


def law_moments(law: WeightLaw | str) -> MomentSummary:
    """Exact (mean, variance, E|X|^3) of the standardized law."""
    return _MOMENTS[_law_kind(law)]


def _fill_laplace(gen: np.random.Generator, flat: np.ndarray, scale: float) -> None:
    # Inverse CDF of the standardized Laplace law, scaled by `scale`,
    # applied in place over L2-sized blocks.
    gen.random(out=flat)
    scratch = np.empty(min(flat.size, _BLOCK))
    for start in range(0, flat.size, _BLOCK):
        v = flat[start : start + _BLOCK]
        a = scratch[: v.size]
        np.subtract(v, 0.5, out=v)
        np.abs(v, out=a)
        np.multiply(a, -2.0, out=a)
        np.log1p(a, out=a)
        np.copysign(a, v, out=v)
        np.multiply(v, -LAPLACE_SCALE * scale, out=v)


def _fill_standard(
    kind: str, gen: np.random.Generator, flat: np.ndarray, scale: float
) -> None:
    """Fill `flat` with iid draws of `scale` times the standardized law."""
    if kind == "gaussian":
        gen.standard_normal(out=flat)
        if scale != 1.0:
            np.multiply(flat, scale, out=flat)
    elif kind == "laplace":
        _fill_laplace(gen, flat, scale)
    elif kind == "rademacher":
        gen.random(out=flat)
        np.subtract(flat, 0.5, out=flat)
        np.copysign(np.float64(scale), flat, out=flat)
    elif kind == "uniform":
        gen.random(out=flat)
        np.subtract(flat, 0.5, out=flat)
        np.multiply(flat, 2.0 * UNIFORM_HALF_WIDTH * scale, out=flat)
    else:  # pragma: no cover - guarded by WeightLaw validation
        raise ConfigError(f"law: unknown law kind {kind!r}")


def sample_matrix(
    law: WeightLaw | str,
    rows: int,
    cols: int,
    variance: float,
    stream: RandomStream,
    out: np.ndarray | None = None,
) -> np.ndarray:
    """Sample a (rows, cols) matrix of iid scaled draws from the law.

    Entries are distributed as sqrt(variance) times the standardized law.
    The result is a pure function of the arguments; `out`, when given, must
    be a C-contiguous float64 array of the right shape and is returned
    filled.
    """
    kind = _law_kind(law)
    if rows <= 0:
        raise ConfigError(f"rows: must be a positive integer, got {rows}")
    if cols <= 0:
        raise ConfigError(f"cols: must be a positive integer, got {cols}")
    if not variance > 0.0:
        raise ConfigError(f"variance: must be positive, got {variance}")
    if out is None:
        out = np.empty((rows, cols))
    elif out.shape != (rows, cols) or out.dtype != np.float64 or not out.flags.c_contiguous:
        raise ConfigError("out: need a C-contiguous float64 array of shape (rows, cols)")
    _fill_standard(kind, stream.generator(), out.reshape(-1), float(variance) ** 0.5)
    return out


def sample_bias(dim: int, c_b: float, stream: RandomStream) -> np.ndarray:
    """Sample an N(0, c_b)^dim bias vector; exactly zero when c_b = 0."""
    if dim <= 0:
        raise ConfigError(f"dim: must be a positive integer, got {dim}")
    if c_b < 0.0:
        raise ConfigError(f"c_b: must be nonnegative, got {c_b}")
    if c_b == 0.0:
        return np.zeros(dim)
    out = np.empty(dim)
    _fill_standard("gaussian", stream.generator(), out, float(c_b) ** 0.5)
    return out
