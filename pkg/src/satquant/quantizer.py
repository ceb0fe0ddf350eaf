"""Symmetric quantization alphabets and the memoryless scalar quantizer.

Two uniform grid families are supported: midrise grids with an even number
of elements and no zero, and midtread grids with an odd number of elements
including zero.  Both are symmetric about 0 and have largest element exactly
equal to the scale ``c``, which is what makes saturated coordinates quantize
with zero error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameter

MIDRISE = "midrise"
MIDTREAD = "midtread"


@dataclass(frozen=True)
class Alphabet:
    """A finite symmetric quantization grid.

    ``elements`` is sorted ascending; the extreme elements are ``-c`` and
    ``+c`` exactly.  ``bits`` is set when the grid was built as a uniform
    B-bit alphabet and is ``None`` otherwise.
    """

    kind: str
    levels: int          # K: midrise has 2K elements, midtread 2K+1
    step: float          # gap between consecutive elements
    scale: float         # c: largest element magnitude
    elements: np.ndarray = field(repr=False)
    bits: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "elements", np.asarray(self.elements, dtype=np.float64))

    @property
    def size(self) -> int:
        return self.elements.shape[0]

    def to_dict(self) -> dict:
        """JSON-report form: {kind, K, c, elements[]}."""
        return {
            "kind": self.kind,
            "K": self.levels,
            "c": self.scale,
            "elements": self.elements.tolist(),
        }


@dataclass(frozen=True)
class DistortionProfile:
    """Worst-case rounding error of an alphabet over ``[-c, c]``.

    ``worst_case`` is exact (largest half-gap between consecutive elements).
    ``paper_nominal`` records the conventional ``c * 2^-B`` figure for
    power-of-two alphabet sizes; it understates the exact value for small B
    (a 1-bit grid has worst case ``c``, not ``c/2``), so it is reported but
    never used in bound checks.
    """

    alphabet: Alphabet
    worst_case: float
    paper_nominal: float | None


def build_midrise(K: int, c: float) -> Alphabet:
    """Midrise grid with 2K elements ``±(k - 1/2)·step``, largest exactly c."""
    if K < 1:
        raise InvalidParameter(f"midrise needs K >= 1, got {K}")
    if not c > 0:
        raise InvalidParameter(f"scale must be positive, got {c}")
    # (2k-1)/(2K-1) evaluates to exactly 1 at k = K, so the extreme element
    # is bit-exactly c.
    ks = np.arange(1, K + 1, dtype=np.float64)
    pos = (2.0 * ks - 1.0) / (2.0 * K - 1.0) * c
    elements = np.concatenate([-pos[::-1], pos])
    return Alphabet(MIDRISE, K, 2.0 * c / (2.0 * K - 1.0), float(c), elements)


def build_midtread(K: int, c: float) -> Alphabet:
    """Midtread grid with 2K+1 elements ``±k·step`` (including 0), largest c."""
    if K < 1:
        raise InvalidParameter(f"midtread needs K >= 1, got {K}")
    if not c > 0:
        raise InvalidParameter(f"scale must be positive, got {c}")
    ks = np.arange(1, K + 1, dtype=np.float64)
    pos = ks / K * c
    elements = np.concatenate([-pos[::-1], [0.0], pos])
    return Alphabet(MIDTREAD, K, c / K, float(c), elements)


def build_uniform_bbit(B: int, c: float) -> Alphabet:
    """Uniform B-bit alphabet: the 2^B-element midrise grid scaled to c."""
    if B < 1:
        raise InvalidParameter(f"bit depth must be >= 1, got {B}")
    base = build_midrise(2 ** (B - 1), c)
    return Alphabet(base.kind, base.levels, base.step, base.scale, base.elements, bits=B)


def msq(z, alphabet: Alphabet):
    """Round to the nearest alphabet element, entrywise.

    Exact ties go to the larger element (the sign(0) = +1 convention).
    Accepts scalars, vectors, or matrices; the output has the input's shape.
    """
    el = alphabet.elements
    zz = np.asarray(z, dtype=np.float64)
    idx = np.searchsorted(el, zz)
    lo = el[np.clip(idx - 1, 0, el.size - 1)]
    hi = el[np.clip(idx, 0, el.size - 1)]
    out = np.where(np.abs(hi - zz) <= np.abs(zz - lo), hi, lo)
    if np.isscalar(z) or zz.ndim == 0:
        return float(out)
    return out


def worst_case_distortion(alphabet: Alphabet) -> DistortionProfile:
    """Exact worst-case distortion over ``[-c, c]``.

    The maximum rounding error is attained at a midpoint between consecutive
    elements (the interval endpoints ``±c`` are alphabet elements and
    contribute zero), so for these uniform grids the exact value is half the
    step.  Computing it as ``step / 2`` rather than from floating-point
    element differences keeps the identity ``worst == c / (2^B - 1)``
    bit-exact for B-bit grids.
    """
    worst = alphabet.step / 2.0
    size = alphabet.size
    nominal = None
    if size >= 2 and size & (size - 1) == 0:
        nominal = alphabet.scale * 2.0 ** (-int(np.log2(size)))
    return DistortionProfile(alphabet, worst, nominal)
