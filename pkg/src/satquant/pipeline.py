"""End-to-end quantization of neurons, layers, and multi-layer networks.

The pipeline is pre-process -> round: a neuron (or every column of a layer)
is first driven to a mostly-saturated representative with the same action on
the data, then rounded entrywise by the memoryless scalar quantizer over a
uniform B-bit alphabet whose extreme elements sit exactly at the cap.  The
cap is never tuned: single neurons use their own max magnitude, layers share
``max|W|`` so one alphabet serves every column.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateActivationsWarning,
    DimensionMismatch,
    InvalidParameter,
    UnknownActivation,
)
from .linalg import as_matrix, as_vector
from .linf_lp import layer_linf_preprocess, linf_minimize
from .preprocess import (
    ACCELERATED,
    BASELINE,
    LINF,
    PreprocessResult,
    preprocess_accelerated,
    preprocess_baseline,
)
from .quantizer import Alphabet, build_uniform_bbit, msq

IDENTITY = "identity"
RELU = "relu"

ANALYTIC = "analytic"
PROPAGATED = "propagated"


@dataclass(frozen=True)
class NeuronRecord:
    """Per-neuron diagnostics inside a layer result."""

    saturated_count: int
    data_residual: float
    quantization_error: float


@dataclass(frozen=True)
class LayerQuantizationResult:
    """Quantized layer: every entry of ``Q`` is an element of ``alphabet``."""

    Q: np.ndarray
    c_shared: float
    per_neuron: list[NeuronRecord]
    alphabet: Alphabet
    method: str


@dataclass(frozen=True)
class NetworkSpec:
    """Ordered dense layers: (weight matrix N_prev x N_next, activation tag)."""

    layers: list[tuple[np.ndarray, str]] = field(default_factory=list)

    def __post_init__(self):
        widths = None
        for idx, (W, tag) in enumerate(self.layers):
            W = as_matrix(W, f"layer {idx} weights")
            if tag not in (IDENTITY, RELU):
                raise UnknownActivation(f"layer {idx}: {tag!r}")
            if widths is not None and W.shape[0] != widths:
                raise DimensionMismatch(
                    f"layer {idx} expects {W.shape[0]} inputs, previous layer"
                    f" produces {widths}"
                )
            widths = W.shape[1]


def apply_activation(tag: str, M):
    """Apply an activation entrywise. relu is 1-Lipschitz, identity is exact."""
    M = np.asarray(M, dtype=np.float64)
    if tag == IDENTITY:
        return M
    if tag == RELU:
        return np.maximum(M, 0.0)
    raise UnknownActivation(f"unsupported activation {tag!r}")


def _preprocess_for(method: str, Xt, w, cap: float, seed: int = 0) -> PreprocessResult:
    if method == BASELINE:
        return preprocess_baseline(Xt, w, cap)
    if method == ACCELERATED:
        return preprocess_accelerated(Xt, w, cap)
    raise InvalidParameter(f"unknown preprocessing method {method!r}")


def quantize_neuron(Xt, w, B: int, method: str = BASELINE, seed: int = 0):
    """Quantize a single neuron; returns ``(q, PreprocessResult)``.

    The cap is ``max|w|`` for the walk methods.  The inf-norm route instead
    quantizes at its own minimized cap, which is never larger.
    """
    Xt = as_matrix(Xt, "Xt")
    w = as_vector(w, "w")
    m, n = Xt.shape
    if w.shape[0] != n:
        raise DimensionMismatch(f"w has dim {w.shape[0]}, expected {n}")
    if n <= m:
        raise DimensionMismatch(f"need more weights than data points, got {m}x{n}")
    if not np.any(w):
        raise InvalidParameter("cannot quantize the zero neuron")
    if method == LINF:
        sol = linf_minimize(Xt, w)
        if sol.value == 0.0:
            raise InvalidParameter("neuron acts as zero on the data; no alphabet scale")
        pre = PreprocessResult(
            w_hat=sol.z_star,
            saturated=np.flatnonzero(np.abs(sol.z_star) == sol.value),
            iterations=sol.iterations,
            data_residual=float(np.linalg.norm(Xt @ sol.z_star - Xt @ w)),
            method=LINF,
        )
        cap = sol.value
    else:
        cap = float(np.max(np.abs(w)))
        pre = _preprocess_for(method, Xt, w, cap, seed)
    alphabet = build_uniform_bbit(B, cap)
    q = msq(pre.w_hat, alphabet)
    return q, pre


def quantize_layer(Xt, W, B: int, method: str = BASELINE, seed: int = 0) -> LayerQuantizationResult:
    """Quantize every column of ``W`` against the shared cap ``max|W|``.

    For the walk methods each column is pre-processed with the shared cap, so
    a single alphabet covers the layer.  The inf-norm route derives its own
    (smaller) shared cap from stage 1 and pins every column to it in stage 2.
    """
    Xt = as_matrix(Xt, "Xt")
    W = as_matrix(W, "W")
    m, n = Xt.shape
    if W.shape[0] != n:
        raise DimensionMismatch(f"W has {W.shape[0]} rows, expected {n}")
    if n <= m:
        raise DimensionMismatch(f"need more weights than data points, got {m}x{n}")
    n1 = W.shape[1]
    if not np.any(W):
        raise InvalidParameter("cannot quantize an all-zero layer")

    if method == LINF:
        c_shared, W_hat, sols = layer_linf_preprocess(Xt, W, seed=seed)
        if c_shared == 0.0:
            raise InvalidParameter("layer acts as zero on the data; no alphabet scale")
        pres = [
            PreprocessResult(
                w_hat=W_hat[:, i],
                saturated=np.flatnonzero(np.abs(W_hat[:, i]) == c_shared),
                iterations=sols[i].iterations,
                data_residual=float(np.linalg.norm(Xt @ W_hat[:, i] - Xt @ W[:, i])),
                method=LINF,
            )
            for i in range(n1)
        ]
    else:
        c_shared = float(np.max(np.abs(W)))
        pres = [_preprocess_for(method, Xt, W[:, i], c_shared, seed) for i in range(n1)]
        W_hat = np.column_stack([p.w_hat for p in pres])

    alphabet = build_uniform_bbit(B, c_shared)
    Q = msq(W_hat, alphabet)
    records = []
    for i in range(n1):
        err = float(np.linalg.norm(Xt @ W[:, i] - Xt @ Q[:, i]))
        records.append(
            NeuronRecord(
                saturated_count=pres[i].saturated_count,
                data_residual=pres[i].data_residual,
                quantization_error=err,
            )
        )
    return LayerQuantizationResult(Q, c_shared, records, alphabet, method)


def quantize_network(
    net: NetworkSpec,
    data,
    B: int,
    method: str = BASELINE,
    propagation: str = PROPAGATED,
    seed: int = 0,
) -> list[LayerQuantizationResult]:
    """Quantize a network layer by layer.

    ``data`` holds the training inputs as rows (m x N0).  Layer ``l`` is
    quantized against the activations produced by layers ``1..l-1``: in
    ``analytic`` mode those come from the original network, in ``propagated``
    mode from the already-quantized prefix (deployment semantics).  A layer
    whose activation matrix drops below rank m is reported via
    :class:`DegenerateActivationsWarning` and quantized with the baseline
    method, which does not need general position.
    """
    if propagation not in (ANALYTIC, PROPAGATED):
        raise InvalidParameter(f"unknown propagation mode {propagation!r}")
    acts = as_matrix(data, "data")
    m = acts.shape[0]
    if not net.layers:
        return []
    widths = [acts.shape[1]] + [W.shape[1] for W, _ in net.layers]
    if min(widths) <= m:
        raise DimensionMismatch(
            f"every layer width must exceed the number of data points m={m},"
            f" got widths {widths}"
        )
    results: list[LayerQuantizationResult] = []
    for idx, (W, tag) in enumerate(net.layers):
        layer_method = method
        if np.linalg.matrix_rank(acts) < m:
            warnings.warn(
                f"layer {idx}: activation matrix rank below m={m};"
                " falling back to baseline pre-processing",
                DegenerateActivationsWarning,
            )
            layer_method = BASELINE
        res = quantize_layer(acts, W, B, method=layer_method, seed=seed)
        results.append(res)
        source = W if propagation == ANALYTIC else res.Q
        acts = apply_activation(tag, acts @ source)
    return results
