"""Generalized-PageRank filter weights, manifold propagation, and filter banks.

A weight vector gamma defines the polynomial response g(lambda) =
sum_l gamma_l lambda^l of the propagation operator.  Nonnegative weights
summing to 1 give a low-pass filter; the alternating choice
gamma_l = (-alpha)^l approaches the high-pass response 1/(1 + alpha*lambda)
as the depth grows.  Propagation generalizes H -> A_n H to product
manifolds by mixing rows with the curvature-aware left product, and hop
embeddings are folded with geodesic scaling and Mobius addition (strictly
left to right; the fold order is part of the contract).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import stereo
from . import tensor as T
from .manifolds import ProductMatrix


class FilterError(ValueError):
    """Invalid filter construction."""


@dataclass
class GprWeights:
    """Hop weights of one polynomial filter; ``gamma`` has length L+1."""

    gamma: object  # ndarray or Tensor
    init_kind: str = "custom"
    trainable: bool = False

    def __len__(self) -> int:
        return T.data_of(self.gamma).shape[0]

    @property
    def depth(self) -> int:
        return len(self) - 1


def gpr_weights_ppr(alpha: float, depth: int) -> GprWeights:
    """Personalized-PageRank initialization.

    gamma_l = alpha (1-alpha)^l for l < L and gamma_L = (1-alpha)^L, which
    telescopes to an exact sum of 1 and satisfies the low-pass hypothesis
    (nonnegative weights, unit sum, some positive weight beyond hop 0).
    """
    if not 0.0 < alpha < 1.0:
        raise FilterError("alpha must lie in (0, 1)")
    if depth < 1:
        raise FilterError("depth must be at least 1")
    gamma = alpha * (1.0 - alpha) ** np.arange(depth + 1, dtype=float)
    gamma[-1] = (1.0 - alpha) ** depth
    return GprWeights(gamma, init_kind=f"ppr({alpha})")


def gpr_weights_highpass(alpha: float, depth: int) -> GprWeights:
    """Alternating initialization gamma_l = (-alpha)^l."""
    if not 0.0 < alpha < 1.0:
        raise FilterError("alpha must lie in (0, 1)")
    if depth < 1:
        raise FilterError("depth must be at least 1")
    gamma = (-alpha) ** np.arange(depth + 1, dtype=float)
    return GprWeights(gamma, init_kind=f"highpass({alpha})")


def filter_response(weights, lam):
    """Evaluate g(lambda) = sum_l gamma_l lambda^l by Horner's scheme.

    ``lam`` may be a scalar or an array; intended domain |lambda| <= 1.
    """
    gamma = weights.gamma if isinstance(weights, GprWeights) else weights
    gamma = T.data_of(gamma)
    lam = np.asarray(lam, dtype=float)
    out = np.full_like(lam, gamma[-1], dtype=float)
    for coef in gamma[-2::-1]:
        out = out * lam + coef
    return out if out.ndim else float(out)


def highpass_limit(alpha: float, lam):
    """Closed-form infinite-depth response 1 / (1 + alpha * lambda)."""
    return 1.0 / (1.0 + alpha * np.asarray(lam, dtype=float))


def lowpass_margin(weights, eigenvalues) -> float:
    """max |g(lambda_i) / g(1)| over eigenvalues with |lambda_i| < 1.

    A value below 1 certifies low-pass behavior on that spectrum.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    interior = lam[np.abs(lam) < 1.0 - 1e-12]
    if interior.size == 0:
        return 0.0
    g1 = filter_response(weights, 1.0)
    return float(np.max(np.abs(filter_response(weights, interior) / g1)))


def propagate_step(a_n, h: ProductMatrix) -> ProductMatrix:
    """One propagation hop: curvature-aware left product per component."""
    return h.map_blocks(lambda block, kappa: stereo.left_matmul(a_n, block, kappa))


def propagate_hops(a_n, h0: ProductMatrix, depth: int) -> list[ProductMatrix]:
    """Hop embeddings [H^(0), ..., H^(L)] under repeated propagation."""
    hops = [h0]
    for _ in range(depth):
        hops.append(propagate_step(a_n, hops[-1]))
    return hops


def gpr_combine(weights, hops: list[ProductMatrix]) -> ProductMatrix:
    """Fold hop embeddings with their gamma weights.

    Per component: Euclidean blocks reduce to sum_l gamma_l H^(l); curved
    blocks fold gamma_l-geodesic-scaled hops with Mobius addition, left to
    right over l = 0..L.
    """
    gamma = weights.gamma if isinstance(weights, GprWeights) else weights
    if T.data_of(gamma).shape[0] != len(hops):
        raise FilterError(
            f"{T.data_of(gamma).shape[0]} weights for {len(hops)} hop matrices"
        )
    base = hops[0]
    out_blocks = []
    for ci, comp in enumerate(base.signature):
        kappa = base.curvatures[ci]
        acc = None
        for l, hop in enumerate(hops):
            block = hop.blocks[ci]
            if comp.kind == "E":
                term = gamma[l] * block
                acc = term if acc is None else acc + term
            else:
                term = stereo.scale(gamma[l], block, kappa)
                acc = term if acc is None else stereo.mobius_add(acc, term, kappa)
        out_blocks.append(acc)
    return ProductMatrix(base.signature, out_blocks, list(base.curvatures))


@dataclass
class FilterBank:
    """Identity filter plus depth-1..L prefix filters and their weights."""

    entries: list[ProductMatrix]
    weights: list
    epsilon_logits: object = None

    def __len__(self) -> int:
        return len(self.entries)


def build_filter_bank(a_n, h0: ProductMatrix, bank_weights, depth: int) -> FilterBank:
    """Construct [Z^I, Z^(1), ..., Z^(L)] from shared hop embeddings.

    ``bank_weights`` holds L+1 weight vectors (length L+1 each), one per
    entry, trained independently.  Entry 0 is the unfiltered case: the
    identity operator is propagated instead of A_n, so every hop equals
    H^(0).  Entry l >= 1 folds hops 0..l with its own leading weights,
    used as-is without renormalization.
    """
    if depth < 1:
        raise FilterError("a filter bank needs depth >= 1")
    if len(bank_weights) != depth + 1:
        raise FilterError(f"need {depth + 1} weight vectors, got {len(bank_weights)}")
    for w in bank_weights:
        if T.data_of(w.gamma if isinstance(w, GprWeights) else w).shape[0] != depth + 1:
            raise FilterError("every weight vector must have length depth + 1")
    hops = propagate_hops(a_n, h0, depth)
    entries = [gpr_combine(_slice_gamma(bank_weights[0], depth + 1), [h0] * (depth + 1))]
    for l in range(1, depth + 1):
        entries.append(gpr_combine(_slice_gamma(bank_weights[l], l + 1), hops[: l + 1]))
    return FilterBank(entries=entries, weights=list(bank_weights))


def _slice_gamma(weights, count):
    gamma = weights.gamma if isinstance(weights, GprWeights) else weights
    return gamma[:count]
