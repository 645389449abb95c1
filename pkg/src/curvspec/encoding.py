"""Random-feature curvature encodings and their product-manifold images.

By Bochner's theorem, a continuous translation-invariant positive-definite
kernel is the Fourier transform of a probability measure; sampling
frequencies from that measure and taking interleaved cos/sin features
gives a Monte Carlo approximation of the kernel as a plain inner product.
Node curvatures (in [-1, 1]) are embedded this way; each component then
projects the features linearly to its encoding block and maps the result
through exp_0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import stereo
from . import tensor as T
from .manifolds import BlockLayout, Component, ProductMatrix, Signature


class EncodingError(ValueError):
    """Invalid encoder construction or input."""


def encoding_dims(signature: Signature, d_c: int) -> list[int]:
    """Split d_c across components proportionally to their dimensions."""
    if d_c < len(signature):
        raise EncodingError(
            f"encoding dimension {d_c} below component count {len(signature)}"
        )
    shares = np.array([c.dim for c in signature], dtype=float)
    shares = shares / shares.sum()
    dims = [max(1, int(np.floor(d_c * s))) for s in shares]
    while sum(dims) > d_c:
        dims[int(np.argmax(dims))] -= 1
    order = np.argsort(-shares)
    i = 0
    while sum(dims) < d_c:
        dims[int(order[i % len(dims)])] += 1
        i += 1
    return dims


@dataclass
class CurvatureEncoder:
    """Fixed random frequencies plus per-component projection maps.

    ``frequencies`` (length d_c) are drawn once from the configured
    distribution and never change; the Euclidean feature is the 2*d_c
    interleaved cos/sin vector.  ``projectors`` (one (2*d_c, dim_q) map
    per component, trainable in the model) absorb the factor of two so
    the product-side encoding has total dimension d_c.
    """

    frequencies: np.ndarray
    signature: Signature
    enc_dims: list[int]
    projectors: list
    distribution: str = "gaussian(1)"

    def __post_init__(self):
        if sum(self.enc_dims) != self.d_c:
            raise EncodingError("projector output dims must sum to d_c")
        for p, dim in zip(self.projectors, self.enc_dims):
            if T.data_of(p).shape != (2 * self.d_c, dim):
                raise EncodingError(
                    f"projector shape {T.data_of(p).shape} != {(2 * self.d_c, dim)}"
                )

    @property
    def d_c(self) -> int:
        return self.frequencies.shape[0]

    def layout(self) -> BlockLayout:
        return BlockLayout(
            tuple(
                Component(c.kind, dim, c.curvature, c.trainable)
                for c, dim in zip(self.signature, self.enc_dims)
            )
        )


def make_encoder(
    d_c: int,
    signature: Signature,
    seed: int = 0,
    distribution: str = "gaussian",
    sigma: float = 1.0,
    frequencies=None,
    projectors=None,
) -> CurvatureEncoder:
    """Sample frequencies (standard Gaussian by default) and build projectors.

    With Gaussian frequencies of scale ``sigma`` the approximated kernel
    is exp(-sigma^2 (a - b)^2 / 2).  ``frequencies`` may be passed
    explicitly (``distribution='custom-samples'``).  Default projectors
    are seeded Gaussian maps at scale 1/sqrt(2 d_c).
    """
    rng = np.random.default_rng(seed)
    if frequencies is not None:
        freqs = np.asarray(frequencies, dtype=float).reshape(-1)
        if freqs.shape[0] != d_c:
            raise EncodingError("need exactly d_c frequency samples")
        dist_name = "custom-samples"
    elif distribution == "gaussian":
        freqs = sigma * rng.standard_normal(d_c)
        dist_name = f"gaussian({sigma:g})"
    else:
        raise EncodingError(f"unknown frequency distribution {distribution!r}")
    dims = encoding_dims(signature, d_c)
    if projectors is None:
        scale = 1.0 / np.sqrt(2 * d_c)
        projectors = [scale * rng.standard_normal((2 * d_c, dim)) for dim in dims]
    return CurvatureEncoder(freqs, signature, dims, list(projectors), dist_name)


def phi_euclidean(enc: CurvatureEncoder, orc) -> np.ndarray:
    """Interleaved [cos(w_i k), sin(w_i k)] features scaled to unit norm.

    Accepts a scalar or an array of curvature values; the feature axis is
    appended last.  Each cos/sin pair contributes exactly 1/d_c to the
    squared norm, so ||phi|| = 1 for every input.
    """
    orc = np.asarray(orc, dtype=float)
    angles = orc[..., None] * enc.frequencies
    out = np.empty(orc.shape + (2 * enc.d_c,))
    out[..., 0::2] = np.cos(angles)
    out[..., 1::2] = np.sin(angles)
    return out / np.sqrt(enc.d_c)


def curvature_kernel(enc: CurvatureEncoder, a, b):
    """Monte Carlo kernel estimate <phi(a), phi(b)> = mean_i cos(w_i (a-b))."""
    return np.sum(phi_euclidean(enc, a) * phi_euclidean(enc, b), axis=-1)


def phi_product(enc: CurvatureEncoder, orc: float, curvatures=None) -> ProductMatrix:
    """Product-manifold image of one curvature value (a 1 x d_c row)."""
    return encode_all(enc, np.asarray([orc], dtype=float), curvatures)


def encode_all(enc: CurvatureEncoder, node_orc, curvatures=None) -> ProductMatrix:
    """Encode per-node curvature values into an (n, d_c) product matrix.

    Values must already be clamped to [-1, 1].  Per component: linear
    projection of the Euclidean features, then exp_0 at that component's
    curvature (a tape scalar when curvatures are trainable).
    """
    values = np.asarray(node_orc, dtype=float)
    if values.ndim != 1:
        raise EncodingError("node curvature values must be a flat vector")
    if np.any(np.abs(values) > 1.0 + 1e-12):
        raise EncodingError("curvature values must lie in [-1, 1]; clamp upstream")
    feats = phi_euclidean(enc, values)
    if curvatures is None:
        curvatures = [c.curvature for c in enc.signature]
    blocks = []
    for proj, kappa in zip(enc.projectors, curvatures):
        tangent = T.matmul(feats, proj)
        blocks.append(stereo.expmap0(tangent, kappa))
    return ProductMatrix(enc.layout(), blocks, list(curvatures))
