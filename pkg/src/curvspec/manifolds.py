"""Product-manifold signatures, block matrices, and signature estimation.

A signature is an ordered list of constant-curvature components
(hyperbolic / spherical / Euclidean), each with a dimension and a
curvature of the matching sign.  Points and embedding matrices carry one
coordinate block per component; exp/log/distance factor componentwise.

:func:`estimate_signature` implements the histogram heuristic: weighted
k-means over observed edge curvatures, an elbow rule for the cluster
count, one component per non-flat centroid (curvature initialized at the
centroid), flat clusters merged into a single Euclidean block, and
dimensions split proportionally to cluster mass.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import stereo
from . import tensor as T


class SignatureError(ValueError):
    """Malformed signature or incompatible block structure."""


@dataclass(frozen=True)
class Component:
    kind: str  # "H" | "S" | "E"
    dim: int
    curvature: float
    trainable: bool = False

    def __post_init__(self):
        if self.kind not in ("H", "S", "E"):
            raise SignatureError(f"unknown component kind {self.kind!r}")
        if self.dim <= 0:
            raise SignatureError("component dimension must be positive")
        if self.kind == "H" and not self.curvature < 0:
            raise SignatureError("H component needs negative curvature")
        if self.kind == "S" and not self.curvature > 0:
            raise SignatureError("S component needs positive curvature")
        if self.kind == "E" and self.curvature != 0:
            raise SignatureError("E component needs zero curvature")


@dataclass(frozen=True)
class BlockLayout:
    """Ordered component blocks without the uniqueness rules of a signature.

    Concatenating a signature with an encoding layout may legitimately
    hold two Euclidean blocks; a :class:`Signature` may not.
    """

    components: tuple[Component, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise SignatureError("layout needs at least one component")
        object.__setattr__(self, "components", comps)

    @property
    def total_dim(self) -> int:
        return sum(c.dim for c in self.components)

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def slices(self) -> list[slice]:
        out, start = [], 0
        for c in self.components:
            out.append(slice(start, start + c.dim))
            start += c.dim
        return out

    def concat(self, other: "BlockLayout") -> "BlockLayout":
        return BlockLayout(self.components + other.components)


@dataclass(frozen=True)
class Signature(BlockLayout):
    """Validated product-manifold signature: at most one Euclidean block."""

    def __post_init__(self):
        super().__post_init__()
        if sum(1 for c in self.components if c.kind == "E") > 1:
            raise SignatureError("at most one Euclidean component is allowed")

    def serialize(self) -> str:
        return ",".join(
            f"{c.kind}:{c.dim}:{_fmt_curv(c.curvature)}" for c in self.components
        )

    @classmethod
    def parse(cls, text: str) -> "Signature":
        comps = []
        for chunk in text.strip().split(","):
            parts = chunk.strip().split(":")
            if len(parts) != 3:
                raise SignatureError(f"bad component spec {chunk!r}")
            comps.append(Component(parts[0], int(parts[1]), float(parts[2])))
        return cls(tuple(comps))


def _fmt_curv(value: float) -> str:
    text = f"{value:g}"
    return "0" if text in ("-0", "0.0", "-0.0") else text


def euclidean_signature(dim: int) -> Signature:
    return Signature((Component("E", dim, 0.0),))


@dataclass
class ProductMatrix:
    """Per-component coordinate blocks of n manifold-valued rows.

    Blocks may be plain arrays or tape tensors; curvatures may likewise
    be floats or scalar tensors (one per component, aligned with the
    signature) so that curvature gradients can flow.
    """

    signature: BlockLayout
    blocks: list
    curvatures: list = field(default=None)

    def __post_init__(self):
        if len(self.blocks) != len(self.signature):
            raise SignatureError("block count must match signature")
        for block, comp in zip(self.blocks, self.signature):
            if T.data_of(block).shape[-1] != comp.dim:
                raise SignatureError(
                    f"block width {T.data_of(block).shape[-1]} != {comp.dim}"
                )
        if self.curvatures is None:
            self.curvatures = [c.curvature for c in self.signature]

    @property
    def n(self) -> int:
        return T.data_of(self.blocks[0]).shape[0]

    def map_blocks(self, fn) -> "ProductMatrix":
        out = [fn(b, k) for b, k in zip(self.blocks, self.curvatures)]
        return ProductMatrix(self.signature, out, list(self.curvatures))

    def to_array(self) -> np.ndarray:
        return np.concatenate([T.data_of(b) for b in self.blocks], axis=-1)


def split_blocks(flat, signature: BlockLayout, curvatures=None) -> ProductMatrix:
    """Slice a flat (n, total_dim) matrix into signature-aligned blocks."""
    if T.data_of(flat).shape[-1] != signature.total_dim:
        raise SignatureError("flat width must equal the signature dimension")
    blocks = [flat[..., sl] for sl in signature.slices()]
    return ProductMatrix(signature, blocks, curvatures)


def product_exp0(tangent: ProductMatrix) -> ProductMatrix:
    """Componentwise exponential map at the product origin."""
    return tangent.map_blocks(lambda b, k: stereo.expmap0(b, k))


def product_log0(point: ProductMatrix) -> ProductMatrix:
    """Componentwise logarithmic map at the product origin."""
    return point.map_blocks(lambda b, k: stereo.logmap0(b, k))


def product_distance(x: ProductMatrix, y: ProductMatrix):
    """Product metric: sqrt of the sum of squared component distances."""
    if x.signature.components != y.signature.components:
        raise SignatureError("product distance requires matching signatures")
    total = None
    for bx, by, k in zip(x.blocks, y.blocks, x.curvatures):
        d = stereo.dist(bx, by, k)
        total = d * d if total is None else total + d * d
    return T.sqrt(total)


def clamp_trainable_curvature(raw, kind: str):
    """Map an unconstrained parameter to a sign-correct curvature.

    H -> -softplus(raw), S -> +softplus(raw), E -> 0.  Strictly monotone
    in |curvature| and sign-invariant under training.
    """
    if kind == "E":
        return 0.0
    mag = T.softplus(raw)
    return (0.0 - mag) if kind == "H" else mag


def inverse_softplus(value: float) -> float:
    """Raw parameter whose softplus equals ``value`` (> 0)."""
    if value <= 0:
        raise ValueError("inverse softplus needs a positive value")
    return float(np.log(np.expm1(value)))


# -- signature estimation ---------------------------------------------


def _weighted_kmeans_1d(values, weights, k, rng, restarts=50, iters=100):
    """Weighted Lloyd iterations on the line; returns (centroids, assign, wcv)."""
    best = None
    for _ in range(restarts):
        if len(values) >= k:
            centers = rng.choice(values, size=k, replace=False)
        else:
            centers = rng.choice(values, size=k, replace=True)
        centers = np.sort(centers.astype(float))
        for _ in range(iters):
            # Ties break toward the lower cluster index.
            d2 = (values[:, None] - centers[None, :]) ** 2
            assign = np.argmin(d2, axis=1)
            new_centers = centers.copy()
            for c in range(k):
                mask = assign == c
                wsum = weights[mask].sum()
                if wsum > 0:
                    new_centers[c] = np.sum(weights[mask] * values[mask]) / wsum
            if np.allclose(new_centers, centers):
                centers = new_centers
                break
            centers = new_centers
        d2 = (values[:, None] - centers[None, :]) ** 2
        assign = np.argmin(d2, axis=1)
        wcv = float(np.sum(weights * d2[np.arange(len(values)), assign]))
        if best is None or wcv < best[2] - 1e-15:
            best = (centers, assign, wcv)
    return best


def estimate_signature(
    hist,
    eps: float,
    h_max: int,
    s_max: int,
    d_total: int,
    preferred_dims=None,
    seed: int = 0,
    trainable: bool = False,
) -> Signature:
    """Estimate a product signature from a curvature histogram.

    ``hist`` is a sequence of (curvature, frequency) pairs.  Frequencies
    are normalized, the weighted values are clustered with k-means (the
    cluster count picked by an elbow rule: the smallest K whose refinement
    improves weighted within-cluster variance by less than 10%, capped at
    h_max + s_max + 1), and each centroid becomes a component: hyperbolic
    below -eps, spherical above +eps, all near-flat clusters merged into
    one Euclidean block.  Dimensions follow ``preferred_dims`` when given
    (must sum to ``d_total``), otherwise they are proportional to cluster
    mass with floor-then-remainder rounding.
    """
    pairs = [(float(c), float(f)) for c, f in hist]
    if not pairs or all(f == 0 for _, f in pairs):
        raise SignatureError("histogram is empty")
    if any(f < 0 for _, f in pairs):
        raise SignatureError("histogram frequencies must be nonnegative")
    if eps <= 0:
        raise SignatureError("eps must be positive")
    values = np.array([c for c, f in pairs if f > 0])
    weights = np.array([f for _, f in pairs if f > 0])
    weights = weights / weights.sum()

    rng = np.random.default_rng(seed)
    k_cap = min(h_max + s_max + 1, len(values))
    chosen = None
    prev_wcv = None
    for k in range(1, k_cap + 1):
        centers, assign, wcv = _weighted_kmeans_1d(values, weights, k, rng)
        if prev_wcv is not None and (prev_wcv - wcv) < 0.10 * prev_wcv:
            break
        chosen = (centers, assign, wcv)
        prev_wcv = wcv
        if wcv <= 1e-18:
            break
    centers, assign, _ = chosen

    hyper: list[tuple[float, float]] = []  # (centroid, mass)
    spher: list[tuple[float, float]] = []
    flat_mass = 0.0
    order = np.argsort(centers)
    for c in order:
        mass = float(weights[assign == c].sum())
        if mass == 0:
            continue
        centroid = float(centers[c])
        if centroid < -eps and len(hyper) < h_max:
            hyper.append((centroid, mass))
        elif centroid > eps and len(spher) < s_max:
            spher.append((centroid, mass))
        else:
            flat_mass += mass

    comps: list[tuple[str, float, float]] = []
    comps += [("H", c, m) for c, m in hyper]
    comps += [("S", c, m) for c, m in spher]
    if flat_mass > 0 or not comps:
        comps.append(("E", 0.0, flat_mass if comps else 1.0))

    if d_total < len(comps):
        raise SignatureError(
            f"total dimension {d_total} below component count {len(comps)}"
        )

    if preferred_dims is not None:
        dims = [int(d) for d in preferred_dims]
        if len(dims) != len(comps):
            raise SignatureError(
                f"{len(dims)} preferred dims for {len(comps)} components"
            )
        if sum(dims) != d_total:
            raise SignatureError("preferred dims must sum to the total dimension")
    else:
        masses = np.array([m for _, _, m in comps])
        shares = masses / masses.sum()
        dims = [max(1, int(np.floor(d_total * s))) for s in shares]
        while sum(dims) > d_total:
            dims[int(np.argmax(dims))] -= 1
        order_by_mass = np.argsort(-masses)
        i = 0
        while sum(dims) < d_total:
            dims[int(order_by_mass[i % len(comps)])] += 1
            i += 1

    return Signature(
        tuple(
            Component(kind, dim, curv, trainable=trainable and kind != "E")
            for (kind, curv, _), dim in zip(comps, dims)
        )
    )
