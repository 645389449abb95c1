"""End-to-end trainable model over the curvature-weighted filter bank.

Pipeline per forward pass: encode node features into the product manifold,
propagate through the curvature-weighted adjacency to build the filter
bank, pool each bank entry with component attention, append the curvature
positional encoding, and mix entries with learnable softmax weights in
the origin tangent space.  Heads: linear classifier over tangent features
(node classification) or a Fermi-Dirac distance decoder (link prediction).

Differentiation runs on the local tape (:mod:`curvspec.tensor`); every
parameter, including per-component curvatures, is validated against
central differences by :func:`gradient_check`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import encoding, filters, laplacian, stereo
from . import tensor as T
from .graphs import Graph, GraphError
from .manifolds import (
    ProductMatrix,
    Signature,
    clamp_trainable_curvature,
    inverse_softplus,
    split_blocks,
)
from .orc import OrcConfig, compute_all


class TrainError(ValueError):
    """Invalid training configuration or data."""


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters; defaults follow the tuned desk-scale setup."""

    task: str = "nc"
    lr: float = 4e-3
    epochs: int = 100
    weight_decay: float = 5e-4
    dropout: float = 0.3
    seed: int = 0
    alpha: float = 0.3
    depth: int = 10
    d_m: int = 48
    d_c: int = 16
    d_pool: int = 16
    split: tuple = None  # (train, val, test); task-dependent default
    gpr_init: str = "ppr"
    trainable_gamma: bool = True
    trainable_curvature: bool = True
    freeze_pooling: bool = False
    orc: OrcConfig = field(default_factory=lambda: OrcConfig(delta=0.5, method="sinkhorn", normalize=True))
    orc_workers: int = 1
    lp_radius: float = 2.0
    lp_temperature: float = 1.0

    def __post_init__(self):
        if self.task not in ("nc", "lp"):
            raise TrainError("task must be 'nc' or 'lp'")
        if self.split is None:
            default = (0.6, 0.2, 0.2) if self.task == "nc" else (0.85, 0.05, 0.10)
            object.__setattr__(self, "split", default)
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise TrainError("split fractions must sum to 1")
        if self.depth < 1:
            raise TrainError("depth must be >= 1")


def _orc_node_values(g: Graph, cfg: TrainConfig):
    result = compute_all(g, cfg.orc, workers=cfg.orc_workers)
    values = np.array([result.node_orc[x] for x in range(g.n)])
    return result, np.clip(values, -1.0, 1.0)


@dataclass
class PreparedGraph:
    """Propagation operator and node curvatures, computed once per graph."""

    a_n: np.ndarray
    node_curvature: np.ndarray

    @classmethod
    def build(cls, g: Graph, cfg: TrainConfig) -> "PreparedGraph":
        orc_result, values = _orc_node_values(g, cfg)
        lap = laplacian.build(g, orc_result)
        return cls(a_n=lap.a_norm, node_curvature=values)


class MixedCurvatureModel:
    """Parameter container plus forward pass."""

    def __init__(self, signature: Signature, d_f: int, n_classes: int, cfg: TrainConfig, seed=None):
        self.signature = signature
        self.cfg = cfg
        self.n_classes = n_classes
        rng = np.random.default_rng(cfg.seed if seed is None else seed)
        d_m, d_c, depth = signature.total_dim, cfg.d_c, cfg.depth
        if d_m != cfg.d_m:
            cfg = replace(cfg, d_m=d_m)
            self.cfg = cfg

        def param(shape, scale):
            return T.Tensor(scale * rng.standard_normal(shape), requires_grad=True)

        self.params: dict[str, T.Tensor] = {}
        p = self.params
        p["enc_w"] = param((d_f, d_m), 0.1 / np.sqrt(d_f))
        p["enc_b"] = T.Tensor(np.zeros(d_m), requires_grad=True)

        if cfg.gpr_init == "ppr":
            gamma0 = filters.gpr_weights_ppr(cfg.alpha, depth).gamma
        elif cfg.gpr_init == "highpass":
            gamma0 = filters.gpr_weights_highpass(cfg.alpha, depth).gamma
        else:
            raise TrainError(f"unknown gpr_init {cfg.gpr_init!r}")
        # One independent weight vector per bank entry, identical at init.
        p["gamma"] = T.Tensor(
            np.tile(gamma0, (depth + 1, 1)), requires_grad=cfg.trainable_gamma
        )
        p["eps_logits"] = T.Tensor(np.zeros(depth + 1), requires_grad=True)

        for qi, comp in enumerate(signature):
            p[f"pool_w{qi}"] = param((comp.dim, cfg.d_pool), 1.0 / np.sqrt(comp.dim))
            if comp.trainable and comp.kind != "E" and cfg.trainable_curvature:
                p[f"raw_kappa{qi}"] = T.Tensor(
                    inverse_softplus(abs(comp.curvature)), requires_grad=True
                )
        p["theta"] = param(cfg.d_pool, 1.0 / np.sqrt(cfg.d_pool))

        if d_c > 0:
            self.encoder = encoding.make_encoder(d_c, signature, seed=cfg.seed + 1)
            for qi, dim in enumerate(self.encoder.enc_dims):
                p[f"proj{qi}"] = param((2 * d_c, dim), 1.0 / np.sqrt(2 * d_c))
        else:
            self.encoder = None

        feat_dim = d_m + d_c
        if cfg.task == "nc":
            p["head_w"] = param((feat_dim, n_classes), 1.0 / np.sqrt(feat_dim))
            p["head_b"] = T.Tensor(np.zeros(n_classes), requires_grad=True)

    # -- parameter handling -------------------------------------------

    def curvatures(self) -> list:
        out = []
        for qi, comp in enumerate(self.signature):
            key = f"raw_kappa{qi}"
            if key in self.params:
                out.append(clamp_trainable_curvature(self.params[key], comp.kind))
            else:
                out.append(comp.curvature)
        return out

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]):
        for k, v in self.params.items():
            v.data = np.asarray(state[k], dtype=float).copy()

    def weight_param_names(self) -> list[str]:
        # Filter coefficients and curvatures are excluded from weight decay.
        skip = ("gamma", "eps_logits")
        return [
            k for k in self.params if k not in skip and not k.startswith("raw_kappa")
        ]

    # -- forward -------------------------------------------------------

    def forward(self, prep: PreparedGraph, features: np.ndarray, train_mode=False, dropout_rng=None):
        cfg = self.cfg
        p = self.params
        curvatures = self.curvatures()

        hidden = T.tanh(T.matmul(features, p["enc_w"]) + p["enc_b"])
        if train_mode and cfg.dropout > 0:
            if dropout_rng is None:
                raise TrainError("dropout requires a generator in train mode")
            keep = (dropout_rng.random(T.data_of(hidden).shape) >= cfg.dropout) / (
                1.0 - cfg.dropout
            )
            hidden = hidden * keep
        h0 = split_blocks(hidden, self.signature, curvatures).map_blocks(
            lambda b, k: stereo.expmap0(b, k)
        )

        gamma_rows = [p["gamma"][l] for l in range(cfg.depth + 1)]
        bank = filters.build_filter_bank(prep.a_n, h0, gamma_rows, cfg.depth)

        if self.encoder is not None:
            enc = replace(
                self.encoder,
                projectors=[p[f"proj{qi}"] for qi in range(len(self.signature))],
            )
            enc_rows = encoding.encode_all(enc, prep.node_curvature, curvatures)
        else:
            enc_rows = None

        pooled_entries, betas = [], []
        for entry in bank.entries:
            beta, pooled = self.pool(entry)
            betas.append(beta)
            if enc_rows is not None:
                pooled = attach_positional_encoding(pooled, enc_rows)
            pooled_entries.append(pooled)

        epsilon = T.softmax(p["eps_logits"], axis=-1)
        layout = pooled_entries[0].signature
        curv_all = pooled_entries[0].curvatures
        mixed_tangents = []
        for ci in range(len(layout)):
            kappa = curv_all[ci]
            acc = None
            for l, entry in enumerate(pooled_entries):
                tangent = stereo.logmap0(entry.blocks[ci], kappa)
                term = epsilon[l] * tangent
                acc = term if acc is None else acc + term
            mixed_tangents.append(acc)
        zeta_tangent = T.concat(mixed_tangents, axis=-1)
        zeta = ProductMatrix(
            layout,
            [stereo.expmap0(v, k) for v, k in zip(mixed_tangents, curv_all)],
            list(curv_all),
        )

        out = {
            "zeta": zeta,
            "zeta_tangent": zeta_tangent,
            "beta": betas,
            "epsilon": epsilon,
            "curvatures": curvatures,
        }
        if cfg.task == "nc":
            out["logits"] = T.matmul(zeta_tangent, p["head_w"]) + p["head_b"]
        return out

    def pool(self, entry: ProductMatrix):
        """Component attention: tangent centroid deviation -> softmax weights.

        tau_q averages sigma(theta . (log_0(W_q (x) Z_q) - mu)) over nodes,
        giving one graph-level weight per component; pooled rows are the
        beta_q-geodesic-scaled blocks, concatenated.
        """
        p = self.params
        q = len(entry.signature)
        tangents = []
        for qi, kappa in enumerate(entry.curvatures):
            y = stereo.right_matmul(entry.blocks[qi], p[f"pool_w{qi}"], kappa)
            tangents.append(stereo.logmap0(y, kappa))
        if self.cfg.freeze_pooling or q == 1:
            beta = [1.0 / q] * q
        else:
            mu = tangents[0]
            for t_q in tangents[1:]:
                mu = mu + t_q
            mu = mu / q
            taus = [
                T.sigmoid(T.matmul(t_q - mu, p["theta"].reshape(-1, 1))).mean().reshape(1)
                for t_q in tangents
            ]
            beta_vec = T.softmax(T.concat(taus, axis=0), axis=-1)
            beta = [beta_vec[qi] for qi in range(q)]
        pooled_blocks = [
            stereo.scale(beta[qi], entry.blocks[qi], entry.curvatures[qi])
            for qi in range(q)
        ]
        pooled = ProductMatrix(entry.signature, pooled_blocks, list(entry.curvatures))
        return beta, pooled

    # -- losses ---------------------------------------------------------

    def loss_nc(self, outputs, labels: np.ndarray, mask: np.ndarray):
        if not np.any(mask):
            raise TrainError("empty training mask")
        logits = outputs["logits"][np.flatnonzero(mask)]
        y = labels[mask]
        onehot = np.zeros((y.size, self.n_classes))
        onehot[np.arange(y.size), y] = 1.0
        lse = T.logsumexp(logits, axis=-1)
        picked = T.sum_(logits * onehot, axis=-1)
        return (lse - picked).mean() + self._decay()

    def loss_lp(self, outputs, pos_edges: np.ndarray, neg_edges: np.ndarray):
        if pos_edges.size == 0 or neg_edges.size == 0:
            raise TrainError("link prediction needs positive and negative pairs")
        pos = self.edge_scores(outputs, pos_edges, log_domain=True)
        neg = self.edge_scores(outputs, neg_edges, log_domain=True, complement=True)
        return -(pos.mean() + neg.mean()) * 0.5 + self._decay()

    def _decay(self):
        wd = self.cfg.weight_decay
        if wd == 0:
            return 0.0
        acc = None
        for name in self.weight_param_names():
            s = T.sum_(self.params[name] * self.params[name])
            acc = s if acc is None else acc + s
        return 0.5 * wd * acc

    def edge_scores(self, outputs, pairs: np.ndarray, log_domain=False, complement=False):
        """Fermi-Dirac link scores 1 / (1 + exp((d^2 - r) / t)).

        In log domain returns log(score) (or log(1 - score)), which is a
        stable softplus expression.
        """
        zeta = outputs["zeta"]
        cfg = self.cfg
        u_idx, v_idx = pairs[:, 0], pairs[:, 1]
        total = None
        for block, kappa in zip(zeta.blocks, zeta.curvatures):
            d = stereo.dist(block[u_idx], block[v_idx], kappa)
            total = d * d if total is None else total + d * d
        arg = (total - cfg.lp_radius) / cfg.lp_temperature
        if log_domain:
            # log sigmoid(-arg) = -softplus(arg); complement flips the sign.
            return -T.softplus(arg if not complement else -1.0 * arg)
        return T.sigmoid(-1.0 * arg)


def attach_positional_encoding(pooled: ProductMatrix, enc_rows: ProductMatrix) -> ProductMatrix:
    """Append curvature-encoding blocks to pooled embeddings row-wise."""
    if pooled.n != enc_rows.n:
        raise TrainError("row counts must match to attach the encoding")
    return ProductMatrix(
        pooled.signature.concat(enc_rows.signature),
        list(pooled.blocks) + list(enc_rows.blocks),
        list(pooled.curvatures) + list(enc_rows.curvatures),
    )


class Adam:
    """First/second-moment adaptive gradient descent."""

    def __init__(self, params: dict[str, T.Tensor], lr: float, betas=(0.9, 0.999), eps=1e-8):
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v.data) for k, v in params.items()}
        self.v = {k: np.zeros_like(v.data) for k, v in params.items()}

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def step(self):
        self.t += 1
        for k, p in self.params.items():
            if p.grad is None or not p.requires_grad:
                continue
            g = p.grad
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            mhat = self.m[k] / (1 - self.b1**self.t)
            vhat = self.v[k] / (1 - self.b2**self.t)
            p.data = p.data - self.lr * mhat / (np.sqrt(vhat) + self.eps)


# -- splits -----------------------------------------------------------


def node_splits(g: Graph, cfg: TrainConfig, rng: np.random.Generator):
    """Random train/val/test node masks; reseeds until every class trains.

    Raises after 10 attempts if some class never lands in the training set.
    """
    if g.labels is None:
        raise TrainError("node classification requires labels")
    n = g.n
    n_train = int(round(cfg.split[0] * n))
    n_val = int(round(cfg.split[1] * n))
    classes = np.unique(g.labels)
    for _ in range(10):
        perm = rng.permutation(n)
        train = np.zeros(n, dtype=bool)
        val = np.zeros(n, dtype=bool)
        test = np.zeros(n, dtype=bool)
        train[perm[:n_train]] = True
        val[perm[n_train : n_train + n_val]] = True
        test[perm[n_train + n_val :]] = True
        if np.all(np.isin(classes, g.labels[train])):
            return train, val, test
    raise TrainError("could not draw a training split covering every class")


def edge_splits(g: Graph, cfg: TrainConfig, rng: np.random.Generator):
    """85/5/10-style edge split plus matched uniform negative samples.

    The training graph keeps only training edges (no message-passing
    leakage); splits are redrawn if edge removal isolates a node.
    """
    m = g.m
    edges = np.array([(u, v) for u, v, _ in g.edges], dtype=int)
    n_train = int(round(cfg.split[0] * m))
    n_val = int(round(cfg.split[1] * m))
    if min(n_train, n_val, m - n_train - n_val) < 1:
        raise TrainError("graph too small for the requested edge split")
    for _ in range(10):
        perm = rng.permutation(m)
        train_idx = perm[:n_train]
        deg = np.zeros(g.n, dtype=int)
        np.add.at(deg, edges[train_idx].ravel(), 1)
        if np.all(deg > 0):
            break
    else:
        raise TrainError("edge split isolates a node; graph too sparse")
    val_idx = perm[n_train : n_train + n_val]
    test_idx = perm[n_train + n_val :]
    existing = set((u, v) for u, v, _ in g.edges)

    def negatives(k):
        out = []
        while len(out) < k:
            u, v = int(rng.integers(g.n)), int(rng.integers(g.n))
            if u == v:
                continue
            a, b = (u, v) if u < v else (v, u)
            if (a, b) in existing:
                continue
            out.append((a, b))
        return np.array(out, dtype=int)

    train_graph = Graph(
        g.n,
        tuple(tuple(g.edges[i]) for i in sorted(train_idx)),
        features=g.features,
        labels=g.labels,
    )
    return {
        "graph": train_graph,
        "train_pos": edges[train_idx],
        "val_pos": edges[val_idx],
        "test_pos": edges[test_idx],
        "train_neg": negatives(len(train_idx)),
        "val_neg": negatives(len(val_idx)),
        "test_neg": negatives(len(test_idx)),
    }


# -- metrics ----------------------------------------------------------


def micro_f1(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """Micro-averaged F1; equals accuracy for single-label prediction."""
    tp = np.sum(y_true == y_pred)
    return float(tp / len(y_true))


def auc_score(pos_scores: np.ndarray, neg_scores: np.ndarray) -> float:
    """Rank-statistic AUC (Mann-Whitney with tie correction)."""
    from scipy.stats import rankdata

    scores = np.concatenate([pos_scores, neg_scores])
    ranks = rankdata(scores)
    n_pos, n_neg = len(pos_scores), len(neg_scores)
    r_pos = ranks[:n_pos].sum()
    return float((r_pos - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


# -- training ---------------------------------------------------------


@dataclass
class TrainResult:
    state: dict[str, np.ndarray]
    history: list
    best_val: float
    test_metric: float
    signature: Signature
    report: dict


def default_signature(cfg: TrainConfig) -> Signature:
    """Balanced three-component signature at the configured total dim."""
    from .manifolds import Component

    d = cfg.d_m
    d_h = d // 3
    d_s = d // 3
    d_e = d - d_h - d_s
    return Signature(
        (
            Component("H", d_h, -1.0, trainable=True),
            Component("S", d_s, 1.0, trainable=True),
            Component("E", d_e, 0.0),
        )
    )


def train(g: Graph, cfg: TrainConfig, signature: Signature | None = None):
    """Fit the model; returns the best-validation checkpoint and history."""
    rng = np.random.default_rng(cfg.seed)
    signature = signature or default_signature(cfg)
    if cfg.task == "nc":
        return _train_nc(g, cfg, signature, rng)
    return _train_lp(g, cfg, signature, rng)


def _train_nc(g: Graph, cfg: TrainConfig, signature: Signature, rng):
    if g.features is None:
        raise TrainError("node classification requires features")
    train_mask, val_mask, test_mask = node_splits(g, cfg, rng)
    prep = PreparedGraph.build(g, cfg)
    n_classes = int(g.labels.max()) + 1
    model = MixedCurvatureModel(signature, g.features.shape[1], n_classes, cfg)
    opt = Adam(model.params, cfg.lr)
    dropout_rng = np.random.default_rng(cfg.seed + 17)

    def val_metric():
        out = model.forward(prep, g.features, train_mode=False)
        pred = T.data_of(out["logits"]).argmax(axis=1)
        return micro_f1(g.labels[val_mask], pred[val_mask])

    history = []
    best_val, best_state = -np.inf, model.state_dict()
    for epoch in range(cfg.epochs):
        opt.zero_grad()
        out = model.forward(prep, g.features, train_mode=True, dropout_rng=dropout_rng)
        loss = model.loss_nc(out, g.labels, train_mask)
        loss.backward()
        opt.step()
        metric = val_metric()
        history.append((epoch, float(loss.item()), metric))
        if metric > best_val:
            best_val, best_state = metric, model.state_dict()

    model.load_state_dict(best_state)
    out = model.forward(prep, g.features, train_mode=False)
    pred = T.data_of(out["logits"]).argmax(axis=1)
    test = micro_f1(g.labels[test_mask], pred[test_mask])
    report = _report(model, out)
    return TrainResult(best_state, history, best_val, test, signature, report), {
        "masks": (train_mask, val_mask, test_mask),
        "prep": prep,
        "model": model,
    }


def _train_lp(g: Graph, cfg: TrainConfig, signature: Signature, rng):
    if g.features is None:
        raise TrainError("link prediction requires features")
    split = edge_splits(g, cfg, rng)
    gt = split["graph"]
    prep = PreparedGraph.build(gt, cfg)
    model = MixedCurvatureModel(signature, g.features.shape[1], 0, cfg)
    opt = Adam(model.params, cfg.lr)
    dropout_rng = np.random.default_rng(cfg.seed + 17)

    def metric_on(pos, neg):
        out = model.forward(prep, g.features, train_mode=False)
        pos_s = T.data_of(model.edge_scores(out, pos))
        neg_s = T.data_of(model.edge_scores(out, neg))
        return auc_score(pos_s, neg_s)

    history = []
    best_val, best_state = -np.inf, model.state_dict()
    for epoch in range(cfg.epochs):
        opt.zero_grad()
        out = model.forward(prep, g.features, train_mode=True, dropout_rng=dropout_rng)
        loss = model.loss_lp(out, split["train_pos"], split["train_neg"])
        loss.backward()
        opt.step()
        metric = metric_on(split["val_pos"], split["val_neg"])
        history.append((epoch, float(loss.item()), metric))
        if metric > best_val:
            best_val, best_state = metric, model.state_dict()

    model.load_state_dict(best_state)
    test = metric_on(split["test_pos"], split["test_neg"])
    out = model.forward(prep, g.features, train_mode=False)
    report = _report(model, out)
    return TrainResult(best_state, history, best_val, test, signature, report), {
        "split": split,
        "prep": prep,
        "model": model,
    }


def _report(model: MixedCurvatureModel, out) -> dict:
    eps = T.data_of(out["epsilon"])
    betas = np.array(
        [[float(T.data_of(b)) for b in entry] for entry in out["beta"]]
    )
    return {
        "epsilon": eps,
        "beta_per_entry": betas,
        "beta_mean": (eps[:, None] * betas).sum(axis=0),
        "curvatures": [float(T.data_of(k)) for k in out["curvatures"]],
        "gamma": T.data_of(model.params["gamma"]).copy(),
    }


def evaluate(g: Graph, result: TrainResult, cfg: TrainConfig, split: str = "val") -> float:
    """Recompute a stored checkpoint's metric on the chosen split."""
    rng = np.random.default_rng(cfg.seed)
    if cfg.task == "nc":
        train_mask, val_mask, test_mask = node_splits(g, cfg, rng)
        mask = {"train": train_mask, "val": val_mask, "test": test_mask}[split]
        prep = PreparedGraph.build(g, cfg)
        n_classes = int(g.labels.max()) + 1
        model = MixedCurvatureModel(result.signature, g.features.shape[1], n_classes, cfg)
        model.load_state_dict(result.state)
        out = model.forward(prep, g.features, train_mode=False)
        pred = T.data_of(out["logits"]).argmax(axis=1)
        return micro_f1(g.labels[mask], pred[mask])
    partition = edge_splits(g, cfg, rng)
    prep = PreparedGraph.build(partition["graph"], cfg)
    model = MixedCurvatureModel(result.signature, g.features.shape[1], 0, cfg)
    model.load_state_dict(result.state)
    out = model.forward(prep, g.features, train_mode=False)
    pos = T.data_of(model.edge_scores(out, partition[f"{split}_pos"]))
    neg = T.data_of(model.edge_scores(out, partition[f"{split}_neg"]))
    return auc_score(pos, neg)


def gradient_check(
    g: Graph,
    cfg: TrainConfig,
    signature: Signature | None = None,
    n_probes: int = 20,
    h: float = 1e-5,
    seed: int = 0,
) -> dict:
    """Compare tape gradients against central differences on random scalars.

    Dropout is disabled (the loss must be deterministic); probes whose
    perturbation straddles a curvature-clamp or projection boundary are
    excluded and reported.  Returns the max relative error
    |analytic - central| / max(1e-8, |central|) over retained probes.
    """
    rng = np.random.default_rng(seed)
    cfg = replace(cfg, dropout=0.0)
    signature = signature or default_signature(cfg)
    prep = PreparedGraph.build(g, cfg)
    n_classes = int(g.labels.max()) + 1 if g.labels is not None else 2
    model = MixedCurvatureModel(signature, g.features.shape[1], n_classes, cfg)

    if cfg.task == "nc":
        mask = np.ones(g.n, dtype=bool)
        compute = lambda out: model.loss_nc(out, g.labels, mask)
    else:
        pos = np.array([(u, v) for u, v, _ in g.edges], dtype=int)
        neg_rng = np.random.default_rng(seed + 1)
        neg = []
        while len(neg) < len(pos):
            u, v = int(neg_rng.integers(g.n)), int(neg_rng.integers(g.n))
            if u != v and not g.has_edge(u, v):
                neg.append((u, v))
        neg = np.array(neg, dtype=int)
        compute = lambda out: model.loss_lp(out, pos, neg)

    def loss_value():
        return compute(model.forward(prep, g.features, train_mode=False))

    loss = loss_value()
    for p in model.params.values():
        p.grad = None
    loss.backward()
    analytic = {k: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data)) for k, p in model.params.items()}

    trainables = [k for k, p in model.params.items() if p.requires_grad]
    errors, probes, excluded = [], [], []
    for _ in range(n_probes):
        name = trainables[int(rng.integers(len(trainables)))]
        param = model.params[name]
        flat_idx = int(rng.integers(param.data.size))
        idx = np.unravel_index(flat_idx, param.data.shape)
        original = param.data[idx]
        if name.startswith("raw_kappa") and abs(original) < 2 * h:
            excluded.append((name, idx, "curvature clamp boundary"))
            continue
        param.data[idx] = original + h
        f_plus = float(loss_value().item())
        param.data[idx] = original - h
        f_minus = float(loss_value().item())
        param.data[idx] = original
        central = (f_plus - f_minus) / (2 * h)
        err = abs(float(analytic[name][idx]) - central) / max(1e-8, abs(central))
        errors.append(err)
        probes.append((name, idx, float(analytic[name][idx]), central, err))
    return {
        "max_rel_error": max(errors) if errors else 0.0,
        "probes": probes,
        "excluded": excluded,
    }
