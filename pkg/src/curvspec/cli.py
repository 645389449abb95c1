"""Command-line interface binding the library into reproducible analyses.

Configuration is a flat ``key = value`` text file with namespaced keys
(``orc.delta``, ``model.d_m``, ``train.lr``, ...).  Unknown keys are
rejected; every key has a documented default (run ``curvspec defaults``).
Exit codes: 0 success, 2 bad input, 3 numerical failure.  The worker
count for curvature computation honors the ``CURVSPEC_WORKERS``
environment variable unless set in the config.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import encoding, filters, graphs, laplacian, manifolds, model, orc


DEFAULTS: dict[str, str] = {
    # curvature
    "orc.delta": "0.5",
    "orc.method": "sinkhorn",
    "orc.normalize": "true",
    "orc.sinkhorn_eps": "auto",
    "orc.sinkhorn_max_iters": "1000",
    "orc.sinkhorn_tol": "1e-9",
    "orc.workers": "env",
    # histograms
    "hist.bins": "40",
    # signature estimation
    "signature.spec": "",
    "signature.eps": "0.05",
    "signature.h_max": "2",
    "signature.s_max": "2",
    "signature.d_m": "48",
    "signature.preferred_dims": "",
    "signature.seed": "0",
    # spectral energy
    "energy.signal": "labels",
    "energy.class": "0",
    # filters
    "filter.init": "ppr",
    "filter.alpha": "0.3",
    "filter.depth": "10",
    # model dims
    "model.d_m": "48",
    "model.d_c": "16",
    "model.d_pool": "16",
    # training
    "train.task": "nc",
    "train.lr": "4e-3",
    "train.epochs": "100",
    "train.weight_decay": "5e-4",
    "train.dropout": "0.3",
    "train.seed": "0",
    "train.split": "",
    "train.trainable_gamma": "true",
    "train.trainable_curvature": "true",
    "train.freeze_pooling": "false",
    "train.lp_radius": "2.0",
    "train.lp_temperature": "1.0",
}


class ConfigError(ValueError):
    pass


def parse_config(path: str | None) -> dict[str, str]:
    cfg = dict(DEFAULTS)
    if path is None:
        return cfg
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in text.split("=", 1))
            if key not in DEFAULTS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            cfg[key] = value
    return cfg


def _bool(cfg, key) -> bool:
    value = cfg[key].lower()
    if value in ("true", "1", "yes"):
        return True
    if value in ("false", "0", "no"):
        return False
    raise ConfigError(f"{key} must be a boolean, got {cfg[key]!r}")


def _workers(cfg) -> int:
    raw = cfg["orc.workers"]
    if raw == "env":
        raw = os.environ.get("CURVSPEC_WORKERS", "1")
    return max(1, int(raw))


def orc_config(cfg) -> orc.OrcConfig:
    eps = cfg["orc.sinkhorn_eps"]
    return orc.OrcConfig(
        delta=float(cfg["orc.delta"]),
        method=cfg["orc.method"],
        sinkhorn_eps=None if eps == "auto" else float(eps),
        sinkhorn_max_iters=int(cfg["orc.sinkhorn_max_iters"]),
        sinkhorn_tol=float(cfg["orc.sinkhorn_tol"]),
        normalize=_bool(cfg, "orc.normalize"),
    )


def train_config(cfg) -> model.TrainConfig:
    split = cfg["train.split"]
    return model.TrainConfig(
        task=cfg["train.task"],
        lr=float(cfg["train.lr"]),
        epochs=int(cfg["train.epochs"]),
        weight_decay=float(cfg["train.weight_decay"]),
        dropout=float(cfg["train.dropout"]),
        seed=int(cfg["train.seed"]),
        alpha=float(cfg["filter.alpha"]),
        depth=int(cfg["filter.depth"]),
        d_m=int(cfg["model.d_m"]),
        d_c=int(cfg["model.d_c"]),
        d_pool=int(cfg["model.d_pool"]),
        split=tuple(float(x) for x in split.split(",")) if split else None,
        gpr_init=cfg["filter.init"],
        trainable_gamma=_bool(cfg, "train.trainable_gamma"),
        trainable_curvature=_bool(cfg, "train.trainable_curvature"),
        freeze_pooling=_bool(cfg, "train.freeze_pooling"),
        orc=orc_config(cfg),
        orc_workers=_workers(cfg),
        lp_radius=float(cfg["train.lp_radius"]),
        lp_temperature=float(cfg["train.lp_temperature"]),
    )


def load_graph(args) -> graphs.Graph:
    g = graphs.load_edge_list(args.graph)
    feats = labels = None
    if getattr(args, "features", None):
        feats = graphs.load_features_csv(args.features)
    if getattr(args, "labels", None):
        labels = graphs.load_labels_csv(args.labels)
    if feats is not None or labels is not None:
        g = graphs.Graph(g.n, g.edges, features=feats, labels=labels)
    return g


def write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def _histogram(values, bins):
    counts, edges = np.histogram(values, bins=bins, range=(-1.0, 1.0))
    centers = 0.5 * (edges[:-1] + edges[1:])
    return centers, counts


# -- commands ----------------------------------------------------------


def cmd_curvature(args) -> int:
    cfg = parse_config(args.config)
    g = load_graph(args)
    result = orc.compute_all(g, orc_config(cfg), workers=_workers(cfg))
    edges = sorted(result.edge_orc.items())
    write_csv(
        f"{args.out}_edges.csv",
        ["u", "v", "orc"],
        [(u, v, val) for (u, v), val in edges],
    )
    write_csv(
        f"{args.out}_nodes.csv",
        ["node", "orc"],
        sorted(result.node_orc.items()),
    )
    centers, counts = _histogram(
        np.clip([val for _, val in edges], -1.0, 1.0), int(cfg["hist.bins"])
    )
    write_csv(
        f"{args.out}_hist.csv",
        ["bin_center", "count"],
        zip(centers, counts),
    )
    print(f"curvature: {len(edges)} edges -> {args.out}_edges.csv")
    return 0


def cmd_laplacian(args) -> int:
    cfg = parse_config(args.config)
    g = load_graph(args)
    result = orc.compute_all(g, orc_config(cfg), workers=_workers(cfg))
    cl = laplacian.build(g, result)
    report = laplacian.verify_spectrum(cl)
    write_csv(
        f"{args.out}_spectrum.csv",
        ["index", "eigenvalue"],
        enumerate(report.eigenvalues),
    )
    status = "PASS" if report.ok else "FAIL"
    print(
        f"{status} psd={report.psd} in_range={report.in_range} "
        f"min_eig={report.min_eig:.3e} max_eig={report.max_eig:.9f} "
        f"kernel_residual={report.kernel_vector_residual:.3e}"
    )
    return 0 if report.ok else 3


def cmd_signature(args) -> int:
    cfg = parse_config(args.config)
    if args.hist:
        data = np.loadtxt(args.hist, delimiter=",", skiprows=1, ndmin=2)
        hist = [(row[0], row[1]) for row in data]
    else:
        g = load_graph(args)
        result = orc.compute_all(g, orc_config(cfg), workers=_workers(cfg))
        centers, counts = _histogram(
            np.clip(list(result.edge_orc.values()), -1.0, 1.0),
            int(cfg["hist.bins"]),
        )
        hist = list(zip(centers, counts))
    preferred = cfg["signature.preferred_dims"]
    sig = manifolds.estimate_signature(
        hist,
        eps=float(cfg["signature.eps"]),
        h_max=int(cfg["signature.h_max"]),
        s_max=int(cfg["signature.s_max"]),
        d_total=int(cfg["signature.d_m"]),
        preferred_dims=(
            [int(x) for x in preferred.split(",")] if preferred else None
        ),
        seed=int(cfg["signature.seed"]),
    )
    print(sig.serialize())
    return 0


def cmd_spectral_energy(args) -> int:
    cfg = parse_config(args.config)
    g = load_graph(args)
    a_n = graphs.normalized_adjacency(g)
    l_n = np.eye(g.n) - a_n
    spec = graphs.spectrum(l_n)
    source = cfg["energy.signal"]
    if args.signal:
        source = args.signal
    if source == "labels":
        if g.labels is None:
            raise ConfigError("energy.signal=labels requires node labels")
        indicator = (g.labels == int(cfg["energy.class"])).astype(float)
        signal = indicator - indicator.mean()
    elif source.startswith("eigenvector:"):
        signal = spec.eigenvectors[:, int(source.split(":", 1)[1])]
    elif source.startswith("file:"):
        signal = np.loadtxt(source.split(":", 1)[1], delimiter=",").reshape(-1)
    else:
        raise ConfigError(f"unknown signal source {source!r}")
    energies = graphs.spectral_energy(spec, signal)
    write_csv(
        f"{args.out}_energy.csv",
        ["eigenvalue", "energy"],
        zip(spec.eigenvalues, energies),
    )
    print(f"spectral energy -> {args.out}_energy.csv (sum={energies.sum():.9f})")
    return 0


def cmd_filter_response(args) -> int:
    cfg = parse_config(args.config)
    depth = int(cfg["filter.depth"])
    alpha = float(cfg["filter.alpha"])
    if cfg["filter.init"] == "ppr":
        weights = filters.gpr_weights_ppr(alpha, depth)
    elif cfg["filter.init"] == "highpass":
        weights = filters.gpr_weights_highpass(alpha, depth)
    else:
        raise ConfigError(f"unknown filter.init {cfg['filter.init']!r}")
    grid = np.linspace(-1.0, 1.0, 201)
    gamma = weights.gamma
    columns = [np.full_like(grid, float(gamma.sum()))]  # identity entry
    for l in range(1, depth + 1):
        columns.append(filters.filter_response(gamma[: l + 1], grid))
    header = ["lambda", "g_identity"] + [f"g_{l}" for l in range(1, depth + 1)]
    write_csv(
        f"{args.out}_response.csv",
        header,
        ((lam, *[c[i] for c in columns]) for i, lam in enumerate(grid)),
    )
    print(f"filter response ({len(grid)} rows) -> {args.out}_response.csv")
    return 0


def _signature_from_config(cfg, tcfg) -> manifolds.Signature:
    spec_text = cfg["signature.spec"]
    if spec_text:
        sig = manifolds.Signature.parse(spec_text)
        if tcfg.trainable_curvature:
            sig = manifolds.Signature(
                tuple(
                    manifolds.Component(c.kind, c.dim, c.curvature, c.kind != "E")
                    for c in sig
                )
            )
        return sig
    return model.default_signature(tcfg)


def cmd_train(args) -> int:
    cfg = parse_config(args.config)
    g = load_graph(args)
    tcfg = train_config(cfg)
    sig = _signature_from_config(cfg, tcfg)
    result, _ = model.train(g, tcfg, sig)
    write_csv(
        f"{args.out}_history.csv",
        ["epoch", "train_loss", "val_metric"],
        result.history,
    )
    metric_name = "f1" if tcfg.task == "nc" else "auc"
    report_lines = [
        f"task = {tcfg.task}",
        f"val_{metric_name} = {result.best_val:.12g}",
        f"test_{metric_name} = {result.test_metric:.12g}",
        f"signature = {result.signature.serialize()}",
        "curvatures = " + ",".join(f"{k:.6g}" for k in result.report["curvatures"]),
        "beta = " + ",".join(f"{b:.6g}" for b in result.report["beta_mean"]),
        "epsilon = " + ",".join(f"{e:.6g}" for e in result.report["epsilon"]),
    ]
    for l, row in enumerate(result.report["gamma"]):
        report_lines.append(f"gamma_{l} = " + ",".join(f"{x:.6g}" for x in row))
    with open(f"{args.out}_report.txt", "w", encoding="utf-8") as fh:
        fh.write("\n".join(report_lines) + "\n")
    np.savez(
        f"{args.out}_checkpoint.npz",
        __signature__=result.signature.serialize(),
        __config__=json.dumps({k: v for k, v in cfg.items()}),
        __best_val__=result.best_val,
        **result.state,
    )
    print("\n".join(report_lines))
    return 0


def cmd_eval(args) -> int:
    data = np.load(args.checkpoint, allow_pickle=False)
    cfg = dict(DEFAULTS)
    cfg.update(json.loads(str(data["__config__"])))
    g = load_graph(args)
    tcfg = train_config(cfg)
    sig = manifolds.Signature.parse(str(data["__signature__"]))
    if tcfg.trainable_curvature:
        sig = manifolds.Signature(
            tuple(
                manifolds.Component(c.kind, c.dim, c.curvature, c.kind != "E")
                for c in sig
            )
        )
    state = {k: data[k] for k in data.files if not k.startswith("__")}
    result = model.TrainResult(
        state=state,
        history=[],
        best_val=float(data["__best_val__"]),
        test_metric=float("nan"),
        signature=sig,
        report={},
    )
    metric = model.evaluate(g, result, tcfg, split=args.split)
    name = "f1" if tcfg.task == "nc" else "auc"
    print(f"{args.split}_{name} = {metric:.12g}")
    if args.split == "val":
        stored = float(data["__best_val__"])
        if abs(metric - stored) > 1e-9:
            print(f"warning: stored val metric {stored:.12g} differs")
            return 3
    return 0


def cmd_defaults(_args) -> int:
    for key in sorted(DEFAULTS):
        print(f"{key} = {DEFAULTS[key]}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="curvspec",
        description="Curvature-aware spectral graph analysis and training",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(fn=fn)
        p.add_argument("--config", default=None, help="flat key=value config file")
        return p

    p = add("curvature", cmd_curvature, help="edge/node curvature + histogram CSVs")
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True, help="output path prefix")

    p = add("laplacian", cmd_laplacian, help="weighted-Laplacian spectrum + theorem check")
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True)

    p = add("signature", cmd_signature, help="estimate a product-manifold signature")
    p.add_argument("--graph")
    p.add_argument("--hist", help="histogram CSV (curvature,frequency) instead of a graph")
    p.add_argument("--out", default=None)

    p = add("spectral-energy", cmd_spectral_energy, help="signal energy per eigenvalue")
    p.add_argument("--graph", required=True)
    p.add_argument("--labels")
    p.add_argument("--signal", help="labels | eigenvector:i | file:path")
    p.add_argument("--out", required=True)

    p = add("filter-response", cmd_filter_response, help="filter bank response grid")
    p.add_argument("--out", required=True)

    p = add("train", cmd_train, help="fit the model; emits history, report, checkpoint")
    p.add_argument("--graph", required=True)
    p.add_argument("--features")
    p.add_argument("--labels")
    p.add_argument("--out", required=True)

    p = add("eval", cmd_eval, help="re-evaluate a checkpoint")
    p.add_argument("--graph", required=True)
    p.add_argument("--features")
    p.add_argument("--labels")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="val", choices=["train", "val", "test"])

    p = sub.add_parser("defaults", help="print all config keys and defaults")
    p.set_defaults(fn=cmd_defaults)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
