"""Experiment runner CLI.

Subcommands: gen-synthetic, train, eval, run, report.  Configuration is an
INI file with sections [dataset], [episodes], [model], [train], [eval],
[experiment]; --seed overrides the file's seed.
"""

from __future__ import annotations

import argparse
import configparser
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from . import data as data_mod
from .embed import init_network, load_network, save_network
from .episodes import EpisodeConfig
from .errors import (
    BadMagic,
    ClassIndexOutOfRange,
    ClassTooSmall,
    ConfigParseError,
    DatasetError,
    DimensionMismatch,
    EmptyDataset,
    InsufficientClasses,
    InsufficientSamples,
    InvalidArchitecture,
    IoError,
    MalformedPGM,
    NonFiniteInput,
    ProtoshotError,
    ShapeMismatch,
    TruncatedFile,
    UnsupportedVersion,
)
from .evaluate import (
    MODE_WITH,
    MODE_WITHOUT,
    config_digest,
    evaluate,
    format_table,
    parse_report_csv,
    report_to_csv,
    confusions_to_csv,
    summarize,
)
from .rng import Rng, derive_seed
from .train import TrainConfig, meta_train, save_history_csv


@dataclass
class SyntheticSpec:
    classes: int = 3
    per_class: int = 200
    dim: int = 8
    separation: float = 3.0
    sigma: float = 1.0
    nuisance_dims: int = 0
    nuisance_sigma: float = 1.0


@dataclass
class ExperimentConfig:
    source: str = ""
    label: str = "features"
    split_ratio: float = 0.8
    image_size: int = 28
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)
    n_way: int = 3
    shots: tuple = (1, 5, 10, 20)
    q_query: int = 10
    head: str = "linear"
    hidden_dims: tuple = (64,)
    output_dim: int = 64
    untrained_head: str = "identity"
    train: TrainConfig = field(default_factory=TrainConfig)
    eval_episodes: int = 1000
    modes: tuple = (MODE_WITHOUT, MODE_WITH)
    seed: int = None
    config_text: str = ""

    @property
    def digest(self) -> str:
        return config_digest(self.config_text, self.seed)


def _get(parser, section, key, conv, default):
    if not parser.has_section(section) or not parser.has_option(section, key):
        return default
    raw = parser.get(section, key)
    try:
        return conv(raw)
    except (ValueError, TypeError) as exc:
        raise ConfigParseError(f"[{section}] {key} = {raw!r}: {exc}") from exc


def _int_list(raw):
    return tuple(int(v) for v in raw.replace(",", " ").split())


def parse_config(path, seed_override=None) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigParseError(f"config file not found: {path}")
    text = path.read_text()
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigParseError(f"cannot parse {path}: {exc}") from exc

    cfg = ExperimentConfig(config_text=text)
    cfg.source = _get(parser, "dataset", "source", str, "")
    if not cfg.source:
        raise ConfigParseError("[dataset] source is required")
    cfg.label = _get(parser, "dataset", "label", str, Path(cfg.source).stem or "features")
    cfg.split_ratio = _get(parser, "dataset", "split_ratio", float, 0.8)
    cfg.image_size = _get(parser, "dataset", "image_size", int, 28)
    cfg.synthetic = SyntheticSpec(
        classes=_get(parser, "dataset", "classes", int, 3),
        per_class=_get(parser, "dataset", "per_class", int, 200),
        dim=_get(parser, "dataset", "dim", int, 8),
        separation=_get(parser, "dataset", "separation", float, 3.0),
        sigma=_get(parser, "dataset", "sigma", float, 1.0),
        nuisance_dims=_get(parser, "dataset", "nuisance_dims", int, 0),
        nuisance_sigma=_get(parser, "dataset", "nuisance_sigma", float, 1.0),
    )
    cfg.n_way = _get(parser, "episodes", "n_way", int, 3)
    cfg.shots = _get(parser, "episodes", "shots", _int_list, (1, 5, 10, 20))
    cfg.q_query = _get(parser, "episodes", "q_query", int, 10)
    if not cfg.shots:
        raise ConfigParseError("[episodes] shots must list at least one value")
    cfg.head = _get(parser, "model", "head", str, "linear")
    cfg.hidden_dims = _get(parser, "model", "hidden_dims", _int_list, (64,))
    cfg.output_dim = _get(parser, "model", "output_dim", int, 64)
    cfg.untrained_head = _get(parser, "model", "untrained", str, "identity")
    if cfg.untrained_head not in ("identity", "fresh"):
        raise ConfigParseError("[model] untrained must be 'identity' or 'fresh'")
    cfg.train = TrainConfig(
        episodes_total=_get(parser, "train", "episodes", int, 1000),
        optimizer=_get(parser, "train", "optimizer", str, "adam"),
        learning_rate=_get(parser, "train", "learning_rate", float, 1e-3),
        beta1=_get(parser, "train", "beta1", float, 0.9),
        beta2=_get(parser, "train", "beta2", float, 0.999),
        eps=_get(parser, "train", "eps", float, 1e-8),
        val_every=_get(parser, "train", "val_every", int, 200),
        val_episodes=_get(parser, "train", "val_episodes", int, 50),
    )
    cfg.eval_episodes = _get(parser, "eval", "episodes", int, 1000)
    modes = _get(
        parser,
        "experiment",
        "modes",
        lambda raw: tuple(m for m in raw.replace(",", " ").split()),
        (MODE_WITHOUT, MODE_WITH),
    )
    if not modes:
        raise ConfigParseError("[experiment] modes must name at least one mode")
    for m in modes:
        if m not in (MODE_WITHOUT, MODE_WITH):
            raise ConfigParseError(f"[experiment] modes: unknown mode {m!r}")
    cfg.modes = modes
    cfg.seed = (
        seed_override
        if seed_override is not None
        else _get(parser, "experiment", "seed", int, None)
    )
    if cfg.seed is None:
        raise ConfigParseError(
            "seed is required ([experiment] seed or --seed); no wall-clock seeding"
        )
    return cfg


# ---------------------------------------------------------------------------
# dataset assembly


def build_synthetic(spec: SyntheticSpec, seed: int) -> data_mod.LabeledDataset:
    """Blob dataset with deterministic class means derived from the seed.

    Informative dims get unit-normalized random directions scaled by
    ``separation``; nuisance dims are zero-mean with their own sigma.
    """
    rng = Rng(derive_seed(seed, 0xDA7A))
    means = np.empty((spec.classes, spec.dim))
    for k in range(spec.classes):
        v = np.array([rng.normal() for _ in range(spec.dim)])
        norm = np.linalg.norm(v)
        means[k] = spec.separation * v / (norm if norm > 0 else 1.0)
    if spec.nuisance_dims:
        means = np.hstack([means, np.zeros((spec.classes, spec.nuisance_dims))])
    sigma = np.concatenate(
        [
            np.full(spec.dim, spec.sigma),
            np.full(spec.nuisance_dims, spec.nuisance_sigma),
        ]
    )
    return data_mod.generate_blobs(
        means, spec.per_class, sigma, derive_seed(seed, 0xB10B)
    )


def load_dataset(cfg: ExperimentConfig) -> data_mod.LabeledDataset:
    if cfg.source == "synthetic":
        return build_synthetic(cfg.synthetic, cfg.seed)
    path = Path(cfg.source)
    if path.is_dir():
        imgds = data_mod.load_image_dataset(path)
        feats = []
        for img in imgds.images:
            pre = data_mod.preprocess_image(img, cfg.image_size, cfg.image_size)
            feats.append(pre.pixels.reshape(-1))
        return data_mod.LabeledDataset(
            class_names=imgds.class_names,
            features=np.asarray(feats, dtype=np.float32),
            labels=np.asarray(imgds.labels, dtype=np.int64),
        )
    if not path.is_file():
        raise DatasetError(f"dataset source not found: {path}")
    return data_mod.load_embeddings(path)


def _make_head(cfg: ExperimentConfig, input_dim: int, seed: int):
    if cfg.head == "identity":
        return init_network("identity", (input_dim,), seed)
    if cfg.head == "linear":
        return init_network("linear", (input_dim, cfg.output_dim), seed)
    if cfg.head == "mlp":
        return init_network(
            "mlp", (input_dim, *cfg.hidden_dims, cfg.output_dim), seed
        )
    raise ConfigParseError(f"[model] head: unknown architecture {cfg.head!r}")


def _untrained_head(cfg: ExperimentConfig, input_dim: int, seed: int):
    if cfg.untrained_head == "identity":
        return init_network("identity", (input_dim,), seed)
    return _make_head(cfg, input_dim, seed)


# ---------------------------------------------------------------------------
# subcommands


def run_experiment(cfg: ExperimentConfig, out_dir, threads: int = 1) -> "EvalReport":
    """Full grid: (shot x mode) evaluations, reports, checkpoints, manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "checkpoints").mkdir(exist_ok=True)
    dataset = load_dataset(cfg)
    rows = []
    for shot_pos, k_shot in enumerate(cfg.shots):
        ep_cfg = EpisodeConfig(n_way=cfg.n_way, k_shot=k_shot, q_query=cfg.q_query)
        for mode in cfg.modes:
            eval_seed = derive_seed(cfg.seed, 1000 + 10 * shot_pos + (mode == MODE_WITH))
            if mode == MODE_WITH:
                train_ds, val_ds = data_mod.split_train_val(
                    dataset, cfg.split_ratio, derive_seed(cfg.seed, 0x5711)
                )
                net = _make_head(
                    cfg, dataset.feature_dim, derive_seed(cfg.seed, 2000 + shot_pos)
                )
                train_cfg = TrainConfig(
                    **{
                        **cfg.train.__dict__,
                        "seed": derive_seed(cfg.seed, 3000 + shot_pos),
                    }
                )
                net, history = meta_train(train_ds, val_ds, ep_cfg, train_cfg, net)
                save_history_csv(
                    history, out / f"history_{cfg.label}_{k_shot}shot.csv"
                )
                eval_ds = val_ds
            else:
                net = _untrained_head(
                    cfg, dataset.feature_dim, derive_seed(cfg.seed, 4000 + shot_pos)
                )
                eval_ds = dataset
            row, _ = evaluate(
                eval_ds,
                net,
                ep_cfg,
                cfg.eval_episodes,
                eval_seed,
                backbone=cfg.label,
                mode=mode,
                threads=threads,
            )
            rows.append(row)
            save_network(
                net, out / "checkpoints" / f"{cfg.label}_{k_shot}shot_{mode}.pfnw"
            )
    report = summarize(rows, seed=cfg.seed, config_hash=cfg.digest)
    (out / "report.csv").write_text(report_to_csv(report))
    (out / "confusions.csv").write_text(confusions_to_csv(report))
    (out / "manifest.txt").write_text(
        f"config_hash: {cfg.digest}\n"
        f"seed: {cfg.seed}\n"
        f"protoshot_version: {__version__}\n"
        f"numpy_version: {np.__version__}\n"
        f"kernel_backend: {_kernels.BACKEND}\n"
    )
    print(format_table(report))
    return report


def cmd_gen_synthetic(args) -> int:
    cfg = parse_config(args.config, args.seed)
    dataset = build_synthetic(cfg.synthetic, cfg.seed)
    data_mod.save_embeddings(dataset, args.out)
    print(
        f"wrote {args.out}: {len(dataset)} examples, dim {dataset.feature_dim}, "
        f"{dataset.n_classes} classes"
    )
    return 0


def cmd_train(args) -> int:
    cfg = parse_config(args.config, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset = load_dataset(cfg)
    train_ds, val_ds = data_mod.split_train_val(
        dataset, cfg.split_ratio, derive_seed(cfg.seed, 0x5711)
    )
    ep_cfg = EpisodeConfig(cfg.n_way, cfg.shots[0], cfg.q_query)
    net = _make_head(cfg, dataset.feature_dim, derive_seed(cfg.seed, 2000))
    train_cfg = TrainConfig(
        **{**cfg.train.__dict__, "seed": derive_seed(cfg.seed, 3000)}
    )
    net, history = meta_train(train_ds, val_ds, ep_cfg, train_cfg, net)
    save_network(net, out / "checkpoint.pfnw")
    save_history_csv(history, out / "history.csv")
    if history:
        print(
            f"trained {train_cfg.episodes_total} episodes; "
            f"final val accuracy {history[-1].val_accuracy:.4f}"
        )
    return 0


def cmd_eval(args) -> int:
    cfg = parse_config(args.config, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset = load_dataset(cfg)
    rows = []
    for shot_pos, k_shot in enumerate(cfg.shots):
        ep_cfg = EpisodeConfig(cfg.n_way, k_shot, cfg.q_query)
        if args.checkpoint:
            net = load_network(args.checkpoint)
            mode = MODE_WITH
        else:
            net = _untrained_head(
                cfg, dataset.feature_dim, derive_seed(cfg.seed, 4000 + shot_pos)
            )
            mode = MODE_WITHOUT
        row, _ = evaluate(
            dataset,
            net,
            ep_cfg,
            cfg.eval_episodes,
            derive_seed(cfg.seed, 1000 + 10 * shot_pos),
            backbone=cfg.label,
            mode=mode,
            threads=args.threads,
        )
        rows.append(row)
    report = summarize(rows, seed=cfg.seed, config_hash=cfg.digest)
    (out / "report.csv").write_text(report_to_csv(report))
    (out / "confusions.csv").write_text(confusions_to_csv(report))
    print(format_table(report))
    return 0


def cmd_run(args) -> int:
    cfg = parse_config(args.config, args.seed)
    run_experiment(cfg, args.out, threads=args.threads)
    return 0


def cmd_report(args) -> int:
    text = Path(args.csv).read_text()
    report = parse_report_csv(text)
    print(format_table(report))
    return 0


# ---------------------------------------------------------------------------

_EXIT_CODES = [
    ((ConfigParseError,), 2),
    (
        (
            DatasetError,
            BadMagic,
            UnsupportedVersion,
            TruncatedFile,
            ClassIndexOutOfRange,
            MalformedPGM,
            EmptyDataset,
            IoError,
            OSError,
        ),
        3,
    ),
    ((InsufficientClasses, InsufficientSamples, ClassTooSmall), 4),
    (
        (DimensionMismatch, ShapeMismatch, NonFiniteInput, InvalidArchitecture),
        5,
    ),
    ((ProtoshotError,), 6),
]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="protoshot",
        description="Episodic few-shot classification engine (prototype based)",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--config", required=True, help="INI experiment config")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        if out:
            p.add_argument("--out", required=True, help="output path")

    p = sub.add_parser("gen-synthetic", help="write a synthetic blob PFEB file")
    common(p)
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("train", help="meta-train a head, write checkpoint + history")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate one head across the shot grid")
    common(p)
    p.add_argument("--checkpoint", default=None, help="PFNW checkpoint to evaluate")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("run", help="full grid: shots x modes, reports + manifest")
    common(p)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="re-render a report CSV as a table")
    p.add_argument("--csv", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # map to stable exit codes
        for types, code in _EXIT_CODES:
            if isinstance(exc, types):
                print(f"error: {exc}", file=sys.stderr)
                return code
        raise


if __name__ == "__main__":
    sys.exit(main())
