#!/usr/bin/env python
# PYTHON_ARGCOMPLETE_OK
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, TypeVar

from pydantic import BaseModel, Field, ValidationError

from crosspers import __version__

logger = logging.getLogger(__name__)

M = TypeVar("M", bound=BaseModel)


parser = argparse.ArgumentParser(
    prog="crosspers",
    description="crosspers - cross-barcodes, MTD densities and Cross-RipsNet",
)
parser.add_argument(
    "--verbose",
    "-v",
    action="count",
    default=0,
    help="increase verbosity of the log messages, repeat to increase. "
    "Default level is INFO",
)
parser.add_argument(
    "--version",
    action="version",
    version=__version__,
    help="show version and exit",
)

subparsers = parser.add_subparsers(
    title="commands",
    required=True,
    dest="command",
    description="Available commands. Get command help with "
    "`crosspers <command> --help`.",
)


def add_seed_and_jobs(command: argparse.ArgumentParser) -> None:
    command.add_argument(
        "--seed",
        type=int,
        default=None,
        help="random seed, falls back to the config file, then CROSSPERS_SEED, then 0",
    )
    command.add_argument(
        "--jobs",
        type=int,
        default=None,
        help="number of concurrent jobs, 0 uses all CPUs",
    )


def add_config(command: argparse.ArgumentParser) -> argparse.Action:
    return command.add_argument(
        "--config",
        type=Path,
        default=None,
        help="JSON config file, flags override its values",
    )


def add_engine(command: argparse.ArgumentParser) -> None:
    command.add_argument(
        "--engine",
        choices=["native", "ripser", "auto"],
        default=None,
        help="persistence engine",
    )


def max_scale_arg(value: str) -> float | str:
    if value in ("auto", "max"):
        return value
    return float(value)


def bandwidth_arg(value: str) -> float | str:
    return value if value == "auto" else float(value)


config_cmd = subparsers.add_parser(
    "config",
    help="print a default config",
    description="Print the default JSON config of a command.",
)
config_cmd.add_argument(
    "name",
    choices=["distinguish", "sweep", "train", "topgen", "classify"],
    help="command to print the config for",
)

barcode = subparsers.add_parser(
    "barcode",
    help="compute persistence diagrams",
    description="Vietoris-Rips diagrams of one cloud or the cross-barcode of two.",
)
barcode_clouds = barcode.add_argument(
    "clouds", type=Path, nargs="+", help="cloud CSV file(s), left then right"
)
barcode.add_argument(
    "--cross",
    action="store_true",
    default=False,
    help="cross-barcode of the first cloud relative to the second",
)
barcode.add_argument("--dim", type=int, default=1, help="highest homology dimension")
barcode.add_argument(
    "--max-scale",
    type=max_scale_arg,
    default="auto",
    help="largest filtration value, a number, auto or max",
)
barcode.add_argument(
    "--filtration", type=Path, default=None, help="also dump the filtration CSV"
)
add_engine(barcode)
barcode.add_argument("--out", type=Path, required=True, help="diagram CSV")

distinguish_cmd = subparsers.add_parser(
    "distinguish",
    help="compare two clouds by their MTD densities",
    description="Overlap of the self MTD density of the core with its cross "
    "density against the candidate.",
)
distinguish_core = distinguish_cmd.add_argument("core", type=Path, help="core cloud CSV")
distinguish_cmd.add_argument("candidate", type=Path, help="candidate cloud CSV")
add_config(distinguish_cmd)
add_seed_and_jobs(distinguish_cmd)
add_engine(distinguish_cmd)
distinguish_cmd.add_argument("--n-pairs", type=int, default=None)
distinguish_cmd.add_argument("--subsample", type=int, default=None)
distinguish_cmd.add_argument("--dim", type=int, default=None)
distinguish_cmd.add_argument("--threshold", type=float, default=None)
distinguish_cmd.add_argument("--bandwidth", type=bandwidth_arg, default=None)
distinguish_cmd.add_argument(
    "--pgm", action="store_true", default=False, help="also write a PGM plot"
)
distinguish_cmd.add_argument("--out-dir", type=Path, required=True)

sweep_cmd = subparsers.add_parser(
    "sweep",
    help="noise sensitivity sweep",
    description="Mean inter-class overlap per relative noise level. Every CSV "
    "file of the dataset directory is one class.",
)
sweep_dataset = sweep_cmd.add_argument("dataset", type=Path, help="directory of cloud CSVs")
add_config(sweep_cmd)
add_seed_and_jobs(sweep_cmd)
add_engine(sweep_cmd)
sweep_cmd.add_argument("--levels", type=float, nargs="+", default=None)
sweep_cmd.add_argument(
    "--regime", choices=["right_only", "both", "all"], default=None
)
sweep_cmd.add_argument("--n-pairs", type=int, default=None)
sweep_cmd.add_argument("--subsample", type=int, default=None)
sweep_cmd.add_argument("--dim", type=int, default=None)
sweep_cmd.add_argument("--out-dir", type=Path, required=True)

train_cmd = subparsers.add_parser(
    "train",
    help="train a Cross-RipsNet model",
    description="Build density targets from a manifest, split, train and "
    "report the test symmetric KL.",
)
train_manifest = train_cmd.add_argument("manifest", type=Path, help="manifest JSON")
add_seed_and_jobs(train_cmd)
train_cmd.add_argument("--epochs", type=int, default=None)
train_cmd.add_argument("--learning-rate", type=float, default=None)
train_cmd.add_argument("--train-fraction", type=float, default=None)
train_cmd.add_argument("--out-dir", type=Path, required=True)

predict_cmd = subparsers.add_parser(
    "predict",
    help="predict a density with a trained model",
    description="Predict the density grid of a cloud pair.",
)
predict_model = predict_cmd.add_argument("model", type=Path, help="model JSON")
predict_cmd.add_argument("left", type=Path, help="left cloud CSV")
predict_cmd.add_argument("right", type=Path, help="right cloud CSV")
predict_cmd.add_argument(
    "--target", type=Path, default=None, help="target grid CSV to report sym KL"
)
predict_cmd.add_argument(
    "--pgm", action="store_true", default=False, help="also write a PGM heatmap"
)
predict_cmd.add_argument("--out", type=Path, required=True, help="grid CSV")

topgen_cmd = subparsers.add_parser(
    "topgen",
    help="cross-persistence features of time series",
    description="Features of labelled series (label in the first column) "
    "against one reference series per class.",
)
topgen_series = topgen_cmd.add_argument("series", type=Path, help="labelled series CSV")
add_config(topgen_cmd)
add_seed_and_jobs(topgen_cmd)
topgen_cmd.add_argument(
    "--references",
    type=int,
    nargs="+",
    default=None,
    help="row index of the reference of every class among the training "
    "series, random by default",
)
topgen_cmd.add_argument("--out", type=Path, required=True, help="features CSV")

classify_cmd = subparsers.add_parser(
    "classify",
    help="featurize and classify time series",
    description="TopGen features plus logistic regression with accuracy and ROC-AUC.",
)
classify_series = classify_cmd.add_argument("series", type=Path, help="labelled series CSV")
classify_cmd.add_argument(
    "--test", type=Path, default=None, help="labelled test series, split otherwise"
)
add_config(classify_cmd)
add_seed_and_jobs(classify_cmd)
classify_cmd.add_argument("--references", type=int, nargs="+", default=None)
classify_cmd.add_argument("--train-fraction", type=float, default=None)
classify_cmd.add_argument("--out-dir", type=Path, required=True)

selftest_cmd = subparsers.add_parser(
    "selftest",
    help="run the oracle and property suites",
    description="Randomized checks of reduction, filtrations, overlap and gradients.",
)
selftest_cmd.add_argument("--quick", action="store_true", default=False)
selftest_cmd.add_argument("--suite", nargs="+", default=None)
selftest_cmd.add_argument("--seed", type=int, default=None)


try:
    import argcomplete
    from argcomplete.completers import DirectoriesCompleter, FilesCompleter

    barcode_clouds.completer = FilesCompleter(["*.csv"])
    distinguish_core.completer = FilesCompleter(["*.csv"])
    sweep_dataset.completer = DirectoriesCompleter()
    train_manifest.completer = FilesCompleter(["*.json"])
    predict_model.completer = FilesCompleter(["*.json"])
    topgen_series.completer = FilesCompleter(["*.csv"])
    classify_series.completer = FilesCompleter(["*.csv"])

    argcomplete.autocomplete(parser)
except ImportError:
    pass


def load_config(
    model: type[M],
    file: Path | None,
    overrides: dict[str, Any],
    seed: int | None = None,
) -> M:
    """Validate a JSON config file, then apply non-``None`` flag overrides."""
    from crosspers.utils import resolve_seed

    data: dict[str, Any] = {}
    if file is not None:
        if not file.exists():
            raise FileNotFoundError(f"config file {file} does not exist")
        data = json.loads(file.read_text())
    data.update({key: value for key, value in overrides.items() if value is not None})
    if "seed" in model.model_fields:
        data["seed"] = resolve_seed(seed, data.get("seed"))
    return model.model_validate(data)


class SyntheticPairs(BaseModel):
    n_pairs: int = Field(default=60, ge=2)
    n_points: int = 48
    noise: float = 0.05


class TrainManifest(BaseModel):
    """Dataset, model and training settings of ``crosspers train``.

    Cloud paths are relative to the manifest.
    """

    pairs: list[tuple[Path, Path]] = []
    synthetic: SyntheticPairs | None = None
    dataset: dict = {}
    model: dict = {}
    training: dict = {}


class TrainReport(BaseModel):
    train_sym_kl: float
    test_sym_kl: float | None
    n_train: int
    n_test: int
    manifest: TrainManifest
    training: dict
    version: str = __version__


class PredictReport(BaseModel):
    sym_kl: float
    model: Path
    config: dict
    version: str = __version__


class ClassifyReport(BaseModel):
    train: dict
    test: dict
    features: list[str]
    reference_indices: list[int]
    config: dict
    version: str = __version__


def _cmd_config(args: argparse.Namespace) -> None:
    from crosspers.console import console
    from crosspers.crossripsnet.dataset import DensityDatasetConfig
    from crosspers.crossripsnet.model import CrnModelConfig
    from crosspers.crossripsnet.training import TrainingConfig
    from crosspers.stats import DistinctionConfig, SweepConfig
    from crosspers.topgen import TopGenConfig

    match args.name:
        case "distinguish":
            config: BaseModel = DistinctionConfig()
        case "sweep":
            config = SweepConfig()
        case "train":
            config = TrainManifest(
                synthetic=SyntheticPairs(),
                dataset=DensityDatasetConfig().model_dump(mode="json"),
                model=CrnModelConfig().model_dump(mode="json"),
                training=TrainingConfig().model_dump(mode="json"),
            )
        case "topgen" | "classify":
            config = TopGenConfig()
    console.print_json(config.model_dump_json(indent=2))


def _cmd_barcode(args: argparse.Namespace) -> None:
    from crosspers.filtration import cross_vr_filtration, vr_filtration
    from crosspers.geometry import cross_distance_matrix, pairwise_distances
    from crosspers.io import read_cloud, write_diagrams
    from crosspers.persistence import cross_barcodes, vr_diagrams

    if args.cross and len(args.clouds) != 2:
        parser.error("--cross requires exactly two cloud files: left and right")
    if not args.cross and len(args.clouds) != 1:
        parser.error("pass one cloud file, or two together with --cross")
    if args.dim < 0:
        parser.error("--dim must be >= 0")
    engine = args.engine or "native"
    dims = list(range(args.dim + 1))

    if args.cross:
        left, right = (read_cloud(file) for file in args.clouds)
        diagrams = list(
            cross_barcodes(left, right, dims, max_scale=args.max_scale, engine=engine).values()
        )
        if args.filtration:
            cross_vr_filtration(
                cross_distance_matrix(left, right), args.dim, args.max_scale
            ).to_csv(args.filtration)
    else:
        cloud = read_cloud(args.clouds[0])
        diagrams = vr_diagrams(cloud, args.dim, max_scale=args.max_scale, engine=engine)
        if args.filtration:
            vr_filtration(pairwise_distances(cloud), args.dim, args.max_scale).to_csv(
                args.filtration
            )
    write_diagrams(args.out, diagrams)
    logger.info(
        "wrote %s",
        ", ".join(f"H{d.dim}: {len(d.finite())} bars" for d in diagrams),
    )


def _cmd_distinguish(args: argparse.Namespace) -> None:
    import numpy as np

    from crosspers.io import read_cloud, write_density_curve, write_pgm, write_report
    from crosspers.stats import DistinctionConfig, distinguish

    config = load_config(
        DistinctionConfig,
        args.config,
        {
            "n_pairs": args.n_pairs,
            "subsample_size": args.subsample,
            "hom_dim": args.dim,
            "threshold": args.threshold,
            "bandwidth": args.bandwidth,
            "engine": args.engine,
            "n_jobs": args.jobs,
        },
        seed=args.seed,
    )
    core, candidate = read_cloud(args.core), read_cloud(args.candidate)
    report, self_density, cross_density = distinguish(core, candidate, config)

    args.out_dir.mkdir(parents=True, exist_ok=True)
    write_report(args.out_dir / "report.json", report)
    write_density_curve(args.out_dir / "self_density.csv", self_density)
    write_density_curve(args.out_dir / "cross_density.csv", cross_density)
    if args.pgm:
        z = np.union1d(self_density.grid, cross_density.grid)
        curves = np.vstack((self_density(z), cross_density(z)))
        write_pgm(args.out_dir / "densities.pgm", curves.T)


def _cmd_sweep(args: argparse.Namespace) -> None:
    from crosspers.io import read_cloud, write_report, write_sweep_csv
    from crosspers.stats import SweepConfig, SweepTable, noise_sensitivity_sweep

    files = sorted(args.dataset.glob("*.csv"))
    if len(files) < 2:
        parser.error(f"dataset directory {args.dataset} needs at least two cloud CSVs")
    regime = None if args.regime == "all" else args.regime
    config = load_config(
        SweepConfig,
        args.config,
        {
            "levels": args.levels,
            "regime": regime,
            "n_pairs": args.n_pairs,
            "subsample_size": args.subsample,
            "hom_dim": args.dim,
            "engine": args.engine,
            "n_jobs": args.jobs,
        },
        seed=args.seed,
    )
    clouds = [read_cloud(file) for file in files]
    logger.info("sweeping %d classes: %s", len(files), ", ".join(f.stem for f in files))

    regimes = ["right_only", "both"] if args.regime == "all" else [config.regime]
    rows = []
    for name in regimes:
        rows.extend(noise_sensitivity_sweep(clouds, regime=name, config=config).rows)
    table = SweepTable(rows=rows, config=config)

    args.out_dir.mkdir(parents=True, exist_ok=True)
    write_report(args.out_dir / "sweep.json", table)
    write_sweep_csv(args.out_dir / "sweep.csv", table, [f.stem for f in files])


def _cmd_train(args: argparse.Namespace) -> None:
    from crosspers.crossripsnet.dataset import (
        DensityDatasetConfig,
        build_density_dataset,
        synthetic_circle_pairs,
    )
    from crosspers.crossripsnet.model import CrnModel, CrnModelConfig
    from crosspers.crossripsnet.training import (
        TrainingConfig,
        evaluate_sym_kl,
        train,
        train_test_split,
    )
    from crosspers.io import read_cloud, write_report
    from crosspers.utils import resolve_seed

    if not args.manifest.exists():
        raise FileNotFoundError(f"manifest {args.manifest} does not exist")
    manifest = TrainManifest.model_validate_json(args.manifest.read_text())
    seed = resolve_seed(args.seed, manifest.training.get("seed"))
    training = TrainingConfig.model_validate(
        manifest.training
        | {
            key: value
            for key, value in {
                "epochs": args.epochs,
                "learning_rate": args.learning_rate,
                "train_fraction": args.train_fraction,
                "n_jobs": args.jobs,
            }.items()
            if value is not None
        }
        | {"seed": seed}
    )
    dataset_config = DensityDatasetConfig.model_validate(
        {"seed": seed} | manifest.dataset
    )

    if manifest.pairs:
        base = args.manifest.parent
        pairs = [
            (read_cloud(base / left), read_cloud(base / right))
            for left, right in manifest.pairs
        ]
    elif manifest.synthetic:
        pairs = synthetic_circle_pairs(
            manifest.synthetic.n_pairs,
            manifest.synthetic.n_points,
            seed=seed,
            noise=manifest.synthetic.noise,
        )
    else:
        parser.error("the manifest lists no pairs and no synthetic dataset")

    samples, grid = build_density_dataset(pairs, dataset_config)
    model_config = CrnModelConfig.model_validate(manifest.model | {"grid": grid.model_dump()})
    train_samples, test_samples = train_test_split(
        samples, training.train_fraction, seed=seed
    )
    model = CrnModel.new(model_config, input_dim=pairs[0][0].dim, seed=seed)
    result = train(model, train_samples, training)

    args.out_dir.mkdir(parents=True, exist_ok=True)
    result.model.save(args.out_dir / "model.json")
    result.history_csv(args.out_dir / "history.csv")
    report = TrainReport(
        train_sym_kl=evaluate_sym_kl(result.model, train_samples),
        test_sym_kl=evaluate_sym_kl(result.model, test_samples) if test_samples else None,
        n_train=len(train_samples),
        n_test=len(test_samples),
        manifest=manifest,
        training=training.model_dump(mode="json"),
    )
    write_report(args.out_dir / "report.json", report)


def _cmd_predict(args: argparse.Namespace) -> None:
    from crosspers.console import console
    from crosspers.crossripsnet.model import CrnModel
    from crosspers.crossripsnet.training import sym_kl
    from crosspers.io import read_cloud, read_grid, write_grid, write_pgm, write_report

    model = CrnModel.load(args.model)
    prediction = model.forward(read_cloud(args.left), read_cloud(args.right))
    write_grid(args.out, prediction)
    if args.pgm:
        write_pgm(args.out.with_suffix(".pgm"), prediction)
    if args.target:
        value = sym_kl(prediction, read_grid(args.target))
        report = PredictReport(
            sym_kl=value,
            model=args.model,
            config=model.config.model_dump(mode="json"),
        )
        write_report(args.out.with_name(args.out.stem + "_report.json"), report)
        console.print(f"symmetric KL: {value:.6g}")


def _make_topgen(
    args: argparse.Namespace, series: list, labels, seed: int
) -> tuple[Any, list[int]]:
    from crosspers.topgen import TopGen, TopGenConfig, select_references

    config = load_config(TopGenConfig, args.config, {"n_jobs": args.jobs})
    references, indices = select_references(
        series, labels, indices=args.references, seed=seed
    )
    logger.info("references taken from rows %s", indices)
    return TopGen(config=config, references=references), indices


def _cmd_topgen(args: argparse.Namespace) -> None:
    from crosspers.io import read_labelled_series
    from crosspers.topgen import write_features
    from crosspers.utils import resolve_seed

    series, labels = read_labelled_series(args.series)
    topgen, _ = _make_topgen(args, series, labels, resolve_seed(args.seed))
    write_features(args.out, topgen.schema, topgen.feature_matrix(series))


def _cmd_classify(args: argparse.Namespace) -> None:
    import numpy as np

    from crosspers.console import console
    from crosspers.io import read_labelled_series, write_report
    from crosspers.topgen import (
        LogisticConfig,
        OneVsRestClassifier,
        evaluate,
        logistic_fit,
        write_features,
    )
    from crosspers.utils import get_rng, resolve_seed

    seed = resolve_seed(args.seed)
    series, labels = read_labelled_series(args.series)
    if args.test:
        train_series, train_labels = series, labels
        test_series, test_labels = read_labelled_series(args.test)
    else:
        fraction = args.train_fraction if args.train_fraction is not None else 0.8
        if not 0.0 < fraction < 1.0:
            parser.error("--train-fraction must lie in (0, 1)")
        order = get_rng(seed, 3).permutation(len(series))
        n_train = int(round(fraction * len(series)))
        train_series = [series[idx] for idx in order[:n_train]]
        train_labels = labels[order[:n_train]]
        test_series = [series[idx] for idx in order[n_train:]]
        test_labels = labels[order[n_train:]]

    topgen, indices = _make_topgen(args, train_series, train_labels, seed)
    train_features = topgen.feature_matrix(train_series)
    test_features = topgen.feature_matrix(test_series)

    logistic = LogisticConfig()
    if not np.isin(train_labels, (0, 1)).all():
        classifier = OneVsRestClassifier.fit(train_features, train_labels, logistic)
    else:
        classifier = logistic_fit(train_features, train_labels, logistic)

    args.out_dir.mkdir(parents=True, exist_ok=True)
    write_features(args.out_dir / "train_features.csv", topgen.schema, train_features)
    write_features(args.out_dir / "test_features.csv", topgen.schema, test_features)
    train_report = evaluate(classifier, train_features, train_labels)
    test_report = evaluate(classifier, test_features, test_labels)
    report = ClassifyReport(
        train=train_report.model_dump(),
        test=test_report.model_dump(),
        features=list(topgen.schema),
        reference_indices=[int(idx) for idx in indices],
        config=topgen.config.model_dump(mode="json")
        | {"seed": seed, "logistic": logistic.model_dump(mode="json")},
    )
    write_report(args.out_dir / "metrics.json", report)
    console.print(
        f"test accuracy {test_report.accuracy:.3f}, ROC-AUC {test_report.roc_auc:.3f}"
    )


def _cmd_selftest(args: argparse.Namespace) -> bool:
    from crosspers.console import console
    from crosspers.selftest import SUITES, report_table, run_selftest
    from crosspers.utils import resolve_seed

    if args.suite and (unknown := set(args.suite) - set(SUITES)):
        parser.error(f"unknown suites: {', '.join(sorted(unknown))}")
    reports = run_selftest(seed=resolve_seed(args.seed), quick=args.quick, suites=args.suite)
    console.print(report_table(reports))
    return all(report.passed for report in reports)


def main() -> None:
    from crosspers.console import err_console
    from crosspers.io import CloudFormatError
    from crosspers.utils import setup_rich_logging

    args = parser.parse_args()
    setup_rich_logging(level=logging.INFO - args.verbose * 10)

    try:
        match args.command:
            case "config":
                _cmd_config(args)
            case "barcode":
                _cmd_barcode(args)
            case "distinguish":
                _cmd_distinguish(args)
            case "sweep":
                _cmd_sweep(args)
            case "train":
                _cmd_train(args)
            case "predict":
                _cmd_predict(args)
            case "topgen":
                _cmd_topgen(args)
            case "classify":
                _cmd_classify(args)
            case "selftest":
                if not _cmd_selftest(args):
                    sys.exit(1)
            case _:
                parser.error(f"unknown command {args.command}")
    except CloudFormatError as exc:
        err_console.print(f"[red]malformed input[/red] {exc}")
        sys.exit(1)
    except (ValidationError, ValueError, FileNotFoundError) as exc:
        err_console.print(f"[red]error:[/red] {exc}")
        sys.exit(1)


if __name__ == "__main__":
    main()
