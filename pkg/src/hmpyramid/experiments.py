"""The experiment battery: standardized training-plus-evaluation runs driven
by a single YAML configuration, emitting deterministic metrics.

Randomness bookkeeping.  Every run has one root seed.  Machines get their own
seeds via ``derive_seed(root, condition_index, machine_index)``, where
conditions enumerate the configured (architecture, init, ...) combinations in
configuration order and the machine index is the class id for per-class
machines (0 otherwise).  Under a machine seed: conventional training uses
stream id = machine index, staged pretraining uses its documented small
stream ids, and sample generation uses stream ``GEN_STREAM_ID``.  Under the
root seed: stochastic binarization of the train/test splits of dataset d uses
streams ``DATA_BINARIZE_STREAM + 2d`` / ``+ 2d + 1``, and architecture
sweeps draw from stream ``SWEEP_STREAM_ID``.  No stream is ever consumed by
two purposes, so a run is reproducible regardless of thread count:
``metrics.csv`` is byte-identical for any ``threads`` value.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, is_dataclass
from datetime import datetime, timezone

import numpy as np

from .datasets import Dataset, load_cifar10, load_idx, split_by_class, take
from .errors import ArchitectureError, ConfigError, DataError
from .evaluate import (
    adm,
    density_vector,
    improvement_factor,
    knn1_accuracy,
    mean_min_distance,
    entropy,
    normalized_entropy,
    novelty,
    probe_feature_sets,
    probe_train,
    unrepresented_count,
)
from .machine import (
    Architecture,
    HelmholtzMachine,
    InitSpec,
    TrainConfig,
    count_free_parameters,
    init_machine,
    train,
)
from .numerics import bernoulli, derive_seed, make_rng
from .pyramid import StageConfig, pyramid_pretrain
from .report import Report

__all__ = [
    "ExperimentConfig",
    "DatasetSection",
    "load_config",
    "parse_config",
    "sample_random_architecture",
    "run_probe",
    "run_replicate",
    "run_ten_machine",
    "run_transcend",
    "run_multi_dataset",
    "run_experiment",
    "describe_run",
    "EXPERIMENTS",
    "GEN_STREAM_ID",
    "DATA_BINARIZE_STREAM",
    "SWEEP_STREAM_ID",
]

GEN_STREAM_ID = 2**33
DATA_BINARIZE_STREAM = 2**34
SWEEP_STREAM_ID = 2**35

N_CLASSES = 10


# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class DatasetSection:
    """Where one dataset lives and how much of it to use."""

    kind: str = "idx"
    name: str = ""
    train_images: str | None = None
    train_labels: str | None = None
    test_images: str | None = None
    test_labels: str | None = None
    train_batches: tuple[str, ...] = ()
    test_batches: tuple[str, ...] = ()
    train_subset: int | None = None
    test_subset: int | None = None
    subset_seed: int | None = None
    architecture: tuple[int, ...] | None = None  # per-dataset, multi-dataset runs


@dataclass(frozen=True)
class TrainSection:
    epochs: int = 10
    learning_rate: float = 0.01
    shuffle: bool = True


@dataclass(frozen=True)
class ProbeSection:
    architecture: tuple[int, ...] = (784, 625, 484, 289, 196, 100, 16)
    iterations: int = 300
    step: float = 0.5


@dataclass(frozen=True)
class ReplicateSection:
    deep_architecture: tuple[int, ...] = (784, 484, 225, 64)
    shallow_architecture: tuple[int, ...] = (784, 709)
    n_values: tuple[int, ...] = (2, 4, 8, 16, 32, 64, 128, 256, 512, 1024)
    generate_count: int = 500


@dataclass(frozen=True)
class SweepSection:
    count: int = 10
    min_depth: int = 1
    max_depth: int = 4
    allowed_sides: tuple[int, ...] = (25, 22, 17, 14, 10, 4)


@dataclass(frozen=True)
class TenMachineSection:
    architectures: tuple[tuple[int, ...], ...] = ()
    sweep: SweepSection | None = None
    generate_count: int = 2000


@dataclass(frozen=True)
class TranscendSection:
    architecture: tuple[int, ...] = (784, 400, 100)
    g_schedule: tuple[int, ...] = (1000, 2000, 4000)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int
    out: str
    threads: int = 1
    dataset: DatasetSection | None = None
    datasets: tuple[DatasetSection, ...] = ()
    binarize_mode: str = "threshold"
    threshold: float = 0.5
    inits: tuple[str, ...] = ("pyramid", "random")
    random_sigma: float = 0.05
    train: TrainSection = TrainSection()
    pyramid: StageConfig = StageConfig(stage_epochs=1)
    samples_count: int = 0
    generate_binary: bool = False
    probe: ProbeSection = ProbeSection()
    replicate: ReplicateSection = ReplicateSection()
    ten_machine: TenMachineSection = TenMachineSection()
    transcend: TranscendSection = TranscendSection()


EXPERIMENT_NAMES = ("probe", "replicate", "ten_machine", "transcend", "multi_dataset")

_REQUIRED = object()


def _field(section: dict, key: str, kind, default=_REQUIRED, where: str = ""):
    label = f"{where}.{key}" if where else key
    if key not in section or section[key] is None:
        if default is _REQUIRED:
            raise ConfigError(f"missing required field '{label}'")
        return default
    value = section[key]
    try:
        if kind is int:
            if isinstance(value, bool) or int(value) != value:
                raise ValueError
            return int(value)
        if kind is float:
            if isinstance(value, bool):
                raise ValueError
            return float(value)
        if kind is bool:
            if not isinstance(value, bool):
                raise ValueError
            return value
        if kind is str:
            if not isinstance(value, str):
                raise ValueError
            return value
        if kind is dict:
            if not isinstance(value, dict):
                raise ValueError
            return value
        if kind is list:
            if not isinstance(value, list):
                raise ValueError
            return value
    except (TypeError, ValueError):
        pass
    raise ConfigError(f"field '{label}' must be a {kind.__name__}, got {value!r}")


def _int_tuple(section: dict, key: str, default=_REQUIRED, where: str = "") -> tuple:
    values = _field(section, key, list, default, where)
    if values is default and default is not _REQUIRED:
        return default
    label = f"{where}.{key}" if where else key
    try:
        return tuple(int(v) for v in values)
    except (TypeError, ValueError):
        raise ConfigError(f"field '{label}' must be a list of integers") from None


def _str_tuple(section: dict, key: str, default=_REQUIRED, where: str = "") -> tuple:
    values = _field(section, key, list, default, where)
    if values is default and default is not _REQUIRED:
        return default
    label = f"{where}.{key}" if where else key
    if not all(isinstance(v, str) for v in values):
        raise ConfigError(f"field '{label}' must be a list of strings")
    return tuple(values)


def _parse_dataset(section: dict, where: str, with_arch: bool) -> DatasetSection:
    kind = _field(section, "kind", str, "idx", where)
    if kind not in ("idx", "cifar10"):
        raise ConfigError(f"{where}.kind must be 'idx' or 'cifar10', got {kind!r}")
    ds = DatasetSection(
        kind=kind,
        name=_field(section, "name", str, "", where),
        train_images=_field(section, "train_images", str, None, where),
        train_labels=_field(section, "train_labels", str, None, where),
        test_images=_field(section, "test_images", str, None, where),
        test_labels=_field(section, "test_labels", str, None, where),
        train_batches=_str_tuple(section, "train_batches", (), where),
        test_batches=_str_tuple(section, "test_batches", (), where),
        train_subset=_field(section, "train_subset", int, None, where),
        test_subset=_field(section, "test_subset", int, None, where),
        subset_seed=_field(section, "subset_seed", int, None, where),
        architecture=_int_tuple(section, "architecture", None, where)
        if with_arch
        else None,
    )
    if kind == "idx" and ds.train_images is None:
        raise ConfigError(f"{where}: idx datasets need 'train_images'")
    if kind == "cifar10" and not ds.train_batches:
        raise ConfigError(f"{where}: cifar10 datasets need 'train_batches'")
    for key in ("train_subset", "test_subset"):
        value = getattr(ds, key)
        if value is not None and value < 1:
            raise ConfigError(f"{where}.{key} must be >= 1")
    return ds


def _parse_stage(section: dict, where: str = "pyramid") -> StageConfig:
    try:
        return StageConfig(
            stage_epochs=_field(section, "stage_epochs", int, 1, where),
            stage_learning_rate=_field(section, "stage_learning_rate", float, 0.01, where),
            finetune_epochs=_field(section, "finetune_epochs", int, 0, where),
            finetune_learning_rate=_field(section, "finetune_learning_rate", float, None, where),
            binarize_mode=_field(section, "binarize_mode", str, "threshold", where),
            threshold=_field(section, "threshold", float, 0.5, where),
            init=_field(section, "init", str, "zero", where),
            init_sigma=_field(section, "init_sigma", float, 0.05, where),
            shuffle=_field(section, "shuffle", bool, True, where),
        )
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _validate_architecture(sizes: tuple[int, ...], where: str,
                           needs_pyramid: bool) -> Architecture:
    try:
        arch = Architecture(sizes)
    except ArchitectureError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    if needs_pyramid and not arch.is_pyramid_compatible():
        raise ConfigError(
            f"{where}: architecture {list(sizes)} cannot use pyramid init; layers "
            "below the top must be perfect squares with strictly decreasing sides"
        )
    return arch


def parse_config(data: dict, experiment: str | None = None) -> ExperimentConfig:
    """Validate a configuration mapping into an :class:`ExperimentConfig`.

    ``experiment`` (e.g. from a CLI subcommand) must agree with the config's
    own ``experiment`` field when both are present.
    """
    if not isinstance(data, dict):
        raise ConfigError(f"configuration must be a mapping, got {type(data).__name__}")
    declared = _field(data, "experiment", str, None)
    if declared is not None and declared not in EXPERIMENT_NAMES:
        raise ConfigError(
            f"unknown experiment {declared!r}, expected one of {EXPERIMENT_NAMES}"
        )
    if experiment is None:
        experiment = declared
    elif declared is not None and declared != experiment:
        raise ConfigError(
            f"config declares experiment {declared!r} but {experiment!r} was requested"
        )
    if experiment is None:
        raise ConfigError("no experiment named (config 'experiment' field or subcommand)")

    inits = _str_tuple(data, "inits", ("pyramid", "random"))
    if not inits:
        raise ConfigError("'inits' must name at least one init kind")
    for kind in inits:
        if kind not in ("zero", "random", "pyramid"):
            raise ConfigError(f"unknown init kind {kind!r} in 'inits'")

    train_sec = data.get("train") or {}
    ten_sec = data.get("ten_machine") or {}
    sweep_sec = ten_sec.get("sweep")
    probe_sec = data.get("probe") or {}
    rep_sec = data.get("replicate") or {}
    tr_sec = data.get("transcend") or {}
    samples_sec = data.get("samples") or {}
    bin_sec = data.get("binarize") or {}

    needs_pyramid = "pyramid" in inits

    cfg = ExperimentConfig(
        experiment=experiment,
        seed=_field(data, "seed", int),
        out=_field(data, "out", str, "results"),
        threads=_field(data, "threads", int, 1),
        dataset=_parse_dataset(_field(data, "dataset", dict), "dataset", False)
        if experiment != "multi_dataset"
        else None,
        datasets=tuple(
            _parse_dataset(_field({"d": d}, "d", dict, where=f"datasets[{i}]"),
                           f"datasets[{i}]", True)
            for i, d in enumerate(_field(data, "datasets", list))
        )
        if experiment == "multi_dataset"
        else (),
        binarize_mode=_field(bin_sec, "mode", str, "threshold", "binarize"),
        threshold=_field(bin_sec, "threshold", float, 0.5, "binarize"),
        inits=inits,
        random_sigma=_field(data, "random_sigma", float, 0.05),
        train=TrainSection(
            epochs=_field(train_sec, "epochs", int, 10, "train"),
            learning_rate=_field(train_sec, "learning_rate", float, 0.01, "train"),
            shuffle=_field(train_sec, "shuffle", bool, True, "train"),
        ),
        pyramid=_parse_stage(data.get("pyramid") or {}),
        samples_count=_field(samples_sec, "count", int, 0, "samples"),
        generate_binary=_field(data, "generate_binary", bool, False),
        probe=ProbeSection(
            architecture=_int_tuple(probe_sec, "architecture",
                                    ProbeSection.architecture, "probe"),
            iterations=_field(probe_sec, "iterations", int, 300, "probe"),
            step=_field(probe_sec, "step", float, 0.5, "probe"),
        ),
        replicate=ReplicateSection(
            deep_architecture=_int_tuple(rep_sec, "deep_architecture",
                                         ReplicateSection.deep_architecture, "replicate"),
            shallow_architecture=_int_tuple(rep_sec, "shallow_architecture",
                                            ReplicateSection.shallow_architecture,
                                            "replicate"),
            n_values=_int_tuple(rep_sec, "n_values", ReplicateSection.n_values,
                                "replicate"),
            generate_count=_field(rep_sec, "generate_count", int, 500, "replicate"),
        ),
        ten_machine=TenMachineSection(
            architectures=tuple(
                tuple(int(s) for s in a)
                for a in _field(ten_sec, "architectures", list, [], "ten_machine")
            ),
            sweep=SweepSection(
                count=_field(sweep_sec, "count", int, 10, "ten_machine.sweep"),
                min_depth=_field(sweep_sec, "min_depth", int, 1, "ten_machine.sweep"),
                max_depth=_field(sweep_sec, "max_depth", int, 4, "ten_machine.sweep"),
                allowed_sides=_int_tuple(sweep_sec, "allowed_sides",
                                         SweepSection.allowed_sides, "ten_machine.sweep"),
            )
            if sweep_sec is not None
            else None,
            generate_count=_field(ten_sec, "generate_count", int, 2000, "ten_machine"),
        ),
        transcend=TranscendSection(
            architecture=_int_tuple(tr_sec, "architecture",
                                    TranscendSection.architecture, "transcend"),
            g_schedule=_int_tuple(tr_sec, "g_schedule",
                                  TranscendSection.g_schedule, "transcend"),
        ),
    )

    if cfg.threads < 1:
        raise ConfigError("threads must be >= 1")
    if cfg.binarize_mode not in ("threshold", "stochastic"):
        raise ConfigError(f"binarize.mode must be 'threshold' or 'stochastic'")
    if not cfg.train.epochs >= 0:
        raise ConfigError("train.epochs must be >= 0")
    if not cfg.train.learning_rate > 0:
        raise ConfigError("train.learning_rate must be positive")
    if cfg.samples_count < 0:
        raise ConfigError("samples.count must be >= 0")
    if not cfg.random_sigma > 0:
        raise ConfigError("random_sigma must be positive")

    if experiment == "probe":
        _validate_architecture(cfg.probe.architecture, "probe.architecture", needs_pyramid)
        if cfg.probe.iterations < 1:
            raise ConfigError("probe.iterations must be >= 1")
        if not cfg.probe.step > 0:
            raise ConfigError("probe.step must be positive")
    elif experiment == "replicate":
        deep = _validate_architecture(cfg.replicate.deep_architecture,
                                      "replicate.deep_architecture", needs_pyramid)
        shallow = _validate_architecture(cfg.replicate.shallow_architecture,
                                         "replicate.shallow_architecture", False)
        if not count_free_parameters(deep) < count_free_parameters(shallow):
            raise ConfigError(
                "replicate: the deep architecture must have fewer generative "
                f"parameters than the shallow one, got "
                f"{count_free_parameters(deep)} vs {count_free_parameters(shallow)}"
            )
        if cfg.replicate.generate_count < 1:
            raise ConfigError("replicate.generate_count must be >= 1")
        if not cfg.replicate.n_values or any(n < 1 for n in cfg.replicate.n_values):
            raise ConfigError("replicate.n_values must be positive integers")
    elif experiment == "ten_machine":
        if bool(cfg.ten_machine.architectures) == (cfg.ten_machine.sweep is not None):
            raise ConfigError(
                "ten_machine needs exactly one of 'architectures' or 'sweep'"
            )
        for i, sizes in enumerate(cfg.ten_machine.architectures):
            _validate_architecture(sizes, f"ten_machine.architectures[{i}]", needs_pyramid)
        sweep = cfg.ten_machine.sweep
        if sweep is not None:
            if sweep.count < 1:
                raise ConfigError("ten_machine.sweep.count must be >= 1")
            if not 1 <= sweep.min_depth <= sweep.max_depth:
                raise ConfigError("ten_machine.sweep needs 1 <= min_depth <= max_depth")
            if sweep.max_depth > len(sweep.allowed_sides):
                raise ConfigError(
                    f"ten_machine.sweep.max_depth {sweep.max_depth} exceeds the "
                    f"{len(sweep.allowed_sides)} allowed sides"
                )
        _check_pool_count(cfg.ten_machine.generate_count, "ten_machine.generate_count")
    elif experiment == "transcend":
        _validate_architecture(cfg.transcend.architecture, "transcend.architecture",
                               needs_pyramid)
        sched = cfg.transcend.g_schedule
        if not sched or any(b <= a for a, b in zip(sched, sched[1:])):
            raise ConfigError("transcend.g_schedule must be strictly increasing")
        for g in sched:
            _check_pool_count(g, "transcend.g_schedule")
    elif experiment == "multi_dataset":
        if not cfg.datasets:
            raise ConfigError("multi_dataset needs a non-empty 'datasets' list")
        for i, ds in enumerate(cfg.datasets):
            if ds.architecture is None:
                raise ConfigError(f"datasets[{i}] needs an 'architecture'")
            _validate_architecture(ds.architecture, f"datasets[{i}].architecture",
                                   needs_pyramid)
        _check_pool_count(cfg.ten_machine.generate_count, "ten_machine.generate_count")
    return cfg


def _check_pool_count(count: int, label: str) -> None:
    if count < 1:
        raise ConfigError(f"{label} must be >= 1")
    if count % N_CLASSES != 0:
        raise ConfigError(
            f"{label} must be divisible by {N_CLASSES} "
            "(the pool draws equally from the per-class machines)"
        )


def load_config(path, experiment: str | None = None,
                overrides: dict | None = None) -> ExperimentConfig:
    """Read a YAML config file and validate it; ``overrides`` replace
    top-level scalar fields (seed, out, threads) before validation."""
    import yaml

    try:
        text = open(path, "r", encoding="utf-8").read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {path} is not valid YAML: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must contain a mapping")
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    return parse_config(data, experiment)


# --------------------------------------------------------------------------
# shared run machinery


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _arch_label(sizes) -> str:
    return "-".join(str(s) for s in sizes)


def _flatten_config(obj, prefix: str, echo: dict) -> None:
    if is_dataclass(obj) and not isinstance(obj, type):
        for f in fields(obj):
            _flatten_config(getattr(obj, f.name), f"{prefix}.{f.name}" if prefix else f.name, echo)
    elif isinstance(obj, (list, tuple)):
        echo[prefix] = "[" + ", ".join(str(v) for v in obj) + "]"
    elif obj is None:
        echo[prefix] = "null"
    else:
        echo[prefix] = obj


def _new_report(cfg: ExperimentConfig) -> Report:
    echo: dict = {}
    _flatten_config(cfg, "", echo)
    return Report(experiment=cfg.experiment, seed=cfg.seed, config_echo=echo,
                  started=_utcnow())


def _load_split(ds: DatasetSection) -> tuple[Dataset, Dataset | None]:
    try:
        if ds.kind == "idx":
            train_set = load_idx(ds.train_images, ds.train_labels,
                                 ds.name or None)
            test_set = (load_idx(ds.test_images, ds.test_labels, ds.name or None)
                        if ds.test_images is not None else None)
        else:
            train_set = load_cifar10(ds.train_batches, ds.name or "cifar10")
            test_set = (load_cifar10(ds.test_batches, ds.name or "cifar10")
                        if ds.test_batches else None)
    except FileNotFoundError as exc:
        raise DataError(f"dataset file missing: {exc.filename}") from None
    if ds.train_subset is not None:
        if ds.train_subset > len(train_set):
            raise DataError(
                f"train_subset {ds.train_subset} exceeds the {len(train_set)} "
                f"available examples"
            )
        train_set = take(train_set, ds.train_subset, ds.subset_seed)
    if test_set is not None and ds.test_subset is not None:
        if ds.test_subset > len(test_set):
            raise DataError(
                f"test_subset {ds.test_subset} exceeds the {len(test_set)} "
                f"available examples"
            )
        seed = None if ds.subset_seed is None else ds.subset_seed + 1
        test_set = take(test_set, ds.test_subset, seed)
    return train_set, test_set


def _binarize_split(images: np.ndarray, cfg: ExperimentConfig,
                    stream_id: int) -> np.ndarray:
    flat = images.reshape(images.shape[0], -1)
    if cfg.binarize_mode == "threshold":
        return (flat > cfg.threshold).astype(np.float64)
    return bernoulli(flat, make_rng(cfg.seed, stream_id))


def _check_visible_size(arch: Architecture, ds: Dataset, label: str) -> None:
    if arch.sizes[0] != ds.side * ds.side:
        raise ConfigError(
            f"{label}: visible size {arch.sizes[0]} does not match the "
            f"{ds.side}x{ds.side} images of {ds.name}"
        )


def _require_labels(ds: Dataset) -> np.ndarray:
    if ds.labels is None:
        raise DataError(f"{ds.name} has no labels, which this experiment requires")
    return ds.labels


def sample_random_architecture(rng, visible_side: int, min_depth: int,
                               max_depth: int, allowed_sides) -> Architecture:
    """Draw a random all-square architecture for sweep studies.

    Depth is uniform over [min_depth, max_depth]; that many distinct sides
    are drawn from ``allowed_sides`` (all of which must be smaller than the
    visible side) and sorted in decreasing order, visible layer first.
    """
    allowed = [int(s) for s in allowed_sides]
    if len(set(allowed)) != len(allowed):
        raise ValueError("allowed_sides must be distinct")
    if any(s >= visible_side for s in allowed):
        raise ValueError("allowed sides must all be smaller than the visible side")
    if not 1 <= min_depth <= max_depth:
        raise ValueError("need 1 <= min_depth <= max_depth")
    if max_depth > len(allowed):
        raise ValueError(
            f"max_depth {max_depth} exceeds the {len(allowed)} allowed sides"
        )
    depth = int(rng.integers(min_depth, max_depth + 1))
    sides = sorted((int(s) for s in rng.choice(allowed, size=depth, replace=False)),
                   reverse=True)
    return Architecture([visible_side * visible_side] + [s * s for s in sides])


def _train_whole(arch: Architecture, kind: str, images: np.ndarray,
                 visibles: np.ndarray, cfg: ExperimentConfig,
                 machine_seed: int, stream_id: int = 0) -> HelmholtzMachine:
    """One machine on the whole training split: staged pretraining for
    pyramid inits, plain wake-sleep otherwise."""
    if kind == "pyramid":
        return pyramid_pretrain(arch, images, cfg.pyramid, machine_seed)
    machine = init_machine(arch, InitSpec(kind, cfg.random_sigma), machine_seed)
    return train(machine, visibles,
                 TrainConfig(cfg.train.epochs, cfg.train.learning_rate,
                             machine_seed, cfg.train.shuffle),
                 stream_id=stream_id)


def _class_worker(task):
    """Train one per-class machine and generate its pool; module-level so
    process pools can pick it up."""
    (class_id, sizes, kind, images, visibles, train_sec, sigma, stage_cfg,
     machine_seed, count, binary) = task
    arch = Architecture(sizes)
    if kind == "pyramid":
        machine = pyramid_pretrain(arch, images, stage_cfg, machine_seed)
    else:
        machine = init_machine(arch, InitSpec(kind, sigma), machine_seed)
        train(machine, visibles,
              TrainConfig(train_sec.epochs, train_sec.learning_rate,
                          machine_seed, train_sec.shuffle),
              stream_id=class_id)
    pool = machine.generate(count, make_rng(machine_seed, GEN_STREAM_ID), binary)
    return class_id, pool


def _run_ordered(worker, tasks, threads: int) -> list:
    if threads <= 1 or len(tasks) <= 1:
        return [worker(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, tasks))


def _class_pools(arch: Architecture, kind: str, by_class_images: list[np.ndarray],
                 by_class_visibles: list[np.ndarray], cfg: ExperimentConfig,
                 condition_index: int, per_class: int) -> list[np.ndarray]:
    """Ten per-class machines (trained in parallel when configured), each
    generating ``per_class`` samples.  Class c's machine seed is
    derive_seed(root, condition_index, c) and its training stream id is c."""
    for c in range(N_CLASSES):
        if len(by_class_visibles[c]) == 0:
            raise DataError(f"class {c} has no training examples in the subset")
    tasks = [
        (c, arch.sizes, kind, by_class_images[c], by_class_visibles[c],
         cfg.train, cfg.random_sigma, cfg.pyramid,
         derive_seed(cfg.seed, condition_index, c), per_class, cfg.generate_binary)
        for c in range(N_CLASSES)
    ]
    results = _run_ordered(_class_worker, tasks, cfg.threads)
    return [pool for _, pool in results]


def _dump_pool_samples(report: Report, label: str, pools: list[np.ndarray],
                       side: int, count: int) -> None:
    for c, pool in enumerate(pools):
        for i in range(min(count, len(pool))):
            report.samples.append(
                (f"samples/{label}/class{c}_{i}.pgm", pool[i].reshape(side, side))
            )


# --------------------------------------------------------------------------
# experiments


def run_probe(cfg: ExperimentConfig) -> Report:
    """Train one machine per init kind on the whole training split, then fit
    softmax probes on every layer's mean-field activities (single layers and
    bottom-up concatenations) and record train/test accuracy per feature
    set."""
    report = _new_report(cfg)
    arch = Architecture(cfg.probe.architecture)
    train_set, test_set = _load_split(cfg.dataset)
    if test_set is None:
        raise DataError("probe needs a test split")
    _check_visible_size(arch, train_set, "probe.architecture")
    y_train = _require_labels(train_set)
    y_test = _require_labels(test_set)
    x_train = _binarize_split(train_set.images, cfg, DATA_BINARIZE_STREAM)
    x_test = _binarize_split(test_set.images, cfg, DATA_BINARIZE_STREAM + 1)

    for ci, kind in enumerate(cfg.inits):
        t0 = time.perf_counter()
        machine = _train_whole(arch, kind, train_set.images, x_train, cfg,
                               derive_seed(cfg.seed, ci, 0))
        report.timings.append((f"train_{kind}", time.perf_counter() - t0))
        t0 = time.perf_counter()
        feats_train = probe_feature_sets(machine, x_train)
        feats_test = probe_feature_sets(machine, x_test)
        for subset_name, feats in feats_train.items():
            model = probe_train(feats, y_train, cfg.probe.iterations, cfg.probe.step)
            for split, f, y in (("train", feats, y_train),
                                ("test", feats_test[subset_name], y_test)):
                report.rows.append({
                    "experiment": "probe",
                    "dataset": train_set.name,
                    "architecture": _arch_label(arch.sizes),
                    "init": kind,
                    "features": subset_name,
                    "width": f.shape[1],
                    "split": split,
                    "accuracy": model.accuracy(f, y),
                })
        report.timings.append((f"probe_{kind}", time.perf_counter() - t0))
    report.finished = _utcnow()
    return report


def run_replicate(cfg: ExperimentConfig) -> Report:
    """Small-sample memorization: train a deep machine (pyramid and random
    init) and a wider shallow machine (random init) on the same N training
    patterns, generate, and measure how the generated mass distributes over
    the patterns."""
    report = _new_report(cfg)
    rep = cfg.replicate
    deep = Architecture(rep.deep_architecture)
    shallow = Architecture(rep.shallow_architecture)
    train_set, _ = _load_split(cfg.dataset)
    _check_visible_size(deep, train_set, "replicate.deep_architecture")
    _check_visible_size(shallow, train_set, "replicate.shallow_architecture")
    machines = [("deep_pyramid", deep, "pyramid"),
                ("deep_random", deep, "random"),
                ("shallow_random", shallow, "random")]
    side = train_set.side

    for ni, n in enumerate(rep.n_values):
        if n > len(train_set):
            raise DataError(f"replicate n={n} exceeds the {len(train_set)} "
                            "available training examples")
        chunk = train_set.subset(np.arange(n))
        x = _binarize_split(chunk.images, cfg, DATA_BINARIZE_STREAM)
        for mi, (label, arch, kind) in enumerate(machines):
            t0 = time.perf_counter()
            machine_seed = derive_seed(cfg.seed, ni * len(machines) + mi, 0)
            machine = _train_whole(arch, kind, chunk.images, x, cfg, machine_seed)
            pool = machine.generate(rep.generate_count,
                                    make_rng(machine_seed, GEN_STREAM_ID),
                                    cfg.generate_binary)
            fractions = density_vector(pool, x)
            row = {
                "experiment": "replicate",
                "dataset": train_set.name,
                "machine": label,
                "architecture": _arch_label(arch.sizes),
                "init": kind,
                "free_parameters": count_free_parameters(arch),
                "n_train": n,
                "generated": rep.generate_count,
                "mean_min_distance": mean_min_distance(pool, x),
                "unrepresented": unrepresented_count(fractions),
                "entropy_raw": entropy(fractions),
            }
            if n >= 2:
                row["normalized_entropy"] = normalized_entropy(fractions)
            report.rows.append(row)
            report.timings.append((f"n{n}_{label}", time.perf_counter() - t0))
            if cfg.samples_count:
                for i in range(min(cfg.samples_count, len(pool))):
                    report.samples.append(
                        (f"samples/n{n}_{label}/{i}.pgm", pool[i].reshape(side, side))
                    )
    report.finished = _utcnow()
    return report


def _pool_metrics(pools: list[np.ndarray], x_train, y_train, x_test, y_test,
                  baseline_test: float) -> dict:
    pool = np.concatenate(pools)
    pool_labels = np.repeat(np.arange(N_CLASSES), len(pools[0]))
    acc_train = knn1_accuracy(pool, pool_labels, x_train, y_train)
    acc_test = knn1_accuracy(pool, pool_labels, x_test, y_test)
    return {
        "generated": len(pool),
        "accuracy_train_split": acc_train,
        "accuracy_test_split": acc_test,
        "baseline_test": baseline_test,
        "improvement_factor": improvement_factor(acc_test, baseline_test),
        "adm_mean": float(np.mean([adm(p) for p in pools])),
        "novelty": novelty(x_train, pool),
    }


def _split_for_classes(train_set: Dataset, x_train: np.ndarray):
    by_class = split_by_class(train_set)
    images = [ds.images for ds in by_class]
    labels = train_set.labels
    visibles = [x_train[np.flatnonzero(labels == c)] for c in range(N_CLASSES)]
    return images, visibles


def run_ten_machine(cfg: ExperimentConfig) -> Report:
    """For each architecture and init kind, train one machine per class,
    pool their generated samples into a labeled synthetic dataset, and score
    a nearest-neighbor classifier built on that pool against one built on the
    real training data."""
    report = _new_report(cfg)
    train_set, test_set = _load_split(cfg.dataset)
    if test_set is None:
        raise DataError("ten_machine needs a test split")
    y_train = _require_labels(train_set)
    y_test = _require_labels(test_set)
    x_train = _binarize_split(train_set.images, cfg, DATA_BINARIZE_STREAM)
    x_test = _binarize_split(test_set.images, cfg, DATA_BINARIZE_STREAM + 1)
    by_class_images, by_class_visibles = _split_for_classes(train_set, x_train)

    if cfg.ten_machine.sweep is not None:
        sweep = cfg.ten_machine.sweep
        rng = make_rng(cfg.seed, SWEEP_STREAM_ID)
        archs = [sample_random_architecture(rng, train_set.side, sweep.min_depth,
                                            sweep.max_depth, sweep.allowed_sides)
                 for _ in range(sweep.count)]
    else:
        archs = [Architecture(sizes) for sizes in cfg.ten_machine.architectures]
        for arch in archs:
            _check_visible_size(arch, train_set, "ten_machine.architectures")

    baseline_test = knn1_accuracy(x_train, y_train, x_test, y_test)
    per_class = cfg.ten_machine.generate_count // N_CLASSES

    for ai, arch in enumerate(archs):
        for ii, kind in enumerate(cfg.inits):
            t0 = time.perf_counter()
            condition = ai * len(cfg.inits) + ii
            pools = _class_pools(arch, kind, by_class_images, by_class_visibles,
                                 cfg, condition, per_class)
            label = f"{_arch_label(arch.sizes)}_{kind}"
            base = {
                "experiment": "ten_machine",
                "dataset": train_set.name,
                "architecture": _arch_label(arch.sizes),
                "depth": arch.n_hidden,
                "hidden_units": sum(arch.hidden_sizes),
                "free_parameters": count_free_parameters(arch),
                "init": kind,
            }
            report.rows.append(base | {"row": "condition"} | _pool_metrics(
                pools, x_train, y_train, x_test, y_test, baseline_test))
            for c, pool in enumerate(pools):
                report.rows.append(base | {"row": "machine", "class": c,
                                           "adm": adm(pool)})
            report.timings.append((f"cond{condition}_{label}",
                                   time.perf_counter() - t0))
            if cfg.samples_count:
                _dump_pool_samples(report, label, pools, train_set.side,
                                   cfg.samples_count)
    report.finished = _utcnow()
    return report


def run_transcend(cfg: ExperimentConfig) -> Report:
    """Train the per-class machines once per init kind, then grow the
    generated pool through the configured schedule, asking when (if ever) a
    nearest-neighbor classifier on generated data overtakes one trained on
    the real data."""
    report = _new_report(cfg)
    arch = Architecture(cfg.transcend.architecture)
    train_set, test_set = _load_split(cfg.dataset)
    if test_set is None:
        raise DataError("transcend needs a test split")
    _check_visible_size(arch, train_set, "transcend.architecture")
    y_train = _require_labels(train_set)
    y_test = _require_labels(test_set)
    x_train = _binarize_split(train_set.images, cfg, DATA_BINARIZE_STREAM)
    x_test = _binarize_split(test_set.images, cfg, DATA_BINARIZE_STREAM + 1)
    by_class_images, by_class_visibles = _split_for_classes(train_set, x_train)

    baseline_test = knn1_accuracy(x_train, y_train, x_test, y_test)
    schedule = cfg.transcend.g_schedule
    max_per_class = schedule[-1] // N_CLASSES

    for ii, kind in enumerate(cfg.inits):
        t0 = time.perf_counter()
        pools = _class_pools(arch, kind, by_class_images, by_class_visibles,
                             cfg, ii, max_per_class)
        report.timings.append((f"machines_{kind}", time.perf_counter() - t0))
        for g in schedule:
            # a prefix of a longer generation run is bit-identical to a
            # shorter run, so each machine generates once at the maximum size
            prefixes = [pool[: g // N_CLASSES] for pool in pools]
            metrics = _pool_metrics(prefixes, x_train, y_train, x_test, y_test,
                                    baseline_test)
            report.rows.append({
                "experiment": "transcend",
                "dataset": train_set.name,
                "architecture": _arch_label(arch.sizes),
                "init": kind,
            } | metrics | {
                "surpassed": metrics["accuracy_test_split"] >= baseline_test,
            })
        if cfg.samples_count:
            _dump_pool_samples(report, kind, pools, train_set.side,
                               cfg.samples_count)
    report.finished = _utcnow()
    return report


def run_multi_dataset(cfg: ExperimentConfig) -> Report:
    """The ten-machine procedure repeated across datasets, one architecture
    per dataset, to compare init kinds on different image families."""
    report = _new_report(cfg)
    for di, section in enumerate(cfg.datasets):
        arch = Architecture(section.architecture)
        train_set, test_set = _load_split(section)
        if test_set is None:
            raise DataError(f"datasets[{di}] ({section.name}) needs a test split")
        _check_visible_size(arch, train_set, f"datasets[{di}].architecture")
        y_train = _require_labels(train_set)
        y_test = _require_labels(test_set)
        x_train = _binarize_split(train_set.images, cfg,
                                  DATA_BINARIZE_STREAM + 2 * di)
        x_test = _binarize_split(test_set.images, cfg,
                                 DATA_BINARIZE_STREAM + 2 * di + 1)
        by_class_images, by_class_visibles = _split_for_classes(train_set, x_train)
        baseline_test = knn1_accuracy(x_train, y_train, x_test, y_test)
        per_class = cfg.ten_machine.generate_count // N_CLASSES

        for ii, kind in enumerate(cfg.inits):
            t0 = time.perf_counter()
            condition = di * len(cfg.inits) + ii
            pools = _class_pools(arch, kind, by_class_images, by_class_visibles,
                                 cfg, condition, per_class)
            report.rows.append({
                "experiment": "multi_dataset",
                "dataset": train_set.name,
                "architecture": _arch_label(arch.sizes),
                "init": kind,
            } | _pool_metrics(pools, x_train, y_train, x_test, y_test,
                              baseline_test))
            report.timings.append((f"{train_set.name}_{kind}",
                                   time.perf_counter() - t0))
            if cfg.samples_count:
                _dump_pool_samples(report, f"{train_set.name}_{kind}", pools,
                                   train_set.side, cfg.samples_count)
    report.finished = _utcnow()
    return report


EXPERIMENTS = {
    "probe": run_probe,
    "replicate": run_replicate,
    "ten_machine": run_ten_machine,
    "transcend": run_transcend,
    "multi_dataset": run_multi_dataset,
}


def run_experiment(cfg: ExperimentConfig) -> Report:
    """Dispatch to the configured experiment."""
    return EXPERIMENTS[cfg.experiment](cfg)


def describe_run(cfg: ExperimentConfig) -> list[str]:
    """Load and check everything a run would touch, without training.

    Returns human-readable plan lines; raises the same config/data errors a
    real run would raise early.
    """
    lines = [f"experiment: {cfg.experiment}", f"seed: {cfg.seed}",
             f"threads: {cfg.threads}", f"out: {cfg.out}"]
    sections = cfg.datasets if cfg.experiment == "multi_dataset" else (cfg.dataset,)
    for section in sections:
        train_set, test_set = _load_split(section)
        test_desc = f"{len(test_set)} test" if test_set is not None else "no test split"
        lines.append(
            f"dataset {train_set.name}: {len(train_set)} train "
            f"({train_set.side}x{train_set.side}), {test_desc}"
        )
        if cfg.experiment == "multi_dataset":
            arch = Architecture(section.architecture)
            _check_visible_size(arch, train_set, "architecture")
    if cfg.experiment == "probe":
        arch = Architecture(cfg.probe.architecture)
        _check_visible_size(arch, _load_split(cfg.dataset)[0], "probe.architecture")
        lines.append(f"architecture: {_arch_label(arch.sizes)}")
    lines.append(f"inits: {', '.join(cfg.inits)}")
    lines.append("plan OK")
    return lines
