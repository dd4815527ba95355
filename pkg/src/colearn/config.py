"""Experiment configuration: YAML loading, validation, and overrides.

Every validation failure names the offending field so a bad config is
diagnosable from the error alone.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import yaml

from .learner import STANDARD_HIDDEN

MODES = ("CL", "ST", "FS")
GRAPH_KINDS = ("complete", "edges", "erdos-renyi")


class ConfigError(ValueError):
    """Configuration failed validation; the message names the field."""


@dataclass(frozen=True)
class SynthSpec:
    n_per_class: int
    num_classes: int
    dim: int
    separation: float
    test_n_per_class: int


@dataclass(frozen=True)
class IdxSpec:
    train_images: str
    train_labels: str
    test_images: str
    test_labels: str


@dataclass(frozen=True)
class GraphSpec:
    kind: str  # complete | edges | erdos-renyi
    edges: tuple[tuple[int, int], ...] = ()
    p: float = 0.1
    period: int = 10


@dataclass(frozen=True)
class TrainingSpec:
    update_rule: str = "adam"  # adam | sgd
    alpha: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 10
    self_train_epochs: int = 30
    fs_epochs: int = 3


@dataclass(frozen=True)
class CollectiveSpec:
    gamma: float = 100.0
    score_refresh_period: int = 100
    review_period: int = 300
    batch_size: int = 10
    epochs_over_shared: int = 3


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    n_agents: int
    architectures: tuple[str, ...]  # explicit per-agent list, or ()
    architecture_mix: tuple[tuple[str, int], ...]  # (kind, count) pairs, or ()
    train_size: int
    val_size: int
    common_val: bool  # one shared validation block instead of per-agent sets
    dataset: SynthSpec | IdxSpec
    graph: GraphSpec
    training: TrainingSpec
    collective: CollectiveSpec
    montecarlo_runs: int = 1
    master_seed: int = 0
    metric_stride: int = 100
    max_iterations: int | None = None


def _expect_map(value, path: str) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(value).__name__}")
    return value


def _get(d: dict, key: str, path: str, required: bool = True, default=None):
    if key not in d:
        if required:
            raise ConfigError(f"{path}.{key}: missing required field")
        return default
    return d[key]


def _as_int(value, path: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{path}: must be >= {minimum}, got {value}")
    return value


def _as_float(value, path: str, minimum: float | None = None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    value = float(value)
    if minimum is not None and value < minimum:
        raise ConfigError(f"{path}: must be >= {minimum}, got {value}")
    return value


def _as_str(value, path: str, choices: tuple[str, ...] | None = None) -> str:
    if not isinstance(value, str):
        raise ConfigError(f"{path}: expected a string, got {value!r}")
    if choices is not None and value not in choices:
        raise ConfigError(f"{path}: expected one of {list(choices)}, got {value!r}")
    return value


def _arch_kind(value, path: str) -> str:
    kind = _as_str(value, path)
    if kind not in STANDARD_HIDDEN:
        raise ConfigError(
            f"{path}: unknown architecture {kind!r}; expected one of {sorted(STANDARD_HIDDEN)}"
        )
    return kind


def _parse_dataset(raw: dict) -> SynthSpec | IdxSpec:
    d = _expect_map(raw, "dataset")
    kind = _as_str(_get(d, "kind", "dataset"), "dataset.kind", ("synth", "fashion-mnist"))
    if kind == "synth":
        return SynthSpec(
            n_per_class=_as_int(_get(d, "n_per_class", "dataset"), "dataset.n_per_class", 1),
            num_classes=_as_int(_get(d, "num_classes", "dataset"), "dataset.num_classes", 2),
            dim=_as_int(_get(d, "dim", "dataset"), "dataset.dim", 1),
            separation=_as_float(_get(d, "separation", "dataset"), "dataset.separation", 0.0),
            test_n_per_class=_as_int(
                _get(d, "test_n_per_class", "dataset"), "dataset.test_n_per_class", 1
            ),
        )
    return IdxSpec(
        train_images=_as_str(_get(d, "train_images", "dataset"), "dataset.train_images"),
        train_labels=_as_str(_get(d, "train_labels", "dataset"), "dataset.train_labels"),
        test_images=_as_str(_get(d, "test_images", "dataset"), "dataset.test_images"),
        test_labels=_as_str(_get(d, "test_labels", "dataset"), "dataset.test_labels"),
    )


def _parse_graph(raw, n_agents: int) -> GraphSpec:
    d = _expect_map(raw, "graph")
    kind = _as_str(_get(d, "kind", "graph", required=False, default="complete"),
                   "graph.kind", GRAPH_KINDS)
    if kind == "edges":
        raw_edges = _get(d, "edges", "graph")
        if not isinstance(raw_edges, list):
            raise ConfigError("graph.edges: expected a list of [from, to] pairs")
        edges = []
        for idx, pair in enumerate(raw_edges):
            if not (isinstance(pair, list) and len(pair) == 2):
                raise ConfigError(f"graph.edges[{idx}]: expected a [from, to] pair")
            j = _as_int(pair[0], f"graph.edges[{idx}][0]", 0)
            i = _as_int(pair[1], f"graph.edges[{idx}][1]", 0)
            if j >= n_agents or i >= n_agents:
                raise ConfigError(f"graph.edges[{idx}]: node out of range for {n_agents} agents")
            edges.append((j, i))
        return GraphSpec(kind=kind, edges=tuple(edges))
    if kind == "erdos-renyi":
        p = _as_float(_get(d, "p", "graph"), "graph.p", 0.0)
        if p > 1.0:
            raise ConfigError(f"graph.p: must be <= 1, got {p}")
        period = _as_int(_get(d, "period", "graph", required=False, default=10),
                         "graph.period", 1)
        return GraphSpec(kind=kind, p=p, period=period)
    return GraphSpec(kind="complete")


def _parse_agents(raw: dict) -> tuple[int, tuple[str, ...], tuple[tuple[str, int], ...]]:
    d = _expect_map(raw, "agents")
    explicit = _get(d, "architectures", "agents", required=False)
    mix = _get(d, "mix", "agents", required=False)
    if (explicit is None) == (mix is None):
        raise ConfigError("agents: exactly one of 'architectures' or 'mix' is required")
    if explicit is not None:
        if not isinstance(explicit, list) or not explicit:
            raise ConfigError("agents.architectures: expected a non-empty list")
        kinds = tuple(
            _arch_kind(a, f"agents.architectures[{i}]") for i, a in enumerate(explicit)
        )
        count = _get(d, "count", "agents", required=False, default=len(kinds))
        if _as_int(count, "agents.count", 1) != len(kinds):
            raise ConfigError(
                f"agents.count: {count} does not match {len(kinds)} listed architectures"
            )
        return len(kinds), kinds, ()
    mix = _expect_map(mix, "agents.mix")
    pairs = []
    total = 0
    for kind in sorted(mix):
        count = _as_int(mix[kind], f"agents.mix.{kind}", 1)
        pairs.append((_arch_kind(kind, "agents.mix"), count))
        total += count
    count = _get(d, "count", "agents", required=False, default=total)
    if _as_int(count, "agents.count", 1) != total:
        raise ConfigError(f"agents.count: {count} does not match mix total {total}")
    return total, (), tuple(pairs)


def parse_config(raw: dict) -> ExperimentConfig:
    raw = _expect_map(raw, "config")
    mode = _as_str(_get(raw, "mode", "config"), "mode", MODES)
    n_agents, archs, mix = _parse_agents(_get(raw, "agents", "config"))

    part = _expect_map(_get(raw, "partition", "config"), "partition")
    train_size = _as_int(_get(part, "train_size", "partition"), "partition.train_size", 1)
    val_size = _as_int(_get(part, "val_size", "partition"), "partition.val_size", 1)
    common_val = _get(part, "common_val", "partition", required=False, default=False)
    if not isinstance(common_val, bool):
        raise ConfigError(f"partition.common_val: expected a boolean, got {common_val!r}")

    tr = _expect_map(_get(raw, "training", "config", required=False), "training")
    training = TrainingSpec(
        update_rule=_as_str(
            _get(tr, "update_rule", "training", required=False, default="adam"),
            "training.update_rule", ("adam", "sgd"),
        ),
        alpha=_as_float(_get(tr, "alpha", "training", required=False, default=1e-3),
                        "training.alpha"),
        beta1=_as_float(_get(tr, "beta1", "training", required=False, default=0.9),
                        "training.beta1"),
        beta2=_as_float(_get(tr, "beta2", "training", required=False, default=0.999),
                        "training.beta2"),
        eps=_as_float(_get(tr, "eps", "training", required=False, default=1e-8),
                      "training.eps"),
        batch_size=_as_int(_get(tr, "batch_size", "training", required=False, default=10),
                           "training.batch_size", 1),
        self_train_epochs=_as_int(
            _get(tr, "self_train_epochs", "training", required=False, default=30),
            "training.self_train_epochs", 0,
        ),
        fs_epochs=_as_int(_get(tr, "fs_epochs", "training", required=False, default=3),
                          "training.fs_epochs", 1),
    )
    if training.alpha <= 0:
        raise ConfigError(f"training.alpha: must be positive, got {training.alpha}")

    co = _expect_map(_get(raw, "collective", "config", required=False), "collective")
    collective = CollectiveSpec(
        gamma=_as_float(_get(co, "gamma", "collective", required=False, default=100.0),
                        "collective.gamma", 0.0),
        score_refresh_period=_as_int(
            _get(co, "score_refresh_period", "collective", required=False, default=100),
            "collective.score_refresh_period", 1,
        ),
        review_period=_as_int(
            _get(co, "review_period", "collective", required=False, default=300),
            "collective.review_period", 1,
        ),
        batch_size=_as_int(_get(co, "batch_size", "collective", required=False, default=10),
                           "collective.batch_size", 1),
        epochs_over_shared=_as_int(
            _get(co, "epochs_over_shared", "collective", required=False, default=3),
            "collective.epochs_over_shared", 1,
        ),
    )

    max_iter = _get(raw, "max_iterations", "config", required=False)
    return ExperimentConfig(
        mode=mode,
        n_agents=n_agents,
        architectures=archs,
        architecture_mix=mix,
        train_size=train_size,
        val_size=val_size,
        common_val=common_val,
        dataset=_parse_dataset(_get(raw, "dataset", "config")),
        graph=_parse_graph(_get(raw, "graph", "config", required=False), n_agents),
        training=training,
        collective=collective,
        montecarlo_runs=_as_int(
            _get(raw, "montecarlo_runs", "config", required=False, default=1),
            "montecarlo_runs", 1,
        ),
        master_seed=_as_int(
            _get(raw, "master_seed", "config", required=False, default=0), "master_seed", 0
        ),
        metric_stride=_as_int(
            _get(raw, "metric_stride", "config", required=False, default=100),
            "metric_stride", 1,
        ),
        max_iterations=None if max_iter in (None, 0) else _as_int(max_iter, "max_iterations", 1),
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        try:
            raw = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigError(f"{path}: invalid YAML: {e}") from e
    return parse_config(raw)


# Shorthand names usable in sweeps and CLI overrides, mapped to field paths.
OVERRIDE_PATHS = {
    "mode": ("mode",),
    "gamma": ("collective", "gamma"),
    "score_refresh_period": ("collective", "score_refresh_period"),
    "review_period": ("collective", "review_period"),
    "epochs_over_shared": ("collective", "epochs_over_shared"),
    "collective_batch": ("collective", "batch_size"),
    "train_size": ("train_size",),
    "val_size": ("val_size",),
    "alpha": ("training", "alpha"),
    "self_train_epochs": ("training", "self_train_epochs"),
    "fs_epochs": ("training", "fs_epochs"),
    "batch_size": ("training", "batch_size"),
    "separation": ("dataset", "separation"),
    "p": ("graph", "p"),
    "period": ("graph", "period"),
    "montecarlo_runs": ("montecarlo_runs",),
    "master_seed": ("master_seed",),
    "metric_stride": ("metric_stride",),
    "max_iterations": ("max_iterations",),
    "train_images": ("dataset", "train_images"),
    "train_labels": ("dataset", "train_labels"),
    "test_images": ("dataset", "test_images"),
    "test_labels": ("dataset", "test_labels"),
}


def override(config: ExperimentConfig, name: str, value) -> ExperimentConfig:
    """Return a copy of the config with one named parameter replaced.

    `name` is either a shorthand (e.g. "gamma") or a dotted field path
    (e.g. "collective.gamma").
    """
    path = OVERRIDE_PATHS.get(name, tuple(name.split(".")))
    try:
        return _replace_path(config, path, value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"cannot override {name!r}: {e}") from e


def _replace_path(obj, path: tuple[str, ...], value):
    if not dataclasses.is_dataclass(obj):
        raise ConfigError(f"no such config section: {'.'.join(path)}")
    names = {f.name for f in dataclasses.fields(obj)}
    if path[0] not in names:
        raise ConfigError(f"no such config field: {path[0]}")
    if len(path) == 1:
        current = getattr(obj, path[0])
        if current is not None and not isinstance(value, type(current)):
            # keep int/float flexibility, reject type nonsense
            if isinstance(current, float) and isinstance(value, int):
                value = float(value)
            elif isinstance(current, int) and isinstance(value, float) and value.is_integer():
                value = int(value)
        return dataclasses.replace(obj, **{path[0]: value})
    child = _replace_path(getattr(obj, path[0]), path[1:], value)
    return dataclasses.replace(obj, **{path[0]: child})
