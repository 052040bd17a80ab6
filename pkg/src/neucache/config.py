"""Experiment configuration: a flat YAML document with nested ``policy`` and
``train`` blocks.  Every key has a documented default; unknown keys are
rejected, and command-line overrides (``key=value``, dotted for nested keys)
are type-checked against the same schema.

A config with only ``dataset`` and ``policy`` runs with the stock defaults:
retraining every 1000 instances, unit cost, soft labels, three seeds.

The ``NEUCACHE_DATA_DIR`` environment variable supplies a default base
directory for relative dataset paths.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Any

import yaml

from .policies import PolicyConfig
from .simulator import ExperimentConfig
from .student import TrainConfig

DATA_DIR_ENV = "NEUCACHE_DATA_DIR"


class ConfigError(Exception):
    """Invalid configuration; the message names the offending key."""


@dataclass(frozen=True)
class _Key:
    type: type | tuple[type, ...]
    default: Any
    doc: str
    required: bool = False


_POLICY_SCHEMA: dict[str, _Key] = {
    "kind": _Key(str, "ms", "policy kind: fr | random | ms | pe | qbc | cs", required=True),
    "mode": _Key(str, "adaptive", "threshold mode for score policies: fixed | adaptive"),
    "fixed_threshold": _Key((int, float, type(None)), None,
                            "threshold in the criterion's natural units "
                            "(defaults: ms=5.0, pe=0.5, qbc=0.25)"),
    "committee_size": _Key(int, 4, "max prior student snapshots kept for qbc"),
    "coreset_threshold": _Key((int, float), 0.9,
                              "cosine similarity s for cs; call the teacher when "
                              "the closest stored input is below s"),
    "invert_margin": _Key(bool, False,
                          "ablation: treat high margin as uncertain for ms"),
    "label": _Key((str, type(None)), None, "display label (defaults to kind)"),
}

_TRAIN_SCHEMA: dict[str, _Key] = {
    "max_epochs": _Key(int, 30, "training epochs upper bound"),
    "patience": _Key(int, 5, "early-stopping patience in epochs"),
    "validation_fraction": _Key((int, float), 0.1, "held-out fraction for early stopping"),
    "label_mode": _Key(str, "soft", "training targets: soft | hard"),
    "learning_rate": _Key((int, float), 0.1, "gradient-descent step size"),
    "batch_size": _Key(int, 32, "mini-batch size"),
    "l2_penalty": _Key((int, float), 1e-4, "L2 penalty on non-bias weights"),
}

_TOP_SCHEMA: dict[str, _Key] = {
    "dataset": _Key(str, None, "dataset directory (resolved against "
                    f"${DATA_DIR_ENV} when relative)", required=True),
    "budget": _Key((int, float), 1000.0, "teacher-call budget for a single run"),
    "budgets": _Key((list, type(None)), None,
                    "budget grid for sweeps (defaults to [budget])"),
    "seed": _Key(int, 0, "run seed for the `run` subcommand"),
    "seeds": _Key(list, [0, 1, 2], "seed list for sweeps"),
    "retrain_frequency": _Key(int, 1000, "instances between retrainings"),
    "warmup": _Key(int, 100, "initial teacher-annotated examples (not charged)"),
    "regime": _Key(str, "retrain", "retrain | no_retrain"),
    "oracle_filter": _Key(bool, False,
                          "drop wrong teacher labels from the training pool "
                          "(still charged and emitted)"),
    "cost": _Key((int, float), 1.0, "constant cost per teacher call"),
    "score_warmup": _Key(bool, False, "include warmup in online accuracy"),
    "policy": _Key(dict, None, "policy block (see policy.* keys)", required=True),
    "policies": _Key((list, type(None)), None,
                     "list of policy blocks for sweeps (overrides policy)"),
    "train": _Key(dict, {}, "training block (see train.* keys)"),
}


@dataclass
class RunSpec:
    """Everything the CLI needs to execute: base config plus sweep grids."""

    dataset_path: str
    base: ExperimentConfig
    budgets: list[float]
    seeds: list[int]
    policies: list[PolicyConfig]
    score_warmup: bool


def describe_keys() -> str:
    """Human-readable enumeration of every config key (used by --help)."""
    lines = ["configuration keys (YAML file, overridable with --set key=value):"]
    for name, key in _TOP_SCHEMA.items():
        if name in ("policy", "train"):
            continue
        req = " [required]" if key.required else f" (default: {key.default!r})"
        lines.append(f"  {name}{req}: {key.doc}")
    for block, schema in (("policy", _POLICY_SCHEMA), ("train", _TRAIN_SCHEMA)):
        for name, key in schema.items():
            req = " [required]" if key.required else f" (default: {key.default!r})"
            lines.append(f"  {block}.{name}{req}: {key.doc}")
    return "\n".join(lines)


def _check_block(block: dict, schema: dict[str, _Key], prefix: str) -> dict:
    out = {}
    for name in block:
        if name not in schema:
            raise ConfigError(f"unknown configuration key: {prefix}{name}")
    for name, key in schema.items():
        if name in block:
            value = block[name]
        elif key.required:
            raise ConfigError(f"missing required configuration key: {prefix}{name}")
        else:
            value = key.default
        if name in block and not isinstance(value, key.type):
            raise ConfigError(
                f"{prefix}{name}: expected {_type_name(key.type)}, got {type(value).__name__}"
            )
        if isinstance(value, bool) and not _allows_bool(key.type):
            raise ConfigError(f"{prefix}{name}: expected {_type_name(key.type)}, got bool")
        out[name] = value
    return out


def _allows_bool(t) -> bool:
    types = t if isinstance(t, tuple) else (t,)
    return bool in types


def _type_name(t) -> str:
    types = t if isinstance(t, tuple) else (t,)
    return " | ".join("null" if x is type(None) else x.__name__ for x in types)


def _coerce_override(raw: str, key: _Key, name: str) -> Any:
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"override {name}: cannot parse value {raw!r}: {exc}") from exc
    types = key.type if isinstance(key.type, tuple) else (key.type,)
    if isinstance(value, bool) and bool not in types:
        raise ConfigError(f"override {name}: expected {_type_name(key.type)}, got bool")
    if isinstance(value, int) and float in types and int not in types:
        value = float(value)
    if not isinstance(value, types):
        raise ConfigError(
            f"override {name}: expected {_type_name(key.type)}, got {type(value).__name__}"
        )
    return value


def apply_overrides(document: dict, overrides: list[str]) -> dict:
    doc = dict(document)
    doc["policy"] = dict(doc.get("policy") or {})
    doc["train"] = dict(doc.get("train") or {})
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        name, raw = item.split("=", 1)
        name = name.strip()
        if name.startswith("policy."):
            sub = name[len("policy."):]
            if sub not in _POLICY_SCHEMA:
                raise ConfigError(f"unknown configuration key: {name}")
            doc["policy"][sub] = _coerce_override(raw, _POLICY_SCHEMA[sub], name)
        elif name.startswith("train."):
            sub = name[len("train."):]
            if sub not in _TRAIN_SCHEMA:
                raise ConfigError(f"unknown configuration key: {name}")
            doc["train"][sub] = _coerce_override(raw, _TRAIN_SCHEMA[sub], name)
        else:
            if name not in _TOP_SCHEMA or name in ("policy", "train", "policies"):
                raise ConfigError(f"unknown configuration key: {name}")
            doc[name] = _coerce_override(raw, _TOP_SCHEMA[name], name)
    return doc


def _policy_config(block: dict, prefix: str = "policy.") -> PolicyConfig:
    checked = _check_block(block, _POLICY_SCHEMA, prefix)
    fixed = checked["fixed_threshold"]
    config = PolicyConfig(
        kind=checked["kind"],
        mode=checked["mode"],
        fixed_threshold=float(fixed) if fixed is not None else None,
        committee_size=checked["committee_size"],
        coreset_threshold=float(checked["coreset_threshold"]),
        invert_margin=checked["invert_margin"],
        label=checked["label"],
    )
    try:
        config.validate()
    except ValueError as exc:
        raise ConfigError(f"{prefix.rstrip('.')}: {exc}") from exc
    return config


def resolve_dataset_path(path: str) -> str:
    if os.path.isabs(path) or os.path.exists(path):
        return path
    base = os.environ.get(DATA_DIR_ENV)
    if base:
        candidate = os.path.join(base, path)
        if os.path.exists(candidate):
            return candidate
    return path


def parse_run_spec(document: dict) -> RunSpec:
    if not isinstance(document, dict):
        raise ConfigError("configuration root must be a mapping")
    top = _check_block(document, _TOP_SCHEMA, "")

    train_block = _check_block(top["train"] or {}, _TRAIN_SCHEMA, "train.")
    train = TrainConfig(
        max_epochs=train_block["max_epochs"],
        patience=train_block["patience"],
        validation_fraction=float(train_block["validation_fraction"]),
        label_mode=train_block["label_mode"],
        learning_rate=float(train_block["learning_rate"]),
        batch_size=train_block["batch_size"],
        l2_penalty=float(train_block["l2_penalty"]),
    )
    try:
        train.validate()
    except ValueError as exc:
        raise ConfigError(f"train: {exc}") from exc

    if not isinstance(top["policy"], dict):
        raise ConfigError("policy: expected a mapping of policy.* keys")
    policy = _policy_config(top["policy"])
    if top["policies"] is not None:
        if not top["policies"]:
            raise ConfigError("policies: must be a nonempty list of policy blocks")
        policies = []
        for i, block in enumerate(top["policies"]):
            if not isinstance(block, dict):
                raise ConfigError(f"policies[{i}]: expected a mapping")
            policies.append(_policy_config(block, prefix=f"policies[{i}]."))
    else:
        policies = [policy]

    seeds = top["seeds"]
    if not seeds or not all(isinstance(s, int) and not isinstance(s, bool) and s >= 0
                            for s in seeds):
        raise ConfigError("seeds: must be a nonempty list of integers >= 0")
    budget = float(top["budget"])
    if top["budgets"] is not None:
        raw_budgets = top["budgets"]
        if not raw_budgets or not all(
            isinstance(b, (int, float)) and not isinstance(b, bool) for b in raw_budgets
        ):
            raise ConfigError("budgets: must be a nonempty list of numbers")
        budgets = [float(b) for b in raw_budgets]
        if sorted(set(budgets)) != sorted(budgets):
            raise ConfigError("budgets: duplicate values")
        budgets = sorted(budgets)
    else:
        budgets = [budget]

    base = ExperimentConfig(
        budget=budget,
        policy=policy,
        train=train,
        retrain_frequency=top["retrain_frequency"],
        warmup=top["warmup"],
        seed=top["seed"],
        regime=top["regime"],
        oracle_filter=top["oracle_filter"],
        cost=float(top["cost"]),
    )
    try:
        base.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    return RunSpec(
        dataset_path=resolve_dataset_path(top["dataset"]),
        base=base,
        budgets=budgets,
        seeds=[int(s) for s in seeds],
        policies=policies,
        score_warmup=top["score_warmup"],
    )


def load_run_spec(path: str, overrides: list[str] | None = None) -> RunSpec:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            document = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: malformed YAML: {exc}") from exc
    if document is None:
        document = {}
    if not isinstance(document, dict):
        raise ConfigError(f"{path}: configuration root must be a mapping")
    if overrides:
        document = apply_overrides(document, list(overrides))
    return parse_run_spec(document)
