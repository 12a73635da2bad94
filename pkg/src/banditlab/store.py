"""Persistence: JSONL datasets, CSV reward groups, human-CSV import, config.

All writes are atomic (write to a temp file in the same directory, then
rename), so a crash can never leave a half-written file that parses.
External files carry the task's external arm labels (1-based for the
two-armed task, 0-based for the four-armed one); conversion happens here.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import re
import tempfile
from pathlib import Path
from typing import Iterable

import numpy as np
import yaml

from .domain import (
    Dataset,
    EnvSpec,
    RewardGroup,
    Step,
    Trajectory,
    Variant,
    group_by_subject,
    validate_dataset,
)
from .learner import LearnerConfig

SCHEMA_VERSION = 1


class StoreError(ValueError):
    pass


def atomic_write(path: str | Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def config_fingerprint(
    env_spec: EnvSpec, learner_cfg: LearnerConfig | None = None, seeds: Iterable[int] | None = None
) -> str:
    payload = {
        "env_spec": env_spec.to_dict(),
        "learner": learner_cfg.to_dict() if learner_cfg else None,
        "seeds": list(seeds) if seeds is not None else None,
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def _num(x: float) -> float | int:
    return int(x) if float(x).is_integer() else float(x)


def _traj_record(traj: Trajectory, spec: EnvSpec) -> dict:
    base = spec.external_arm_base
    env: dict = {"variant": spec.variant.value}
    if traj.true_means is not None:
        env["true_means"] = list(traj.true_means)
    if traj.group_id is not None:
        env["group_id"] = traj.group_id
    return {
        "schema_version": SCHEMA_VERSION,
        "subject_id": traj.subject_id,
        "trial_index": traj.trial_index,
        "env": env,
        "steps": [
            {"round": s.round, "choice": s.choice + base, "reward": _num(s.reward)}
            for s in traj.steps
        ],
    }


def dataset_lines(dataset: Dataset) -> list[str]:
    """Header line plus one JSON line per trajectory."""
    header = {
        "schema_version": SCHEMA_VERSION,
        "kind": "banditlab.dataset",
        "env_spec": dataset.env_spec.to_dict(),
        "agent_label": dataset.agent_label,
        "config_fingerprint": config_fingerprint(dataset.env_spec),
        "n_trajectories": len(dataset.trajectories),
        "meta": dataset.meta,
    }
    lines = [json.dumps(header)]
    lines += [json.dumps(_traj_record(t, dataset.env_spec)) for t in dataset.trajectories]
    return lines


def export_dataset(dataset: Dataset, path: str | Path) -> None:
    atomic_write(path, "\n".join(dataset_lines(dataset)) + "\n")


def import_dataset(path: str | Path, strict: bool = True) -> Dataset:
    with open(path) as fh:
        raw_lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not raw_lines:
        raise StoreError(f"{path}: empty file")
    header = _parse_line(raw_lines[0], 1)
    if header.get("kind") != "banditlab.dataset":
        raise StoreError(f"{path}: line 1: not a dataset header")
    if header.get("schema_version") != SCHEMA_VERSION:
        raise StoreError(f"{path}: unsupported schema_version {header.get('schema_version')}")
    spec = EnvSpec.from_dict(header["env_spec"])
    base = spec.external_arm_base
    trajectories = []
    for i, ln in enumerate(raw_lines[1:], start=2):
        rec = _parse_line(ln, i)
        try:
            steps = tuple(
                Step(round=int(s["round"]), choice=int(s["choice"]) - base, reward=float(s["reward"]))
                for s in rec["steps"]
            )
            env = rec["env"]
            means = env.get("true_means")
            trajectories.append(
                Trajectory(
                    subject_id=str(rec["subject_id"]),
                    trial_index=int(rec["trial_index"]),
                    steps=steps,
                    true_means=tuple(float(x) for x in means) if means is not None else None,
                    group_id=env.get("group_id"),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise StoreError(f"{path}: line {i}: missing or malformed field: {exc}") from exc
    ds = Dataset(
        env_spec=spec,
        agent_label=header.get("agent_label", "unknown"),
        trajectories=trajectories,
        meta=header.get("meta", {}),
    )
    violations = validate_dataset(ds)
    if violations and strict:
        raise StoreError(f"{path}: invalid dataset: " + "; ".join(violations[:10]))
    return ds


def _parse_line(line: str, lineno: int) -> dict:
    try:
        return json.loads(line)
    except json.JSONDecodeError as exc:
        raise StoreError(f"line {lineno}: invalid JSON: {exc}") from exc


def import_human_csv(path: str | Path, mapping: dict) -> Dataset:
    """Normalize an externally recorded CSV into a Dataset.

    mapping:
      env: stationary2 | restless4
      columns: {subject, trial, round, choice, reward, means?: [col, ...], group?}
      arm_base: optional override of the external arm label base
      horizon / games_per_session: optional spec overrides
    """
    from .domain import restless4_spec, stationary2_spec

    env_name = mapping.get("env")
    cols = mapping.get("columns", {})
    required = ["subject", "trial", "round", "choice", "reward"]
    missing = [k for k in required if k not in cols]
    if missing:
        raise StoreError(f"mapping lacks required columns: {', '.join(missing)}")
    if env_name == Variant.STATIONARY2.value:
        if "means" not in cols or len(cols["means"]) != 2:
            raise StoreError("stationary mapping needs columns.means with 2 entries")
    elif env_name == Variant.RESTLESS4.value:
        if "group" not in cols:
            raise StoreError("restless mapping needs columns.group")
    else:
        raise StoreError(f"unknown env in mapping: {env_name}")

    rows_by_trial: dict[tuple[str, str], list[dict]] = {}
    order: list[tuple[str, str]] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for lineno, row in enumerate(reader, start=2):
            key = (str(row[cols["subject"]]), str(row[cols["trial"]]))
            if key not in rows_by_trial:
                rows_by_trial[key] = []
                order.append(key)
            rows_by_trial[key].append(row)

    horizons = {len(v) for v in rows_by_trial.values()}
    if len(horizons) > 1:
        raise StoreError(f"inconsistent horizons across trials: {sorted(horizons)}")
    horizon = horizons.pop() if horizons else 0

    if env_name == Variant.STATIONARY2.value:
        spec = stationary2_spec(
            horizon=mapping.get("horizon", horizon),
            games_per_session=mapping.get("games_per_session", 20),
        )
    else:
        spec = restless4_spec(horizon=mapping.get("horizon", horizon))
    base = int(mapping.get("arm_base", spec.external_arm_base))

    trajectories = []
    for idx, key in enumerate(order):
        rows = sorted(rows_by_trial[key], key=lambda r: int(r[cols["round"]]))
        steps = tuple(
            Step(
                round=int(r[cols["round"]]),
                choice=int(r[cols["choice"]]) - base,
                reward=float(r[cols["reward"]]),
            )
            for r in rows
        )
        means = None
        group_id = None
        if env_name == Variant.STATIONARY2.value:
            means = tuple(float(rows[0][c]) for c in cols["means"])
        else:
            group_id = int(rows[0][cols["group"]])
            if group_id not in (1, 2, 3):
                raise StoreError(f"trial {key}: group id {group_id} outside {{1,2,3}}")
        trajectories.append(
            Trajectory(
                subject_id=key[0],
                trial_index=idx,
                steps=steps,
                true_means=means,
                group_id=group_id,
            )
        )
    ds = Dataset(env_spec=spec, agent_label=str(mapping.get("label", "human")), trajectories=trajectories)
    violations = validate_dataset(ds)
    if violations:
        raise StoreError("imported CSV is invalid: " + "; ".join(violations[:10]))
    return ds


def _matrix_to_csv(matrix: np.ndarray) -> str:
    lines = [",".join(repr(float(v)) for v in row) for row in matrix]
    return "\n".join(lines) + "\n"


def _matrix_from_csv(path: Path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for ln in fh:
            if ln.strip():
                rows.append([float(x) for x in ln.strip().split(",")])
    return np.asarray(rows)


def _sibling(base: Path, suffix: str) -> Path:
    return base.parent / (base.name + suffix)


def export_group(group: RewardGroup, base_path: str | Path, spec: EnvSpec | None = None) -> None:
    base = Path(base_path)
    atomic_write(_sibling(base, ".means.csv"), _matrix_to_csv(group.means))
    atomic_write(_sibling(base, ".rewards.csv"), _matrix_to_csv(group.rewards))
    sidecar = {
        "schema_version": SCHEMA_VERSION,
        "group_id": group.group_id,
        "seed": group.seed,
        "env_spec": spec.to_dict() if spec else None,
        "digest": group.digest(),
    }
    atomic_write(_sibling(base, ".json"), json.dumps(sidecar, indent=2) + "\n")


def import_group(base_path: str | Path) -> tuple[RewardGroup, dict]:
    base = Path(base_path)
    with open(_sibling(base, ".json")) as fh:
        sidecar = json.load(fh)
    means = _matrix_from_csv(_sibling(base, ".means.csv"))
    rewards = _matrix_from_csv(_sibling(base, ".rewards.csv"))
    if means.shape != rewards.shape:
        raise StoreError(f"{base}: means shape {means.shape} != rewards shape {rewards.shape}")
    spec_dict = sidecar.get("env_spec")
    if spec_dict and means.shape != (spec_dict["n_arms"], spec_dict["horizon"]):
        raise StoreError(
            f"{base}: matrix shape {means.shape} does not match spec "
            f"({spec_dict['n_arms']}, {spec_dict['horizon']})"
        )
    group = RewardGroup(
        group_id=int(sidecar["group_id"]), means=means, rewards=rewards, seed=int(sidecar["seed"])
    )
    return group, sidecar


_ENV_PATTERN = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}")


def _resolve_env(value):
    if isinstance(value, str):
        def sub(m: re.Match) -> str:
            name = m.group(1)
            if name not in os.environ:
                raise StoreError(f"config references unset environment variable {name}")
            return os.environ[name]

        return _ENV_PATTERN.sub(sub, value)
    if isinstance(value, dict):
        return {k: _resolve_env(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_resolve_env(v) for v in value]
    return value


def load_config(path: str | Path) -> dict:
    """YAML config; ${VAR} in string values is replaced from the environment
    (secrets never live in the file)."""
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise StoreError(f"{path}: config root must be a mapping")
    return _resolve_env(data)


def rebuild_subjects(dataset: Dataset) -> Dataset:
    dataset.subjects = group_by_subject(dataset.trajectories)
    return dataset
