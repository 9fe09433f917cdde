"""Continual datasets: in-memory types, directory format, SBM task streams.

A dataset directory holds ``manifest.json`` plus, for every task and split,
an ``.edges`` file (``u<TAB>v`` per line), a ``.features.csv`` and a
``.labels.csv`` file.  Each split is its own graph with its own node ids.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .graph import SparseGraph, build_graph

SPLITS = ("train", "val", "test")


class DataError(ValueError):
    """Malformed, inconsistent or missing dataset content."""


@dataclass(frozen=True)
class TaskSplit:
    graph: SparseGraph
    features: np.ndarray
    labels: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.graph.n_nodes


@dataclass(frozen=True)
class TaskData:
    task_id: int
    class_set: tuple[int, ...]
    train: TaskSplit
    val: TaskSplit
    test: TaskSplit

    def split(self, name: str) -> TaskSplit:
        return getattr(self, name)


@dataclass(frozen=True)
class ContinualDataset:
    tasks: tuple[TaskData, ...]
    feature_dim: int
    name: str = "dataset"
    seed: int | None = None
    generator: dict | None = None

    @property
    def n_tasks(self) -> int:
        return len(self.tasks)

    @property
    def n_classes(self) -> int:
        return sum(len(t.class_set) for t in self.tasks)


@dataclass
class ValidationReport:
    tasks: list[dict] = field(default_factory=list)
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def format(self) -> str:
        lines = []
        for t in self.tasks:
            parts = " ".join(f"{s}={t[s]['nodes']}n/{t[s]['edges']}e" for s in SPLITS)
            lines.append(f"task {t['task_id']}: classes={t['classes']} {parts}")
        lines += [f"VIOLATION: {v}" for v in self.violations]
        lines.append("valid" if self.ok else f"{len(self.violations)} violation(s)")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# validation

def validate_dataset(ds: ContinualDataset) -> ValidationReport:
    """Check every structural invariant; violations are returned, not raised."""
    report = ValidationReport()
    v = report.violations
    if not ds.tasks:
        v.append("dataset has no tasks")
    seen: dict[int, int] = {}
    next_id = 0
    for pos, task in enumerate(ds.tasks):
        if task.task_id != pos:
            v.append(f"task at position {pos} has task_id {task.task_id}")
        if not task.class_set:
            v.append(f"task {task.task_id}: empty class set")
        overlap = False
        for c in task.class_set:
            if c in seen:
                overlap = True
                v.append(f"class sets not disjoint: class {c} in tasks "
                         f"{seen[c]} and {task.task_id}")
            seen[c] = task.task_id
        expected = tuple(range(next_id, next_id + len(task.class_set)))
        if tuple(task.class_set) != expected and not overlap:
            v.append(f"task {task.task_id}: class ids {list(task.class_set)} are not "
                     f"contiguous in task order (expected {list(expected)})")
        next_id += len(task.class_set)

        entry = {"task_id": task.task_id, "classes": list(task.class_set)}
        allowed = set(task.class_set)
        splits = [task.split(s) for s in SPLITS]
        if len({id(s.graph) for s in splits}) != len(splits):
            v.append(f"task {task.task_id}: splits share a graph object")
        for name, split in zip(SPLITS, splits):
            entry[name] = {"nodes": split.n_nodes, "edges": split.graph.n_edges}
            feats = np.asarray(split.features)
            if feats.ndim != 2 or feats.shape[0] != split.n_nodes:
                v.append(f"task {task.task_id} {name}: features shape {feats.shape} "
                         f"does not match {split.n_nodes} nodes")
            elif feats.shape[1] != ds.feature_dim:
                v.append(f"task {task.task_id} {name}: feature dim {feats.shape[1]} "
                         f"!= {ds.feature_dim}")
            elif not np.all(np.isfinite(feats)):
                v.append(f"task {task.task_id} {name}: non-finite features")
            labels = np.asarray(split.labels)
            if labels.shape != (split.n_nodes,):
                v.append(f"task {task.task_id} {name}: {labels.shape[0] if labels.ndim else 0} "
                         f"labels for {split.n_nodes} nodes")
            bad = sorted(set(labels.tolist()) - allowed)
            if bad:
                v.append(f"task {task.task_id} {name}: labels {bad} outside class set "
                         f"{list(task.class_set)}")
        report.tasks.append(entry)
    return report


def _raise_if_invalid(ds: ContinualDataset) -> ContinualDataset:
    report = validate_dataset(ds)
    if not report.ok:
        raise DataError("; ".join(report.violations))
    return ds


# ---------------------------------------------------------------------------
# directory format

def _split_stem(task_id: int, split: str) -> str:
    return f"task{task_id}_{split}"


def _fmt(x: float) -> str:
    return repr(float(x))


def save_dataset(ds: ContinualDataset, path) -> Path:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    tasks = []
    for task in ds.tasks:
        splits = {}
        for name in SPLITS:
            split = task.split(name)
            stem = _split_stem(task.task_id, name)
            files = {"edges": f"{stem}.edges",
                     "features": f"{stem}.features.csv",
                     "labels": f"{stem}.labels.csv"}
            with open(root / files["edges"], "w", encoding="utf-8", newline="\n") as fh:
                fh.writelines(f"{u}\t{v}\n" for u, v in split.graph.edge_list())
            with open(root / files["features"], "w", encoding="utf-8", newline="\n") as fh:
                fh.writelines(",".join(map(_fmt, row)) + "\n" for row in split.features)
            with open(root / files["labels"], "w", encoding="utf-8", newline="\n") as fh:
                fh.writelines(f"{int(y)}\n" for y in split.labels)
            splits[name] = {**files, "n_nodes": split.n_nodes}
        tasks.append({"task_id": task.task_id, "class_set": list(task.class_set),
                      "splits": splits})
    manifest = {"name": ds.name, "seed": ds.seed, "feature_dim": ds.feature_dim,
                "generator": ds.generator, "tasks": tasks}
    with open(root / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return root


def _read_lines(path: Path) -> list[str]:
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    with open(path, encoding="utf-8") as fh:
        return [ln.rstrip("\r\n") for ln in fh]


def _load_split(root: Path, spec: dict, feature_dim: int) -> TaskSplit:
    try:
        n = int(spec["n_nodes"])
        files = {k: root / spec[k] for k in ("edges", "features", "labels")}
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed split entry in manifest: {spec!r}") from exc

    edges = []
    for i, line in enumerate(_read_lines(files["edges"]), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        try:
            u, v = (int(p) for p in parts)
        except ValueError:
            raise DataError(f"{files['edges']}: row {i}: expected 'u<TAB>v', got {line!r}")
        if not (0 <= u < n and 0 <= v < n):
            raise DataError(f"{files['edges']}: row {i}: node id out of range [0, {n})")
        edges.append((u, v))

    rows = _read_lines(files["features"])
    if len(rows) != n:
        raise DataError(f"{files['features']}: {len(rows)} rows, expected {n}")
    feats = np.empty((n, feature_dim), dtype=np.float64)
    for i, line in enumerate(rows, 1):
        cells = line.split(",")
        if len(cells) != feature_dim:
            raise DataError(f"{files['features']}: row {i}: {len(cells)} columns, "
                            f"expected {feature_dim}")
        try:
            feats[i - 1] = [float(c) for c in cells]
        except ValueError:
            raise DataError(f"{files['features']}: row {i}: non-numeric value")

    lab_rows = [ln for ln in _read_lines(files["labels"]) if ln.strip()]
    if len(lab_rows) != n:
        raise DataError(f"{files['labels']}: {len(lab_rows)} labels, expected {n}")
    try:
        labels = np.array([int(x) for x in lab_rows], dtype=np.int64)
    except ValueError:
        raise DataError(f"{files['labels']}: non-integer label")
    return TaskSplit(build_graph(edges, n), feats, labels)


def load_dataset(path) -> ContinualDataset:
    """Load and validate a dataset directory."""
    root = Path(path)
    man_path = root / "manifest.json"
    if not man_path.is_file():
        raise DataError(f"missing file: {man_path}")
    try:
        manifest = json.loads(man_path.read_text(encoding="utf-8"))
        feature_dim = int(manifest["feature_dim"])
        task_specs = manifest["tasks"]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed manifest {man_path}: {exc}") from exc
    tasks = []
    for spec in task_specs:
        try:
            splits = {s: _load_split(root, spec["splits"][s], feature_dim) for s in SPLITS}
            task = TaskData(int(spec["task_id"]), tuple(int(c) for c in spec["class_set"]),
                            **splits)
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed task entry in manifest: {exc}") from exc
        tasks.append(task)
    ds = ContinualDataset(tuple(tasks), feature_dim, name=manifest.get("name", root.name),
                          seed=manifest.get("seed"), generator=manifest.get("generator"))
    return _raise_if_invalid(ds)


# ---------------------------------------------------------------------------
# generator

@dataclass(frozen=True)
class SBMConfig:
    n_tasks: int = 5
    classes_per_task: int = 2
    nodes_per_class: int = 40
    p_in: float = 0.2
    p_out: float = 0.02
    feature_dim: int = 32
    sep: float = 3.0
    noise: float = 1.0
    name: str = "sbm"

    def validate(self):
        if self.n_tasks < 1:
            raise DataError("n_tasks must be >= 1")
        if self.classes_per_task < 2:
            raise DataError("classes_per_task must be >= 2")
        if self.nodes_per_class < 1:
            raise DataError("nodes_per_class must be >= 1")
        if not (0.0 <= self.p_out <= 1.0 and 0.0 <= self.p_in <= 1.0):
            raise DataError("edge probabilities must lie in [0, 1]")
        if self.p_in < self.p_out:
            raise DataError(f"p_in ({self.p_in}) must not be below p_out ({self.p_out})")
        if self.p_in == self.p_out and self.p_in != 0.0:
            raise DataError("p_in must exceed p_out (both zero is the only equal case allowed)")
        if self.feature_dim < 1:
            raise DataError("feature_dim must be >= 1")
        if self.sep < 0 or self.noise < 0:
            raise DataError("sep and noise must be non-negative")

    @classmethod
    def from_dict(cls, d: dict) -> "SBMConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known - {"seed"}
        if unknown:
            raise DataError(f"unknown SBM config keys: {sorted(unknown)}")
        try:
            cfg = cls(**{k: v for k, v in d.items() if k in known})
        except TypeError as exc:
            raise DataError(str(exc)) from exc
        return cfg


def _sbm_split(rng: np.random.Generator, cfg: SBMConfig, means: np.ndarray,
               class_ids) -> TaskSplit:
    k, m = len(class_ids), cfg.nodes_per_class
    n = k * m
    block = np.repeat(np.arange(k), m)
    draws = rng.random((n, n))
    prob = np.where(block[:, None] == block[None, :], cfg.p_in, cfg.p_out)
    upper = np.triu(draws < prob, k=1)
    u, v = np.nonzero(upper)
    feats = means[block] + cfg.noise * rng.standard_normal((n, cfg.feature_dim))
    labels = np.asarray(class_ids, dtype=np.int64)[block]
    return TaskSplit(build_graph(np.stack([u, v], 1), n), feats, labels)


def generate_sbm_sequence(cfg: SBMConfig, seed: int) -> ContinualDataset:
    """Seeded stream of tasks, each with three independent SBM subgraphs.

    Blocks are the task's classes.  Node features are the class mean (a random
    unit direction scaled by ``cfg.sep``) plus Gaussian noise; the class means
    are shared by the train, val and test graphs of a task.
    """
    cfg.validate()
    rng = np.random.default_rng(seed)
    tasks = []
    next_class = 0
    for t in range(cfg.n_tasks):
        class_ids = tuple(range(next_class, next_class + cfg.classes_per_task))
        next_class += cfg.classes_per_task
        dirs = rng.standard_normal((cfg.classes_per_task, cfg.feature_dim))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        means = cfg.sep * dirs
        splits = {s: _sbm_split(rng, cfg, means, class_ids) for s in SPLITS}
        tasks.append(TaskData(t, class_ids, **splits))
    return ContinualDataset(tuple(tasks), cfg.feature_dim, name=cfg.name, seed=seed,
                            generator=asdict(cfg))
