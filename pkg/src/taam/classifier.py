"""Expanding linear classifier and the class-masked weighted cross-entropy."""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .backbone import checksum, glorot_uniform


@dataclass
class UnifiedClassifier:
    d_hid: int
    W: np.ndarray = None
    class_to_task: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.W is None:
            self.W = np.zeros((self.d_hid, 0))

    @property
    def n_classes(self) -> int:
        return self.W.shape[1]

    def task_classes(self, task_id: int) -> list[int]:
        return [c for c, t in self.class_to_task.items() if t == task_id]

    def columns_checksum(self, classes) -> str:
        return checksum(self.W[:, sorted(classes)])

    def to_json(self) -> dict:
        return {"d_hid": self.d_hid,
                "class_to_task": {str(c): t for c, t in sorted(self.class_to_task.items())},
                "W": self.W.tolist()}

    @classmethod
    def from_json(cls, d: dict) -> "UnifiedClassifier":
        W = np.asarray(d["W"], dtype=np.float64).reshape(d["d_hid"], -1)
        return cls(d["d_hid"], W, {int(c): int(t) for c, t in d["class_to_task"].items()})


def expand_classifier(cf: UnifiedClassifier, new_classes, seed, task_id: int | None = None
                      ) -> UnifiedClassifier:
    """Append freshly initialized columns for ``new_classes``.

    Existing columns are copied unchanged; new ids must continue the current
    range without gaps.
    """
    new = [int(c) for c in new_classes]
    if not new:
        raise ValueError("no classes to add")
    overlap = sorted(set(new) & set(cf.class_to_task))
    if overlap:
        raise ValueError(f"classes already present: {overlap}")
    expected = list(range(cf.n_classes, cf.n_classes + len(new)))
    if new != expected:
        raise ValueError(f"new class ids {new} are not contiguous after "
                         f"{cf.n_classes - 1} (expected {expected})")
    if task_id is None:
        task_id = max(cf.class_to_task.values(), default=-1) + 1
    rng = np.random.default_rng(seed)
    fresh = glorot_uniform(rng, cf.d_hid, len(new))
    W = np.concatenate([cf.W, fresh], axis=1)
    mapping = dict(cf.class_to_task)
    mapping.update({c: task_id for c in new})
    return UnifiedClassifier(cf.d_hid, W, mapping)


def class_weights(labels, class_set) -> dict[int, float]:
    """Inverse training frequency ``1 / N_c`` for every class in ``class_set``."""
    counts = Counter(int(y) for y in labels)
    allowed = {int(c) for c in class_set}
    stray = sorted(set(counts) - allowed)
    if stray:
        raise ValueError(f"labels {stray} are not in the class set")
    missing = sorted(c for c in allowed if counts[c] == 0)
    if missing:
        raise ValueError(f"classes {missing} have no training instances")
    return {c: 1.0 / counts[c] for c in sorted(allowed)}


def masked_weighted_ce(logits, labels, weights: dict, active_classes,
                       reduction: str = "sum"):
    """Weighted cross-entropy with the softmax restricted to ``active_classes``.

    Returns ``(loss, dlogits)``; columns outside the active set get exactly
    zero gradient.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    active = np.array(sorted(int(c) for c in active_classes), dtype=np.int64)
    pos = {c: i for i, c in enumerate(active.tolist())}
    try:
        target = np.array([pos[y] for y in labels.tolist()], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"label {exc.args[0]} is outside the active classes") from None
    w = np.array([weights[y] for y in labels.tolist()], dtype=np.float64)

    z = logits[:, active]
    zmax = z.max(axis=1, keepdims=True)
    ez = np.exp(z - zmax)
    denom = ez.sum(axis=1, keepdims=True)
    rows = np.arange(len(labels))
    nll = np.log(denom[:, 0]) + zmax[:, 0] - z[rows, target]
    scale = 1.0 if reduction == "sum" else 1.0 / max(len(labels), 1)
    if reduction not in ("sum", "mean"):
        raise ValueError(f"unknown reduction {reduction!r}")
    loss = scale * float(np.sum(w * nll))

    dz = ez / denom
    dz[rows, target] -= 1.0
    dz *= (scale * w)[:, None]
    dlogits = np.zeros_like(logits)
    dlogits[:, active] = dz
    return max(loss, 0.0), dlogits


def predict(H: np.ndarray, cf: UnifiedClassifier, restrict_to=None) -> np.ndarray:
    """Arg-max class per row, optionally over a subset of classes.

    Ties go to the smallest class id.
    """
    if restrict_to is None:
        cols = np.arange(cf.n_classes)
    else:
        cols = np.array(sorted(int(c) for c in restrict_to), dtype=np.int64)
    if cols.size == 0:
        raise ValueError("empty class restriction")
    if cols.min() < 0 or cols.max() >= cf.n_classes:
        raise ValueError("restriction contains unknown classes")
    scores = np.asarray(H) @ cf.W[:, cols]
    return cols[np.argmax(scores, axis=1)]
