"""Anchored multi-hop prototypes and nearest-prototype task identification.

Features are diffused with a teleport anchor back to the input,
``Z <- (1 - alpha) S Z + alpha H0``, snapshots at selected hops are
concatenated, and a task is summarised by the mean row.  A query graph is
assigned to the stored prototype with the highest cosine similarity.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import PropagationOperator, propagate


@dataclass(frozen=True)
class AMPConfig:
    alpha: float = 0.1
    hop_set: tuple[int, ...] = (1, 2, 4)

    def __post_init__(self):
        hops = tuple(int(h) for h in self.hop_set)
        if not hops:
            raise ValueError("hop_set must be non-empty")
        if any(h < 0 for h in hops):
            raise ValueError("hops must be non-negative")
        if len(set(hops)) != len(hops) or list(hops) != sorted(hops):
            raise ValueError("hop_set must be strictly increasing")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        object.__setattr__(self, "hop_set", hops)

    @property
    def k_max(self) -> int:
        return max(self.hop_set)


@dataclass(frozen=True)
class Prototype:
    vector: np.ndarray
    task_id: int | None = None
    hop_set: tuple[int, ...] | None = None
    feature_dim: int | None = None


@dataclass
class PrototypeBank:
    config: AMPConfig
    feature_dim: int | None = None
    prototypes: list[Prototype] = field(default_factory=list)

    def __len__(self):
        return len(self.prototypes)

    def add(self, proto: Prototype) -> None:
        vec = np.array(proto.vector, dtype=np.float64)
        if self.prototypes and vec.shape != self.prototypes[0].vector.shape:
            raise ValueError("prototype length differs from the bank's")
        if not np.all(np.isfinite(vec)):
            raise ValueError("prototype has non-finite entries")
        vec.setflags(write=False)
        self.prototypes.append(Prototype(vec, len(self.prototypes),
                                         self.config.hop_set, self.feature_dim))

    def matrix(self) -> np.ndarray:
        return np.stack([p.vector for p in self.prototypes])

    def to_json(self) -> dict:
        return {"alpha": self.config.alpha, "hop_set": list(self.config.hop_set),
                "feature_dim": self.feature_dim,
                "prototypes": [p.vector.tolist() for p in self.prototypes]}

    @classmethod
    def from_json(cls, d: dict) -> "PrototypeBank":
        bank = cls(AMPConfig(d["alpha"], tuple(d["hop_set"])), d.get("feature_dim"))
        for vec in d["prototypes"]:
            bank.add(Prototype(np.asarray(vec, dtype=np.float64)))
        return bank

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "PrototypeBank":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def amp_propagate(S: PropagationOperator, H0: np.ndarray, cfg: AMPConfig) -> np.ndarray:
    """Concatenate the anchored diffusion states at every hop in ``cfg.hop_set``."""
    H0 = np.asarray(H0, dtype=np.float64)
    if H0.ndim != 2 or H0.shape[0] != S.n_nodes:
        raise ValueError(f"features have shape {H0.shape}, graph has {S.n_nodes} nodes")
    wanted = set(cfg.hop_set)
    collected = [H0] if 0 in wanted else []
    Z = H0
    for i in range(1, cfg.k_max + 1):
        Z = (1.0 - cfg.alpha) * propagate(S, Z) + cfg.alpha * H0
        if i in wanted:
            collected.append(Z)
    return np.concatenate(collected, axis=1)


def compute_prototype(H_amp: np.ndarray, nodes=None) -> Prototype:
    """Mean of the selected rows (all rows when ``nodes`` is None)."""
    H_amp = np.asarray(H_amp, dtype=np.float64)
    if nodes is None:
        rows = H_amp
    else:
        idx = np.asarray(list(nodes) if not isinstance(nodes, np.ndarray) else nodes,
                         dtype=np.int64)
        if idx.size == 0:
            raise ValueError("prototype needs at least one node")
        if idx.min() < 0 or idx.max() >= H_amp.shape[0]:
            raise ValueError("node index out of range")
        rows = H_amp[idx]
    if rows.shape[0] == 0:
        raise ValueError("prototype needs at least one node")
    return Prototype(rows.mean(axis=0))


def ls_propagate(S: PropagationOperator, H0: np.ndarray, k: int) -> np.ndarray:
    """Plain Laplacian smoothing ``S^k H0``."""
    Z = np.asarray(H0, dtype=np.float64)
    for _ in range(k):
        Z = propagate(S, Z)
    return Z


def ls_prototype(S: PropagationOperator, H0: np.ndarray, k: int, nodes=None) -> Prototype:
    """Single-scale, un-anchored baseline prototype: mean rows of ``S^k H0``."""
    return compute_prototype(ls_propagate(S, H0, k), nodes)


_DEGENERATE = 1e-12


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < _DEGENERATE or nb < _DEGENERATE:
        warnings.warn("cosine similarity of a (near) zero vector; returning 0",
                      RuntimeWarning, stacklevel=2)
        return 0.0
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def infer_task_id(query, bank: PrototypeBank) -> tuple[int, float]:
    """Most similar stored prototype; ties go to the smaller task id."""
    if not len(bank):
        raise ValueError("prototype bank is empty")
    q = query.vector if isinstance(query, Prototype) else np.asarray(query)
    best, best_sim = 0, -np.inf
    for p in bank.prototypes:
        if q.shape != p.vector.shape:
            raise ValueError(f"query length {q.size} != prototype length {p.vector.size}")
        sim = cosine_similarity(q, p.vector)
        if sim > best_sim:
            best, best_sim = p.task_id, sim
    return best, best_sim
