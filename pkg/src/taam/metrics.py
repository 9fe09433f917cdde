"""Continual-learning metrics and prototype separability diagnostics."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .amp import AMPConfig, amp_propagate, cosine_similarity, ls_propagate
from .graph import dirichlet_energy, normalize_adjacency

EMBEDDINGS = ("raw", "ls", "amp")


def new_accuracy_matrix(T: int) -> np.ndarray:
    """``T x T`` matrix; undefined (upper-triangle or unfilled) entries are NaN."""
    return np.full((T, T), np.nan)


def _final_row(M) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise ValueError(f"accuracy matrix must be square and non-empty, got {M.shape}")
    row = M[-1]
    if np.any(np.isnan(row)):
        raise ValueError("final row of the accuracy matrix is incomplete")
    return row


def average_accuracy(M) -> float:
    """Mean accuracy over all tasks after the last task."""
    return float(np.mean(_final_row(M)))


def average_forgetting(M) -> float | None:
    """Mean drop from just-learned accuracy to final accuracy over tasks 1..T-1.

    Positive means forgetting.  ``None`` when undefined (a single task, or the
    diagonal was never filled, as in joint training).
    """
    M = np.asarray(M, dtype=np.float64)
    final = _final_row(M)
    T = M.shape[0]
    if T < 2:
        return None
    peak = np.diag(M)[:-1]
    if np.any(np.isnan(peak)):
        return None
    return float(np.mean(peak - final[:-1]))


def task_id_accuracy(inferred, truth) -> float:
    inferred, truth = list(inferred), list(truth)
    if len(inferred) != len(truth):
        raise ValueError(f"length mismatch: {len(inferred)} vs {len(truth)}")
    if not truth:
        raise ValueError("no task-ID predictions")
    return sum(a == b for a, b in zip(inferred, truth)) / len(truth)


def error_bound(d2: float, v_k: float, v_j: float) -> float:
    """``exp(-D^2 / (8 max(V_k, V_j)))``, with the variance floored at 1e-12.

    Underflow is clamped to the smallest normal double so the bound stays
    strictly positive.
    """
    with np.errstate(over="ignore"):
        val = np.exp(-d2 / (8.0 * max(v_k, v_j, 1e-12)))
    return float(max(val, np.finfo(np.float64).tiny))


@dataclass
class SeparabilityReport:
    embed: str
    v_intra: list[float]
    d_inter: np.ndarray
    p_error: np.ndarray
    energy_raw: list[float]
    energy_embedded: list[float]
    prototypes: list[np.ndarray] = field(repr=False, default_factory=list)

    @property
    def min_separation_ratio(self) -> float:
        """Smallest ``D^2 / max(V)`` over task pairs (inf with fewer than two tasks)."""
        T = len(self.v_intra)
        ratios = [self.d_inter[k, j] ** 2 / max(self.v_intra[k], self.v_intra[j], 1e-12)
                  for k in range(T) for j in range(k + 1, T)]
        return min(ratios, default=float("inf"))

    def to_json(self) -> dict:
        return {"embed": self.embed, "v_intra": list(self.v_intra),
                "d_inter": self.d_inter.tolist(), "p_error_bound": self.p_error.tolist(),
                "dirichlet_energy_raw": list(self.energy_raw),
                "dirichlet_energy_embedded": list(self.energy_embedded),
                "min_separation_ratio": self.min_separation_ratio}


def embed_split(split, embed: str, amp_cfg: AMPConfig, ls_k: int, S=None) -> np.ndarray:
    """Node embedding of one split under ``raw``, ``ls`` or ``amp``."""
    if embed not in EMBEDDINGS:
        raise ValueError(f"unknown embedding {embed!r}")
    X = np.asarray(split.features, dtype=np.float64)
    if embed == "raw":
        return X
    S = normalize_adjacency(split.graph) if S is None else S
    if embed == "ls":
        return ls_propagate(S, X, ls_k)
    return amp_propagate(S, X, amp_cfg)


def separability_report(ds, embed: str = "amp", amp_cfg: AMPConfig | None = None,
                        ls_k: int = 2, split: str = "train") -> SeparabilityReport:
    amp_cfg = amp_cfg or AMPConfig()
    if not ds.tasks:
        raise ValueError("dataset has no tasks")
    protos, v_intra, e_raw, e_emb = [], [], [], []
    for task in ds.tasks:
        sp_ = task.split(split)
        S = normalize_adjacency(sp_.graph)
        Z = embed_split(sp_, embed, amp_cfg, ls_k, S)
        p = Z.mean(axis=0)
        protos.append(p)
        v_intra.append(float(np.mean(np.sum((Z - p) ** 2, axis=1))))
        e_raw.append(dirichlet_energy(S, sp_.features))
        e_emb.append(dirichlet_energy(S, Z))
    T = len(protos)
    d = np.zeros((T, T))
    pe = np.ones((T, T))
    for k in range(T):
        for j in range(k + 1, T):
            d2 = float(np.sum((protos[k] - protos[j]) ** 2))
            d[k, j] = d[j, k] = np.sqrt(d2)
            pe[k, j] = pe[j, k] = error_bound(d2, v_intra[k], v_intra[j])
    return SeparabilityReport(embed, v_intra, d, pe, e_raw, e_emb, protos)


def simulated_task_id_accuracy(ds, embed: str = "amp", amp_cfg: AMPConfig | None = None,
                               ls_k: int = 2) -> tuple[float, list[int]]:
    """Nearest-prototype task identification of every test split against
    prototypes built from the train splits."""
    amp_cfg = amp_cfg or AMPConfig()
    bank = [embed_split(t.train, embed, amp_cfg, ls_k).mean(axis=0) for t in ds.tasks]
    inferred = []
    for task in ds.tasks:
        q = embed_split(task.test, embed, amp_cfg, ls_k).mean(axis=0)
        sims = [cosine_similarity(q, p) for p in bank]
        inferred.append(int(np.argmax(sims)))
    return task_id_accuracy(inferred, [t.task_id for t in ds.tasks]), inferred
