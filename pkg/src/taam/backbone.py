"""Frozen, randomly initialized SGC feature extractor."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .graph import PropagationOperator, SparseGraph, normalize_adjacency, propagate


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int,
                   shape=None) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape or (fan_in, fan_out))


def checksum(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(a)
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()


@dataclass(frozen=True)
class BackboneWeights:
    W1: np.ndarray
    W2: np.ndarray
    k_prop: int = 2
    seed: int = 0
    activation: str = "relu"
    frozen: bool = True

    def __post_init__(self):
        self.W1.setflags(write=False)
        self.W2.setflags(write=False)

    @property
    def f_in(self) -> int:
        return self.W1.shape[0]

    @property
    def d_hid(self) -> int:
        return self.W2.shape[1]

    @property
    def n_params(self) -> int:
        return self.W1.size + self.W2.size

    def checksum(self) -> str:
        return checksum(self.W1, self.W2)


def init_backbone(seed: int, f_in: int, d_hid: int = 256, k_prop: int = 2,
                  activation: str = "relu") -> BackboneWeights:
    if f_in < 1 or d_hid < 1:
        raise ValueError("f_in and d_hid must be >= 1")
    if k_prop < 0:
        raise ValueError("k_prop must be >= 0")
    if activation not in ("relu", "none"):
        raise ValueError(f"unknown activation {activation!r}")
    rng = np.random.default_rng([seed, 0x5C6])
    W1 = glorot_uniform(rng, f_in, d_hid)
    W2 = glorot_uniform(rng, d_hid, d_hid)
    return BackboneWeights(W1, W2, k_prop=k_prop, seed=seed, activation=activation)


def extract_features(g: SparseGraph | PropagationOperator, X: np.ndarray,
                     bw: BackboneWeights) -> np.ndarray:
    """``act((S^k X) W1) W2`` with the frozen weights, no bias."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != bw.f_in:
        raise ValueError(f"features have shape {X.shape}, backbone expects {bw.f_in} columns")
    S = normalize_adjacency(g) if isinstance(g, SparseGraph) else g
    Z = X
    for _ in range(bw.k_prop):
        Z = propagate(S, Z)
    Z = Z @ bw.W1
    if bw.activation == "relu":
        Z = np.maximum(Z, 0.0)
    return Z @ bw.W2
