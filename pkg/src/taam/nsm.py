"""Per-task feature modulator (node-attentive FiLM with low-rank generation).

For a task with embedding ``e`` the base modulations are
``M = reshape((W_A e)^T W_B, (H, 2F))``.  Each node mixes the ``H`` rows of
``M`` with attention weights ``softmax(h W_att)``, splits the result into a
scale ``gamma`` and shift ``beta``, and outputs
``gamma * LayerNorm(h) + beta + h``.

The ``taam_l`` variant replaces the low-rank generator with a directly
learned ``M``.  Gradients are written out by hand; ``nsm_backward`` is the
exact adjoint of ``nsm_forward``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .backbone import checksum, glorot_uniform

VARIANTS = ("taam", "taam_l")


@dataclass
class NSMParams:
    F: int
    heads: int
    variant: str = "taam"
    e: np.ndarray | None = None
    W_A: np.ndarray | None = None
    W_B: np.ndarray | None = None
    W_att: np.ndarray | None = None
    M_direct: np.ndarray | None = None
    frozen: bool = False

    def trainable(self) -> dict[str, np.ndarray]:
        """Name -> tensor, in a fixed order."""
        if self.variant == "taam":
            names = ("e", "W_A", "W_B", "W_att")
        else:
            names = ("M_direct", "W_att")
        return {n: getattr(self, n) for n in names}

    @property
    def n_params(self) -> int:
        return sum(t.size for t in self.trainable().values())

    def freeze(self) -> None:
        for t in self.trainable().values():
            t.setflags(write=False)
        self.frozen = True

    def checksum(self) -> str:
        return checksum(*self.trainable().values())

    def to_json(self) -> dict:
        dims = {"F": self.F, "heads": self.heads}
        if self.variant == "taam":
            dims.update(d_task=self.e.size, rank=self.W_A.shape[0])
        return {"variant": self.variant, "dims": dims,
                "tensors": {k: v.tolist() for k, v in self.trainable().items()},
                "frozen": self.frozen}

    @classmethod
    def from_json(cls, d: dict) -> "NSMParams":
        tensors = {k: np.asarray(v, dtype=np.float64) for k, v in d["tensors"].items()}
        dims = d["dims"]
        if d["variant"] == "taam":
            tensors["e"] = tensors["e"].reshape(dims["d_task"])
            tensors["W_A"] = tensors["W_A"].reshape(dims["rank"], dims["d_task"])
            tensors["W_B"] = tensors["W_B"].reshape(dims["rank"], 2 * dims["heads"] * dims["F"])
        p = cls(dims["F"], dims["heads"], d["variant"], **tensors)
        if d.get("frozen"):
            p.freeze()
        return p

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def init_nsm(seed, F: int, heads: int = 2, d_task: int = 6, rank: int = 4,
             variant: str = "taam") -> NSMParams:
    """Fresh modulator.  ``W_B``/``M_direct`` and ``W_att`` start at zero, so the
    module is an exact identity until trained."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if min(F, heads) < 1 or (variant == "taam" and min(d_task, rank) < 1):
        raise ValueError("all modulator dimensions must be >= 1")
    W_att = np.zeros((F, heads))
    if variant == "taam_l":
        return NSMParams(F, heads, variant, W_att=W_att, M_direct=np.zeros((heads, 2 * F)))
    rng = np.random.default_rng(seed)
    # e is a vector; treat it as a d_task x 1 matrix for the init bound
    e = glorot_uniform(rng, d_task, 1, shape=(d_task,))
    W_A = glorot_uniform(rng, d_task, rank, shape=(rank, d_task))
    W_B = np.zeros((rank, heads * 2 * F))
    return NSMParams(F, heads, variant, e=e, W_A=W_A, W_B=W_B, W_att=W_att)


def base_modulation(p: NSMParams) -> np.ndarray:
    """The ``H x 2F`` table of per-head ``[gamma | beta]`` rows."""
    if p.variant == "taam_l":
        return p.M_direct
    u = p.W_A @ p.e
    if p.W_B.shape != (u.size, p.heads * 2 * p.F):
        raise ValueError(f"W_B has shape {p.W_B.shape}, expected "
                         f"({u.size}, {p.heads * 2 * p.F})")
    return (u @ p.W_B).reshape(p.heads, 2 * p.F)


def layer_norm(h: np.ndarray, eps: float = 1e-5):
    """Row-wise normalization without affine terms.

    Returns ``(normalized, mean, inv_std)``; works on a vector or on the rows
    of a matrix.
    """
    h = np.asarray(h, dtype=np.float64)
    mean = h.mean(axis=-1, keepdims=True)
    centered = h - mean
    var = np.mean(centered * centered, axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    return centered * inv_std, mean, inv_std


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    ez = np.exp(z)
    return ez / ez.sum(axis=1, keepdims=True)


@dataclass
class ForwardCache:
    H: np.ndarray
    params: NSMParams
    xhat: np.ndarray
    inv_std: np.ndarray
    att: np.ndarray
    M: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray
    mean: np.ndarray = field(repr=False, default=None)
    att_logits: np.ndarray = field(repr=False, default=None)
    version: str = ""


def nsm_forward(H: np.ndarray, p: NSMParams, eps: float = 1e-5):
    """Modulate the rows of ``H``.  Returns ``(H_out, cache)``."""
    H = np.asarray(H, dtype=np.float64)
    if H.ndim != 2 or H.shape[1] != p.F:
        raise ValueError(f"input has shape {H.shape}, modulator expects {p.F} columns")
    if not np.all(np.isfinite(H)):
        raise ValueError("non-finite modulator input")
    M = base_modulation(p)
    logits = H @ p.W_att
    att = _softmax(logits)
    film = att @ M
    gamma, beta = film[:, :p.F], film[:, p.F:]
    xhat, mean, inv_std = layer_norm(H, eps)
    out = gamma * xhat + beta + H
    cache = ForwardCache(H, p, xhat, inv_std, att, M, gamma, beta, mean, logits,
                         version=p.checksum())
    return out, cache


def nsm_backward(cache: ForwardCache, dout: np.ndarray):
    """Gradients w.r.t. the input and every trainable tensor.

    Returns ``(dH, grads)`` where ``grads`` has the same keys as
    ``params.trainable()``.
    """
    p = cache.params
    dout = np.asarray(dout, dtype=np.float64)
    if dout.shape != cache.H.shape:
        raise ValueError(f"upstream gradient has shape {dout.shape}, expected {cache.H.shape}")
    if cache.version != p.checksum():
        raise ValueError("stale cache: parameters changed since the forward pass")

    # out = gamma * xhat + beta + H
    dfilm = np.concatenate([dout * cache.xhat, dout], axis=1)
    dxhat = dout * cache.gamma

    # film = att @ M
    datt = dfilm @ cache.M.T
    dM = cache.att.T @ dfilm

    # att = softmax(H @ W_att)
    dlogits = cache.att * (datt - np.sum(datt * cache.att, axis=1, keepdims=True))
    dW_att = cache.H.T @ dlogits

    # xhat = (H - mean) * inv_std, population variance
    xhat = cache.xhat
    dH_ln = cache.inv_std * (dxhat - dxhat.mean(axis=1, keepdims=True)
                             - xhat * np.mean(dxhat * xhat, axis=1, keepdims=True))
    dH = dout + dH_ln + dlogits @ p.W_att.T

    if p.variant == "taam_l":
        return dH, {"M_direct": dM, "W_att": dW_att}

    # M = reshape(u @ W_B), u = W_A @ e
    dm = dM.reshape(-1)
    u = p.W_A @ p.e
    dW_B = np.outer(u, dm)
    du = p.W_B @ dm
    dW_A = np.outer(du, p.e)
    de = p.W_A.T @ du
    return dH, {"e": de, "W_A": dW_A, "W_B": dW_B, "W_att": dW_att}


def nsm_param_count(F: int, heads: int, d_task: int, rank: int, variant: str = "taam") -> int:
    if variant == "taam_l":
        return heads * 2 * F + F * heads
    return d_task + rank * d_task + rank * heads * 2 * F + F * heads
