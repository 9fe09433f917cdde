"""Adam, per-task training with strict freezing, and the continual-learning driver.

Supported methods:

``taam`` / ``taam_l``
    a new modulator per task, task identity inferred from prototypes at test time
``oracle``
    identical training, true task identity at test time
``finetune``
    shared classifier only, trained with an unmasked softmax over seen classes
``joint``
    one classifier trained on the union of all tasks, evaluated once
"""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .amp import PrototypeBank, amp_propagate, compute_prototype, infer_task_id
from .backbone import BackboneWeights, extract_features, init_backbone
from .classifier import (UnifiedClassifier, class_weights, expand_classifier,
                         masked_weighted_ce, predict)
from .config import RunConfig
from .graph import normalize_adjacency
from .metrics import (average_accuracy, average_forgetting, new_accuracy_matrix,
                      task_id_accuracy)
from .nsm import NSMParams, init_nsm, nsm_backward, nsm_forward, nsm_param_count

log = logging.getLogger(__name__)


class NumericalError(ArithmeticError):
    """A loss or gradient became non-finite."""


# ---------------------------------------------------------------------------
# optimizer

@dataclass
class AdamState:
    lr: float = 0.005
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, st: AdamState) -> dict:
    """One Adam update, in place, with bias correction and coupled L2 decay."""
    if set(params) != set(grads):
        raise ValueError(f"parameter/gradient names differ: {sorted(params)} vs {sorted(grads)}")
    for name in params:
        if params[name].shape != grads[name].shape:
            raise ValueError(f"{name}: gradient shape {grads[name].shape} != "
                             f"parameter shape {params[name].shape}")
        if not np.all(np.isfinite(grads[name])):
            raise NumericalError(f"non-finite gradient for {name!r} at step {st.step + 1}")
    st.step += 1
    c1 = 1.0 - st.beta1 ** st.step
    c2 = 1.0 - st.beta2 ** st.step
    for name, p in params.items():
        g = grads[name]
        if st.weight_decay:
            g = g + st.weight_decay * p
        m = st.m.setdefault(name, np.zeros_like(p))
        v = st.v.setdefault(name, np.zeros_like(p))
        m *= st.beta1
        m += (1.0 - st.beta1) * g
        v *= st.beta2
        v += (1.0 - st.beta2) * g * g
        p -= st.lr * (m / c1) / (np.sqrt(v / c2) + st.eps)
    return params


# ---------------------------------------------------------------------------
# model state

@dataclass
class ModelState:
    backbone: BackboneWeights
    classifier: UnifiedClassifier
    bank: PrototypeBank
    nsms: list[NSMParams] = field(default_factory=list)
    checksums: dict = field(default_factory=dict)
    losses: dict = field(default_factory=dict)

    def snapshot_checksums(self) -> dict:
        return {
            "backbone": self.backbone.checksum(),
            "nsm": [p.checksum() for p in self.nsms],
            "classifier": [self.classifier.columns_checksum(self.classifier.task_classes(t))
                           for t in sorted(set(self.classifier.class_to_task.values()))],
        }

    def verify_frozen(self) -> None:
        """Raise if any artifact recorded as frozen has changed."""
        now = self.snapshot_checksums()
        before = self.checksums
        if not before:
            return
        if now["backbone"] != before["backbone"]:
            raise AssertionError("backbone weights changed")
        for kind in ("nsm", "classifier"):
            for t, (a, b) in enumerate(zip(before[kind], now[kind])):
                if a != b:
                    raise AssertionError(f"frozen {kind} of task {t} changed")


def new_model_state(feature_dim: int, cfg: RunConfig) -> ModelState:
    bw = init_backbone(cfg.seed, feature_dim, cfg.d_hid, cfg.k_prop, cfg.activation)
    return ModelState(bw, UnifiedClassifier(cfg.d_hid), PrototypeBank(cfg.amp, feature_dim))


class _FeatureCache:
    """Backbone outputs per (task, split); the backbone is frozen so these never change."""

    def __init__(self, backbone: BackboneWeights):
        self.backbone = backbone
        self._h = {}
        self._s = {}

    def operator(self, task, split):
        key = (task.task_id, split)
        if key not in self._s:
            self._s[key] = normalize_adjacency(task.split(split).graph)
        return self._s[key]

    def hidden(self, task, split):
        key = (task.task_id, split)
        if key not in self._h:
            sp_ = task.split(split)
            self._h[key] = extract_features(self.operator(task, split), sp_.features,
                                            self.backbone)
        return self._h[key]


def _decile_epochs(epochs: int) -> set[int]:
    return {max(1, round(epochs * q / 10)) for q in range(1, 11)} if epochs else set()


def _check_loss(loss: float, task_id: int, epoch: int) -> None:
    if not np.isfinite(loss):
        raise NumericalError(f"non-finite loss at task {task_id}, epoch {epoch}")


# ---------------------------------------------------------------------------
# per-task training

def train_task(task, ms: ModelState, cfg: RunConfig, features: _FeatureCache | None = None
               ) -> ModelState:
    """Learn one task.  Only the new modulator and the new classifier columns move."""
    features = features or _FeatureCache(ms.backbone)
    learned = set(ms.classifier.class_to_task)
    if learned & set(task.class_set):
        raise ValueError(f"task {task.task_id} classes already learned")
    ms.verify_frozen()

    H = features.hidden(task, "train")
    labels = np.asarray(task.train.labels)
    weights = class_weights(labels, task.class_set)
    n_old = ms.classifier.n_classes
    ms.classifier = expand_classifier(ms.classifier, task.class_set,
                                      [cfg.seed, 2, task.task_id], task.task_id)
    W_old = ms.classifier.W[:, :n_old]
    W_new = ms.classifier.W[:, n_old:].copy()
    new_cols = list(range(n_old, ms.classifier.n_classes))
    opt = AdamState(cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay)
    deciles = _decile_epochs(cfg.epochs)
    losses = []
    t0 = time.perf_counter()

    if cfg.method == "finetune":
        # whole head trains; softmax over every class seen so far
        W = ms.classifier.W.copy()
        active = list(range(ms.classifier.n_classes))
        params = {"W": W}
        for epoch in range(1, cfg.epochs + 1):
            logits = H @ W
            loss, dl = masked_weighted_ce(logits, labels, weights, active, cfg.loss_reduction)
            _check_loss(loss, task.task_id, epoch)
            adam_step(params, {"W": H.T @ dl}, opt)
            losses.append(loss)
            if epoch in deciles:
                log.info("task=%d epoch=%d/%d loss=%.6g elapsed=%.3fs", task.task_id, epoch,
                         cfg.epochs, loss, time.perf_counter() - t0)
        ms.classifier.W = W
        ms.losses[task.task_id] = losses
        return ms

    nsm = init_nsm([cfg.seed, 1, task.task_id], H.shape[1], cfg.heads, cfg.d_task,
                   cfg.rank, cfg.variant)
    params = dict(nsm.trainable())
    params["W_new"] = W_new
    for epoch in range(1, cfg.epochs + 1):
        Hmod, cache = nsm_forward(H, nsm, cfg.ln_eps)
        W = np.concatenate([W_old, W_new], axis=1)
        logits = Hmod @ W
        loss, dl = masked_weighted_ce(logits, labels, weights, task.class_set,
                                      cfg.loss_reduction)
        _check_loss(loss, task.task_id, epoch)
        _, grads = nsm_backward(cache, dl @ W.T)
        grads["W_new"] = Hmod.T @ dl[:, new_cols]
        adam_step(params, grads, opt)
        losses.append(loss)
        if epoch in deciles:
            log.info("task=%d epoch=%d/%d loss=%.6g elapsed=%.3fs", task.task_id, epoch,
                     cfg.epochs, loss, time.perf_counter() - t0)

    ms.classifier.W = np.concatenate([W_old, W_new], axis=1)
    nsm.freeze()
    ms.nsms.append(nsm)
    S = features.operator(task, "train")
    ms.bank.add(compute_prototype(amp_propagate(S, task.train.features, cfg.amp)))
    ms.checksums = ms.snapshot_checksums()
    ms.losses[task.task_id] = losses
    return ms


def _train_joint(ds, ms: ModelState, cfg: RunConfig, features: _FeatureCache) -> ModelState:
    H = np.concatenate([features.hidden(t, "train") for t in ds.tasks], axis=0)
    labels = np.concatenate([np.asarray(t.train.labels) for t in ds.tasks])
    all_classes = [c for t in ds.tasks for c in t.class_set]
    weights = class_weights(labels, all_classes)
    for t in ds.tasks:
        ms.classifier = expand_classifier(ms.classifier, t.class_set, [cfg.seed, 2, t.task_id],
                                          t.task_id)
    W = ms.classifier.W.copy()
    opt = AdamState(cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay)
    deciles = _decile_epochs(cfg.epochs)
    losses = []
    t0 = time.perf_counter()
    for epoch in range(1, cfg.epochs + 1):
        loss, dl = masked_weighted_ce(H @ W, labels, weights, all_classes, cfg.loss_reduction)
        _check_loss(loss, -1, epoch)
        adam_step({"W": W}, {"W": H.T @ dl}, opt)
        losses.append(loss)
        if epoch in deciles:
            log.info("task=joint epoch=%d/%d loss=%.6g elapsed=%.3fs", epoch, cfg.epochs,
                     loss, time.perf_counter() - t0)
    ms.classifier.W = W
    ms.losses["joint"] = losses
    return ms


# ---------------------------------------------------------------------------
# evaluation

def evaluate_task(task, ms: ModelState, cfg: RunConfig, features: _FeatureCache,
                  split: str = "test") -> tuple[float, int | None, float | None]:
    """Accuracy on one task's split.  Returns ``(accuracy, inferred_task, similarity)``;
    the last two are None for methods without task identification."""
    sp_ = task.split(split)
    H = features.hidden(task, split)
    labels = np.asarray(sp_.labels)
    if cfg.method in ("finetune", "joint"):
        pred = predict(H, ms.classifier)
        return float(np.mean(pred == labels)), None, None
    if cfg.method == "oracle":
        tid, sim = task.task_id, None
    else:
        S = features.operator(task, split)
        query = compute_prototype(amp_propagate(S, sp_.features, cfg.amp))
        tid, sim = infer_task_id(query, ms.bank)
    Hmod, _ = nsm_forward(H, ms.nsms[tid], cfg.ln_eps)
    restrict = ms.classifier.task_classes(tid) if cfg.restrict_inference else None
    pred = predict(Hmod, ms.classifier, restrict)
    return float(np.mean(pred == labels)), tid, sim


# ---------------------------------------------------------------------------
# driver

@dataclass
class RunResult:
    config: RunConfig
    accuracy: np.ndarray
    trace: list[dict]
    timings: list[dict]
    param_counts: dict
    state: ModelState
    checksum_history: list[dict] = field(default_factory=list)
    losses: dict = field(default_factory=dict)

    @property
    def aa(self) -> float:
        return average_accuracy(self.accuracy)

    @property
    def af(self) -> float | None:
        return average_forgetting(self.accuracy)

    @property
    def task_id_accuracy(self) -> float | None:
        if not self.trace:
            return None
        return task_id_accuracy([r["inferred"] for r in self.trace],
                                [r["task"] for r in self.trace])

    def metrics(self) -> dict:
        return {"AA": self.aa, "AF": self.af,
                "per_task_accuracy": self.accuracy[-1].tolist(),
                "task_id_accuracy": self.task_id_accuracy}


def count_trainable(d_task: int, rank: int, heads: int, F: int, n_new_classes: int,
                    d_hid: int, variant: str = "taam") -> int:
    """Parameters trained for one task: modulator plus the new classifier columns.

    A rank-0 generator has no modulation path, so only the head counts.
    """
    head = d_hid * n_new_classes
    if variant == "taam" and rank == 0:
        return head
    return nsm_param_count(F, heads, d_task, rank, variant) + head


def run_sequence(ds, cfg: RunConfig) -> RunResult:
    """Train every task in order, filling the accuracy matrix after each one."""
    T = ds.n_tasks
    ms = new_model_state(ds.feature_dim, cfg)
    features = _FeatureCache(ms.backbone)
    M = new_accuracy_matrix(T)
    trace, timings, history = [], [], []
    backbone_sum = ms.backbone.checksum()

    if cfg.method == "joint":
        t0 = time.perf_counter()
        _train_joint(ds, ms, cfg, features)
        t1 = time.perf_counter()
        for j, task in enumerate(ds.tasks):
            M[T - 1, j] = evaluate_task(task, ms, cfg, features)[0]
        timings.append({"task": "joint", "train_s": t1 - t0,
                        "eval_s": time.perf_counter() - t1})
    else:
        for t, task in enumerate(ds.tasks):
            t0 = time.perf_counter()
            train_task(task, ms, cfg, features)
            t1 = time.perf_counter()
            for j in range(t + 1):
                acc, tid, sim = evaluate_task(ds.tasks[j], ms, cfg, features)
                M[t, j] = acc
                if tid is not None:
                    trace.append({"after_task": t, "task": j, "inferred": tid,
                                  "similarity": sim})
            timings.append({"task": t, "train_s": t1 - t0, "eval_s": time.perf_counter() - t1})
            history.append(ms.snapshot_checksums())
            log.info("task=%d done acc_row=%s", t,
                     ",".join(f"{a:.4f}" for a in M[t, :t + 1]))

    if ms.backbone.checksum() != backbone_sum:
        raise AssertionError("backbone weights changed during the run")
    n_new = [len(t.class_set) for t in ds.tasks]
    per_task = [count_trainable(cfg.d_task, cfg.rank, cfg.heads, cfg.d_hid, n, cfg.d_hid,
                                cfg.variant) for n in n_new]
    if cfg.method in ("finetune", "joint"):
        per_task = [cfg.d_hid * n for n in n_new]
    counts = {"backbone_frozen": ms.backbone.n_params, "per_task_trainable": per_task,
              "total_stored": ms.backbone.n_params + ms.classifier.W.size
              + sum(p.n_params for p in ms.nsms)}
    return RunResult(cfg, M, trace, timings, counts, ms, history, ms.losses)


# ---------------------------------------------------------------------------
# run directory

def _fmt(x) -> str:
    return "" if np.isnan(x) else repr(float(x))


def write_accuracy_csv(M: np.ndarray, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in M:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def read_accuracy_csv(path) -> np.ndarray:
    rows = Path(path).read_text(encoding="utf-8").splitlines()
    if not rows:
        raise ValueError(f"{path}: empty accuracy matrix")
    T = len(rows)
    M = new_accuracy_matrix(T)
    for t, line in enumerate(rows):
        cells = line.split(",")
        if len(cells) != T:
            raise ValueError(f"{path}: row {t + 1} has {len(cells)} cells, expected {T}")
        for j, c in enumerate(cells):
            if c == "":
                continue
            if j > t:
                raise ValueError(f"{path}: row {t + 1} fills upper-triangle entry {j + 1}")
            val = float(c)
            if not 0.0 <= val <= 1.0:
                raise ValueError(f"{path}: row {t + 1} entry {j + 1} = {val} not in [0, 1]")
            M[t, j] = val
    return M


def _dump(obj, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def save_run(result: RunResult, out, extra_config: dict | None = None) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    _dump({**(extra_config or {}), **result.config.to_dotted()}, out / "config.json")
    write_accuracy_csv(result.accuracy, out / "accuracy_matrix.csv")
    _dump(result.metrics(), out / "metrics.json")
    _dump([{"after_task": r["after_task"], "task": r["task"], "inferred": r["inferred"],
            "similarity": r["similarity"]} for r in result.trace], out / "taskid_trace.json")
    for k, nsm in enumerate(result.state.nsms):
        (out / f"nsm_{k}.json").write_text(nsm.dumps() + "\n", encoding="utf-8")
    (out / "classifier.json").write_text(json.dumps(result.state.classifier.to_json()) + "\n",
                                         encoding="utf-8")
    if len(result.state.bank):
        result.state.bank.save(out / "prototypes.json")
    _dump({"timings": result.timings, "parameter_counts": result.param_counts,
           "checksums": result.checksum_history,
           "loss_first_last": {str(k): [v[0], v[-1]] for k, v in result.losses.items() if v}},
          out / "summary.json")
    return out
