"""Command-line entry point: ``taam generate|train|eval|diagnose``.

Exit codes: 0 success, 1 usage error, 2 data or validation error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .amp import AMPConfig
from .config import METHODS, ConfigError, RunConfig, load_config_file
from .data import DataError, SBMConfig, generate_sbm_sequence, load_dataset, save_dataset, validate_dataset
from .metrics import (EMBEDDINGS, average_accuracy, average_forgetting, separability_report,
                      simulated_task_id_accuracy, task_id_accuracy)
from .training import NumericalError, read_accuracy_csv, run_sequence, save_run

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3
METRIC_TOL = 1e-12


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _resolve_seed(flag, from_config=None) -> int:
    if flag is not None:
        return flag
    if from_config is not None:
        return int(from_config)
    env = os.environ.get("TAAM_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"TAAM_SEED must be an integer, got {env!r}")
    return 0


def _parse_sets(pairs) -> dict:
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k] = json.loads(v)
        except json.JSONDecodeError:
            out[k] = v
    return out


def _write_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------

def cmd_generate(args) -> int:
    raw = load_config_file(args.config) if args.config else {}
    raw.update(_parse_sets(args.set))
    seed = _resolve_seed(args.seed, raw.pop("seed", None))
    try:
        cfg = SBMConfig.from_dict(raw)
        ds = generate_sbm_sequence(cfg, seed)
    except (DataError, TypeError, ValueError) as exc:
        print(f"error: invalid generator config: {exc}", file=sys.stderr)
        return EXIT_DATA
    out = save_dataset(ds, args.out)
    _write_json({**ds.generator, "seed": seed}, out / "config.json")
    print(validate_dataset(ds).format())
    return 0


_TRAIN_FLAGS = {
    "epochs": "epochs", "lr": "lr", "weight_decay": "weight_decay", "alpha": "amp.alpha",
    "hops": "amp.hop_set", "rank": "nsm.rank", "heads": "nsm.heads", "d_task": "nsm.d_task",
    "d_hid": "backbone.d_hid", "k_prop": "backbone.k_prop",
    "loss_reduction": "loss_reduction",
}


def cmd_train(args) -> int:
    raw = load_config_file(args.config) if args.config else {}
    data = args.data or raw.get("data")
    out = args.out or raw.get("out")
    if not data or not out:
        raise UsageError("--data and --out are required (or must be present in --config)")
    dotted = {k: v for k, v in raw.items() if k not in ("data", "out")}
    dotted.update(_parse_sets(args.set))
    for attr, key in _TRAIN_FLAGS.items():
        if getattr(args, attr) is not None:
            dotted[key] = getattr(args, attr)
    if args.method:
        dotted["method"] = args.method
    if args.no_restrict:
        dotted["restrict_inference"] = False
    dotted["seed"] = _resolve_seed(args.seed, dotted.get("seed"))
    cfg = RunConfig.from_dotted(dotted)

    ds = load_dataset(data)
    logging.getLogger("taam").info("method=%s tasks=%d classes=%d seed=%d", cfg.method,
                                   ds.n_tasks, ds.n_classes, cfg.seed)
    result = run_sequence(ds, cfg)
    save_run(result, out, {"data": str(data), "out": str(out)})
    m = result.metrics()
    print(f"AA={m['AA']:.4f} AF={m['AF'] if m['AF'] is None else format(m['AF'], '.4f')} "
          f"task_id_accuracy={m['task_id_accuracy']}")
    return 0


def cmd_eval(args) -> int:
    run = Path(args.run)
    try:
        M = read_accuracy_csv(run / "accuracy_matrix.csv")
        trace = json.loads((run / "taskid_trace.json").read_text(encoding="utf-8"))
        stored = json.loads((run / "metrics.json").read_text(encoding="utf-8"))
        recomputed = {
            "AA": average_accuracy(M),
            "AF": average_forgetting(M),
            "per_task_accuracy": M[-1].tolist(),
            "task_id_accuracy": task_id_accuracy([r["inferred"] for r in trace],
                                                 [r["task"] for r in trace]) if trace else None,
        }
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"error: cannot evaluate run {run}: {exc}", file=sys.stderr)
        return EXIT_DATA
    print(json.dumps(recomputed, indent=2))
    mismatched = [k for k in recomputed if not _close(recomputed[k], stored.get(k))]
    if mismatched:
        print(f"error: recomputed metrics differ from stored values: {mismatched}",
              file=sys.stderr)
        return EXIT_DATA
    return 0


def _close(a, b) -> bool:
    if a is None or b is None:
        return a is None and b is None
    return bool(np.allclose(np.asarray(a, float), np.asarray(b, float), rtol=0, atol=METRIC_TOL))


def cmd_diagnose(args) -> int:
    ds = load_dataset(args.data)
    try:
        amp_cfg = AMPConfig(args.alpha, tuple(args.hops))
    except ValueError as exc:
        raise UsageError(str(exc))
    report = separability_report(ds, args.embed, amp_cfg, args.ls_k)
    acc, inferred = simulated_task_id_accuracy(ds, args.embed, amp_cfg, args.ls_k)
    payload = {**report.to_json(), "alpha": amp_cfg.alpha, "hop_set": list(amp_cfg.hop_set),
               "ls_k": args.ls_k, "task_id_accuracy": acc, "inferred": inferred}
    _write_json(payload, args.out)
    print(f"embed={args.embed} task_id_accuracy={acc:.4f} "
          f"min_separation_ratio={report.min_separation_ratio:.4g} out={args.out}")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="taam", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic SBM task stream")
    g.add_argument("--config", help="JSON file with generator parameters")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int)
    g.add_argument("--set", action="append", metavar="KEY=VALUE")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="run a continual-learning sequence")
    t.add_argument("--data")
    t.add_argument("--method", choices=[m.replace("_", "-") for m in METHODS] + ["taam_l"])
    t.add_argument("--out")
    t.add_argument("--seed", type=int)
    t.add_argument("--config", help="resolved config.json of a previous run, or dotted keys")
    t.add_argument("--epochs", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--weight-decay", type=float)
    t.add_argument("--alpha", type=float)
    t.add_argument("--hops", type=int, nargs="+")
    t.add_argument("--rank", type=int)
    t.add_argument("--heads", type=int)
    t.add_argument("--d-task", type=int)
    t.add_argument("--d-hid", type=int)
    t.add_argument("--k-prop", type=int)
    t.add_argument("--loss-reduction", choices=["sum", "mean"])
    t.add_argument("--no-restrict", action="store_true",
                   help="predict over all learned classes instead of the inferred task's")
    t.add_argument("--set", action="append", metavar="KEY=VALUE")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="recompute metrics from a run directory")
    e.add_argument("--run", required=True)
    e.set_defaults(func=cmd_eval)

    d = sub.add_parser("diagnose", help="prototype separability and task-ID accuracy")
    d.add_argument("--data", required=True)
    d.add_argument("--embed", required=True, choices=EMBEDDINGS)
    d.add_argument("--alpha", type=float, default=AMPConfig.alpha)
    d.add_argument("--hops", type=int, nargs="+", default=list(AMPConfig.hop_set))
    d.add_argument("--ls-k", type=int, default=2)
    d.add_argument("--out", default="separability.json")
    d.set_defaults(func=cmd_diagnose)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code
    logger = logging.getLogger("taam")
    handler = logging.StreamHandler(sys.stdout)
    handler.setFormatter(logging.Formatter("%(message)s"))
    logger.addHandler(handler)
    logger.setLevel(logging.INFO)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    finally:
        logger.removeHandler(handler)


if __name__ == "__main__":
    sys.exit(main())
