"""Command-line entry point.

Exit codes: 0 success, 1 failed check, 2 usage (argparse), 3 data
errors, 4 configuration/validation errors, 5 numerical errors.
"""

import argparse
import json
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import BACKEND, __version__, available_backends
from . import classifier as cl
from . import data
from . import gradcheck as gc
from . import reducer as rd
from . import statevec as sv
from . import train as tr
from .errors import (
    ConfigurationError,
    ContractError,
    DataFormatError,
    DatasetError,
    DegenerateInputError,
    InvalidInputError,
    NumericalError,
)

EXIT_CHECK_FAILED = 1
EXIT_DATA = 3
EXIT_VALIDATION = 4
EXIT_NUMERICAL = 5

_CONFIG_KEYS = set(tr.TrainConfig.__dataclass_fields__) | {
    "train_per_class", "test_per_class"}


def parse_classes(text):
    try:
        a, b = (int(p) for p in text.split(","))
    except ValueError:
        raise ConfigurationError(f"expected two comma-separated classes, got {text!r}")
    return (a, b)


def classes_flag(text):
    # argparse only treats ValueError/ArgumentTypeError as usage errors
    try:
        return parse_classes(text)
    except ConfigurationError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def read_config_file(path):
    """`key = value` lines; # comments; values parsed as JSON when possible."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if key not in _CONFIG_KEYS:
            raise ConfigurationError(f"{path}:{lineno}: unknown key {key!r}")
        value = value.strip()
        if key == "classes":
            out[key] = parse_classes(value)
            continue
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def build_train_config(args):
    """Defaults < config file < flags."""
    merged = dict(read_config_file(args.config)) if args.config else {}
    for key in tr.TrainConfig.__dataclass_fields__:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
    per_class = {}
    for key in ("train_per_class", "test_per_class"):
        flag = getattr(args, key, None)
        value = flag if flag is not None else merged.pop(key, 0)
        per_class[key] = int(value)
    return tr.TrainConfig.from_dict(merged), per_class


def load_pair_splits(data_dir, classes, train_per_class=0, test_per_class=0):
    train_ds = data.prepare(data.load_split(data_dir, "train"), classes)
    test_ds = data.prepare(data.load_split(data_dir, "test"), classes)
    if train_per_class:
        train_ds = data.subset_per_class(train_ds, train_per_class)
    if test_per_class:
        test_ds = data.subset_per_class(test_ds, test_per_class)
    return train_ds, test_ds


# --- commands -----------------------------------------------------------

def cmd_train(args):
    config, per_class = build_train_config(args)
    out_dir = Path(args.out) if args.out else (
        Path("runs") / (datetime.now(timezone.utc).strftime("%Y%m%d-%H%M%S")
                        + f"-seed{config.seed}"))
    out_dir.mkdir(parents=True, exist_ok=True)
    train_ds, test_ds = load_pair_splits(args.data_dir, config.classes,
                                         per_class["train_per_class"],
                                         per_class["test_per_class"])

    probe = tr.Model(config)
    n_r, n_c, n_total = probe.param_counts()
    print(f"classes: {config.classes[0]} vs {config.classes[1]}")
    print(f"reducer: {config.reducer_kind} ({n_r} parameters)")
    print(f"classifier: {config.classifier_kind} ({n_c} parameters)")
    print(f"total parameters: {n_total}")
    print(f"train/test samples: {len(train_ds)}/{len(test_ds)}")

    result = tr.train_loop(
        config, train_ds, test_ds,
        metrics_path=out_dir / "metrics.csv",
        checkpoint_best=out_dir / "checkpoint-best.json",
        checkpoint_last=out_dir / "checkpoint-last.json",
        log=print)

    summary = {
        "config": config.to_dict(),
        "reducer_parameters": n_r,
        "classifier_parameters": n_c,
        "total_parameters": n_total,
        "iterations": result.records[-1].iteration if result.records else 0,
        "final_accuracy": result.final_accuracy,
        "best_accuracy": result.best_accuracy,
        "wall_seconds": round(result.wall_seconds, 3),
        "train_samples": len(train_ds),
        "test_samples": len(test_ds),
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, sort_keys=True,
                                                     indent=1) + "\n")
    print(f"final test accuracy: {result.final_accuracy:.4f}")
    print(f"best test accuracy: {result.best_accuracy:.4f}")
    print(f"artifacts: {out_dir}")
    return 0


def cmd_eval(args):
    model, _ = tr.load_checkpoint(args.checkpoint)
    config = model.config
    if args.classes is not None and tuple(args.classes) != config.classes:
        raise ConfigurationError(
            f"checkpoint was trained on classes {config.classes}, "
            f"not {tuple(args.classes)}")
    train_ds, test_ds = load_pair_splits(args.data_dir, config.classes)
    dataset = {"train": train_ds, "test": test_ds}[args.split]
    accuracy, loss = tr.evaluate(model, dataset, limit=args.limit)
    n = args.limit if args.limit and args.limit < len(dataset) else len(dataset)
    if args.json:
        print(json.dumps({"accuracy": accuracy, "loss": loss, "n_samples": n},
                         sort_keys=True))
    else:
        print(f"split: {args.split} ({n} samples)")
        print(f"accuracy: {accuracy:.4f}")
        print(f"mean loss: {loss:.6f}")
    return 0


def cmd_reduce(args):
    model, _ = tr.load_checkpoint(args.checkpoint)
    config = model.config
    train_ds, test_ds = load_pair_splits(args.data_dir, config.classes)
    dataset = {"train": train_ds, "test": test_ds}[args.split]
    n = min(args.limit, len(dataset)) if args.limit else len(dataset)
    parts = args.parts.split(",")
    if not set(parts) <= {"gamma", "mask", "quantum"}:
        raise ConfigurationError(f"unknown feature parts {args.parts!r}")

    out_path = Path(args.out)
    with open(out_path, "w") as f:
        echo = json.dumps(config.to_dict(), sort_keys=True)
        f.write(f"# config {echo}\n")
        cols = ["index", "label"] + [f"{p}_{i}" for p in parts for i in range(64)]
        f.write(",".join(cols) + "\n")
        for at in range(0, n, 250):
            stop = min(at + 250, n)
            feats = rd.reduce_images(dataset.images[at:stop],
                                     model.reducer_circuit, model.reducer_params)
            for i, feat in enumerate(feats):
                values = []
                grids = {"gamma": feat.gamma, "mask": feat.mask_part,
                         "quantum": feat.quantum_part}
                for p in parts:
                    values.extend(repr(float(v)) for v in grids[p].ravel())
                row = [str(at + i), str(int(dataset.labels[at + i]))] + values
                f.write(",".join(row) + "\n")
    print(f"wrote {n} records to {out_path}")
    return 0


def cmd_gradcheck(args):
    results = gc.run_checks(trials=args.trials, seed=args.seed)
    width = max(len(r.name) for r in results)
    failed = False
    for r in results:
        status = "ok" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  max rel err {r.max_rel_err:.3e}  "
              f"(rtol {r.rtol:.0e})  {status}")
        failed = failed or not r.passed
    if args.json:
        print(json.dumps([{"name": r.name, "max_rel_err": r.max_rel_err,
                           "rtol": r.rtol, "passed": r.passed} for r in results]))
    return EXIT_CHECK_FAILED if failed else 0


def cmd_inspect(args):
    def show(title, circuit, params):
        print(f"== {title} ==")
        print(f"qubits: {circuit.n_qubits}, kept: {list(circuit.kept_qubits)}, "
              f"gates: {len(circuit.gates)}, "
              f"trainable parameters: {params.total_trainable()}")
        if args.gates:
            for i, g in enumerate(circuit.gates):
                slot = f"  {g.param_slot}" if g.param_slot else ""
                print(f"  [{i:3d}] {g.kind:<9} q{list(g.qubits)}{slot}")

    circ, params = rd.build_reducer_circuit(4)
    show("reducer (proposed)", circ, params)
    circ, params = rd.build_naive_pool_reducer(4)
    show("reducer (naive-pool)", circ, params)
    circ, params = cl.build_classifier_circuit()
    show("classifier (quantum)", circ, params)
    print("== classifier (fcc) ==")
    print(f"layers: {'-'.join(str(s) for s in cl.FCC_LAYER_SIZES)}, "
          f"trainable parameters: {cl.FccParams().count()}")
    print(f"backends: {', '.join(available_backends())} (active: {BACKEND})")
    return 0


def cmd_bench(args):
    backends = available_backends()
    rng = np.random.default_rng(args.seed)
    circuits = [("reducer", *rd.build_reducer_circuit(4)),
                ("classifier", *cl.build_classifier_circuit())]
    print(f"batch={args.batch} reps={args.reps}")
    rows = []
    for cname, circ, params in circuits:
        params.randomize(rng)
        raw = rng.random((args.batch, min(1 << circ.n_qubits, 64)))
        psi0, _ = sv.encode_rows(raw, n_qubits=circ.n_qubits)
        for bname, kernels in backends.items():
            for mode in ("forward", "gradient"):
                best = float("inf")
                for _ in range(args.reps):
                    t0 = time.perf_counter()
                    if mode == "forward":
                        sv.run_batch(circ, params, psi0, kernels=kernels)
                    else:
                        sv.adjoint_gradients(circ, params, psi0, kernels=kernels)
                    best = min(best, time.perf_counter() - t0)
                rows.append((cname, mode, bname, best))
    base = {(c, m): t for c, m, b, t in rows if b == "python"}
    for cname, mode, bname, best in rows:
        speed = base[(cname, mode)] / best
        print(f"{cname:<10} {mode:<8} {bname:<7} {best * 1e3:9.2f} ms"
              f"   x{speed:.2f} vs python")
    return 0


# --- wiring ---------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="patchqnet",
        description="Patch-reduction quantum network: training and tools.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_data_dir(p):
        p.add_argument("--data-dir", default="data/fashion",
                       help="directory with the four IDX files")

    p = sub.add_parser("train", help="train a model")
    add_data_dir(p)
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--classes", type=classes_flag, help="pair like 0,1")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--seed", type=int)
    p.add_argument("--lr-high", type=float, dest="lr_high")
    p.add_argument("--lr-low", type=float, dest="lr_low")
    p.add_argument("--lr-switch-acc", type=float, dest="lr_switch_acc")
    p.add_argument("--momentum", type=float)
    p.add_argument("--eval-every", type=int, dest="eval_every")
    p.add_argument("--eval-subset", type=int, dest="eval_subset")
    p.add_argument("--reducer", choices=tr.REDUCER_KINDS, dest="reducer_kind")
    p.add_argument("--classifier", choices=tr.CLASSIFIER_KINDS,
                   dest="classifier_kind")
    p.add_argument("--unshared-conv", action="store_const", const=False,
                   dest="conv_shared")
    p.add_argument("--unshared-pool", action="store_const", const=False,
                   dest="pool_shared")
    p.add_argument("--shared-rotations", action="store_const", const=True,
                   dest="rotation_layer_shared")
    p.add_argument("--train-aux-rotations", action="store_const", const=True,
                   dest="aux_rotations_trainable")
    p.add_argument("--train-per-class", type=int, dest="train_per_class")
    p.add_argument("--test-per-class", type=int, dest="test_per_class")
    p.add_argument("--out", help="output directory (default runs/<stamp>-seed<n>)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    add_data_dir(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--classes", type=classes_flag,
                   help="must match the checkpoint")
    p.add_argument("--limit", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("reduce", help="export fused features")
    add_data_dir(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--limit", type=int, default=0)
    p.add_argument("--parts", default="gamma",
                   help="comma-set of gamma,mask,quantum")
    p.add_argument("--out", default="reduced.csv")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("gradcheck", help="finite-difference gradient audit")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("inspect", help="print circuits and parameter counts")
    p.add_argument("--gates", action="store_true", help="list every gate")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("bench", help="compare simulation backends")
    p.add_argument("--batch", type=int, default=512)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DataFormatError, DatasetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigurationError, InvalidInputError, ContractError,
            DegenerateInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
