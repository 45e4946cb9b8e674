"""Command-line entry points: `attirnn train` and `attirnn emit`."""

from __future__ import annotations

import argparse
import glob
import sys
from pathlib import Path

from .data import DEFAULT_H, DEFAULT_T, LinkTrace, build_training_windows
from .emit import emit_forecasts, load_rsl_csv
from .errors import AttIrnnError
from .model import ModelSpec
from .training import load_checkpoint, train


def _load_traces(patterns: list[str]) -> list[LinkTrace]:
    paths = sorted(p for pat in patterns for p in glob.glob(pat))
    if not paths:
        raise AttIrnnError(f"no trace files match {patterns!r}")
    return [LinkTrace(rsl=load_rsl_csv(Path(p).read_bytes()), link_id=i)
            for i, p in enumerate(paths)]


def cmd_train(args) -> int:
    traces = _load_traces(args.traces)
    dataset = build_training_windows(traces, T=args.window, H=args.horizon,
                                     balance=args.balance, seed=args.seed)
    spec = ModelSpec(T=args.window, H=args.horizon,
                     n_links=dataset.n_links,
                     n_antenna_types=dataset.n_antenna_types)
    ckpt = train(dataset, spec, epochs=args.epochs, patience=args.patience,
                 seed=args.seed, batch_size=args.batch_size, lr=args.lr)
    ckpt.save(args.out)
    print(f"trained {len(dataset)} windows, best epoch {ckpt.best_epoch}, "
          f"val NLL {ckpt.val_nll[ckpt.best_epoch]:.4f}")
    return 0


def cmd_emit(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    rsl = load_rsl_csv(Path(args.trace).read_bytes())
    trace = LinkTrace(rsl=rsl, link_id=args.link_id)
    out = emit_forecasts(ckpt.build(), trace, T=ckpt.spec.T, H=ckpt.spec.H)
    Path(args.out).write_bytes(out)
    print(f"wrote forecasts for {len(rsl) - ckpt.spec.T + 1} origin slots")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="attirnn")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit the forecaster on RSL trace CSVs")
    p.add_argument("--traces", nargs="+", required=True,
                   help="glob(s) of timestamp_min,rsl_dbm CSVs")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--window", type=int, default=DEFAULT_T)
    p.add_argument("--horizon", type=int, default=DEFAULT_H)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--balance", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("emit", help="write a forecast CSV for one trace")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--trace", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--link-id", type=int, default=0)
    p.set_defaults(func=cmd_emit)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AttIrnnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
