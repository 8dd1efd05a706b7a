"""Command-line interface.

Subcommands cover the whole pipeline: generate-data, normalize, train, eval,
compare, index, query, sweep, pos-baseline, serve. Splitting is re-derived
from the seed wherever a split is needed, so separate invocations agree on
which rows are train/validation/test without persisting the partition.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import datagen, harness, models, retrieval, textnorm
from .models import ModelKind, TrainConfig

__all__ = ["main", "entrypoint"]

_SPLIT_CHOICES = ("all", "train", "validation", "test")


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--config", default=None, help="JSON config path (or HELPSYS_CONFIG)")
    common.add_argument(
        "--paper-scale",
        action="store_true",
        help="benchmark scale: 24 skills and the larger model configuration",
    )
    common.add_argument("--json", action="store_true", help="machine-readable JSON output")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(prog="helpsys", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-data", parents=[common], help="write a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--help-fraction", type=float, default=0.5)

    p = sub.add_parser("normalize", parents=[common], help="show a query's token sequence")
    p.add_argument("--text", required=True)

    p = sub.add_parser("train", parents=[common], help="train a classifier checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kind", default=ModelKind.C_BILSTM.value, choices=[k.value for k in ModelKind])

    p = sub.add_parser("eval", parents=[common], help="classification metrics on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--split", default="all", choices=_SPLIT_CHOICES)

    p = sub.add_parser("compare", parents=[common], help="train and score all architectures")
    p.add_argument("--data", required=True)
    p.add_argument("--kinds", default=",".join(k.value for k in ModelKind))

    p = sub.add_parser("index", parents=[common], help="build the retrieval index")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="train", choices=_SPLIT_CHOICES)
    p.add_argument("--leaf-size", type=int, default=retrieval.DEFAULT_LEAF_SIZE)

    p = sub.add_parser("query", parents=[common], help="answer one query end to end")
    p.add_argument("--text", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--threshold", type=float, default=0.75)
    p.add_argument("--k", type=int, default=1)

    p = sub.add_parser("sweep", parents=[common], help="precision/recall over thresholds")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--grid", default=None, help="start:stop:step or comma-separated values")
    p.add_argument("--split", default="validation", choices=_SPLIT_CHOICES)
    p.add_argument("--k", type=int, default=1)

    p = sub.add_parser("pos-baseline", parents=[common], help="rule-based baseline metrics")
    p.add_argument("--data", default=None)
    p.add_argument("--text", default=None)
    p.add_argument("--split", default="test", choices=_SPLIT_CHOICES)

    p = sub.add_parser("serve", parents=[common], help="run the HTTP service")
    p.add_argument("--model", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8777)
    p.add_argument("--cors-origin", default="*")

    return parser


def _load_cfg(args) -> tuple[TrainConfig, object | None, int]:
    cfg, norm_cfg = harness.load_config(args.config)
    if getattr(args, "paper_scale", False):
        cfg = TrainConfig.paper_scale(seed=cfg.seed)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg, norm_cfg, cfg.seed


def _select_split(rows, which: str, seed: int):
    if which == "all":
        return rows
    split = harness.split_dataset(rows, seed=seed)
    return list(getattr(split, which))


def _emit(args, payload: dict, human: str) -> None:
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        print(human)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    cfg, norm_cfg, seed = _load_cfg(args)

    if args.command == "generate-data":
        templates = datagen.paper_templates() if args.paper_scale else datagen.desk_templates()
        rows = datagen.generate_dataset(
            templates, args.n, seed=seed, help_fraction=args.help_fraction
        )
        datagen.save_jsonl(rows, args.out)
        n_help = sum(1 for r in rows if r.is_help)
        _emit(
            args,
            {"out": args.out, "n": len(rows), "help": n_help, "seed": seed},
            f"wrote {len(rows)} queries ({n_help} help) to {args.out}",
        )
        return 0

    if args.command == "normalize":
        cfg_norm = norm_cfg or textnorm.default_config(maxlen=cfg.maxlen)
        normalized = textnorm.normalize(args.text, cfg_norm)
        tokens = list(normalized.content(cfg_norm.unk_token))
        _emit(
            args,
            {"text": args.text, "tokens": tokens, "padded": list(normalized.tokens)},
            " ".join(tokens),
        )
        return 0

    if args.command == "train":
        rows = datagen.load_jsonl(args.data)
        split = harness.split_dataset(rows, seed=seed)
        model, history = models.train(
            list(split.train), list(split.validation), ModelKind(args.kind), cfg, norm_cfg
        )
        models.save_model(model, args.out)
        _emit(
            args,
            {
                "out": args.out,
                "kind": args.kind,
                "best_epoch": model.best_epoch,
                "best_val_f1": model.best_val_f1,
                "epochs_run": len(history),
            },
            f"saved {args.kind} to {args.out} "
            f"(best epoch {model.best_epoch}, val F1 {model.best_val_f1:.3f})",
        )
        return 0

    if args.command == "eval":
        rows = _select_split(datagen.load_jsonl(args.data), args.split, seed)
        model = models.load_model(args.model)
        precision, recall, f1 = models.evaluate(model, rows)
        _emit(
            args,
            {"split": args.split, "precision": precision, "recall": recall, "f1": f1},
            f"{args.split}: precision {precision:.3f} recall {recall:.3f} f1 {f1:.3f}",
        )
        return 0

    if args.command == "compare":
        rows = datagen.load_jsonl(args.data)
        split = harness.split_dataset(rows, seed=seed)
        kinds = [ModelKind(k.strip()) for k in args.kinds.split(",") if k.strip()]
        report, _ = harness.run_comparison(split, kinds, cfg, norm_cfg)
        _emit(args, report.to_dict(), harness.format_comparison(report))
        return 0

    if args.command == "index":
        rows = _select_split(datagen.load_jsonl(args.data), args.split, seed)
        model = models.load_model(args.model)
        index = harness.build_query_index(model, rows, leaf_size=args.leaf_size)
        from .pos_mapper import load_responses

        retrieval.save_index(index, load_responses(), args.out)
        _emit(
            args,
            {"out": args.out, "entries": len(index), "leaves": index.n_leaves},
            f"indexed {len(index)} help queries ({index.n_leaves} leaves) to {args.out}",
        )
        return 0

    if args.command == "query":
        pipeline = harness.load_pipeline(args.model, args.index)
        body = harness.answer_query(pipeline, args.text, threshold=args.threshold, k=args.k)
        print(json.dumps(body, indent=2 if not args.json else None))
        return 0

    if args.command == "sweep":
        rows = _select_split(datagen.load_jsonl(args.data), args.split, seed)
        model = models.load_model(args.model)
        index, _ = retrieval.load_index(args.index)
        grid = harness.parse_grid(args.grid) if args.grid else harness.DEFAULT_SWEEP_GRID
        report = harness.threshold_sweep(index, model, rows, grid=grid, k=args.k)
        human = ["threshold precision recall f1"]
        for row in report.rows:
            human.append(
                f"{row.threshold:9.2f} {row.precision:9.3f} {row.recall:6.3f} {row.f1:.3f}"
            )
        human.append(f"best threshold {report.best_threshold:.2f} (f1 {report.best_f1:.3f})")
        _emit(args, report.to_dict(), "\n".join(human))
        return 0

    if args.command == "pos-baseline":
        if (args.data is None) == (args.text is None):
            raise ValueError("pos-baseline needs exactly one of --data or --text")
        if args.text is not None:
            from . import pos_mapper

            cfg_norm = norm_cfg or textnorm.default_config(maxlen=cfg.maxlen)
            tokens = textnorm.normalize(args.text, cfg_norm).content(cfg_norm.unk_token)
            result = pos_mapper.map_query(
                list(tokens),
                pos_mapper.default_action_lexicon(),
                pos_mapper.default_skill_lexicon(),
                pos_mapper.default_action_skill_table(),
            )
            _emit(
                args,
                {"action": result.action, "skill": result.skill, "response_id": result.response_id},
                f"action={result.action} skill={result.skill} response={result.response_id}",
            )
            return 0
        rows = _select_split(datagen.load_jsonl(args.data), args.split, seed)
        report = harness.evaluate_pos_baseline(rows, norm_cfg)
        _emit(
            args,
            {
                "split": args.split,
                "precision": report.precision,
                "recall": report.recall,
                "f1": report.f1,
                "answered": report.answered,
                "correct": report.correct,
                "total": report.total,
            },
            f"{args.split}: precision {report.precision:.3f} recall {report.recall:.3f} "
            f"f1 {report.f1:.3f} ({report.answered}/{report.total} answered)",
        )
        return 0

    if args.command == "serve":
        import uvicorn

        from .service import create_app

        app = create_app(args.model, args.index, cors_origin=args.cors_origin)
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
        return 0

    raise ValueError(f"unknown command {args.command!r}")


def entrypoint() -> None:
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    entrypoint()
