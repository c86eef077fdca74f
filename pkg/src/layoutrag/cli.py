"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data/domain error.  Every
subcommand that involves randomness takes --seed; all randomness flows
from it.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .adapters import publaynet_to_dataset, rico_to_dataset
from .config import CONFIG_ENV_VAR, load_app_config
from .core import (
    CategorySchema,
    load_dataset,
    parse_condition_record,
    save_dataset,
)
from .errors import LayoutRagError
from .index import build_index, load_index, save_index
from .model.checkpoint import load_checkpoint, save_checkpoint
from .model.flow import ModelConfig
from .model.train import TASKS, TrainConfig, train
from .pipeline import RetrievalPolicy, Task, TaskSpec, evaluate, generate, retrieve
from .service import AppState, create_app, parse_task

logger = logging.getLogger(__name__)

_FUSION_FLAGS = {"cma": "cma", "cross": "cross", "concat": "concat"}


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_policy_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, default=32, help="candidates to score/return")
    p.add_argument("--tau-reuse", type=float, default=0.95)
    p.add_argument("--tau-ref", type=float, default=0.05)
    p.add_argument("--sim-cap", type=float, default=None,
                   help="discard candidates scoring above this similarity")


def _policy(args: argparse.Namespace) -> RetrievalPolicy:
    return RetrievalPolicy(
        k=args.k, tau_reuse=args.tau_reuse, tau_ref=args.tau_ref, sim_cap=args.sim_cap
    )


def build_parser() -> _Parser:
    parser = _Parser(prog="layoutrag", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[], help="convert/normalize a dataset")
    p.add_argument("--format", choices=("canonical", "rico", "publaynet"), default="canonical")
    p.add_argument("--input", required=True, help="dataset file, or directory of screen files for rico")
    p.add_argument("--out", required=True)

    p = sub.add_parser("build-index", help="build the count-key index")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("retrieve", help="query the index for a condition")
    p.add_argument("--data", required=True)
    p.add_argument("--index", default=None)
    p.add_argument("--task", choices=("ucond", "c", "cs", "completion"), required=True)
    p.add_argument("--condition", default=None, help="condition JSON file")
    p.add_argument("--seed", type=int, default=0)
    _add_policy_flags(p)

    p = sub.add_parser("train", help="train the flow model")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fusion", choices=tuple(_FUSION_FLAGS), default="cma")
    p.add_argument("--d-model", type=int, default=64)
    p.add_argument("--n-layers-base", type=int, default=4)
    p.add_argument("--n-layers-ref", type=int, default=2)
    p.add_argument("--n-heads", type=int, default=4)
    p.add_argument("--sampler-steps", type=int, default=50)
    p.add_argument("--lam", type=float, default=0.01)
    p.add_argument("--p-irrelevant", type=float, default=0.1)
    p.add_argument("--p-no-ref", type=float, default=0.5)
    p.add_argument("--tasks", default=",".join(TASKS),
                   help="comma-separated training task mix")

    p = sub.add_parser("generate", help="generate layouts for a task")
    p.add_argument("--data", required=True)
    p.add_argument("--index", default=None)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--task", choices=("ucond", "c", "cs", "completion"), required=True)
    p.add_argument("--condition", default=None, help="condition JSON file (optional for ucond)")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--provenance", default=None, help="JSONL provenance log path")
    _add_policy_flags(p)

    p = sub.add_parser("eval", help="evaluate generation against a test split")
    p.add_argument("--train-data", required=True)
    p.add_argument("--test-data", required=True)
    p.add_argument("--index", default=None)
    p.add_argument("--ckpt", default=None)
    p.add_argument("--task", choices=("ucond", "c", "cs", "completion"), required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--arm", choices=("full", "base", "retrieval"), default="full")
    p.add_argument("--retrievable-only", action="store_true")
    p.add_argument("--out", default=None, help="write the report JSON here instead of stdout")
    _add_policy_flags(p)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config", default=None, help=f"config file (default: ${CONFIG_ENV_VAR})")
    p.add_argument("--data", default=None, help="dataset path override")
    p.add_argument("--index", default=None)
    p.add_argument("--ckpt", default=None)
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)

    return parser


def _load_db(path: str) -> tuple[CategorySchema, list]:
    return load_dataset(path)


def _load_or_build_index(index_path: str | None, db, n_categories: int):
    if index_path:
        return load_index(index_path, db=db)
    return build_index(db, n_categories)


def _read_condition(path: str | None, schema: CategorySchema):
    if path is None:
        return None
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    return parse_condition_record(obj, schema)


def cmd_ingest(args: argparse.Namespace) -> int:
    out = Path(args.out)
    if args.format == "canonical":
        schema, layouts = load_dataset(args.input)
    else:
        if args.format == "rico":
            src = Path(args.input)
            paths = sorted(src.glob("*.json")) if src.is_dir() else [src]
            doc = rico_to_dataset(paths)
        else:
            doc = publaynet_to_dataset(args.input)
        tmp = out.with_suffix(".raw.json")
        tmp.write_text(json.dumps(doc), encoding="utf-8")
        schema, layouts = load_dataset(tmp)
        tmp.unlink()
    save_dataset(out, schema, layouts)
    print(json.dumps({"out": str(out), "n_layouts": len(layouts), "n_categories": schema.size}))
    return 0


def cmd_build_index(args: argparse.Namespace) -> int:
    schema, db = _load_db(args.data)
    idx = build_index(db, schema.size)
    save_index(idx, args.out)
    print(json.dumps({"out": args.out, "n_layouts": idx.n_layouts, "n_keys": len(idx.exact)}))
    return 0


def cmd_retrieve(args: argparse.Namespace) -> int:
    schema, db = _load_db(args.data)
    idx = _load_or_build_index(args.index, db, schema.size)
    task = parse_task(args.task)
    cond = _read_condition(args.condition, schema)
    if cond is None:
        raise LayoutRagError("retrieve requires --condition (use all-null slots for ucond)")
    rng = np.random.default_rng(args.seed)
    result = retrieve(idx, db, task, cond, _policy(args), rng)
    print(
        json.dumps(
            {
                "n_qualified": result.n_qualified,
                "candidates": [{"id": cid, "score": score} for cid, score in result.ranked],
            }
        )
    )
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    schema, db = _load_db(args.data)
    model_cfg = ModelConfig(
        n_categories=schema.size,
        d_model=args.d_model,
        n_layers_base=args.n_layers_base,
        n_layers_ref=args.n_layers_ref,
        n_heads=args.n_heads,
        sampler_steps=args.sampler_steps,
        lam=args.lam,
        p_irrelevant=args.p_irrelevant,
        fusion=_FUSION_FLAGS[args.fusion],
        seed=args.seed,
    )
    tasks = tuple(t.strip() for t in args.tasks.split(",") if t.strip())
    train_cfg = TrainConfig(
        steps=args.steps,
        batch_size=args.batch_size,
        lr=args.lr,
        p_no_ref=args.p_no_ref,
        tasks=tasks,
    )
    state = train(db, schema, model_cfg, train_cfg)
    save_checkpoint(state.net, args.out)
    print(
        json.dumps(
            {
                "out": args.out,
                "steps": state.step,
                "first_loss": state.loss_history[0],
                "final_loss": float(np.mean(state.loss_history[-min(50, len(state.loss_history)):])),
            }
        )
    )
    return 0


def cmd_generate(args: argparse.Namespace) -> int:
    schema, db = _load_db(args.data)
    idx = _load_or_build_index(args.index, db, schema.size)
    net = load_checkpoint(args.ckpt)
    task = parse_task(args.task)
    cond = _read_condition(args.condition, schema)
    spec = TaskSpec(task=task, condition=cond, n_samples=args.n)
    layouts, provenance = generate(net, idx, db, spec, _policy(args), schema, args.seed)
    save_dataset(args.out, schema, layouts)
    prov_path = args.provenance or (args.out + ".provenance.jsonl")
    with open(prov_path, "w", encoding="utf-8") as f:
        for rec in provenance:
            f.write(json.dumps(rec) + "\n")
    print(json.dumps({"out": args.out, "provenance": prov_path, "n": len(layouts)}))
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    schema, train_db = _load_db(args.train_data)
    test_schema, test_db = _load_db(args.test_data)
    if test_schema.names != schema.names:
        raise LayoutRagError("train and test datasets use different schemas")
    idx = _load_or_build_index(args.index, train_db, schema.size)
    net = load_checkpoint(args.ckpt) if args.ckpt else None
    result = evaluate(
        net,
        idx,
        train_db,
        test_db,
        parse_task(args.task),
        _policy(args),
        schema,
        seed=args.seed,
        arm=args.arm,
        retrievable_only=args.retrievable_only,
    )
    report = {
        "alignment": result.metrics.alignment,
        "overlap": result.metrics.overlap,
        "miou": result.metrics.miou,
        "proxy_fd": result.metrics.proxy_fd,
        "n_layouts": result.metrics.n_layouts,
        "stats": {
            "n_conditions": result.stats.n_conditions,
            "frac_retrievable": result.stats.frac_retrievable,
            "frac_ge20": result.stats.frac_ge20,
            "decisions": result.stats.decisions,
        },
    }
    text = json.dumps(report)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(text)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    cfg = load_app_config(args.config)
    data_path = Path(args.data) if args.data else cfg.dataset_path
    schema, db = _load_db(data_path)
    index_path = args.index or cfg.index_path
    idx = _load_or_build_index(str(index_path) if index_path else None, db, schema.size)
    ckpt = args.ckpt or cfg.checkpoint_path
    net = load_checkpoint(ckpt) if ckpt and Path(ckpt).exists() else None
    state = AppState(schema=schema, db=db, index=idx, net=net, policy=cfg.policy)
    app = create_app(state)
    host = args.host or cfg.server.host
    port = args.port if args.port is not None else cfg.server.port
    uvicorn.run(app, host=host, port=port, log_level="info")
    return 0


_COMMANDS = {
    "ingest": cmd_ingest,
    "build-index": cmd_build_index,
    "retrieve": cmd_retrieve,
    "train": cmd_train,
    "generate": cmd_generate,
    "eval": cmd_eval,
    "serve": cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except LayoutRagError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
