"""Command-line entry point orchestrating the full pipeline.

Subcommands: gen-corpus, convert, train, infer, score, analyze, humaneval.
Settings come from an optional JSON config file with flat sections
(corpus/model/lora/optimizer/train/remote/infer); flags override file
values; --print-config emits the fully resolved configuration and exits.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .corpus import (CorpusSpec, Dataset, Split, bioes_to_spans,
                     generate_corpus, load_dataset, save_dataset,
                     simple_token_offsets, spans_to_bioes)
from .corpus.jsonl import instance_to_record, record_to_instance
from .corpus.types import EventType, Instance
from .errors import FinextractError
from .scoring import PredSpan, score_dataset
from .structout import (ParseStatus, Prediction, load_predictions,
                        parse_output, save_predictions)

DEFAULT_CONFIG: dict = {
    "corpus": {
        "n_instances": 200,
        "density": {"1-2": 0.5, "3-4": 0.3, "5+": 0.2},
        "seed": 0,
    },
    "model": {"n_layers": 4, "n_heads": 4, "d_model": 128, "d_ff": 512,
              "vocab_size": 259, "max_seq_len": 512},
    "lora": {"rank": 8, "alpha": 16.0,
             "targets": ["attn.wq", "attn.wv", "head"]},
    "optimizer": {"lr": 1e-2, "weight_decay": 0.0, "betas": [0.9, 0.999],
                  "eps": 1e-8, "warmup_steps": 50, "total_steps": 1000},
    "train": {"batch_size": 16, "seed": 0, "log_every": 50},
    "infer": {"max_new_tokens": 300},
    "remote": {"base_url": "", "model": "", "path": "/v1/chat/completions",
               "token_env": "FINEXTRACT_API_TOKEN", "timeout": 30.0,
               "max_retries": 3, "max_in_flight": 4},
}


def load_config(path: str | None, overrides: dict) -> dict:
    """Defaults <- config file <- flag overrides, section by section."""
    config = json.loads(json.dumps(DEFAULT_CONFIG))
    if path:
        user = json.loads(Path(path).read_text(encoding="utf-8"))
        for section, values in user.items():
            config.setdefault(section, {}).update(values)
    for dotted, value in overrides.items():
        if value is None:
            continue
        section, key = dotted.split(".", 1)
        config.setdefault(section, {})[key] = value
    return config


def _maybe_print_config(args, config: dict) -> bool:
    if getattr(args, "print_config", False):
        print(json.dumps(config, indent=2, sort_keys=True))
        return True
    return False


# ---------------------------------------------------------------------------
# Subcommands


def cmd_gen_corpus(args) -> int:
    config = load_config(args.config, {
        "corpus.n_instances": args.n,
        "corpus.seed": args.seed,
    })
    if args.density:
        parts = [float(x) for x in args.density.split(",")]
        if len(parts) != 3:
            raise FinextractError("--density needs three comma-separated weights")
        config["corpus"]["density"] = {
            "1-2": parts[0], "3-4": parts[1], "5+": parts[2]
        }
    if _maybe_print_config(args, config):
        return 0
    c = config["corpus"]
    spec = CorpusSpec(n_instances=c["n_instances"],
                      entity_density_weights=c["density"], seed=c["seed"])
    dataset = generate_corpus(spec, split=Split(args.split))
    save_dataset(dataset, args.out)
    print(f"wrote {len(dataset)} instances to {args.out}")
    return 0


def cmd_convert(args) -> int:
    if args.direction == "to-bioes":
        dataset = load_dataset(args.data)
        with open(args.out, "w", encoding="utf-8") as fh:
            for inst in dataset:
                offsets = simple_token_offsets(inst.text)
                tags = spans_to_bioes(inst, offsets)
                fh.write(f"# id = {inst.id}\n")
                fh.write(f"# event_type = {inst.event_type.value}\n")
                fh.write(f"# text = {json.dumps(inst.text, ensure_ascii=False)}\n")
                for (start, end), tag in zip(offsets, tags):
                    fh.write(f"{inst.text[start:end]}\t{start}\t{end}\t{tag}\n")
                fh.write("\n")
        print(f"wrote BIOES file to {args.out}")
        return 0

    instances = []
    meta: dict[str, str] = {}
    offsets: list[tuple[int, int]] = []
    tags: list[str] = []

    def flush():
        if not meta:
            return
        text = json.loads(meta["text"])
        spans = bioes_to_spans(tags, offsets, text)
        instances.append(Instance(
            id=meta["id"], text=text,
            event_type=EventType(meta["event_type"]), gold=spans,
        ))
        meta.clear(); offsets.clear(); tags.clear()

    for line in Path(args.data).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            flush()
            continue
        if line.startswith("# "):
            key, _, value = line[2:].partition(" = ")
            meta[key.strip()] = value
            continue
        token, start, end, tag = line.split("\t")
        offsets.append((int(start), int(end)))
        tags.append(tag)
    flush()
    dataset = Dataset(instances=instances, split=Split(args.split))
    dataset.validate()
    save_dataset(dataset, args.out)
    print(f"wrote {len(dataset)} instances to {args.out}")
    return 0


def cmd_train(args) -> int:
    from .model import (LoRAConfig, ModelConfig, OptimizerConfig, fit,
                        init_model, load_checkpoint, save_checkpoint)
    from .prompting import make_prompt_pair

    config = load_config(args.config, {
        "optimizer.lr": args.lr,
        "optimizer.total_steps": args.steps,
        "optimizer.warmup_steps": args.warmup,
        "train.batch_size": args.batch_size,
        "train.seed": args.seed,
    })
    if args.lora_targets:
        config["lora"]["targets"] = args.lora_targets.split(",")
    if args.lora_rank:
        config["lora"]["rank"] = args.lora_rank
        config["lora"]["alpha"] = float(2 * args.lora_rank) \
            if args.lora_alpha is None else args.lora_alpha
    elif args.lora_alpha is not None:
        config["lora"]["alpha"] = args.lora_alpha
    if _maybe_print_config(args, config):
        return 0

    model_cfg = ModelConfig(**config["model"])
    lora_cfg = LoRAConfig(rank=config["lora"]["rank"],
                          alpha=config["lora"]["alpha"],
                          targets=tuple(config["lora"]["targets"]))
    opt_cfg = OptimizerConfig(
        lr=config["optimizer"]["lr"],
        weight_decay=config["optimizer"]["weight_decay"],
        betas=tuple(config["optimizer"]["betas"]),
        eps=config["optimizer"]["eps"],
        warmup_steps=config["optimizer"]["warmup_steps"],
        total_steps=config["optimizer"]["total_steps"],
    )

    if args.init_from:
        state = load_checkpoint(args.init_from)
    else:
        state = init_model(model_cfg, lora_cfg, seed=config["train"]["seed"])
    dataset = load_dataset(args.data)
    pairs = [make_prompt_pair(inst) for inst in dataset]
    print(f"training on {len(pairs)} pairs, "
          f"{state.trainable_param_count()} trainable / "
          f"{state.base_param_count()} total parameters")
    fit(state, pairs, opt_cfg, batch_size=config["train"]["batch_size"],
        seed=config["train"]["seed"], log_every=config["train"]["log_every"],
        log_cb=lambda e: print(f"step {e.step}: loss {e.loss:.4f} lr {e.lr:.2e}"))
    save_checkpoint(state, args.out)
    print(f"saved checkpoint to {args.out}")
    return 0


def _build_backend(args, config):
    from .backend import LocalBackend, MockBackend, RemoteBackend, RemoteConfig

    kind = args.backend
    if kind == "local":
        if not args.checkpoint:
            raise FinextractError("--checkpoint is required for the local backend")
        return LocalBackend(args.checkpoint,
                            max_new_tokens=config["infer"]["max_new_tokens"])
    if kind == "remote":
        r = config["remote"]
        return RemoteBackend(RemoteConfig(
            base_url=r["base_url"], model=r["model"], path=r["path"],
            token_env=r["token_env"], timeout=r["timeout"],
            max_retries=r["max_retries"], max_in_flight=r["max_in_flight"],
            max_tokens=config["infer"]["max_new_tokens"],
        ))
    if kind == "mock-echo":
        return MockBackend(mode="echo")
    if kind == "mock-empty":
        return MockBackend(mode="empty")
    raise FinextractError(f"unknown backend {kind!r}")


def cmd_infer(args) -> int:
    from .backend import run_batch

    config = load_config(args.config, {
        "infer.max_new_tokens": args.max_new_tokens,
    })
    if _maybe_print_config(args, config):
        return 0
    dataset = load_dataset(args.data)
    backend = _build_backend(args, config)
    outputs = run_batch(backend, dataset)
    by_id = {inst.id: inst for inst in dataset}
    predictions = [
        Prediction(instance_id=out.instance_id, raw_output=out.raw_text,
                   parsed=parse_output(out.raw_text, by_id[out.instance_id].text))
        for out in outputs
    ]
    save_predictions(predictions, args.out)
    n_failed = sum(1 for p in predictions
                   if p.parsed.parse_status == ParseStatus.FAILED)
    print(f"wrote {len(predictions)} predictions to {args.out} "
          f"({n_failed} failed parses)")
    return 0


def _pred_spans(prediction: Prediction, relocated: bool) -> list[PredSpan]:
    spans = []
    for e in prediction.parsed.entities:
        start, end = ((e.start, e.end) if relocated
                      else (e.claimed_start, e.claimed_end))
        spans.append(PredSpan(start=start, end=end, text=e.text))
    return spans


def _report_for(args):
    dataset = load_dataset(args.gold)
    predictions = {p.instance_id: p for p in load_predictions(args.pred)}
    unknown = set(predictions) - {inst.id for inst in dataset}
    if unknown:
        raise FinextractError(
            f"predictions reference unknown instance ids: {sorted(unknown)[:5]}"
        )
    per_instance = []
    for inst in dataset:
        pred = predictions.get(inst.id)
        per_instance.append(
            _pred_spans(pred, args.relocated) if pred else []
        )
    return dataset, score_dataset(list(dataset), per_instance)


def cmd_score(args) -> int:
    _, report = _report_for(args)
    print(f"{'Precision':>9}  {'Recall':>6}  {'F1':>5}")
    print(f"{report.precision:>9.3f}  {report.recall:>6.3f}  {report.f1:>5.3f}")
    print(f"gold={report.n_gold} predicted={report.n_pred} "
          f"exact={report.n_exact}")
    if args.json:
        Path(args.json).write_text(
            json.dumps(report.to_dict(), indent=2), encoding="utf-8"
        )
        print(f"wrote report to {args.json}")
    return 0


def cmd_analyze(args) -> int:
    _, report = _report_for(args)
    for facet, table in report.facets.items():
        print(f"\n[{facet}]")
        print(f"{'value':<18} {'P':>6} {'R':>6} {'F1':>6} "
              f"{'gold':>6} {'pred':>6} {'exact':>6}")
        for value, row in table.items():
            print(f"{value:<18} {row.precision:>6.3f} {row.recall:>6.3f} "
                  f"{row.f1:>6.3f} {row.n_gold:>6} {row.n_pred:>6} "
                  f"{row.n_exact:>6}")
    profile = report.profile
    print("\n[error profile]")
    print(f"exact    {profile.exact_pct:>5.1f}% of gold")
    print(f"partial  {profile.partial_pct:>5.1f}% of gold")
    print(f"missing  {profile.missing_pct:>5.1f}% of gold")
    print(f"spurious {profile.spurious_pct:>5.1f}% of predicted")
    if args.json:
        Path(args.json).write_text(
            json.dumps(report.to_dict(), indent=2), encoding="utf-8"
        )
    if args.csv_dir:
        out = Path(args.csv_dir)
        out.mkdir(parents=True, exist_ok=True)
        for facet, table in report.facets.items():
            lines = ["value,precision,recall,f1,gold,predicted,exact"]
            for value, row in table.items():
                lines.append(f"{value},{row.precision:.6f},{row.recall:.6f},"
                             f"{row.f1:.6f},{row.n_gold},{row.n_pred},"
                             f"{row.n_exact}")
            (out / f"{facet}.csv").write_text("\n".join(lines) + "\n")
        print(f"wrote facet CSVs to {args.csv_dir}")
    return 0


def cmd_humaneval_sample(args) -> int:
    from .humaneval import build_manifest, save_manifest

    dataset = load_dataset(args.gold)
    predictions = {
        args.name_a: load_predictions(args.pred_a),
        args.name_b: load_predictions(args.pred_b),
    }
    manifest, key = build_manifest(dataset, predictions, n=args.n,
                                   seed=args.seed)
    save_manifest(manifest, key, args.out_dir)
    print(f"wrote {len(manifest)}-sample manifest to {args.out_dir}")
    return 0


def cmd_humaneval_serve(args) -> int:
    import uvicorn

    from .humaneval.server import create_app

    app = create_app(args.run_dir, allow_report=args.allow_report,
                     static_dir=args.static)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_humaneval_report(args) -> int:
    from .humaneval import RatingStore, aggregate, load_manifest

    manifest, key = load_manifest(args.run_dir)
    store = RatingStore(Path(args.run_dir) / "ratings.jsonl")
    report = aggregate(store, key)
    for system, stats in report.systems.items():
        print(f"{system}: average {stats.average:.2f}, "
              f">=4 {stats.pct_ge4:.1f}% ({stats.n_ratings} ratings)")
    print(f"samples rated: {report.n_samples_rated}/{len(manifest)}")
    for annotator, counts in sorted(report.per_annotator.items()):
        print(f"  annotator {annotator}: "
              + ", ".join(f"{s}={n}" for s, n in sorted(counts.items())))
    if args.json:
        Path(args.json).write_text(json.dumps(report.to_dict(), indent=2),
                                   encoding="utf-8")
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="finextract",
        description="Generative financial event entity extraction pipeline.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-corpus", help="generate a synthetic dataset")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--density", help="weights for bins 1-2,3-4,5+ (e.g. 0.5,0.3,0.2)")
    p.add_argument("--split", default="train",
                   choices=[s.value for s in Split])
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--print-config", action="store_true")
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("convert", help="convert between spans and BIOES")
    p.add_argument("direction", choices=["to-bioes", "to-spans"])
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="train",
                   choices=[s.value for s in Split])
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("train", help="LoRA-train the local model")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--init-from", help="checkpoint to continue from")
    p.add_argument("--lr", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--warmup", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--lora-rank", type=int)
    p.add_argument("--lora-alpha", type=float)
    p.add_argument("--lora-targets", help="comma-separated adapter targets")
    p.add_argument("--print-config", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="run a backend over a dataset")
    p.add_argument("--backend", required=True,
                   choices=["local", "remote", "mock-echo", "mock-empty"])
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--config")
    p.add_argument("--max-new-tokens", type=int)
    p.add_argument("--print-config", action="store_true")
    p.set_defaults(func=cmd_infer)

    for name, func in (("score", cmd_score), ("analyze", cmd_analyze)):
        p = sub.add_parser(name, help=f"{name} predictions against gold")
        p.add_argument("--gold", required=True)
        p.add_argument("--pred", required=True)
        p.add_argument("--json", help="write the JSON report here")
        p.add_argument("--relocated", action="store_true",
                       help="score relocated offsets instead of claimed ones")
        if name == "analyze":
            p.add_argument("--csv-dir", help="write per-facet CSV tables here")
        p.set_defaults(func=func)

    p = sub.add_parser("humaneval", help="human evaluation protocol")
    hsub = p.add_subparsers(dest="humaneval_command", required=True)

    hp = hsub.add_parser("sample", help="build a blinded manifest")
    hp.add_argument("--gold", required=True)
    hp.add_argument("--pred-a", required=True)
    hp.add_argument("--pred-b", required=True)
    hp.add_argument("--name-a", default="system_a")
    hp.add_argument("--name-b", default="system_b")
    hp.add_argument("-n", type=int, default=100)
    hp.add_argument("--seed", type=int, default=0)
    hp.add_argument("--out-dir", required=True)
    hp.set_defaults(func=cmd_humaneval_sample)

    hp = hsub.add_parser("serve", help="serve the annotation API/UI")
    hp.add_argument("--run-dir", required=True)
    hp.add_argument("--host", default="127.0.0.1")
    hp.add_argument("--port", type=int, default=8710)
    hp.add_argument("--allow-report", action="store_true")
    hp.add_argument("--static", help="directory with the built UI")
    hp.set_defaults(func=cmd_humaneval_serve)

    hp = hsub.add_parser("report", help="aggregate ratings")
    hp.add_argument("--run-dir", required=True)
    hp.add_argument("--json")
    hp.set_defaults(func=cmd_humaneval_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FinextractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
