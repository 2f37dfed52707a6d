"""Command-line pipeline: synthesize, derive, encode, split, train,
evaluate, generate, and self-check.

All configuration lives in one JSON file; flags override config values.
Every command is deterministic given its config and seeds, and
re-running overwrites outputs byte-identically.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from scenebm import svgplot
from scenebm.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from scenebm.datasets import (
    DatasetSplit,
    EncodedScene,
    load_synth_spec,
    split_dataset,
    synth_generate,
)
from scenebm.geometry import RelationThresholds, derive_relations
from scenebm.model import ModelError, NetworkConfig, init_params
from scenebm.oracle_checks import run_all
from scenebm.sampler import AnnealSchedule, SamplerSettings
from scenebm.scenes import (
    SceneDataError,
    SceneVector,
    encode_scene,
    load_scenes,
    load_vocabulary,
    save_scenes,
    save_vocabulary,
)
from scenebm.tasks import (
    chance_levels,
    most_active_hidden,
    task1_relation_estimation,
    task2_missing_object,
    task3_out_of_context,
    task4_generate,
)
from scenebm.trainer import HyperParams, TrainHistory, TrainingDiverged, train

_ERRORS = (SceneDataError, ModelError, CheckpointError, TrainingDiverged, OSError, ValueError, KeyError)


def _write_json(path, payload) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _threads(args) -> int:
    if getattr(args, "threads", None):
        return args.threads
    env = os.environ.get("SCENEBM_THREADS")
    return int(env) if env else 1


def _load_config(args) -> dict:
    if getattr(args, "config", None):
        return json.loads(Path(args.config).read_text())
    return {}


def _sampler_settings(cfg: dict) -> SamplerSettings:
    section = dict(cfg.get("sampler", {}))
    anneal = section.pop("anneal", None)
    if anneal:
        anneal = AnnealSchedule(T_start=anneal["T_start"], T_end=anneal["T_end"])
    return SamplerSettings(anneal=anneal, **section)


def cmd_synth(args) -> int:
    spec = load_synth_spec(args.spec)
    if args.seed is not None:
        spec = type(spec).from_dict({**spec.to_dict(), "seed": args.seed})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scenes = synth_generate(spec)
    save_scenes(scenes, out / "scenes.json")
    save_vocabulary(spec.vocabulary, out / "vocab.json")
    _write_json(out / "motifs.json", spec.motif_table())
    print(f"wrote {len(scenes)} scenes across {spec.n_categories} categories to {out}")
    return 0


def cmd_derive(args) -> int:
    scenes = load_scenes(args.scenes)
    thresholds = RelationThresholds(
        axis_margin=args.axis_margin,
        contact_gap=args.contact_gap,
        overlap_ratio=args.overlap_ratio,
    )
    derived = [derive_relations(s, thresholds) for s in scenes]
    save_scenes(derived, args.out)
    n_rel = sum(len(s.relations) for s in derived)
    print(f"derived {n_rel} relations across {len(derived)} scenes -> {args.out}")
    return 0


def cmd_encode(args) -> int:
    vocab = load_vocabulary(args.vocab)
    scenes = load_scenes(args.scenes)
    vectors = [encode_scene(s, vocab) for s in scenes]
    payload = {
        "V": vocab.V,
        "Tc": vocab.Tc,
        "implied_dim": vocab.implied_dim,
        "vectors": [
            {
                "scene_id": sv.scene_id,
                "category": sv.category,
                "objects": list(sv.active_objects),
                "relations": list(sv.active_relations),
            }
            for sv in vectors
        ],
    }
    _write_json(args.out, payload)
    print(f"implied vector dimension: {vocab.implied_dim} (V={vocab.V}, Tc={vocab.Tc})")
    print(f"encoded {len(vectors)} scenes -> {args.out}")
    return 0


def cmd_split(args) -> int:
    vocab = load_vocabulary(args.vocab)
    scenes = load_scenes(args.scenes)
    split = split_dataset(scenes, vocab, ratios=tuple(args.ratios), seed=args.seed or 0)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, part in (("train", split.train), ("test", split.test),
                       ("validation", split.validation)):
        _write_json(out / f"{name}.json",
                    {"scene_ids": [enc.scene.scene_id for enc in part]})
    print(f"split {len(scenes)} scenes -> {split.counts()} (train/test/validation) in {out}")
    return 0


def _load_split(scenes_path, vocab_path, splits_dir) -> tuple:
    vocab = load_vocabulary(vocab_path)
    scenes = {s.scene_id: s for s in load_scenes(scenes_path)}
    split = DatasetSplit()
    for name, bucket in (("train", split.train), ("test", split.test),
                         ("validation", split.validation)):
        manifest = json.loads((Path(splits_dir) / f"{name}.json").read_text())
        for sid in manifest["scene_ids"]:
            scene = scenes[sid]
            bucket.append(EncodedScene(scene, encode_scene(scene, vocab)))
    return vocab, split


def cmd_train(args) -> int:
    cfg = _load_config(args)
    data = cfg["data"]
    vocab, split = _load_split(data["scenes"], data["vocab"], data["splits"])
    network = NetworkConfig.from_dict(cfg["network"])
    hyper = HyperParams.from_dict(cfg.get("hyper", {}))
    if args.seed is not None:
        network = NetworkConfig.from_dict({**network.to_dict(), "seed": args.seed})
        hyper = HyperParams.from_dict({**hyper.to_dict(), "seed": args.seed})
    if vocab.V != network.V or vocab.Tc != network.Tc:
        print(
            f"error: vocabulary (V={vocab.V}, Tc={vocab.Tc}) does not match "
            f"network config (V={network.V}, Tc={network.Tc})",
            file=sys.stderr,
        )
        return 1
    out = Path(args.out or cfg.get("out", {}).get("dir", "."))
    out.mkdir(parents=True, exist_ok=True)
    ckpt_path = out / "checkpoint.json"
    log_path = out / "train_log.jsonl"
    history = None
    if args.resume:
        params, hist_dict = load_checkpoint(ckpt_path)
        history = TrainHistory.from_dict(hist_dict)
    else:
        params = init_params(network)
        log_path.unlink(missing_ok=True)
    try:
        params, history = train(params, split, hyper, log_path=log_path, history=history)
    except TrainingDiverged as exc:
        print(f"error: training diverged; last good epoch {exc.last_good_epoch}",
              file=sys.stderr)
        return 1
    save_checkpoint(params, ckpt_path, history=history.to_dict())
    svgplot.write_training_plot(history, out / "training_curve.svg")
    print(
        f"trained {network.model_kind} for {history.stopped_epoch} epochs "
        f"(best epoch {history.best_epoch}); checkpoint -> {ckpt_path}"
    )
    return 0


_TASK_RUNNERS = {1: task1_relation_estimation, 2: task2_missing_object,
                 3: task3_out_of_context}


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    params, _ = load_checkpoint(args.checkpoint)
    data_dir = Path(args.data)
    vocab, split = _load_split(
        data_dir / "scenes.json", data_dir / "vocab.json", data_dir / "splits"
    )
    if vocab.V != params.config.V or vocab.Tc != params.config.Tc:
        print(
            f"error: checkpoint (V={params.config.V}, Tc={params.config.Tc}) does not "
            f"match dataset (V={vocab.V}, Tc={vocab.Tc})",
            file=sys.stderr,
        )
        return 1
    settings = _sampler_settings(cfg)
    seed = args.seed or 0
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    label = params.config.model_kind
    if args.task in _TASK_RUNNERS:
        report = _TASK_RUNNERS[args.task](
            params, split.test, settings, seed=seed,
            model_label=label, threads=_threads(args),
        )
        scenes_out = None
    else:
        motif_path = data_dir / "motifs.json"
        motif_table = json.loads(motif_path.read_text()) if motif_path.exists() else {}
        by_cat = {}
        for enc in split.test:
            by_cat.setdefault(enc.scene.category, []).append(enc)
        all_scenes = []
        records = []
        hits = []
        for cat in sorted(by_cat):
            motifs = [tuple(m) for m in motif_table.get(cat, [])]
            unit = most_active_hidden(params, by_cat[cat], settings, seed=seed)
            scenes, rep = task4_generate(
                params, vocab, settings, seed=seed, hidden_ids=[unit],
                n_samples=args.samples, motifs=motifs or None, model_label=label,
            )
            for s in scenes:
                s.category = f"generated:{cat}"
            all_scenes.extend(scenes)
            records.extend(rep.per_scene)
            if motifs:
                hits.append(rep.aggregate)
        report = type(rep)(
            task=4, model=label, seed=seed, metric="motif_consistency",
            aggregate=float(np.mean(hits)) if hits else 0.0, chance=0.0,
            n_evaluated=len(records), n_skipped=0, per_scene=records,
        )
        scenes_out = all_scenes
    base = out / f"task{args.task}_{label}_seed{seed}"
    Path(f"{base}.json").write_text(report.to_json())
    chance = chance_levels(params.config)
    rows = ["metric,value", f"{report.metric},{report.aggregate!r}",
            f"chance,{report.chance!r}"]
    Path(f"{base}.csv").write_text("\n".join(rows) + "\n")
    text = (
        f"task {args.task} ({report.metric})  model={label} seed={seed}\n"
        f"  aggregate: {report.aggregate:.6f}\n"
        f"  chance:    {report.chance:.6g}\n"
        f"  evaluated: {report.n_evaluated}  skipped: {report.n_skipped}\n"
    )
    Path(f"{base}.txt").write_text(text)
    if scenes_out is not None:
        save_scenes(scenes_out, f"{base}_scenes.json")
    print(text, end="")
    print(f"chance levels for this architecture: {json.dumps(chance, sort_keys=True)}")
    print(f"reports -> {base}.json/.csv/.txt")
    return 0


def cmd_generate(args) -> int:
    cfg = _load_config(args)
    params, _ = load_checkpoint(args.checkpoint)
    vocab = load_vocabulary(args.vocab)
    settings = _sampler_settings(cfg)
    hidden_ids = []
    for spec in args.hidden or []:
        layer, idx = spec.split(":")
        hidden_ids.append((int(layer), int(idx)))
    partial = None
    if args.partial:
        scenes = load_scenes(args.partial)
        partial = encode_scene(scenes[0], vocab)
        hidden_ids = None
    scenes, report = task4_generate(
        params, vocab, settings, seed=args.seed or 0,
        hidden_ids=hidden_ids, partial=partial, n_samples=args.samples,
        model_label=params.config.model_kind,
    )
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    save_scenes(scenes, out / "generated_scenes.json")
    Path(out / "generate_report.json").write_text(report.to_json())
    print(f"generated {len(scenes)} scenes -> {out / 'generated_scenes.json'}")
    return 0


def cmd_oracle_check(args) -> int:
    results = run_all(fast=args.fast)
    for result in results:
        print(result.line())
    return 0 if all(r.passed for r in results) else 1


def cmd_inspect(args) -> int:
    if args.checkpoint:
        params, history = load_checkpoint(args.checkpoint)
        c = params.config
        n_params = sum(arr.size for arr in params.weight_families().values())
        print(f"checkpoint: {args.checkpoint}")
        print(f"  model: {c.model_kind}  V={c.V} Tc={c.Tc} H1={c.H1} H2={c.H2}")
        print(f"  relation nodes: {c.R}  total visible dim: {c.V + c.R}")
        print(f"  parameters: {n_params}  rh_sharing={c.rh_sharing} "
              f"relation_support={c.relation_support}")
        if history:
            hist = TrainHistory.from_dict(history)
            print(f"  epochs: {hist.stopped_epoch} (best {hist.best_epoch}); "
                  f"final val_err {hist.val_err[-1]:.4f}" if hist.val_err else "  no history")
    if args.scenes:
        scenes = load_scenes(args.scenes)
        cats = {}
        for s in scenes:
            cats[s.category] = cats.get(s.category, 0) + 1
        n_rel = sum(len(s.relations) for s in scenes)
        print(f"scenes: {args.scenes}")
        print(f"  {len(scenes)} scenes, {n_rel} relations, categories: "
              f"{json.dumps(cats, sort_keys=True)}")
    if not args.checkpoint and not args.scenes:
        print("nothing to inspect; pass --checkpoint and/or --scenes", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scenebm",
        description="Hybrid tri-way Boltzmann Machines for scene modeling",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default=None):
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=out_default)
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (or SCENEBM_THREADS)")

    p = sub.add_parser("synth", help="generate a synthetic dataset from a spec")
    p.add_argument("--spec", required=True)
    common(p, out_default="data")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("derive", help="derive relations from 3D boxes")
    p.add_argument("--scenes", required=True)
    p.add_argument("--axis-margin", type=float, default=0.05)
    p.add_argument("--contact-gap", type=float, default=0.05)
    p.add_argument("--overlap-ratio", type=float, default=0.5)
    common(p, out_default="derived_scenes.json")
    p.set_defaults(fn=cmd_derive)

    p = sub.add_parser("encode", help="encode scenes as sparse binary vectors")
    p.add_argument("--scenes", required=True)
    p.add_argument("--vocab", required=True)
    common(p, out_default="encoded.json")
    p.set_defaults(fn=cmd_encode)

    p = sub.add_parser("split", help="stratified train/test/validation split")
    p.add_argument("--scenes", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--ratios", type=float, nargs=3, default=[0.6, 0.3, 0.1])
    common(p, out_default="splits")
    p.set_defaults(fn=cmd_split)

    p = sub.add_parser("train", help="train a model from a run config")
    p.add_argument("--resume", action="store_true",
                   help="continue from the checkpoint in --out")
    common(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="run a reasoning task against a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--task", type=int, required=True, choices=(1, 2, 3, 4))
    p.add_argument("--data", required=True, help="dataset dir (scenes/vocab/splits)")
    p.add_argument("--samples", type=int, default=20, help="generations for task 4")
    common(p)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("generate", help="sample scenes from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--hidden", nargs="*", help="hidden units to clamp, as layer:index")
    p.add_argument("--partial", help="scene file whose first scene seeds generation")
    p.add_argument("--samples", type=int, default=1)
    common(p)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("oracle-check", help="run the built-in correctness suites")
    p.add_argument("--fast", action="store_true", help="shorten the stationarity chain")
    common(p)
    p.set_defaults(fn=cmd_oracle_check)

    p = sub.add_parser("inspect", help="summarize a checkpoint or scene file")
    p.add_argument("--checkpoint")
    p.add_argument("--scenes")
    common(p)
    p.set_defaults(fn=cmd_inspect)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except _ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
