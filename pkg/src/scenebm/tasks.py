"""Scene reasoning tasks and the model-comparison harness.

Task 1  estimate relations given the objects (recall of labeled
        relations at probability >= 0.5; inactive nodes are not scored).
Task 2  find a removed object: clamp the surviving scene, rank the free
        object nodes by settled probability, score top-1.
Task 3  undo an out-of-context corruption: swap one object for a random
        absent one, settle with relations clamped and objects released,
        and count per-node bit disagreements with the original scene.
Task 4  generate scenes from clamped hidden units or a partial scene.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from scenebm.model import NetworkConfig, init_params
from scenebm.sampler import ClampMask, SamplerSettings, conditional_complete, generate_from_hidden
from scenebm.scenes import RelationId, SceneVector, decode_scene
from scenebm.seeding import rng_for
from scenebm.trainer import HyperParams, train


@dataclass
class TaskReport:
    """Per-scene records plus the aggregate metric for one task run."""

    task: int
    model: str
    seed: int
    metric: str
    aggregate: float
    chance: float
    n_evaluated: int
    n_skipped: int
    per_scene: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "task": self.task, "model": self.model, "seed": self.seed,
            "metric": self.metric, "aggregate": self.aggregate,
            "chance": self.chance, "n_evaluated": self.n_evaluated,
            "n_skipped": self.n_skipped, "per_scene": self.per_scene,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def chance_levels(config: NetworkConfig) -> dict:
    """Uniform-guess baselines per task for this architecture size."""
    return {
        "task1": 1.0 / config.R,
        "task2": 1.0 / config.V,
        "task2_pairwise": 1.0 / (config.V * config.V),
        "task3": 0.5,
    }


def _map_scenes(fn, n: int, threads: int = 1):
    if threads <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n)))


def task1_relation_estimation(
    params,
    scenes,
    settings: SamplerSettings = SamplerSettings(),
    seed: int = 0,
    model_label: str = "",
    threads: int = 1,
) -> TaskReport:
    """Estimate relations for a scene given only its objects.

    Two stages: the context (hidden layers) settles on the clamped
    bag of objects with every relation node held empty, then relation
    probabilities are read out from context and objects without being
    fed back.  A ground-truth relation counts correct when its readout
    probability, averaged over the tail sweeps, is at least 0.5.
    """
    from scenebm.model import activation_prob, relation_inputs

    c = params.config

    def one(i):
        vec = scenes[i].vector if hasattr(scenes[i], "vector") else scenes[i]
        if not vec.active_relations:
            return {"scene_id": vec.scene_id, "skipped": "no relations"}
        partial = SceneVector(
            V=c.V, Tc=c.Tc, active_objects=vec.active_objects, active_relations=()
        )
        mask = ClampMask(
            objects=frozenset(vec.active_objects),
            relations=frozenset(range(c.R)),
        )
        rng = rng_for(seed, "task1", i)
        from scenebm.model import NetworkState
        from scenebm.sampler import negative_phase_step

        state = NetworkState.from_vector(partial, c)
        n = settings.settle_sweeps
        tail_start = n - (n + 1) // 2
        readout = np.zeros(c.R)
        counted = 0
        for sweep in range(n):
            T = settings.anneal.temperature(sweep, n) if settings.anneal else settings.T
            negative_phase_step(params, state, mask, rng, T, settings.order)
            if sweep >= tail_start:
                readout += activation_prob(
                    relation_inputs(
                        params, state.v.astype(np.float64), state.h1.astype(np.float64)
                    ),
                    T,
                )
                counted += 1
        readout /= counted
        hits = sum(1 for flat in vec.active_relations if readout[flat] >= 0.5)
        return {
            "scene_id": vec.scene_id,
            "n_relations": len(vec.active_relations),
            "n_correct": hits,
        }

    records = _map_scenes(one, len(scenes), threads)
    total = sum(r.get("n_relations", 0) for r in records)
    correct = sum(r.get("n_correct", 0) for r in records)
    skipped = sum(1 for r in records if "skipped" in r)
    return TaskReport(
        task=1, model=model_label, seed=seed, metric="relation_recall",
        aggregate=correct / total if total else 0.0,
        chance=chance_levels(c)["task1"],
        n_evaluated=len(records) - skipped, n_skipped=skipped, per_scene=records,
    )


def _strip_object(vec: SceneVector, obj: int) -> tuple:
    """Remove an object bit and every relation touching it."""
    objects = tuple(j for j in vec.active_objects if j != obj)
    relations = tuple(
        flat
        for flat in vec.active_relations
        if (rid := RelationId.from_flat(flat, vec.V)).j != obj and rid.k != obj
    )
    return objects, relations


def task2_missing_object(
    params,
    scenes,
    settings: SamplerSettings = SamplerSettings(),
    seed: int = 0,
    model_label: str = "",
    threads: int = 1,
) -> TaskReport:
    """Remove one random object, clamp the remainder, and check whether
    the removed object is the top-ranked free object node.

    The surviving scene counts as fully observed: remaining objects and
    their relations are clamped at their values, and relation nodes
    among them that are inactive are clamped at 0.  Free nodes are the
    absent object slots (the candidates) plus the relation slots that
    the removal stripped, whose values are genuinely unknown.
    """
    c = params.config

    def one(i):
        vec = scenes[i].vector if hasattr(scenes[i], "vector") else scenes[i]
        if len(vec.active_objects) < 2:
            return {"scene_id": vec.scene_id, "skipped": "fewer than 2 objects"}
        rng = rng_for(seed, "task2", i)
        removed = int(vec.active_objects[rng.integers(len(vec.active_objects))])
        objects, relations = _strip_object(vec, removed)
        partial = SceneVector(
            V=c.V, Tc=c.Tc, active_objects=objects, active_relations=relations
        )
        stripped = frozenset(
            flat for flat in range(c.R)
            if (rid := RelationId.from_flat(flat, c.V)).j == removed
            or rid.k == removed
        )
        mask = ClampMask(
            objects=frozenset(objects),
            relations=frozenset(range(c.R)) - stripped,
        )
        _, probs = conditional_complete(params, partial, mask, settings, rng)
        free = np.array([j for j in range(c.V) if j not in set(objects)])
        predicted = int(free[np.argmax(probs.p_v[free])])
        return {
            "scene_id": vec.scene_id,
            "removed": removed,
            "predicted": predicted,
            "top1": bool(predicted == removed),
            "recovered_prob": float(probs.p_v[removed]),
        }

    records = _map_scenes(one, len(scenes), threads)
    scored = [r for r in records if "skipped" not in r]
    acc = float(np.mean([r["top1"] for r in scored])) if scored else 0.0
    return TaskReport(
        task=2, model=model_label, seed=seed, metric="top1_accuracy",
        aggregate=acc, chance=chance_levels(c)["task2"],
        n_evaluated=len(scored), n_skipped=len(records) - len(scored),
        per_scene=records,
    )


def task3_out_of_context(
    params,
    scenes,
    settings: SamplerSettings = SamplerSettings(),
    seed: int = 0,
    model_label: str = "",
    threads: int = 1,
) -> TaskReport:
    """Swap one object for a random absent one, then measure how far the
    settled object bits land from the original scene (mean absolute
    disagreement per object node; lower is better, 0.5 is chance)."""
    c = params.config

    def one(i):
        vec = scenes[i].vector if hasattr(scenes[i], "vector") else scenes[i]
        absent = [j for j in range(c.V) if j not in set(vec.active_objects)]
        if not vec.active_objects or not absent:
            return {"scene_id": vec.scene_id, "skipped": "cannot corrupt"}
        rng = rng_for(seed, "task3", i)
        removed = int(vec.active_objects[rng.integers(len(vec.active_objects))])
        added = int(absent[rng.integers(len(absent))])
        objects, relations = _strip_object(vec, removed)
        corrupted = SceneVector(
            V=c.V, Tc=c.Tc,
            active_objects=objects + (added,), active_relations=relations,
        )
        # Relations stay clamped at their corrupted values; object nodes
        # start at the corrupted scene and are all released.
        mask = ClampMask(relations=frozenset(range(c.R)))
        state, _ = conditional_complete(params, corrupted, mask, settings, rng)
        diff = float(np.abs(vec.dense_objects().astype(np.int64) - state.v).sum())
        return {
            "scene_id": vec.scene_id,
            "removed": removed,
            "added": added,
            "bit_errors": diff,
            "error": diff / c.V,
        }

    records = _map_scenes(one, len(scenes), threads)
    scored = [r for r in records if "skipped" not in r]
    err = float(np.mean([r["error"] for r in scored])) if scored else 0.0
    return TaskReport(
        task=3, model=model_label, seed=seed, metric="object_bit_error",
        aggregate=err, chance=chance_levels(c)["task3"],
        n_evaluated=len(scored), n_skipped=len(records) - len(scored),
        per_scene=records,
    )


def most_active_hidden(
    params,
    scenes,
    settings: SamplerSettings = SamplerSettings(),
    seed: int = 0,
    layer: int = 1,
) -> tuple:
    """(layer, index) of the hidden unit most active over these scenes.

    Activation is the mean positive-phase probability with the scene
    clamped on the visibles; useful for picking a category's context
    unit before generation.
    """
    from scenebm.sampler import sweep_hidden
    from scenebm.model import NetworkState

    c = params.config
    size = c.H1 if layer == 1 else c.H2
    sums = np.zeros(size)
    for i, item in enumerate(scenes):
        vec = item.vector if hasattr(item, "vector") else item
        state = NetworkState.from_vector(vec, c)
        mask = ClampMask.visibles(c)
        rng = rng_for(seed, "most-active", i)
        for _ in range(settings.k_pos):
            sweep_hidden(params, state, mask, rng, settings.T)
        sums += state.p_h1 if layer == 1 else state.p_h2
    return (layer, int(np.argmax(sums)))


def motif_hits(scene, motifs, vocab) -> int:
    """Number of ground-truth motifs present in a decoded scene."""
    present = {(r.type, scene.object_by_id(r.subject).label,
                scene.object_by_id(r.object).label) for r in scene.relations}
    return sum(1 for m in motifs if tuple(m) in present)


def task4_generate(
    params,
    vocab,
    settings: SamplerSettings = SamplerSettings(),
    seed: int = 0,
    hidden_ids=None,
    partial: SceneVector | None = None,
    n_samples: int = 1,
    motifs=None,
    model_label: str = "",
) -> tuple:
    """Sample scenes from clamped hidden units (or complete a partial
    scene) and decode them; scores motif consistency when ground-truth
    motifs are supplied.  Returns (scenes, TaskReport)."""
    c = params.config
    if partial is not None and hidden_ids:
        raise ValueError("give either hidden_ids or a partial scene, not both")
    scenes = []
    records = []
    for i in range(n_samples):
        rng = rng_for(seed, "task4", i)
        if partial is not None:
            mask = ClampMask(
                objects=frozenset(partial.active_objects),
                relations=frozenset(partial.active_relations),
            )
            state, _ = conditional_complete(params, partial, mask, settings, rng)
        else:
            state = generate_from_hidden(params, hidden_ids or (), settings, rng)
        sv = SceneVector.from_dense(
            state.v, state.r, c.Tc, drop_dangling=True, scene_id=f"generated-{i:03d}"
        )
        scene = decode_scene(sv, vocab, scene_id=sv.scene_id, category="generated")
        scenes.append(scene)
        record = {
            "scene_id": sv.scene_id,
            "n_objects": len(sv.active_objects),
            "n_relations": len(sv.active_relations),
        }
        if motifs is not None:
            record["motif_hits"] = motif_hits(scene, motifs, vocab)
        records.append(record)
    if motifs is not None and records:
        aggregate = float(np.mean([r["motif_hits"] >= 1 for r in records]))
        metric = "motif_consistency"
    else:
        aggregate = 0.0
        metric = "unscored"
    report = TaskReport(
        task=4, model=model_label, seed=seed, metric=metric, aggregate=aggregate,
        chance=0.0, n_evaluated=len(records), n_skipped=0, per_scene=records,
    )
    return scenes, report


# -- model comparison --------------------------------------------------------

_TASK_FNS = {
    1: task1_relation_estimation,
    2: task2_missing_object,
    3: task3_out_of_context,
}


@dataclass
class ComparisonReport:
    """Task metrics per model and seed, in a printable layout."""

    seeds: list
    labels: list
    metrics: dict  # task -> label -> {seed: value}
    chances: dict  # task -> chance value
    metric_names: dict  # task -> metric name

    def value(self, task: int, label: str, seed: int) -> float:
        return self.metrics[task][label][seed]

    def mean(self, task: int, label: str) -> float:
        return float(np.mean([self.metrics[task][label][s] for s in self.seeds]))

    def to_dict(self) -> dict:
        return {
            "seeds": self.seeds,
            "labels": self.labels,
            "tasks": {
                str(task): {
                    "metric": self.metric_names[task],
                    "chance": self.chances[task],
                    "models": {
                        label: {
                            "per_seed": {str(s): self.metrics[task][label][s] for s in self.seeds},
                            "mean": self.mean(task, label),
                        }
                        for label in self.labels
                    },
                }
                for task in sorted(self.metrics)
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["task", "metric", "model"] + [f"seed_{s}" for s in self.seeds] + ["mean"])
        for task in sorted(self.metrics):
            for label in self.labels:
                row = [task, self.metric_names[task], label]
                row += [repr(self.metrics[task][label][s]) for s in self.seeds]
                row += [repr(self.mean(task, label))]
                writer.writerow(row)
            writer.writerow([task, self.metric_names[task], "chance"]
                            + [repr(self.chances[task])] * len(self.seeds)
                            + [repr(self.chances[task])])
        return buf.getvalue()

    def to_text(self) -> str:
        lines = []
        width = max(len(l) for l in self.labels + ["chance"]) + 2
        for task in sorted(self.metrics):
            lines.append(f"Task {task} ({self.metric_names[task]})")
            header = "".join(f"seed {s:<8}" for s in self.seeds)
            lines.append(f"  {'model':<{width}}{header}mean")
            for label in self.labels:
                cells = "".join(f"{self.metrics[task][label][s]:<13.4f}" for s in self.seeds)
                lines.append(f"  {label:<{width}}{cells}{self.mean(task, label):.4f}")
            chance = self.chances[task]
            cells = "".join(f"{chance:<13.3g}" for _ in self.seeds)
            lines.append(f"  {'chance':<{width}}{cells}{chance:.3g}")
            lines.append("")
        return "\n".join(lines)


def compare_models(
    configs,
    split,
    hyper: HyperParams,
    settings: SamplerSettings = SamplerSettings(),
    seeds=(0,),
    tasks=(1, 2, 3),
    threads: int = 1,
    progress=None,
) -> ComparisonReport:
    """Train each labeled config per seed on the same split and run the
    requested tasks on the test scenes.

    configs is a list of (label, NetworkConfig).  Training and task
    corruption draws are deterministic per (label, seed).
    """
    if not seeds:
        raise ValueError("need at least one seed")
    labels = [label for label, _ in configs]
    metrics = {t: {label: {} for label in labels} for t in tasks}
    chances = {}
    metric_names = {}
    for seed in seeds:
        for label, config in configs:
            params = init_params(config, rng_for(seed, "init", label))
            trained, _ = train(params, split, replace(hyper, seed=seed))
            for t in tasks:
                report = _TASK_FNS[t](
                    trained, split.test, settings, seed=seed,
                    model_label=label, threads=threads,
                )
                metrics[t][label][seed] = report.aggregate
                chances[t] = report.chance
                metric_names[t] = report.metric
            if progress:
                progress(f"seed {seed}: {label} done")
    return ComparisonReport(
        seeds=list(seeds), labels=labels, metrics=metrics,
        chances=chances, metric_names=metric_names,
    )
