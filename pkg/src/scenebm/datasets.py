"""Synthetic scene generation and stratified dataset splits.

The generator draws scenes per category from anchor objects with
inclusion probabilities and deterministic relation motifs: a motif
relation is present whenever both endpoint objects are.  Noise flips a
motif relation (reverses its direction, so left(a, b) becomes
left(b, a)) or adds a random extra object, each with probability
noise_rate.  The motif table doubles as ground truth for evaluation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from scenebm.scenes import (
    CANONICAL_RELATIONS,
    SceneDataError,
    SceneInstance,
    SceneObject,
    SceneRelation,
    SceneVector,
    Vocabulary,
    encode_scene,
)
from scenebm.seeding import rng_for

# raw spellings of each canonical relation: (identity form, swapped form)
_CANONICAL_TO_RAW = {
    "left": ("left", "right"),
    "front": ("front", "behind"),
    "on_top": ("on_top", "under"),
    "above": ("above", "below"),
}


@dataclass(frozen=True)
class CategorySpec:
    """One scene category: anchor labels with inclusion probabilities
    and canonical relation motifs (type, subject label, object label)."""

    name: str
    anchors: tuple  # of (label, probability)
    motifs: tuple  # of (canonical type, subject label, object label)

    def __post_init__(self):
        object.__setattr__(self, "anchors", tuple((l, float(p)) for l, p in self.anchors))
        object.__setattr__(self, "motifs", tuple(tuple(m) for m in self.motifs))
        for label, p in self.anchors:
            if not (0.0 <= p <= 1.0):
                raise SceneDataError(f"inclusion probability out of range for {label!r}: {p}")
        for t, _, _ in self.motifs:
            if t not in CANONICAL_RELATIONS:
                raise SceneDataError(f"motif type must be canonical, got {t!r}")


@dataclass(frozen=True)
class SynthSpec:
    """Full recipe for a synthetic dataset; a pure function of its seed."""

    vocabulary: Vocabulary
    categories: tuple
    noise_rate: float = 0.0
    scenes_per_category: int = 100
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "categories", tuple(self.categories))
        if not (0.0 <= self.noise_rate <= 1.0):
            raise SceneDataError(f"noise_rate out of range: {self.noise_rate}")
        if self.scenes_per_category < 1:
            raise SceneDataError("scenes_per_category must be >= 1")
        if not self.categories:
            raise SceneDataError("spec needs at least one category")
        labels = set(self.vocabulary.object_labels)
        for cat in self.categories:
            for label, _ in cat.anchors:
                if label not in labels:
                    raise SceneDataError(f"anchor label not in vocabulary: {label!r}")
            for _, subj, obj in cat.motifs:
                if subj not in labels or obj not in labels:
                    raise SceneDataError(f"motif labels not in vocabulary: {subj!r}/{obj!r}")

    @property
    def n_categories(self) -> int:
        return len(self.categories)

    @property
    def V(self) -> int:
        return self.vocabulary.V

    def motif_table(self) -> dict:
        """category name -> list of (canonical type, subj label, obj label)."""
        return {c.name: list(c.motifs) for c in self.categories}

    def to_dict(self) -> dict:
        return {
            "vocabulary": self.vocabulary.to_dict(),
            "categories": [
                {
                    "name": c.name,
                    "anchors": [[l, p] for l, p in c.anchors],
                    "motifs": [list(m) for m in c.motifs],
                }
                for c in self.categories
            ],
            "noise_rate": self.noise_rate,
            "scenes_per_category": self.scenes_per_category,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        return cls(
            vocabulary=Vocabulary.from_dict(d["vocabulary"]),
            categories=tuple(
                CategorySpec(
                    name=c["name"],
                    anchors=tuple((a[0], a[1]) for a in c["anchors"]),
                    motifs=tuple(tuple(m) for m in c["motifs"]),
                )
                for c in d["categories"]
            ),
            noise_rate=float(d.get("noise_rate", 0.0)),
            scenes_per_category=int(d.get("scenes_per_category", 100)),
            seed=int(d.get("seed", 0)),
        )


def save_synth_spec(spec: SynthSpec, path) -> None:
    Path(path).write_text(json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n")


def load_synth_spec(path) -> SynthSpec:
    return SynthSpec.from_dict(json.loads(Path(path).read_text()))


def _generate_one(spec: SynthSpec, cat: CategorySpec, ci: int, si: int) -> SceneInstance:
    rng = rng_for(spec.seed, "synth", ci, si)
    vocab = spec.vocabulary
    present: list[str] = []
    for label, p in cat.anchors:
        if rng.random() < p:
            present.append(label)
    if rng.random() < spec.noise_rate:
        absent = [l for l in vocab.object_labels if l not in present]
        if absent:
            present.append(absent[rng.integers(len(absent))])
    objects = [SceneObject(id=i, label=label) for i, label in enumerate(present)]
    by_label = {o.label: o.id for o in objects}
    relations = []
    for t, subj, obj in cat.motifs:
        if subj in by_label and obj in by_label:
            if rng.random() < spec.noise_rate:
                subj, obj = obj, subj  # flipped: direction reversed this scene
            # Emit either raw spelling; both fold to the same relation bit.
            identity, swapped = _CANONICAL_TO_RAW[t]
            if rng.random() < 0.5:
                relations.append(SceneRelation(identity, by_label[subj], by_label[obj]))
            else:
                relations.append(SceneRelation(swapped, by_label[obj], by_label[subj]))
    return SceneInstance(
        scene_id=f"{cat.name}-{si:04d}",
        category=cat.name,
        objects=objects,
        relations=relations,
    ).validate()


def synth_generate(spec: SynthSpec) -> list:
    """Generate scenes_per_category scenes for every category.

    Deterministic in the spec (including its seed); scene order is by
    (category index, scene index).
    """
    scenes = []
    for ci, cat in enumerate(spec.categories):
        for si in range(spec.scenes_per_category):
            scenes.append(_generate_one(spec, cat, ci, si))
    return scenes


@dataclass(frozen=True)
class EncodedScene:
    """A scene paired with its label-level encoding."""

    scene: SceneInstance
    vector: SceneVector


@dataclass
class DatasetSplit:
    """Stratified train/test/validation partition of encoded scenes."""

    train: list = field(default_factory=list)
    test: list = field(default_factory=list)
    validation: list = field(default_factory=list)

    def counts(self) -> tuple:
        return (len(self.train), len(self.test), len(self.validation))


def _split_counts(n: int, ratios) -> list:
    """Largest-remainder apportionment, then force >= 1 per split."""
    floors = [int(n * r) for r in ratios]
    remainder = n - sum(floors)
    fracs = sorted(
        range(len(ratios)), key=lambda i: (-(n * ratios[i] - floors[i]), i)
    )
    for i in range(remainder):
        floors[fracs[i % len(ratios)]] += 1
    while min(floors) == 0:
        floors[floors.index(max(floors))] -= 1
        floors[floors.index(min(floors))] += 1
    return floors


def split_dataset(
    scenes, vocab: Vocabulary, ratios=(0.6, 0.3, 0.1), seed: int = 0
) -> DatasetSplit:
    """Stratified split by category with a seeded shuffle per category.

    Every category must have at least as many scenes as there are
    splits, so each split contains every category.
    """
    if abs(sum(ratios) - 1.0) > 1e-9 or len(ratios) != 3:
        raise SceneDataError(f"ratios must be 3 values summing to 1, got {ratios}")
    if not scenes:
        raise SceneDataError("cannot split an empty dataset")
    by_category: dict = {}
    for s in scenes:
        by_category.setdefault(s.category, []).append(s)
    split = DatasetSplit()
    for ci, cat in enumerate(sorted(by_category)):
        members = by_category[cat]
        if len(members) < 3:
            raise SceneDataError(
                f"category {cat!r} has {len(members)} scenes, need >= 3 to stratify"
            )
        order = rng_for(seed, "split", ci).permutation(len(members))
        shuffled = [members[i] for i in order]
        n_train, n_test, n_val = _split_counts(len(members), ratios)
        parts = (
            shuffled[:n_train],
            shuffled[n_train : n_train + n_test],
            shuffled[n_train + n_test :],
        )
        for bucket, part in zip((split.train, split.test, split.validation), parts):
            bucket.extend(EncodedScene(s, encode_scene(s, vocab)) for s in part)
    return split


def encode_split(split_scenes: dict, vocab: Vocabulary) -> DatasetSplit:
    """Build a DatasetSplit from explicit per-part scene lists."""
    split = DatasetSplit()
    for name, bucket in (
        ("train", split.train),
        ("test", split.test),
        ("validation", split.validation),
    ):
        for s in split_scenes.get(name, []):
            bucket.append(EncodedScene(s, encode_scene(s, vocab)))
    return split
