"""Built-in synthetic fixtures.

The desk fixture is the standard evaluation bed: 30 object labels, 4
relation types, 5 scene categories, 100 scenes each.  Every label
belongs to exactly two categories (three shared labels per category
pair), usually with different inclusion probabilities, so the scene
category is never readable off a single object and context has to be
inferred from object combinations.  Motif relations hold whenever both
endpoint objects are present, minus noise: they are near-deterministic
given the endpoints, only moderately predictable from the category
alone.
"""

from __future__ import annotations

from itertools import combinations

from scenebm.datasets import CategorySpec, SynthSpec
from scenebm.model import NetworkConfig
from scenebm.scenes import Vocabulary
from scenebm.trainer import HyperParams

DESK_CATEGORIES = ("bathroom", "bedroom", "kitchen", "living_room", "office")

# Three labels per category pair; each label exists in exactly two rooms.
_PAIR_LABELS = {
    ("bathroom", "bedroom"): ("rug", "laundry_bin", "candle"),
    ("bathroom", "kitchen"): ("sink", "towel_rack", "scale"),
    ("bathroom", "living_room"): ("vase", "shelf", "poster"),
    ("bathroom", "office"): ("mirror", "cabinet", "heater"),
    ("bedroom", "kitchen"): ("window", "curtain", "basket"),
    ("bedroom", "living_room"): ("pillow", "blanket", "fan"),
    ("bedroom", "office"): ("lamp", "bookshelf", "chair"),
    ("kitchen", "living_room"): ("stool", "speaker", "tray"),
    ("kitchen", "office"): ("clock", "trash_bin", "radio"),
    ("living_room", "office"): ("desk", "monitor", "plant"),
}

# Per shared label: inclusion probability in the (first, second) category.
_PAIR_PROBS = ((0.8, 0.5), (0.65, 0.65), (0.45, 0.75))

def _motif_pattern(n_anchors: int = 12, per_type: int = 4):
    """Deterministic motif pair layout over anchor ranks 2..n-1.

    Uses only the six weakest anchors so every motif pair is rare:
    relation evidence stays scarce per pair even though many distinct
    pairs carry motifs.  Types get disjoint pair sets of equal size.
    """
    ranks = list(range(6, n_anchors))
    pairs = []
    for step in range(1, len(ranks)):
        for a in range(len(ranks)):
            b = (a + step) % len(ranks)
            if a != b:
                pairs.append((ranks[a], ranks[b]))
    types = ("on_top", "left", "front", "above")
    if len(pairs) < per_type * len(types):
        raise ValueError("not enough anchor pairs for the motif pattern")
    pattern = {
        rtype: tuple(pairs[ti::len(types)][:per_type])
        for ti, rtype in enumerate(types)
    }
    return pattern


_MOTIF_PATTERN = _motif_pattern()

DESK_LABELS = tuple(
    lab for pair in combinations(DESK_CATEGORIES, 2) for lab in _PAIR_LABELS[pair]
)


def desk_vocabulary() -> Vocabulary:
    return Vocabulary(object_labels=DESK_LABELS)


def _category_anchors(name: str):
    anchors = []
    for pair in combinations(DESK_CATEGORIES, 2):
        if name not in pair:
            continue
        side = pair.index(name)
        for label, probs in zip(_PAIR_LABELS[pair], _PAIR_PROBS):
            anchors.append((label, probs[side]))
    return sorted(anchors, key=lambda ap: (-ap[1], ap[0]))


def desk_fixture_spec(seed: int = 0) -> SynthSpec:
    """30 labels, 5 overlapping categories, 16 motifs each (4 per type).

    Tenth-scale noise flips motif directions rarely; the difficulty
    lives in category inference, since every label belongs to two
    rooms with similar inclusion probabilities.
    """
    categories = []
    for name in DESK_CATEGORIES:
        anchors = _category_anchors(name)
        motifs = tuple(
            (rtype, anchors[subj][0], anchors[obj][0])
            for rtype, pairs in _MOTIF_PATTERN.items()
            for subj, obj in pairs
        )
        categories.append(CategorySpec(name=name, anchors=tuple(anchors), motifs=motifs))
    return SynthSpec(
        vocabulary=desk_vocabulary(),
        categories=tuple(categories),
        noise_rate=0.1,
        scenes_per_category=100,
        seed=seed,
    )


def desk_network_config(kind: str = "triway", seed: int = 0) -> NetworkConfig:
    """Fixture-scale architecture for one of rbm, gbm, or triway."""
    if kind not in ("rbm", "gbm", "triway"):
        raise ValueError(f"unknown model kind {kind!r}")
    return NetworkConfig(
        V=len(DESK_LABELS),
        Tc=4,
        H1=40,
        H2=0 if kind == "rbm" else 20,
        use_triway=(kind == "triway"),
        rh_sharing="per_node",
        use_biases=True,
        relation_support="active_pairs",
        seed=seed,
    )


def desk_hyper(seed: int = 0) -> HyperParams:
    # alpha below the production default: the fixture has 10 updates per
    # epoch, where large steps leave visible oscillation in the curves.
    return HyperParams(
        alpha=0.2, T=1.0, batch_size=32, k_pos=5, k_cd=1,
        max_epochs=40, patience=30, seed=seed,
    )


def tiny_fixture_spec(seed: int = 0) -> SynthSpec:
    """A miniature single-purpose dataset for fast pipeline tests."""
    labels = ("desk", "monitor", "keyboard", "chair", "bed", "pillow",
              "lamp", "rug", "sofa", "tv", "plant", "window")
    categories = (
        CategorySpec(
            name="office",
            anchors=(("desk", 1.0), ("monitor", 0.9), ("keyboard", 0.8),
                     ("chair", 0.7), ("lamp", 0.5)),
            motifs=(("on_top", "monitor", "desk"), ("on_top", "keyboard", "desk"),
                    ("front", "chair", "desk")),
        ),
        CategorySpec(
            name="bedroom",
            anchors=(("bed", 1.0), ("pillow", 0.9), ("lamp", 0.6), ("rug", 0.5),
                     ("window", 0.4)),
            motifs=(("on_top", "pillow", "bed"), ("front", "rug", "bed")),
        ),
        CategorySpec(
            name="living_room",
            anchors=(("sofa", 1.0), ("tv", 0.85), ("plant", 0.6), ("rug", 0.5),
                     ("window", 0.4)),
            motifs=(("front", "tv", "sofa"), ("left", "plant", "sofa")),
        ),
    )
    return SynthSpec(
        vocabulary=Vocabulary(object_labels=labels),
        categories=categories,
        noise_rate=0.05,
        scenes_per_category=20,
        seed=seed,
    )
