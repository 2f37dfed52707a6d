"""Scene representation and sparse binary encoding.

A scene is a set of labeled object instances plus directed spatial
relations between them.  For the network, scenes are encoded at the
label level: one binary node per object label, and one binary node per
(canonical relation type, subject label, object label) triple.  The
eight raw spatial relations fold onto four canonical ones by swapping
the endpoints of each opposite pair (right(a,b) == left(b,a)), so the
implied vector length is V + Tc*V^2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

RAW_RELATIONS = ("left", "right", "front", "behind", "on_top", "under", "above", "below")
CANONICAL_RELATIONS = ("left", "front", "on_top", "above")

# raw name -> (canonical type index, swap subject/object?)
_FOLD = {
    "left": (0, False),
    "right": (0, True),
    "front": (1, False),
    "behind": (1, True),
    "on_top": (2, False),
    "under": (2, True),
    "above": (3, False),
    "below": (3, True),
}


class SceneDataError(ValueError):
    """Raised for invalid scenes, vocabularies, or encodings."""


@dataclass(frozen=True)
class Vocabulary:
    """Object label list plus the fixed relation name sets.

    The position of a label in ``object_labels`` is its node index.
    """

    object_labels: tuple
    raw_relations: tuple = RAW_RELATIONS
    canonical_relations: tuple = CANONICAL_RELATIONS

    def __post_init__(self):
        object.__setattr__(self, "object_labels", tuple(self.object_labels))
        if len(set(self.object_labels)) != len(self.object_labels):
            raise SceneDataError("object labels must be unique")
        if tuple(self.canonical_relations) != CANONICAL_RELATIONS:
            raise SceneDataError(f"canonical relations must be {CANONICAL_RELATIONS}")
        if set(self.raw_relations) != set(RAW_RELATIONS):
            raise SceneDataError(f"raw relations must be {RAW_RELATIONS}")
        object.__setattr__(
            self, "_index", {lab: i for i, lab in enumerate(self.object_labels)}
        )

    @property
    def V(self) -> int:
        return len(self.object_labels)

    @property
    def Tc(self) -> int:
        return len(self.canonical_relations)

    @property
    def implied_dim(self) -> int:
        """Total node count of the encoded vector: V + Tc*V^2."""
        return self.V + self.Tc * self.V * self.V

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise SceneDataError(f"label not in vocabulary: {label!r}") from None

    def to_dict(self) -> dict:
        return {
            "objects": list(self.object_labels),
            "canonical_relations": list(self.canonical_relations),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabulary":
        return cls(object_labels=tuple(d["objects"]))


@dataclass(frozen=True)
class RelationId:
    """Canonical relation address: type t, subject label j, object label k.

    j == k is legal (two same-label instances may relate).
    """

    t: int
    j: int
    k: int

    def flat(self, V: int) -> int:
        return self.t * V * V + self.j * V + self.k

    @classmethod
    def from_flat(cls, idx: int, V: int) -> "RelationId":
        t, rest = divmod(idx, V * V)
        j, k = divmod(rest, V)
        return cls(t, j, k)


def fold_relation(raw: str, subj: int, obj: int) -> RelationId:
    """Map a raw relation between two label indices onto its canonical form.

    Opposites swap their endpoints: right(a, b) -> left(b, a), etc.
    """
    try:
        t, swap = _FOLD[raw]
    except KeyError:
        raise SceneDataError(f"unknown relation type: {raw!r}") from None
    if swap:
        subj, obj = obj, subj
    return RelationId(t, subj, obj)


@dataclass(frozen=True)
class OrientedBox:
    """Upright 3D box: center/size in meters, yaw about the z axis."""

    center: tuple
    size: tuple
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "size", tuple(float(s) for s in self.size))
        if len(self.center) != 3 or len(self.size) != 3:
            raise SceneDataError("box center and size must be 3-vectors")
        if any(s <= 0 for s in self.size):
            raise SceneDataError(f"box size components must be positive: {self.size}")

    @property
    def z_range(self) -> tuple:
        half = self.size[2] / 2.0
        return (self.center[2] - half, self.center[2] + half)

    def footprint(self) -> np.ndarray:
        """Corners of the yawed rectangular footprint, shape (4, 2)."""
        hx, hy = self.size[0] / 2.0, self.size[1] / 2.0
        corners = np.array([[-hx, -hy], [hx, -hy], [hx, hy], [-hx, hy]])
        c, s = np.cos(self.yaw), np.sin(self.yaw)
        rot = np.array([[c, -s], [s, c]])
        return corners @ rot.T + np.asarray(self.center[:2])


@dataclass(frozen=True)
class SceneObject:
    id: int
    label: str
    box: OrientedBox | None = None


@dataclass(frozen=True)
class SceneRelation:
    type: str
    subject: int
    object: int


@dataclass
class SceneInstance:
    """One annotated scene: instances with optional boxes, plus relations."""

    scene_id: str
    category: str
    objects: list = field(default_factory=list)
    relations: list = field(default_factory=list)

    def validate(self) -> "SceneInstance":
        ids = [o.id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise SceneDataError(f"duplicate instance ids in scene {self.scene_id!r}")
        known = set(ids)
        for rel in self.relations:
            if rel.type not in _FOLD:
                raise SceneDataError(f"unknown relation type: {rel.type!r}")
            if rel.subject not in known or rel.object not in known:
                raise SceneDataError(
                    f"relation endpoints {rel.subject}/{rel.object} missing "
                    f"in scene {self.scene_id!r}"
                )
            if rel.subject == rel.object:
                raise SceneDataError(
                    f"self-relation on instance {rel.subject} in scene {self.scene_id!r}"
                )
        return self

    def object_by_id(self, iid: int) -> SceneObject:
        for o in self.objects:
            if o.id == iid:
                return o
        raise SceneDataError(f"no instance {iid} in scene {self.scene_id!r}")

    def to_dict(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "category": self.category,
            "objects": [
                {
                    "id": o.id,
                    "label": o.label,
                    "box": None
                    if o.box is None
                    else {
                        "center": list(o.box.center),
                        "size": list(o.box.size),
                        "yaw": o.box.yaw,
                    },
                }
                for o in self.objects
            ],
            "relations": [
                {"type": r.type, "subject": r.subject, "object": r.object}
                for r in self.relations
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneInstance":
        objects = []
        for o in d["objects"]:
            box = o.get("box")
            objects.append(
                SceneObject(
                    id=int(o["id"]),
                    label=o["label"],
                    box=None
                    if box is None
                    else OrientedBox(
                        center=tuple(box["center"]),
                        size=tuple(box["size"]),
                        yaw=float(box.get("yaw", 0.0)),
                    ),
                )
            )
        relations = [
            SceneRelation(r["type"], int(r["subject"]), int(r["object"]))
            for r in d.get("relations", [])
        ]
        return cls(
            scene_id=d["scene_id"],
            category=d.get("category", ""),
            objects=objects,
            relations=relations,
        ).validate()


@dataclass(frozen=True)
class SceneVector:
    """Sparse binary state of one scene at the label level.

    active_objects holds label indices; active_relations holds flat
    canonical relation indices (t*V^2 + j*V + k).  Every active
    relation's endpoints must be active objects.
    """

    V: int
    Tc: int
    active_objects: tuple
    active_relations: tuple
    scene_id: str = ""
    category: str = ""

    def __post_init__(self):
        objs = tuple(sorted(set(int(i) for i in self.active_objects)))
        rels = tuple(sorted(set(int(i) for i in self.active_relations)))
        object.__setattr__(self, "active_objects", objs)
        object.__setattr__(self, "active_relations", rels)
        if objs and (objs[0] < 0 or objs[-1] >= self.V):
            raise SceneDataError("active object index out of range")
        oset = set(objs)
        for flat in rels:
            rid = RelationId.from_flat(flat, self.V)
            if not (0 <= rid.t < self.Tc):
                raise SceneDataError(f"relation type index out of range: {rid}")
            if rid.j not in oset or rid.k not in oset:
                raise SceneDataError(
                    f"relation {rid} references inactive object in scene "
                    f"{self.scene_id!r}"
                )

    @property
    def dim(self) -> int:
        return self.V + self.Tc * self.V * self.V

    @property
    def n_relation_nodes(self) -> int:
        return self.Tc * self.V * self.V

    def dense_objects(self) -> np.ndarray:
        v = np.zeros(self.V, dtype=np.uint8)
        if self.active_objects:
            v[list(self.active_objects)] = 1
        return v

    def dense_relations(self) -> np.ndarray:
        r = np.zeros(self.n_relation_nodes, dtype=np.uint8)
        if self.active_relations:
            r[list(self.active_relations)] = 1
        return r

    @classmethod
    def from_dense(
        cls, v: np.ndarray, r: np.ndarray, Tc: int, *, drop_dangling: bool = False,
        scene_id: str = "", category: str = ""
    ) -> "SceneVector":
        """Build from dense bit arrays.

        With drop_dangling, relations whose endpoints are not both
        active are silently removed (used when decoding raw samples).
        """
        V = int(len(v))
        active_obj = tuple(int(i) for i in np.flatnonzero(v))
        active_rel = [int(i) for i in np.flatnonzero(r)]
        if drop_dangling:
            oset = set(active_obj)
            active_rel = [
                f for f in active_rel
                if (rid := RelationId.from_flat(f, V)).j in oset and rid.k in oset
            ]
        return cls(V=V, Tc=Tc, active_objects=active_obj,
                   active_relations=tuple(active_rel),
                   scene_id=scene_id, category=category)


def encode_scene(scene: SceneInstance, vocab: Vocabulary) -> SceneVector:
    """Encode a scene as label-level object and folded-relation bits.

    Multiple instances of one label collapse onto a single object bit;
    a relation bit is set if any instance pair carries it.
    """
    scene.validate()
    active_objects = {vocab.index(o.label) for o in scene.objects}
    V = vocab.V
    active_relations = set()
    for rel in scene.relations:
        subj = vocab.index(scene.object_by_id(rel.subject).label)
        obj = vocab.index(scene.object_by_id(rel.object).label)
        rid = fold_relation(rel.type, subj, obj)
        active_relations.add(rid.flat(V))
    return SceneVector(
        V=V,
        Tc=vocab.Tc,
        active_objects=tuple(active_objects),
        active_relations=tuple(active_relations),
        scene_id=scene.scene_id,
        category=scene.category,
    )


def decode_scene(
    sv: SceneVector, vocab: Vocabulary, scene_id: str = "", category: str = ""
) -> SceneInstance:
    """Inverse of encode_scene: one instance per active label.

    Instance ids equal label indices, and relations are emitted in
    canonical form, so encode(decode(sv)) == sv.
    """
    if vocab.V != sv.V:
        raise SceneDataError(f"vocabulary size {vocab.V} != vector V {sv.V}")
    objects = [
        SceneObject(id=j, label=vocab.object_labels[j]) for j in sv.active_objects
    ]
    relations = []
    for flat in sv.active_relations:
        rid = RelationId.from_flat(flat, sv.V)
        relations.append(
            SceneRelation(vocab.canonical_relations[rid.t], rid.j, rid.k)
        )
    return SceneInstance(
        scene_id=scene_id or sv.scene_id,
        category=category or sv.category,
        objects=objects,
        relations=relations,
    ).validate()


def save_scenes(scenes, path) -> None:
    payload = {"scenes": [s.to_dict() for s in scenes]}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_scenes(path) -> list:
    payload = json.loads(Path(path).read_text())
    return [SceneInstance.from_dict(d) for d in payload["scenes"]]


def save_vocabulary(vocab: Vocabulary, path) -> None:
    Path(path).write_text(json.dumps(vocab.to_dict(), indent=2, sort_keys=True) + "\n")


def load_vocabulary(path) -> Vocabulary:
    return Vocabulary.from_dict(json.loads(Path(path).read_text()))
