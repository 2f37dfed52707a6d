"""Rule-based spatial relation derivation from 3D boxes.

Relations come in antisymmetric raw pairs and are always emitted
together: left(A,B) with right(B,A) and so on.  The rules favor
testability over perceptual nuance:

* left/right and front/behind compare box centers along x and y with a
  margin, and require the vertical ranges to overlap;
* above/below holds when one box's z range sits fully above the other's;
* on_top/under additionally require a small vertical gap and enough
  horizontal footprint overlap, so on_top implies above.

Axes follow the usual right-handed floor convention: +x to the right,
+y away from the viewer (so smaller y is "in front"), +z up.
"""

from __future__ import annotations

from dataclasses import dataclass

from shapely.geometry import Polygon

from scenebm.scenes import SceneDataError, SceneInstance, SceneRelation


@dataclass(frozen=True)
class RelationThresholds:
    """Tunable margins for relation derivation (meters / ratio)."""

    axis_margin: float = 0.05
    contact_gap: float = 0.05
    overlap_ratio: float = 0.5

    def __post_init__(self):
        if not (0.0 < self.overlap_ratio <= 1.0):
            raise SceneDataError("overlap_ratio must be in (0, 1]")


def _z_overlap(a, b) -> bool:
    (alo, ahi), (blo, bhi) = a.z_range, b.z_range
    return alo < bhi and blo < ahi


def _footprint_overlap_ratio(a, b) -> float:
    pa = Polygon(a.footprint())
    pb = Polygon(b.footprint())
    inter = pa.intersection(pb).area
    denom = min(pa.area, pb.area)
    return inter / denom if denom > 0 else 0.0


def derive_relations(
    scene: SceneInstance, thresholds: RelationThresholds = RelationThresholds()
) -> SceneInstance:
    """Return a copy of the scene with relations derived from its boxes.

    Every object must carry a box.  Existing relations are discarded.
    """
    missing = [o.id for o in scene.objects if o.box is None]
    if missing:
        raise SceneDataError(
            f"cannot derive relations, instances without boxes: {missing}"
        )
    d = thresholds
    relations: list[SceneRelation] = []
    objs = scene.objects
    for ia in range(len(objs)):
        for ib in range(ia + 1, len(objs)):
            a, b = objs[ia], objs[ib]
            ba, bb = a.box, b.box
            if _z_overlap(ba, bb):
                if ba.center[0] + d.axis_margin < bb.center[0]:
                    relations.append(SceneRelation("left", a.id, b.id))
                    relations.append(SceneRelation("right", b.id, a.id))
                elif bb.center[0] + d.axis_margin < ba.center[0]:
                    relations.append(SceneRelation("left", b.id, a.id))
                    relations.append(SceneRelation("right", a.id, b.id))
                if ba.center[1] + d.axis_margin < bb.center[1]:
                    relations.append(SceneRelation("front", a.id, b.id))
                    relations.append(SceneRelation("behind", b.id, a.id))
                elif bb.center[1] + d.axis_margin < ba.center[1]:
                    relations.append(SceneRelation("front", b.id, a.id))
                    relations.append(SceneRelation("behind", a.id, b.id))
            for hi, lo in ((a, b), (b, a)):
                gap = hi.box.z_range[0] - lo.box.z_range[1]
                if gap >= 0.0:
                    relations.append(SceneRelation("above", hi.id, lo.id))
                    relations.append(SceneRelation("below", lo.id, hi.id))
                    if (
                        gap < d.contact_gap
                        and _footprint_overlap_ratio(hi.box, lo.box) >= d.overlap_ratio
                    ):
                        relations.append(SceneRelation("on_top", hi.id, lo.id))
                        relations.append(SceneRelation("under", lo.id, hi.id))
    return SceneInstance(
        scene_id=scene.scene_id,
        category=scene.category,
        objects=list(scene.objects),
        relations=relations,
    ).validate()
