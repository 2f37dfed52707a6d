"""Gibbs sampling: hidden sweeps, the two-step negative phase, and
conditional completion for the reasoning tasks.

A negative-phase step is hidden sweep -> objects -> relations.  Object
nodes are coupled to each other through tri-way edges, so they use
sequential random-permutation Gibbs by default; relation nodes are
conditionally independent given objects and h1 and resample in one
parallel block, as do the units within each hidden layer.

Clamped nodes are never resampled.  With relation_support set to
"active_pairs", free relation nodes are only sampled when both endpoint
objects are currently active and are forced to 0 otherwise; for nodes
with active endpoints the conditional is identical to "all" mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from scenebm.model import (
    ModelError,
    ModelParams,
    NetworkState,
    activation_prob,
    hidden1_inputs,
    hidden2_inputs,
    object_input_single,
    object_inputs,
    relation_inputs,
)

ORDER_MODES = ("sequential_random", "parallel_block")


@dataclass(frozen=True)
class ClampMask:
    """Which nodes stay fixed during sweeps.

    Object and relation clamps keep whatever value the state carries;
    hidden clamps force an explicit bit per (layer, index).
    """

    objects: frozenset = frozenset()
    relations: frozenset = frozenset()
    hidden: dict = field(default_factory=dict)

    @classmethod
    def none(cls) -> "ClampMask":
        return cls()

    @classmethod
    def visibles(cls, config) -> "ClampMask":
        """Clamp every object and relation node (positive phase)."""
        return cls(
            objects=frozenset(range(config.V)),
            relations=frozenset(range(config.R)),
        )

    def hidden_for_layer(self, layer: int) -> dict:
        return {idx: bit for (lay, idx), bit in self.hidden.items() if lay == layer}


@dataclass(frozen=True)
class AnnealSchedule:
    """Geometric temperature schedule for inference sweeps."""

    T_start: float = 2.0
    T_end: float = 0.5

    def __post_init__(self):
        if self.T_end > self.T_start:
            raise ModelError("anneal requires T_end <= T_start")
        if self.T_end <= 0:
            raise ModelError("anneal temperatures must be positive")

    def temperature(self, sweep: int, total: int) -> float:
        if total <= 1:
            return self.T_end
        factor = (self.T_end / self.T_start) ** (1.0 / (total - 1))
        return self.T_start * factor**sweep


@dataclass(frozen=True)
class SamplerSettings:
    k_pos: int = 5
    k_cd: int = 1
    settle_sweeps: int = 50
    T: float = 1.0
    anneal: AnnealSchedule | None = None
    order: str = "sequential_random"

    def __post_init__(self):
        if min(self.k_pos, self.k_cd, self.settle_sweeps) < 1:
            raise ModelError("sweep counts must be >= 1")
        if self.T <= 0:
            raise ModelError(f"temperature must be positive: {self.T}")
        if self.order not in ORDER_MODES:
            raise ModelError(f"order must be one of {ORDER_MODES}")


def _apply_hidden_clamps(probs, bits, clamps: dict) -> None:
    for idx, forced in clamps.items():
        bits[idx] = forced
        probs[idx] = float(forced)


def sweep_hidden(
    params: ModelParams,
    state: NetworkState,
    mask: ClampMask,
    rng: np.random.Generator,
    T: float | None = None,
) -> NetworkState:
    """Resample h1 given (v, r, h2), then h2 given h1, in place.

    Units within a layer are conditionally independent and update as a
    block.  Per-node probabilities are recorded on the state.
    """
    c = params.config
    T = c.T if T is None else T
    vf = state.v.astype(np.float64)
    rf = state.r.astype(np.float64)

    p1 = activation_prob(hidden1_inputs(params, vf, rf, state.h2.astype(np.float64)), T)
    bits1 = (rng.random(c.H1) < p1).astype(np.uint8)
    _apply_hidden_clamps(p1, bits1, mask.hidden_for_layer(1))
    state.h1 = bits1
    state.p_h1 = p1

    if c.H2 > 0:
        p2 = activation_prob(hidden2_inputs(params, state.h1.astype(np.float64)), T)
        bits2 = (rng.random(c.H2) < p2).astype(np.uint8)
        _apply_hidden_clamps(p2, bits2, mask.hidden_for_layer(2))
        state.h2 = bits2
        state.p_h2 = p2
    else:
        state.p_h2 = np.zeros(0)
    return state


def _resample_objects(params, state, mask, rng, T) -> None:
    c = params.config
    h1f = state.h1.astype(np.float64)
    free = np.array([j for j in range(c.V) if j not in mask.objects], dtype=np.int64)
    p_v = state.p_v if state.p_v is not None else np.zeros(c.V)
    if mask.objects:
        keep = list(mask.objects)
        p_v[keep] = state.v[keep]
    state.p_v = p_v
    if free.size == 0:
        return
    vf = state.v.astype(np.float64)
    r4f = state.r.astype(np.float64).reshape(c.Tc, c.V, c.V)
    order = rng.permutation(free)
    for j in order:
        inp = object_input_single(params, int(j), vf, r4f, h1f)
        p = float(activation_prob(inp, T))
        bit = 1 if rng.random() < p else 0
        state.v[j] = bit
        vf[j] = bit
        p_v[j] = p


def _resample_objects_parallel(params, state, mask, rng, T) -> None:
    """Approximate block update: all free objects at once from the
    current state.  Exact only when objects are conditionally
    independent (no tri-way edges)."""
    c = params.config
    vf = state.v.astype(np.float64)
    r4f = state.r.astype(np.float64).reshape(c.Tc, c.V, c.V)
    probs = activation_prob(object_inputs(params, vf, r4f, state.h1.astype(np.float64)), T)
    bits = (rng.random(c.V) < probs).astype(np.uint8)
    if mask.objects:
        keep = list(mask.objects)
        bits[keep] = state.v[keep]
        probs[keep] = state.v[keep]
    state.v = bits
    state.p_v = probs


def _resample_relations(params, state, mask, rng, T) -> None:
    c = params.config
    vf = state.v.astype(np.float64)
    probs = activation_prob(relation_inputs(params, vf, state.h1.astype(np.float64)), T)
    bits = (rng.random(c.R) < probs).astype(np.uint8)
    if c.relation_support == "active_pairs":
        pair_active = np.kron(np.ones(c.Tc), np.outer(vf, vf).ravel()) > 0
        bits[~pair_active] = 0
        probs[~pair_active] = 0.0
    if mask.relations:
        keep = list(mask.relations)
        bits[keep] = state.r[keep]
        probs[keep] = state.r[keep]
    state.r = bits
    state.p_r = probs


def negative_phase_step(
    params: ModelParams,
    state: NetworkState,
    mask: ClampMask,
    rng: np.random.Generator,
    T: float | None = None,
    order: str = "sequential_random",
) -> NetworkState:
    """One two-step pass: hidden sweep, then free objects, then free
    relations, mutating the state in place."""
    c = params.config
    T = c.T if T is None else T
    sweep_hidden(params, state, mask, rng, T)
    if order == "sequential_random":
        _resample_objects(params, state, mask, rng, T)
    elif order == "parallel_block":
        _resample_objects_parallel(params, state, mask, rng, T)
    else:
        raise ModelError(f"order must be one of {ORDER_MODES}")
    _resample_relations(params, state, mask, rng, T)
    return state


def _clamped_probs(state: NetworkState, mask: ClampMask, config) -> None:
    """Ensure clamped nodes report their bit as probability."""
    if mask.objects:
        idx = list(mask.objects)
        state.p_v[idx] = state.v[idx]
    if mask.relations:
        idx = list(mask.relations)
        state.p_r[idx] = state.r[idx]


@dataclass
class AveragedProbs:
    """Per-node activation probabilities averaged over tail sweeps."""

    p_v: np.ndarray
    p_r: np.ndarray
    p_h1: np.ndarray
    p_h2: np.ndarray


def conditional_complete(
    params: ModelParams,
    scene_partial,
    mask: ClampMask,
    settings: SamplerSettings,
    rng: np.random.Generator,
) -> tuple:
    """Clamp part of a scene and let the network settle.

    The state is initialized from scene_partial (free nodes keep their
    initial bits and evolve); hidden units start at 0 unless clamped.
    Runs settle_sweeps negative-phase steps, annealing if configured,
    and returns (final state, probabilities averaged over the last
    ceil(settle_sweeps / 2) sweeps).
    """
    c = params.config
    state = NetworkState.from_vector(scene_partial, c)
    for (layer, idx), bit in mask.hidden.items():
        (state.h1 if layer == 1 else state.h2)[idx] = bit
    n = settings.settle_sweeps
    tail_start = n - (n + 1) // 2
    sums = AveragedProbs(
        p_v=np.zeros(c.V), p_r=np.zeros(c.R), p_h1=np.zeros(c.H1), p_h2=np.zeros(c.H2)
    )
    counted = 0
    for sweep in range(n):
        T = settings.anneal.temperature(sweep, n) if settings.anneal else settings.T
        negative_phase_step(params, state, mask, rng, T, settings.order)
        _clamped_probs(state, mask, c)
        if sweep >= tail_start:
            sums.p_v += state.p_v
            sums.p_r += state.p_r
            sums.p_h1 += state.p_h1
            if c.H2 > 0:
                sums.p_h2 += state.p_h2
            counted += 1
    for arr in (sums.p_v, sums.p_r, sums.p_h1, sums.p_h2):
        arr /= counted
    return state, sums


def generate_from_hidden(
    params: ModelParams,
    hidden_ids,
    settings: SamplerSettings,
    rng: np.random.Generator,
) -> NetworkState:
    """Clamp chosen hidden units to 1 and sample a scene from scratch.

    hidden_ids are (layer, index) pairs; all other hidden units start
    at 0 and stay free, visibles start empty.
    """
    from scenebm.scenes import SceneVector

    c = params.config
    for layer, idx in hidden_ids:
        upper = c.H1 if layer == 1 else c.H2
        if layer not in (1, 2) or not 0 <= idx < upper:
            raise ModelError(f"invalid hidden id: ({layer}, {idx})")
    empty = SceneVector(V=c.V, Tc=c.Tc, active_objects=(), active_relations=())
    mask = ClampMask(hidden={(layer, idx): 1 for layer, idx in hidden_ids})
    state, _ = conditional_complete(params, empty, mask, settings, rng)
    return state
