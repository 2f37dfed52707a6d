"""Contrastive training: phase statistics, updates, and the epoch loop.

Each weight moves by alpha * (p+ - p-), the difference of expected
joint activations between the clamped (positive) and free-running
(negative) phases.  Tri-way statistics aggregate over every object
pair of a relation type, so each type contributes exactly one scalar
gradient no matter how many pairs carry it.

The negative phase is short contrastive divergence: the chain starts
from the clamped data state and runs k_cd two-step passes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from scenebm.model import (
    ModelError,
    ModelParams,
    NetworkConfig,
    NetworkState,
    activation_prob,
    hidden1_inputs,
    hidden2_inputs,
)
from scenebm.sampler import ClampMask, SamplerSettings, negative_phase_step, sweep_hidden
from scenebm.seeding import rng_for


class TrainingDiverged(RuntimeError):
    """Raised when an update would produce non-finite weights."""

    def __init__(self, message: str, last_good_epoch: int):
        super().__init__(message)
        self.last_good_epoch = last_good_epoch


@dataclass
class EdgeStats:
    """Expected joint activations per edge family for one phase.

    s_tri entries are pair-aggregated sums over all (j, k) of a type,
    so they live in [0, V^2]; the other families are per-edge
    probabilities in [0, 1].  Bias statistics are per-node activation
    expectations, present only when the model uses biases.
    """

    s_hv: np.ndarray
    s_rh: np.ndarray
    s_12: np.ndarray
    s_tri: np.ndarray | None = None
    s_bv: np.ndarray | None = None
    s_br: np.ndarray | None = None
    s_bh1: np.ndarray | None = None
    s_bh2: np.ndarray | None = None

    _FIELDS = ("s_hv", "s_rh", "s_12", "s_tri", "s_bv", "s_br", "s_bh1", "s_bh2")

    @classmethod
    def zeros_for(cls, params: ModelParams) -> "EdgeStats":
        c = params.config
        stats = cls(
            s_hv=np.zeros((c.H1, c.V)),
            s_rh=np.zeros((c.H1, c.rh_cols())),
            s_12=np.zeros((c.H1, c.H2)),
            s_tri=np.zeros(c.Tc) if c.use_triway else None,
        )
        if c.use_biases:
            stats.s_bv = np.zeros(c.V)
            stats.s_br = np.zeros(c.R)
            stats.s_bh1 = np.zeros(c.H1)
            stats.s_bh2 = np.zeros(c.H2)
        return stats

    def iadd(self, other: "EdgeStats") -> "EdgeStats":
        for name in self._FIELDS:
            mine, theirs = getattr(self, name), getattr(other, name)
            if mine is not None:
                mine += theirs
        return self

    def scale(self, factor: float) -> "EdgeStats":
        for name in self._FIELDS:
            arr = getattr(self, name)
            if arr is not None:
                arr *= factor
        return self

    def arrays(self) -> dict:
        return {n: getattr(self, n) for n in self._FIELDS if getattr(self, n) is not None}


def _state_probs(state: NetworkState, use_probs: bool):
    def pick(prob, bits):
        if use_probs and prob is not None:
            return prob
        return bits.astype(np.float64)

    return (
        pick(state.p_v, state.v),
        pick(state.p_r, state.r),
        pick(state.p_h1, state.h1),
        pick(state.p_h2, state.h2),
    )


def phase_statistics(
    params: ModelParams, state: NetworkState, use_probs: bool = True
) -> EdgeStats:
    """Expected joint activations of one phase's (probabilistic) state.

    Products of per-node probabilities estimate each edge expectation;
    clamped nodes carry their bits as probabilities.  The tri-way entry
    of type t is sum_jk p(r_tjk) p(v_j) p(v_k).
    """
    c = params.config
    state.check_shapes(c)
    p_v, p_r, p_h1, p_h2 = _state_probs(state, use_probs)
    stats = EdgeStats(
        s_hv=np.outer(p_h1, p_v),
        s_rh=(
            np.outer(p_h1, p_r)
            if c.rh_sharing == "per_node"
            else np.outer(p_h1, p_r.reshape(c.Tc, c.V * c.V).sum(axis=1))
        ),
        s_12=np.outer(p_h1, p_h2),
    )
    if c.use_triway:
        p_r4 = p_r.reshape(c.Tc, c.V, c.V)
        stats.s_tri = np.einsum("tjk,j,k->t", p_r4, p_v, p_v)
    if c.use_biases:
        stats.s_bv = p_v.copy()
        stats.s_br = p_r.copy()
        stats.s_bh1 = p_h1.copy()
        stats.s_bh2 = p_h2.copy()
    return stats


_STAT_TO_WEIGHT = {
    "s_hv": "W_hv", "s_rh": "W_rh", "s_12": "W_12", "s_tri": "w_tri",
    "s_bv": "b_v", "s_br": "b_r", "s_bh1": "b_h1", "s_bh2": "b_h2",
}


def apply_update(
    params: ModelParams, stats_pos: EdgeStats, stats_neg: EdgeStats, alpha: float
) -> ModelParams:
    """Return new params with w <- w + alpha * (p+ - p-) per family."""
    new = params.copy()
    for stat_name, weight_name in _STAT_TO_WEIGHT.items():
        weights = getattr(new, weight_name)
        if weights is None:
            continue
        pos, neg = getattr(stats_pos, stat_name), getattr(stats_neg, stat_name)
        if pos is None or neg is None:
            raise ModelError(f"missing statistics for {weight_name}")
        if pos.shape != weights.shape or neg.shape != weights.shape:
            raise ModelError(
                f"statistics shape mismatch for {weight_name}: "
                f"{pos.shape}/{neg.shape} vs {weights.shape}"
            )
        updated = weights + alpha * (pos - neg)
        if not np.all(np.isfinite(updated)):
            raise ModelError(f"non-finite update for family {weight_name}")
        setattr(new, weight_name, updated)
    return new


def reconstruction_error(clamped, reconstructed_probs) -> tuple:
    """Summed squared per-node probability gap, normalized by sample count.

    clamped is a sequence of SceneVector; reconstructed_probs a matching
    sequence of (p_v, p_r) arrays.  Returns (object_err, relation_err).
    """
    n = len(clamped)
    if n == 0 or n != len(reconstructed_probs):
        raise ModelError("need equal, nonzero numbers of scenes and reconstructions")
    obj_err = 0.0
    rel_err = 0.0
    for sv, (p_v, p_r) in zip(clamped, reconstructed_probs):
        obj_err += float(np.sum((sv.dense_objects() - p_v) ** 2))
        rel_err += float(np.sum((sv.dense_relations() - p_r) ** 2))
    return obj_err / n, rel_err / n


@dataclass(frozen=True)
class HyperParams:
    alpha: float = 0.5
    T: float = 1.0
    batch_size: int = 32
    k_pos: int = 5
    k_cd: int = 1
    max_epochs: int = 30
    patience: int = 3
    seed: int = 0
    stats_use_probs: bool = True

    def __post_init__(self):
        if self.alpha <= 0:
            raise ModelError(f"alpha must be positive: {self.alpha}")
        if self.batch_size < 1 or self.patience < 1 or self.max_epochs < 1:
            raise ModelError("batch_size, patience, and max_epochs must be >= 1")

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha, "T": self.T, "batch_size": self.batch_size,
            "k_pos": self.k_pos, "k_cd": self.k_cd, "max_epochs": self.max_epochs,
            "patience": self.patience, "seed": self.seed,
            "stats_use_probs": self.stats_use_probs,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HyperParams":
        return cls(**d)


@dataclass
class TrainHistory:
    """Per-epoch training reconstruction errors and validation error."""

    obj_err: list = field(default_factory=list)
    rel_err: list = field(default_factory=list)
    val_err: list = field(default_factory=list)
    best_epoch: int = 0
    stopped_epoch: int = 0

    def to_dict(self) -> dict:
        return {
            "obj_err": self.obj_err, "rel_err": self.rel_err, "val_err": self.val_err,
            "best_epoch": self.best_epoch, "stopped_epoch": self.stopped_epoch,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainHistory":
        return cls(
            obj_err=list(d.get("obj_err", [])),
            rel_err=list(d.get("rel_err", [])),
            val_err=list(d.get("val_err", [])),
            best_epoch=int(d.get("best_epoch", 0)),
            stopped_epoch=int(d.get("stopped_epoch", 0)),
        )


def relation_marginal_bias(params: ModelParams, vectors) -> ModelParams:
    """Set each relation bias to that node's activation log-odds in the
    dataset (clipped to [-8, 0]).

    A sparsity prior for the huge relation block: without it the early
    free-running phase samples relation nodes at probability one half,
    flooding the hidden layer with random activity that the weights
    then spend epochs unlearning, and with a uniform prior the motif
    weights grow without a counterweight until they saturate the hidden
    layer.  Object and hidden biases stay at zero.  Requires a config
    with use_biases enabled.
    """
    if not params.config.use_biases:
        raise ModelError("relation_marginal_bias requires use_biases")
    if not vectors:
        raise ModelError("relation_marginal_bias requires a non-empty dataset")
    c = params.config
    r_mean = np.zeros(c.R)
    for vec in vectors:
        r_mean += vec.dense_relations()
    r_mean /= len(vectors)
    r_mean = np.clip(r_mean, 3e-4, 0.5)
    new = params.copy()
    new.b_r = np.clip(np.log(r_mean / (1.0 - r_mean)), -8.0, 0.0)
    return new


def _refresh_hidden_probs(params: ModelParams, state: NetworkState, T: float) -> None:
    """Recompute hidden activation probabilities for the final state."""
    vf = state.v.astype(np.float64)
    rf = state.r.astype(np.float64)
    state.p_h1 = activation_prob(
        hidden1_inputs(params, vf, rf, state.h2.astype(np.float64)), T
    )
    if params.config.H2 > 0:
        state.p_h2 = activation_prob(
            hidden2_inputs(params, state.h1.astype(np.float64)), T
        )
    else:
        state.p_h2 = np.zeros(0)


def sample_phases(
    params: ModelParams,
    vector,
    hyper: HyperParams,
    rng_pos: np.random.Generator,
    rng_neg: np.random.Generator,
):
    """Run one sample's positive and negative phases.

    Returns (stats_pos, stats_neg, p_v_neg, p_r_neg).  The positive
    phase clamps all visibles and sweeps the hidden layers k_pos times;
    the negative chain continues from that state, fully free, for k_cd
    two-step passes.
    """
    c = params.config
    clamp_all = ClampMask.visibles(c)
    state = NetworkState.from_vector(vector, c)
    for _ in range(hyper.k_pos):
        sweep_hidden(params, state, clamp_all, rng_pos, hyper.T)
    stats_pos = phase_statistics(params, state, hyper.stats_use_probs)

    neg = state.copy()
    free = ClampMask.none()
    for _ in range(hyper.k_cd):
        negative_phase_step(params, neg, free, rng_neg, hyper.T)
    _refresh_hidden_probs(params, neg, hyper.T)
    stats_neg = phase_statistics(params, neg, hyper.stats_use_probs)
    return stats_pos, stats_neg, neg.p_v, neg.p_r


def _validation_error(params, split, hyper, epoch) -> tuple:
    vectors = [enc.vector for enc in split.validation]
    probs = []
    for i, vec in enumerate(vectors):
        _, _, p_v, p_r = sample_phases(
            params, vec, hyper,
            rng_for(hyper.seed, "valpos", epoch, i),
            rng_for(hyper.seed, "valneg", epoch, i),
        )
        probs.append((p_v, p_r))
    return reconstruction_error(vectors, probs)


def train(
    params: ModelParams,
    split,
    hyper: HyperParams,
    log_path=None,
    history: TrainHistory | None = None,
) -> tuple:
    """Contrastive training with early stopping on validation error.

    Stops once validation reconstruction error has not improved for
    `patience` consecutive epochs and returns the parameters of the
    best validation epoch.  Passing a previous history resumes epoch
    numbering (and RNG streams) where it left off, treating the given
    params as the incumbent best.

    Returns (best params, TrainHistory).
    """
    if not split.train or not split.validation:
        raise ModelError("training requires non-empty train and validation sets")
    history = history or TrainHistory()
    start_epoch = history.stopped_epoch + 1
    params = params.copy()
    best_params = params.copy()
    best_val = min(history.val_err) if history.val_err else np.inf
    if history.best_epoch == 0 and history.val_err:
        history.best_epoch = int(np.argmin(history.val_err)) + 1
    since_improve = 0
    train_vectors = [enc.vector for enc in split.train]
    n = len(train_vectors)
    log_file = Path(log_path).open("a") if log_path else None
    try:
        for epoch in range(start_epoch, start_epoch + hyper.max_epochs):
            order = rng_for(hyper.seed, "shuffle", epoch).permutation(n)
            epoch_obj = 0.0
            epoch_rel = 0.0
            for lo in range(0, n, hyper.batch_size):
                batch_idx = sorted(int(i) for i in order[lo : lo + hyper.batch_size])
                acc_pos = EdgeStats.zeros_for(params)
                acc_neg = EdgeStats.zeros_for(params)
                for idx in batch_idx:
                    vec = train_vectors[idx]
                    stats_pos, stats_neg, p_v, p_r = sample_phases(
                        params, vec, hyper,
                        rng_for(hyper.seed, "pos", epoch, idx),
                        rng_for(hyper.seed, "neg", epoch, idx),
                    )
                    acc_pos.iadd(stats_pos)
                    acc_neg.iadd(stats_neg)
                    epoch_obj += float(np.sum((vec.dense_objects() - p_v) ** 2))
                    epoch_rel += float(np.sum((vec.dense_relations() - p_r) ** 2))
                inv = 1.0 / len(batch_idx)
                try:
                    params = apply_update(
                        params, acc_pos.scale(inv), acc_neg.scale(inv), hyper.alpha
                    )
                except ModelError as exc:
                    raise TrainingDiverged(
                        f"{exc} (last good epoch: {epoch - 1})", epoch - 1
                    ) from exc
            history.obj_err.append(epoch_obj / n)
            history.rel_err.append(epoch_rel / n)
            val_obj, val_rel = _validation_error(params, split, hyper, epoch)
            val_total = val_obj + val_rel
            history.val_err.append(val_total)
            history.stopped_epoch = epoch
            if log_file:
                log_file.write(
                    json.dumps(
                        {
                            "epoch": epoch,
                            "obj_err": history.obj_err[-1],
                            "rel_err": history.rel_err[-1],
                            "val_err": val_total,
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )
                log_file.flush()
            if val_total < best_val:
                best_val = val_total
                best_params = params.copy()
                history.best_epoch = epoch
                since_improve = 0
            else:
                since_improve += 1
                if since_improve >= hyper.patience:
                    break
    finally:
        if log_file:
            log_file.close()
    return best_params, history
