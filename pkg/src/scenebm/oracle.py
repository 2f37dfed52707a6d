"""Brute-force enumeration oracle for tiny networks.

Enumerates all joint states of networks whose total node count fits
the TinyLimit and computes exact partition functions, marginals,
log-likelihoods, and gradients.  This is the ground truth the sampler
and trainer are tested against.

Node enumeration order is fixed: objects, then relations, then h1,
then h2; state s assigns bit n the value (s >> n) & 1.  Accumulation
is in log space so weights up to a few hundred in magnitude stay
finite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from scenebm.model import ModelParams, NetworkConfig
from scenebm.trainer import EdgeStats

_CHUNK = 1 << 16


@dataclass(frozen=True)
class TinyLimit:
    """Enumeration only runs when V + Tc*V^2 + H1 + H2 <= max_total_nodes."""

    max_total_nodes: int = 20


class OracleSizeError(ValueError):
    """Raised when a network is too large to enumerate."""


def _check_limit(config: NetworkConfig, limit: TinyLimit) -> None:
    if config.n_nodes > limit.max_total_nodes:
        raise OracleSizeError(
            f"network has {config.n_nodes} nodes, enumeration limit is "
            f"{limit.max_total_nodes}"
        )


def _split_columns(config: NetworkConfig, bits: np.ndarray):
    V, R, H1 = config.V, config.R, config.H1
    vf = bits[:, :V].astype(np.float64)
    rf = bits[:, V : V + R].astype(np.float64)
    h1f = bits[:, V + R : V + R + H1].astype(np.float64)
    h2f = bits[:, V + R + H1 :].astype(np.float64)
    return vf, rf, h1f, h2f


def _energies(params: ModelParams, bits: np.ndarray) -> np.ndarray:
    """Vectorized energies for a (states, n_nodes) bit matrix."""
    c = params.config
    vf, rf, h1f, h2f = _split_columns(c, bits)
    e = -np.einsum("sm,mj,sj->s", h1f, params.W_hv, vf)
    if c.H2 > 0:
        e -= np.einsum("sm,mn,sn->s", h1f, params.W_12, h2f)
    if c.rh_sharing == "per_node":
        e -= np.einsum("sm,mr,sr->s", h1f, params.W_rh, rf)
    else:
        rsum = rf.reshape(len(rf), c.Tc, c.V * c.V).sum(axis=2)
        e -= np.einsum("sm,mt,st->s", h1f, params.W_rh, rsum)
    if c.use_triway:
        r4 = rf.reshape(len(rf), c.Tc, c.V, c.V)
        inner = np.einsum("stjk,sk->stj", r4, vf)
        e -= np.einsum("t,stj,sj->s", params.w_tri, inner, vf)
    if c.use_biases:
        e -= vf @ params.b_v + rf @ params.b_r + h1f @ params.b_h1
        if c.H2 > 0:
            e -= h2f @ params.b_h2
    return e


def _iter_bit_chunks(template: np.ndarray, free_idx: np.ndarray):
    """Yield (states, n_nodes) chunks enumerating the free nodes.

    Clamped nodes keep the template's bits; free node f (in free_idx
    order) takes bit (s >> f_position) & 1.
    """
    n_free = len(free_idx)
    total = 1 << n_free
    shifts = np.arange(n_free, dtype=np.int64)
    for lo in range(0, total, _CHUNK):
        hi = min(lo + _CHUNK, total)
        idx = np.arange(lo, hi, dtype=np.int64)
        bits = np.broadcast_to(template, (hi - lo, len(template))).copy()
        if n_free:
            bits[:, free_idx] = ((idx[:, None] >> shifts) & 1).astype(np.uint8)
        yield bits


def _clamp_template(config: NetworkConfig, clamp_state, mask):
    """Return (template bits, free node indices) for optional clamping."""
    n = config.n_nodes
    template = np.zeros(n, dtype=np.uint8)
    clamped = np.zeros(n, dtype=bool)
    if mask is not None:
        if clamp_state is None:
            raise ValueError("clamping requires a state carrying the clamped bits")
        V, R, H1 = config.V, config.R, config.H1
        template[:V] = clamp_state.v
        template[V : V + R] = clamp_state.r
        template[V + R : V + R + H1] = clamp_state.h1
        template[V + R + H1 :] = clamp_state.h2
        for j in mask.objects:
            clamped[j] = True
        for rid in mask.relations:
            clamped[V + rid] = True
        for (layer, idx), bit in mask.hidden.items():
            pos = V + R + idx if layer == 1 else V + R + H1 + idx
            template[pos] = bit
            clamped[pos] = True
    free_idx = np.flatnonzero(~clamped)
    return template, free_idx


def _all_energies(params, template, free_idx) -> np.ndarray:
    out = np.empty(1 << len(free_idx))
    pos = 0
    for bits in _iter_bit_chunks(template, free_idx):
        out[pos : pos + len(bits)] = _energies(params, bits)
        pos += len(bits)
    return out


def log_partition_function(params: ModelParams, limit: TinyLimit = TinyLimit()) -> float:
    """log Z = log sum over all states of exp(-E / T)."""
    c = params.config
    _check_limit(c, limit)
    template, free_idx = _clamp_template(c, None, None)
    energies = _all_energies(params, template, free_idx)
    return float(logsumexp(-energies / c.T))


def partition_function(params: ModelParams, limit: TinyLimit = TinyLimit()) -> float:
    return float(np.exp(log_partition_function(params, limit)))


@dataclass
class NodeMarginals:
    """Exact p(x=1 | clamped) per node, grouped by node family."""

    p_v: np.ndarray
    p_r: np.ndarray
    p_h1: np.ndarray
    p_h2: np.ndarray


def exact_marginals(
    params: ModelParams,
    clamp_state=None,
    mask=None,
    limit: TinyLimit = TinyLimit(),
) -> NodeMarginals:
    """Exact activation marginals by enumeration over the free nodes."""
    c = params.config
    _check_limit(c, limit)
    template, free_idx = _clamp_template(c, clamp_state, mask)
    energies = _all_energies(params, template, free_idx)
    log_z = logsumexp(-energies / c.T)
    marg = np.zeros(c.n_nodes)
    pos = 0
    for bits in _iter_bit_chunks(template, free_idx):
        p = np.exp(-energies[pos : pos + len(bits)] / c.T - log_z)
        marg += p @ bits.astype(np.float64)
        pos += len(bits)
    V, R, H1 = c.V, c.R, c.H1
    return NodeMarginals(
        p_v=marg[:V],
        p_r=marg[V : V + R],
        p_h1=marg[V + R : V + R + H1],
        p_h2=marg[V + R + H1 :],
    )


def _as_vr(item, config: NetworkConfig):
    if hasattr(item, "dense_objects"):
        return item.dense_objects(), item.dense_relations()
    v, r = item
    v = np.asarray(v, dtype=np.uint8)
    r = np.asarray(r, dtype=np.uint8)
    if v.shape != (config.V,) or r.shape != (config.R,):
        raise ValueError(
            f"dataset item shapes {v.shape}/{r.shape} do not match config "
            f"({config.V},)/({config.R},)"
        )
    return v, r


def _hidden_enumeration(params: ModelParams, v: np.ndarray, r: np.ndarray):
    """Energies and bit matrix over all hidden assignments for fixed (v, r)."""
    c = params.config
    n_h = c.H1 + c.H2
    idx = np.arange(1 << n_h, dtype=np.int64)
    hbits = ((idx[:, None] >> np.arange(n_h)) & 1).astype(np.uint8)
    bits = np.empty((len(idx), c.n_nodes), dtype=np.uint8)
    bits[:, : c.V] = v
    bits[:, c.V : c.V + c.R] = r
    bits[:, c.V + c.R :] = hbits
    return _energies(params, bits), bits


def exact_loglik(
    params: ModelParams, dataset, limit: TinyLimit = TinyLimit()
) -> float:
    """Mean log p(v, r) over the dataset, hidden layers marginalized."""
    c = params.config
    _check_limit(c, limit)
    log_z = log_partition_function(params, limit)
    total = 0.0
    count = 0
    for item in dataset:
        v, r = _as_vr(item, c)
        energies, _ = _hidden_enumeration(params, v, r)
        total += float(logsumexp(-energies / c.T)) - log_z
        count += 1
    if count == 0:
        raise ValueError("dataset is empty")
    return total / count


def _accumulate_stats(stats: EdgeStats, p: np.ndarray, bits: np.ndarray, c) -> None:
    vf, rf, h1f, h2f = _split_columns(c, bits)
    stats.s_hv += np.einsum("s,sm,sj->mj", p, h1f, vf)
    if c.rh_sharing == "per_node":
        stats.s_rh += np.einsum("s,sm,sr->mr", p, h1f, rf)
    else:
        rsum = rf.reshape(len(rf), c.Tc, c.V * c.V).sum(axis=2)
        stats.s_rh += np.einsum("s,sm,st->mt", p, h1f, rsum)
    if c.H2 > 0:
        stats.s_12 += np.einsum("s,sm,sn->mn", p, h1f, h2f)
    if stats.s_tri is not None:
        r4 = rf.reshape(len(rf), c.Tc, c.V, c.V)
        inner = np.einsum("stjk,sk->stj", r4, vf)
        stats.s_tri += np.einsum("s,stj,sj->t", p, inner, vf)
    if stats.s_bv is not None:
        stats.s_bv += p @ vf
        stats.s_br += p @ rf
        stats.s_bh1 += p @ h1f
        if c.H2 > 0:
            stats.s_bh2 += p @ h2f


def exact_phase_expectations(
    params: ModelParams, dataset, limit: TinyLimit = TinyLimit()
) -> tuple:
    """Exact positive- and negative-phase edge statistics.

    The positive side averages E[stats | v, r] over the dataset with
    hidden layers marginalized exactly; the negative side is the full
    model expectation.  Returns (data_stats, model_stats).
    """
    c = params.config
    _check_limit(c, limit)

    data_stats = EdgeStats.zeros_for(params)
    count = 0
    for item in dataset:
        v, r = _as_vr(item, c)
        energies, bits = _hidden_enumeration(params, v, r)
        logits = -energies / c.T
        p = np.exp(logits - logsumexp(logits))
        _accumulate_stats(data_stats, p, bits, c)
        count += 1
    if count == 0:
        raise ValueError("dataset is empty")
    data_stats.scale(1.0 / count)

    model_stats = EdgeStats.zeros_for(params)
    template, free_idx = _clamp_template(c, None, None)
    energies = _all_energies(params, template, free_idx)
    log_z = logsumexp(-energies / c.T)
    pos = 0
    for bits in _iter_bit_chunks(template, free_idx):
        p = np.exp(-energies[pos : pos + len(bits)] / c.T - log_z)
        _accumulate_stats(model_stats, p, bits, c)
        pos += len(bits)
    return data_stats, model_stats


def exact_gradient(
    params: ModelParams, dataset, limit: TinyLimit = TinyLimit()
) -> EdgeStats:
    """Gradient of the mean log-likelihood: E_data[stats] - E_model[stats].

    Tri-way entries are pair-aggregated, matching the shared per-type
    weights.
    """
    data_stats, model_stats = exact_phase_expectations(params, dataset, limit)
    grad = EdgeStats.zeros_for(params)
    grad.iadd(data_stats)
    model_stats.scale(-1.0)
    grad.iadd(model_stats)
    # d logp / dw carries 1/T from the Boltzmann exponent; a no-op at T=1.
    grad.scale(1.0 / params.config.T)
    return grad
