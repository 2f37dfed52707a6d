"""Built-in correctness suites on tiny fixtures.

These are the release-gate checks behind the `oracle-check` command:
energy/input consistency, sampler stationarity against exact marginals,
gradient agreement with finite differences, and tri-way pair-sum
equivalence.  The update and statistics functions are injectable so the
suites can be shown to catch deliberately broken implementations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from scenebm.model import (
    NetworkConfig,
    NetworkState,
    energy,
    init_params,
    iter_nodes,
    node_input,
)
from scenebm.oracle import exact_gradient, exact_loglik, exact_marginals, exact_phase_expectations
from scenebm.sampler import ClampMask, negative_phase_step
from scenebm.seeding import rng_for
from scenebm.trainer import apply_update, phase_statistics


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    deviation: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        out = f"[{status}] {self.name}: deviation {self.deviation:.3e} (tol {self.tolerance:.1e})"
        return out + (f" -- {self.detail}" if self.detail else "")


def _set_bit(state: NetworkState, node, value: int) -> None:
    kind = node[0]
    if kind == "object":
        state.v[node[1]] = value
    elif kind == "relation":
        state.r[node[1]] = value
    else:
        (state.h1 if node[1] == 1 else state.h2)[node[2]] = value


def _random_model(rng, scale: float = 1.0, max_nodes: int = 24):
    while True:
        V = int(rng.integers(1, 4))
        Tc = int(rng.integers(1, 3))
        H1 = int(rng.integers(1, 4))
        H2 = int(rng.integers(0, 3))
        config = NetworkConfig(
            V=V, Tc=Tc, H1=H1, H2=H2,
            use_triway=bool(rng.integers(2)),
            rh_sharing="per_node" if rng.integers(2) else "per_type",
            use_biases=bool(rng.integers(2)),
        )
        if config.n_nodes <= max_nodes:
            break
    params = init_params(config, rng)
    for fam in params.weight_families().values():
        fam[...] = rng.normal(0.0, scale, fam.shape)
    return params


def _random_state(config: NetworkConfig, rng) -> NetworkState:
    state = NetworkState.zeros(config)
    state.v[:] = rng.integers(0, 2, config.V)
    state.r[:] = rng.integers(0, 2, config.R)
    state.h1[:] = rng.integers(0, 2, config.H1)
    state.h2[:] = rng.integers(0, 2, config.H2)
    return state


def check_delta_e(n_cases: int = 1000, seed: int = 0, tol: float = 1e-9) -> CheckResult:
    """E(x=1) - E(x=0) must equal -node_input(x) for every node."""
    rng = rng_for(seed, "delta-e")
    worst = 0.0
    for _ in range(n_cases):
        params = _random_model(rng)
        state = _random_state(params.config, rng)
        nodes = list(iter_nodes(params.config))
        node = nodes[int(rng.integers(len(nodes)))]
        s1, s0 = state.copy(), state.copy()
        _set_bit(s1, node, 1)
        _set_bit(s0, node, 0)
        dev = abs((energy(params, s1) - energy(params, s0)) + node_input(params, state, node))
        worst = max(worst, dev)
    return CheckResult("delta-e consistency", worst < tol, worst, tol,
                       f"{n_cases} random (params, state, node) triples")


def stationarity_fixture(seed: int = 0):
    """Frozen 16-node net (V=3, Tc=1, H1=2, H2=2) with moderate weights."""
    config = NetworkConfig(V=3, Tc=1, H1=2, H2=2, use_triway=True, rh_sharing="per_node")
    rng = rng_for(seed, "stationarity-params")
    params = init_params(config, rng)
    for fam in params.weight_families().values():
        fam[...] = rng.normal(0.0, 0.6, fam.shape)
    return params


def check_stationarity(
    steps: int = 200_000, burn_in: int = 2000, tol: float = 0.02, seed: int = 0
) -> CheckResult:
    """Long-run per-node marginals of the free-running chain must match
    exact enumeration."""
    params = stationarity_fixture(seed)
    config = params.config
    oracle = exact_marginals(params)
    exact = np.concatenate([oracle.p_v, oracle.p_r, oracle.p_h1, oracle.p_h2])
    state = NetworkState.zeros(config)
    rng = rng_for(seed, "stationarity-chain")
    mask = ClampMask.none()
    sums = np.zeros(config.n_nodes)
    for i in range(steps):
        negative_phase_step(params, state, mask, rng)
        if i >= burn_in:
            sums += np.concatenate([state.v, state.r, state.h1, state.h2])
    empirical = sums / (steps - burn_in)
    worst = float(np.abs(empirical - exact).max())
    return CheckResult("sampler stationarity", worst < tol, worst, tol,
                       f"{steps} steps on a {config.n_nodes}-node net")


def gradient_fixture(seed: int = 0):
    """Tiny net plus a small random visible dataset."""
    params = stationarity_fixture(seed)
    rng = rng_for(seed, "gradient-data")
    config = params.config
    data = [
        (rng.integers(0, 2, config.V).astype(np.uint8),
         rng.integers(0, 2, config.R).astype(np.uint8))
        for _ in range(6)
    ]
    return params, data


def check_gradient_fd(
    seed: int = 0,
    h: float = 1e-5,
    tol: float = 1e-5,
    alpha: float = 0.01,
    update_fn=apply_update,
) -> CheckResult:
    """exact_gradient vs central differences of exact_loglik, plus one
    ascent step through the given update function."""
    params, data = gradient_fixture(seed)
    grad = exact_gradient(params, data)
    worst = 0.0
    for stat_name, weight_name in (
        ("s_hv", "W_hv"), ("s_rh", "W_rh"), ("s_12", "W_12"), ("s_tri", "w_tri"),
    ):
        weights = getattr(params, weight_name)
        if weights is None:
            continue
        analytic = getattr(grad, stat_name)
        it = np.nditer(weights, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = weights[idx]
            weights[idx] = orig + h
            lp = exact_loglik(params, data)
            weights[idx] = orig - h
            lm = exact_loglik(params, data)
            weights[idx] = orig
            fd = (lp - lm) / (2.0 * h)
            rel = abs(fd - analytic[idx]) / max(abs(analytic[idx]), 1e-8)
            worst = max(worst, rel)
    data_stats, model_stats = exact_phase_expectations(params, data)
    before = exact_loglik(params, data)
    after = exact_loglik(update_fn(params, data_stats, model_stats, alpha), data)
    ascended = after > before
    passed = worst < tol and ascended
    detail = f"ascent {before:.6f} -> {after:.6f}"
    if not ascended:
        detail += " (log-likelihood did not increase)"
    return CheckResult("exact gradient vs finite differences", passed, worst, tol, detail)


def check_triway_pair_sum(
    n_cases: int = 100, seed: int = 0, tol: float = 1e-9, stats_fn=phase_statistics
) -> CheckResult:
    """Aggregated tri-way statistics must equal a scalar loop over all
    (j, k) pairs, and the tri-way family must hold exactly Tc scalars."""
    rng = rng_for(seed, "pair-sum")
    worst = 0.0
    for _ in range(n_cases):
        V = int(rng.integers(2, 5))
        Tc = int(rng.integers(1, 4))
        config = NetworkConfig(V=V, Tc=Tc, H1=2, H2=2, use_triway=True,
                               rh_sharing="per_type")
        params = init_params(config, rng)
        if params.w_tri.shape != (Tc,):
            return CheckResult("tri-way pair aggregation", False, np.inf, tol,
                               f"tri-way family has shape {params.w_tri.shape}, want ({Tc},)")
        state = NetworkState.zeros(config)
        state.p_v = rng.random(config.V)
        state.p_r = rng.random(config.R)
        state.p_h1 = rng.random(config.H1)
        state.p_h2 = rng.random(config.H2)
        stats = stats_fn(params, state)
        p_r4 = state.p_r.reshape(Tc, V, V)
        for t in range(Tc):
            expect = 0.0
            for j in range(V):
                for k in range(V):
                    expect += float(p_r4[t, j, k]) * float(state.p_v[j]) * float(state.p_v[k])
            worst = max(worst, abs(float(stats.s_tri[t]) - expect))
    return CheckResult("tri-way pair aggregation", worst < tol, worst, tol,
                       f"{n_cases} random probability states")


def run_all(fast: bool = False) -> list:
    """All suites; `fast` shortens the stationarity chain for smoke runs."""
    return [
        check_delta_e(),
        check_stationarity(steps=20_000 if fast else 200_000),
        check_gradient_fd(),
        check_triway_pair_sum(),
    ]
