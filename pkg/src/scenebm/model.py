"""Network configuration, parameters, energy, and per-node inputs.

The joint state is (v, r, h1, h2): object bits, relation bits addressed
as (type t, subject j, object k), a bottom hidden layer, and an
optional top hidden layer.  The energy is

    E = - h1.W_hv.v - h1.W_12.h2 - sum_t w_t sum_jk r_tjk v_j v_k - h1.W_rh.r
        (- bias terms when enabled)

with no visible-visible and no intra-layer hidden couplings.  The
tri-way term stores exactly one scalar per relation type: every (j, k)
pair of a type shares that weight.

Three architectures fall out of the flags:
    RBM    = H2 == 0, use_triway off
    GBM    = H2 > 0,  use_triway off (two-layer bipartite model)
    Triway = H2 > 0,  use_triway on
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

from scenebm.seeding import rng_for

RH_SHARING = ("per_node", "per_type")
RELATION_SUPPORT = ("all", "active_pairs")
INIT_SCALE = 0.01


class ModelError(ValueError):
    """Raised for invalid configurations, shapes, or node addresses."""


@dataclass(frozen=True)
class NetworkConfig:
    V: int
    Tc: int = 4
    H1: int = 200
    H2: int = 100
    use_triway: bool = True
    rh_sharing: str = "per_node"
    use_biases: bool = False
    T: float = 1.0
    relation_support: str = "all"
    seed: int = 0

    def __post_init__(self):
        if self.V < 1 or self.Tc < 1 or self.H1 < 1 or self.H2 < 0:
            raise ModelError(f"invalid sizes: V={self.V} Tc={self.Tc} H1={self.H1} H2={self.H2}")
        if self.rh_sharing not in RH_SHARING:
            raise ModelError(f"rh_sharing must be one of {RH_SHARING}")
        if self.relation_support not in RELATION_SUPPORT:
            raise ModelError(f"relation_support must be one of {RELATION_SUPPORT}")
        if self.T <= 0:
            raise ModelError(f"temperature must be positive: {self.T}")

    @property
    def R(self) -> int:
        """Number of relation nodes, Tc * V^2."""
        return self.Tc * self.V * self.V

    @property
    def n_nodes(self) -> int:
        return self.V + self.R + self.H1 + self.H2

    @property
    def model_kind(self) -> str:
        if self.use_triway:
            return "triway"
        return "gbm" if self.H2 > 0 else "rbm"

    def rh_cols(self) -> int:
        return self.R if self.rh_sharing == "per_node" else self.Tc

    def to_dict(self) -> dict:
        return {
            "V": self.V, "Tc": self.Tc, "H1": self.H1, "H2": self.H2,
            "use_triway": self.use_triway, "rh_sharing": self.rh_sharing,
            "use_biases": self.use_biases, "T": self.T,
            "relation_support": self.relation_support, "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        return cls(**d)


@dataclass
class ModelParams:
    """All weight families for one configuration.

    W_rh columns follow rh_sharing: one per relation node (per_node) or
    one per relation type (per_type).  w_tri is None unless tri-way
    edges are enabled; biases are None unless enabled.
    """

    config: NetworkConfig
    W_hv: np.ndarray  # (H1, V)
    W_rh: np.ndarray  # (H1, R) or (H1, Tc)
    W_12: np.ndarray  # (H1, H2)
    w_tri: np.ndarray | None = None  # (Tc,)
    b_v: np.ndarray | None = None
    b_r: np.ndarray | None = None
    b_h1: np.ndarray | None = None
    b_h2: np.ndarray | None = None

    def validate(self) -> "ModelParams":
        c = self.config
        checks = [
            ("W_hv", self.W_hv, (c.H1, c.V)),
            ("W_rh", self.W_rh, (c.H1, c.rh_cols())),
            ("W_12", self.W_12, (c.H1, c.H2)),
        ]
        if c.use_triway:
            checks.append(("w_tri", self.w_tri, (c.Tc,)))
        elif self.w_tri is not None:
            raise ModelError("w_tri present but use_triway is off")
        if c.use_biases:
            checks += [
                ("b_v", self.b_v, (c.V,)), ("b_r", self.b_r, (c.R,)),
                ("b_h1", self.b_h1, (c.H1,)), ("b_h2", self.b_h2, (c.H2,)),
            ]
        for name, arr, shape in checks:
            if arr is None or arr.shape != shape:
                got = None if arr is None else arr.shape
                raise ModelError(f"{name} must have shape {shape}, got {got}")
            if not np.all(np.isfinite(arr)):
                raise ModelError(f"{name} contains non-finite values")
        return self

    def copy(self) -> "ModelParams":
        dup = lambda a: None if a is None else a.copy()
        return ModelParams(
            config=self.config,
            W_hv=self.W_hv.copy(), W_rh=self.W_rh.copy(), W_12=self.W_12.copy(),
            w_tri=dup(self.w_tri),
            b_v=dup(self.b_v), b_r=dup(self.b_r),
            b_h1=dup(self.b_h1), b_h2=dup(self.b_h2),
        )

    def weight_families(self) -> dict:
        fams = {"W_hv": self.W_hv, "W_rh": self.W_rh, "W_12": self.W_12}
        if self.w_tri is not None:
            fams["w_tri"] = self.w_tri
        for name in ("b_v", "b_r", "b_h1", "b_h2"):
            arr = getattr(self, name)
            if arr is not None:
                fams[name] = arr
        return fams


def init_params(config: NetworkConfig, rng: np.random.Generator | None = None) -> ModelParams:
    """Gaussian(0, 0.01) weights; biases start at zero when enabled."""
    if rng is None:
        rng = rng_for(config.seed, "init")
    normal = lambda *shape: rng.normal(0.0, INIT_SCALE, size=shape)
    params = ModelParams(
        config=config,
        W_hv=normal(config.H1, config.V),
        W_rh=normal(config.H1, config.rh_cols()),
        W_12=normal(config.H1, config.H2),
        w_tri=normal(config.Tc) if config.use_triway else None,
    )
    if config.use_biases:
        params.b_v = np.zeros(config.V)
        params.b_r = np.zeros(config.R)
        params.b_h1 = np.zeros(config.H1)
        params.b_h2 = np.zeros(config.H2)
    return params.validate()


@dataclass
class NetworkState:
    """Joint binary assignment plus optional per-node activation probabilities."""

    v: np.ndarray
    r: np.ndarray  # flat, length Tc*V^2
    h1: np.ndarray
    h2: np.ndarray
    p_v: np.ndarray | None = None
    p_r: np.ndarray | None = None
    p_h1: np.ndarray | None = None
    p_h2: np.ndarray | None = None

    @classmethod
    def zeros(cls, config: NetworkConfig) -> "NetworkState":
        return cls(
            v=np.zeros(config.V, dtype=np.uint8),
            r=np.zeros(config.R, dtype=np.uint8),
            h1=np.zeros(config.H1, dtype=np.uint8),
            h2=np.zeros(config.H2, dtype=np.uint8),
        )

    @classmethod
    def from_vector(cls, sv, config: NetworkConfig) -> "NetworkState":
        if sv.V != config.V or sv.Tc != config.Tc:
            raise ModelError(
                f"scene vector dims (V={sv.V}, Tc={sv.Tc}) do not match config "
                f"(V={config.V}, Tc={config.Tc})"
            )
        state = cls.zeros(config)
        state.v[:] = sv.dense_objects()
        state.r[:] = sv.dense_relations()
        return state

    def copy(self) -> "NetworkState":
        dup = lambda a: None if a is None else a.copy()
        return NetworkState(
            v=self.v.copy(), r=self.r.copy(), h1=self.h1.copy(), h2=self.h2.copy(),
            p_v=dup(self.p_v), p_r=dup(self.p_r), p_h1=dup(self.p_h1), p_h2=dup(self.p_h2),
        )

    def r4(self, config: NetworkConfig) -> np.ndarray:
        """Relation bits viewed as (Tc, V, V); shares memory with r."""
        return self.r.reshape(config.Tc, config.V, config.V)

    def check_shapes(self, config: NetworkConfig) -> "NetworkState":
        shapes = {
            "v": (self.v, config.V), "r": (self.r, config.R),
            "h1": (self.h1, config.H1), "h2": (self.h2, config.H2),
        }
        for name, (arr, n) in shapes.items():
            if arr.shape != (n,):
                raise ModelError(f"state.{name} must have shape ({n},), got {arr.shape}")
        return self


def activation_prob(node_in, T: float):
    """p(x=1) = sigmoid(input / T); accepts scalars or arrays."""
    if T <= 0:
        raise ModelError(f"temperature must be positive: {T}")
    return expit(np.asarray(node_in, dtype=np.float64) / T)


# -- energy ----------------------------------------------------------------

def _rh_term(params: ModelParams, h1f: np.ndarray, rf: np.ndarray) -> float:
    if params.config.rh_sharing == "per_node":
        return float(h1f @ params.W_rh @ rf)
    c = params.config
    type_counts = rf.reshape(c.Tc, c.V * c.V).sum(axis=1)
    return float(h1f @ params.W_rh @ type_counts)


def energy(params: ModelParams, state: NetworkState) -> float:
    """Joint energy of one state; lower is more probable."""
    c = params.config
    state.check_shapes(c)
    vf = state.v.astype(np.float64)
    rf = state.r.astype(np.float64)
    h1f = state.h1.astype(np.float64)
    h2f = state.h2.astype(np.float64)
    e = -float(h1f @ params.W_hv @ vf)
    if c.H2 > 0:
        e -= float(h1f @ params.W_12 @ h2f)
    e -= _rh_term(params, h1f, rf)
    if c.use_triway:
        r4 = rf.reshape(c.Tc, c.V, c.V)
        e -= float(params.w_tri @ (r4 @ vf @ vf))
    if c.use_biases:
        e -= float(params.b_v @ vf) + float(params.b_r @ rf)
        e -= float(params.b_h1 @ h1f) + float(params.b_h2 @ h2f)
    return e


# -- per-node inputs --------------------------------------------------------
#
# node_input returns I(x) with E(x=1) - E(x=0) = -I(x), so
# p(x=1 | rest) = sigmoid(I(x) / T).

def hidden1_inputs(params: ModelParams, vf, rf, h2f) -> np.ndarray:
    c = params.config
    out = params.W_hv @ vf
    if c.rh_sharing == "per_node":
        out += params.W_rh @ rf
    else:
        out += params.W_rh @ rf.reshape(c.Tc, c.V * c.V).sum(axis=1)
    if c.H2 > 0:
        out += params.W_12 @ h2f
    if params.b_h1 is not None:
        out = out + params.b_h1
    return out


def hidden2_inputs(params: ModelParams, h1f) -> np.ndarray:
    out = params.W_12.T @ h1f
    if params.b_h2 is not None:
        out = out + params.b_h2
    return out


def _tri_object_terms(params: ModelParams, vf: np.ndarray, r4f: np.ndarray) -> np.ndarray:
    """Tri-way contribution to every object input, diagonal counted once.

    For object j the linear-in-v_j part of the energy is
    w_t * (sum_{k != j} (r_tjk + r_tkj) v_k + r_tjj), so the diagonal
    relation contributes independently of the current v_j.
    """
    M = np.einsum("t,tjk->jk", params.w_tri, r4f)
    diag = np.diagonal(M)
    return (M + M.T) @ vf - 2.0 * diag * vf + diag


def object_inputs(params: ModelParams, vf, r4f, h1f) -> np.ndarray:
    out = params.W_hv.T @ h1f
    if params.config.use_triway:
        out = out + _tri_object_terms(params, vf, r4f)
    if params.b_v is not None:
        out = out + params.b_v
    return out


def object_input_single(params: ModelParams, j: int, vf, r4f, h1f) -> float:
    out = float(params.W_hv[:, j] @ h1f)
    if params.config.use_triway:
        rowcol = r4f[:, j, :] + r4f[:, :, j]  # (Tc, V)
        diag = r4f[:, j, j]
        s = rowcol @ vf - 2.0 * diag * vf[j] + diag
        out += float(params.w_tri @ s)
    if params.b_v is not None:
        out += float(params.b_v[j])
    return out


def relation_inputs(params: ModelParams, vf, h1f) -> np.ndarray:
    """Inputs of all Tc*V^2 relation nodes given objects and h1."""
    c = params.config
    if c.rh_sharing == "per_node":
        out = params.W_rh.T @ h1f
    else:
        out = np.repeat(params.W_rh.T @ h1f, c.V * c.V)
    if c.use_triway:
        out = out + np.kron(params.w_tri, np.outer(vf, vf).ravel())
    if params.b_r is not None:
        out = out + params.b_r
    return out


def node_input(params: ModelParams, state: NetworkState, node) -> float:
    """Input I(x) of one node given the rest of the state.

    Nodes are addressed as ("object", j), ("relation", flat_index), or
    ("hidden", layer, index) with layer 1 or 2.
    """
    c = params.config
    state.check_shapes(c)
    vf = state.v.astype(np.float64)
    rf = state.r.astype(np.float64)
    h1f = state.h1.astype(np.float64)
    h2f = state.h2.astype(np.float64)
    kind = node[0]
    if kind == "object":
        j = node[1]
        if not 0 <= j < c.V:
            raise ModelError(f"object index out of range: {j}")
        return object_input_single(params, j, vf, rf.reshape(c.Tc, c.V, c.V), h1f)
    if kind == "relation":
        rid = node[1]
        if not 0 <= rid < c.R:
            raise ModelError(f"relation index out of range: {rid}")
        t, rest = divmod(rid, c.V * c.V)
        j, k = divmod(rest, c.V)
        col = rid if c.rh_sharing == "per_node" else t
        out = float(params.W_rh[:, col] @ h1f)
        if c.use_triway:
            out += float(params.w_tri[t]) * vf[j] * vf[k]
        if params.b_r is not None:
            out += float(params.b_r[rid])
        return out
    if kind == "hidden":
        layer, m = node[1], node[2]
        if layer == 1:
            if not 0 <= m < c.H1:
                raise ModelError(f"h1 index out of range: {m}")
            return float(hidden1_inputs(params, vf, rf, h2f)[m])
        if layer == 2:
            if not 0 <= m < c.H2:
                raise ModelError(f"h2 index out of range: {m}")
            return float(hidden2_inputs(params, h1f)[m])
        raise ModelError(f"hidden layer must be 1 or 2, got {layer}")
    raise ModelError(f"unknown node kind: {kind!r}")


def iter_nodes(config: NetworkConfig):
    """Yield the address of every node in enumeration order."""
    for j in range(config.V):
        yield ("object", j)
    for rid in range(config.R):
        yield ("relation", rid)
    for m in range(config.H1):
        yield ("hidden", 1, m)
    for n in range(config.H2):
        yield ("hidden", 2, n)
