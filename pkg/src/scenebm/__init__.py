"""Hybrid tri-way Boltzmann Machines for scene modeling.

A scene is a sparse binary vector of object nodes plus spatial-relation
nodes.  Relation nodes couple to their two endpoint objects through
tri-way edges whose weights are shared per relation type, and to a
latent "context" layer through ordinary pairwise edges.  The package
provides the model itself, Gibbs sampling, contrastive training, an
exact enumeration oracle for tiny networks, a scene dataset toolkit,
and an evaluation harness for four scene-reasoning tasks.
"""

from scenebm.scenes import (
    RAW_RELATIONS,
    CANONICAL_RELATIONS,
    Vocabulary,
    OrientedBox,
    SceneObject,
    SceneRelation,
    SceneInstance,
    RelationId,
    SceneVector,
    SceneDataError,
    fold_relation,
    encode_scene,
    decode_scene,
)
from scenebm.geometry import RelationThresholds, derive_relations
from scenebm.datasets import (
    CategorySpec,
    SynthSpec,
    DatasetSplit,
    EncodedScene,
    synth_generate,
    split_dataset,
    encode_split,
)
from scenebm.model import (
    NetworkConfig,
    ModelParams,
    NetworkState,
    init_params,
    energy,
    node_input,
    activation_prob,
    iter_nodes,
)
from scenebm.checkpoint import save_checkpoint, load_checkpoint, CheckpointError
from scenebm.sampler import (
    ClampMask,
    SamplerSettings,
    AnnealSchedule,
    sweep_hidden,
    negative_phase_step,
    conditional_complete,
    generate_from_hidden,
)
from scenebm.trainer import (
    EdgeStats,
    HyperParams,
    TrainHistory,
    TrainingDiverged,
    phase_statistics,
    apply_update,
    reconstruction_error,
    train,
)
from scenebm.oracle import (
    TinyLimit,
    OracleSizeError,
    log_partition_function,
    partition_function,
    exact_marginals,
    exact_loglik,
    exact_phase_expectations,
    exact_gradient,
)
from scenebm.tasks import (
    TaskReport,
    task1_relation_estimation,
    task2_missing_object,
    task3_out_of_context,
    task4_generate,
    chance_levels,
    compare_models,
)
from scenebm.seeding import rng_for

__version__ = "0.1.0"
