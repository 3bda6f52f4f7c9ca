"""detkit: motion-transfer evaluation math and a desk-scale shared temporal kernel."""

__version__ = "0.1.0"

from .errors import DetkitError, NumericError, ParameterError, ParseError, SizeError, ValidationError
from .trajectory_model import (
    ForegroundMask,
    TrajectorySet,
    load_mask,
    load_trajectories,
    save_mask,
    save_trajectories,
    velocities,
)
from .motion_metrics import (
    MotionFidelityConfig,
    edit_fidelity,
    frechet_bruteforce,
    frechet_distance,
    motion_fidelity,
    read_embeddings,
    temporal_consistency,
    velocity_cosine_mean,
    write_embeddings,
)
from .clustering import (
    ClusterResult,
    Difficulty,
    classify_difficulty,
    distance_weighted_sample,
    kmeans,
    select_k,
    silhouette_score,
    trajectory_features,
)
from .temporal_kernel import (
    LayerStackConfig,
    TemporalKernelParams,
    apply_stack,
    gelu,
    init_params,
    kernel_backward,
    kernel_forward,
    load_params,
    save_params,
    smooth_eq1,
)
from .losses import (
    LossTrace,
    LossWeights,
    NoiseSchedule,
    combined_loss,
    cosine_alpha_bar,
    denoising_loss,
    predict_latent,
    sample_feature_at,
    tracking_loss,
    tracking_loss_grad,
    train_demo,
)
from .report import EvalReport, VideoEvalRecord, aggregate
