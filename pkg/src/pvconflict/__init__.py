"""Pedestrian-vehicle conflict analysis and evasive-action choice modeling.

From raw ground-plane trajectories the pipeline detects conflict instants by
trajectory prediction and comparison, extracts the explanatory variables of
each encounter, labels both users' evasive actions via the crossing-time
statistic, calibrates a three-alternative multinomial logit per user kind
and evaluates it on held-out data.
"""

from .config import PipelineConfig
from .conflict import (
    ConflictInstant,
    ConflictSituation,
    PredictedPath,
    detect_conflict_instants,
    group_conflicts,
    min_dist,
    predict_path,
)
from .errors import (
    DegenerateFit,
    InsufficientData,
    InvalidInput,
    NoCrossing,
    NotConverged,
    OutOfDomain,
    OutOfRange,
    PipelineError,
)
from .evaluation import (
    ConfusionMatrix,
    SituationTimeline,
    confusion,
    misclassification_rate,
    split,
    timeline,
)
from .labeling import (
    CLASS_ORDER,
    ReactionClass,
    ReactionLabel,
    classify,
    expected_trajectory,
    k_statistic,
    label_conflict_instants,
    observed_trajectory,
)
from .mnl import (
    ALTERNATIVES,
    DEFAULT_PREDICTORS,
    FittedModel,
    LabeledDataset,
    ModelSpec,
    backward_select,
    fit,
    goodness_of_fit,
    load_model,
    predict_proba,
    save_model,
    z_tests,
)
from .predictors import (
    PREDICTOR_COLUMNS,
    CrossingPoint,
    PredictorVector,
    car_ahead,
    compute_predictors,
    count_simultaneous,
    crossing_point,
    ort_dist,
    time_delay_xp,
)
from .synthesize import demo_scene, synthesize_scene
from .trajectory import (
    ParametricCurve,
    TrackPoint,
    Trajectory,
    UserKind,
    accel_at,
    extrapolate,
    fit_smoothing_spline,
    speed_at,
)

__version__ = "0.1.0"
