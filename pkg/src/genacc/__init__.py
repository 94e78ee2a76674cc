"""Standard and genuine adversarial accuracy for nearest-neighbour classifiers."""

__version__ = "0.1.0"

from .kernels import BACKEND
from .geometry import (MetricKind, VoronoiQuery, distance, in_previously_allowed_region,
                       is_on_voronoi_boundary, nearest_clean, project_ball_then_voronoi)
from .datasets import (LabeledDataset, load_cifar10, load_idx, make_noise_example, make_sunset,
                       make_toy_1d)
from .classifiers import (TIE, UNKNOWN, EnsembleConfig, GradualOneNN, NoisyEnsemble, OneNN,
                          OpenSetGradualOneNN, TiePolicy, gradual_scores, noisy_ensemble_scores,
                          open_set_scores, predict_1nn, step_classifier)
from .modes import AttackMode, Evaluator, NormMode, VoronoiMode
from .evaluation import (AccuracyCurve, AttackConfig, UndefinedAccuracy, accuracy_curve, ara,
                         genuine_adv_acc_exact, genuine_adv_acc_max, s_exact_set, std_adv_acc,
                         worst_case_search)
from .analysis import (DistanceStats, Engine, avg_cross_entropy, distance_stats, loo_cv_accuracy,
                       ratio_histograms)

__all__ = [name for name in dir() if not name.startswith("_")]
