"""Hypersphere geometry toolkit for prototype-based video anomaly scoring."""

from .attention import AttentionParams, SparseAttention, build_sparse_attention, hsa_enhance
from .config import PipelineConfig, parse_config, preset
from .dlsp import dlsp_evaluate, select_layer
from .evalkit import average_precision, roc_auc, separability_stats, sweep
from .pipeline import CalibrationPriors, ScoreTrace, expand_and_smooth, run_offline, run_online
from .prototypes import PrototypeBank, calibrate, spherical_kmeans
from .sgp import SgpParams, sgp_video
from .sphere import center, exp_map, frechet_mean, geodesic_distance, log_map, normalize, slerp
from .vmf import VmfParams, sample_vmf, vmf_score

__version__ = "0.1.0"
