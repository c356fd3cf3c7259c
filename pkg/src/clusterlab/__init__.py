"""Cluster functionals, blocks estimators and empirical cluster processes
for regularly varying time series, with exact and Monte Carlo oracles."""

from clusterlab.core import (
    BlockScheme,
    BlockStats,
    ExceedanceRecord,
    FixedLevel,
    NormSpec,
    OrderStatistic,
    SchemeError,
    Window,
    exceedance_record,
    partition_blocks,
    resolve_threshold,
    scale_window,
)
from clusterlab.estimators import (
    MCEstimate,
    block_cluster_measure,
    empirical_cluster_measure,
    empirical_cluster_measure_rescaled,
    extremal_index_estimator,
    joint_jump_moment,
    jump_time_law,
)
from clusterlab.functionals import ClusterFunctional, check_membership, eval_functional, parse
from clusterlab.generators import GeneratorModel, block_maxima_theta_oracle, generate
from clusterlab.iid_oracle import closed_form_length_pmf, enumerate_patterns, moment_rate_table
from clusterlab.kernels import BACKEND
from clusterlab.processes import ProcessKind, gaussianity_check, sample_process, variance_report
from clusterlab.tail_models import candidate_theta, cluster_index, sample_tail_path, sample_Z, tail_model

__version__ = "0.1.0"
