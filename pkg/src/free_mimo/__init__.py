"""Channel capacity estimation for MIMO systems via free deconvolution."""

from .estimators import (EstimationReport, Model, ObservationBatch, StackingError,
                         capacity_estimate, classical_estimators, free_moment_estimator,
                         gmm_moment_estimator, stack_observations)
from .freeconv import (MPLaw, add_conv_dirac, mp_density, mp_moments, mult_conv_mp,
                       mult_deconv_mp)
from .moments import (capacity_from_moments, capacity_from_spectrum, capacity_taylor,
                      power_sums_to_elementary, trace_moments)
from .oracle import (PairedPermutation, equivalence_classes, expected_wishart_moment,
                     mixed_moment_expectation)
from .simulation import (ChannelMatrix, ExperimentConfig, run_experiment, sample_channel,
                         sample_observation, verify_lemma1)

__version__ = "0.1.0"
