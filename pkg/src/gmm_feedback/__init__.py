"""GMM-based limited feedback for FDD MIMO systems.

Synthetic channel generation, complex Gaussian mixture fitting, codebook
construction, feedback encoding, channel estimation baselines, single- and
multi-user precoding, and Monte Carlo evaluation.
"""

from .channels import (ChannelDataset, ScenarioConfig, generate_scenario,
                       normalize_dataset, split_dataset, unvec, vec)
from .codebooks import (CovCodebook, DirCodebook, LloydOptions, PgaOptions,
                        extract_directions, gmm_codebook, lau_update,
                        lloyd_codebook, pga_sum_rate, project_psd_trace,
                        random_grassmann_codebook)
from .errors import (ArgumentError, ConfigurationError, DegenerateDataError,
                     FeedbackError, ModelIntegrityError, RankDeficiencyError,
                     ValidationError)
from .estimators import (Dictionary, build_dictionary, estimate_gmm,
                         estimate_lmmse, estimate_omp_genie, sample_covariance)
from .experiments import (Artifacts, DataConfig, ExperimentConfig,
                          ExperimentResult, GmmConfig, build_artifacts,
                          build_datasets, eccdf, run_mu_experiment,
                          run_p2p_experiment, snr_db_to_sigma2)
from .feedback import (FeedbackIndex, dominant_subspace, select_by_chordal,
                       select_by_rate_cov, select_by_rate_subspace,
                       select_by_responsibility, select_by_responsibility_perfect)
from .gmm import (AdaptedGmm, GmmModel, KroneckerFactors, adapt_to_observation,
                  fit_em, fit_kronecker, log_likelihood, parameter_count,
                  responsibilities, sample_component)
from .pilots import (ObservationModel, build_observation_operator,
                     build_pilot_matrix, observe)
from .precoding import (IterativeTrace, PrecoderSet, baseline_tx_strategy,
                        normalize_power, rbd, rci, sum_rate, swmmse,
                        waterfilling_capacity, wmmse)
from .rates import spectral_efficiency, waterfill_power
