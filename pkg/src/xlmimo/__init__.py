"""QoS-aware joint user scheduling and power allocation for the downlink of
extra-large antenna arrays, with a deterministic Monte-Carlo harness."""

__version__ = "0.1.0"

from .channel import (SystemConfig, User, UserPosition, antenna_positions,
                      los_channel_vector, multi_state_channel,
                      nlos_covariance_diag, sample_channel_state,
                      sample_nlos_vector, sample_user_position, sample_users,
                      user_antenna_distance)
from .errors import (ConfigInvalid, EmptyEnsemble, Infeasible, RankDeficient,
                     XLMIMOError, ZeroVector)
from .graph import (UserGraph, build_graph, is_clique, max_budget_clique,
                    neighbors, normalized_correlation)
from .power import (PowerAllocation, check_feasibility, min_power,
                    quick_infeasible, single_user_min_power, waterfill)
from .precoding import (ChannelMatrix, PrecodingSet, achievable_rate,
                        general_sinr, gram_inverse_diag, zf_precoder, zf_sinr)
from .schedulers import (ALGORITHMS, RealizationContext, ScheduleOutcome, cbs,
                         cpbs, dbs, gwc, random_sched, schedule_and_allocate,
                         sdbs, user_removal)
from .simulation import (ExperimentSpec, MetricsRow, ccdf_estimate,
                         run_experiment, run_realization, state_sched_prob,
                         sum_rate)
