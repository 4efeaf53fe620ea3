"""Rested multi-play bandits with Markovian rewards from exponential families of Markov chains."""

from .errors import *  # noqa: F401,F403
from .exp_family import (FamilySpec, Member, build_family, iid_family, kl_rate, kl_rate_direct,
                         kl_rate_mean, load_family, mean_space, mean_to_natural, member,
                         rho_two_state, two_state_family)
from .perron import perron, is_irreducible
from .bandit_env import BanditEnv, EnvBatch, new_env
from .policies import POLICY_NAMES, Policy, PolicyState, klucb_index, round_robin_step
from .regret import (lower_bound_constant, profile, proxy_gap_bound, proxy_regret,
                     regret_estimate)
from .concentration import (chernoff_bound, empirical_tail, is_doeblin, martingale_residual,
                            maximal_bound)
from .harness import ExperimentConfig, emit_csv, load_config, run_experiment, summarize

__version__ = "0.1.0"
