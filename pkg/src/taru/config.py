"""Run configuration and derived sampling parameters.

Two parameter profiles are supported.

* "practical" scales every trial and sketch count by small calibrated
  constants.  These defaults were tuned with scripts/calibrate_fpras.py so the
  statistical acceptance suite passes at epsilon=0.2, delta=0.1 on desk-scale
  inputs within its time budget.

* "theory" instantiates the guarantee-carrying formulas verbatim, including
  the epsilon clamp.  The resulting counts are astronomically large for any
  nontrivial input; sketches are materialized lazily, so the profile is
  executable exactly on instances whose estimates never demand a sample
  (every union of derivations is a single product).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Config:
    epsilon: float = 0.2
    delta: float = 0.1
    seed: int = 0
    profile: str = "practical"
    # Scaling constants for the practical profile.
    c_sketch: int = 64
    c_trials: int = 16
    c_rho: int = 16
    # Budgets.
    oracle_budget: int = 10_000_000
    fill_attempts: int = 64
    max_clamp_warnings: int = 1_000_000

    def __post_init__(self):
        if not (0.0 < self.epsilon < 0.5):
            raise ConfigError("epsilon must lie in (0, 1/2)")
        if not (0.0 < self.delta < 0.5):
            raise ConfigError("delta must lie in (0, 1/2)")
        if self.profile not in ("practical", "theory"):
            raise ConfigError(f"unknown profile {self.profile!r}")
        if min(self.c_sketch, self.c_trials, self.c_rho) < 1:
            raise ConfigError("scaling constants must be at least 1")

    def with_seed(self, seed: int) -> "Config":
        return replace(self, seed=seed)


@dataclass(frozen=True)
class EngineParams:
    """Resolved per-run parameters for the slice estimator.

    alpha        size of each stored sample set per (state, level)
    pair_cap     use every sketch pair for overlap fractions when the product
                 of the two sketch sizes is at most this; otherwise sample
                 h_trials pairs
    h_trials     sampled pairs per overlap fraction
    epsilon      working accuracy target (clamped under the theory profile)
    fresh_trials under the theory profile, overlap fractions are estimated
                 from fresh sampler calls with a 5x oversampling allowance
    refresh_epochs  rebuild every sample set once per level round
    """

    alpha: int
    pair_cap: int
    h_trials: int
    h_budget: int
    epsilon: float
    fresh_trials: bool
    refresh_epochs: bool
    nfa: "NfaParams"


@dataclass(frozen=True)
class NfaParams:
    """Resolved parameters for the succinct-NFA counting layer.

    d_trials   per-transition trials for union overlap fractions
    beta       word sketch size per state
    m_rho      trials for the per-frontier failure-rate estimate
    walk_cap   rejection attempts allowed per emitted symbol
    epsilon    accuracy target handed to certificates
    """

    d_trials: int
    beta: int
    m_rho: int
    walk_cap: int
    epsilon: float
    exhaustive_cap: int = 4096


def _ceil(x: float) -> int:
    return int(math.ceil(x))


def resolve_engine_params(config: Config, n: int, m: int) -> EngineParams:
    if config.profile == "practical":
        eps = config.epsilon
        alpha = config.c_sketch
        h = config.c_trials * _ceil(1.0 / (eps * eps))
        nfa = NfaParams(
            d_trials=2 * config.c_trials,
            beta=max(8, config.c_sketch // 4),
            m_rho=2 * config.c_rho,
            walk_cap=64 * config.c_rho,
            epsilon=min(0.25, 4 * eps),
        )
        return EngineParams(
            alpha=alpha,
            pair_cap=max(alpha * alpha, 4096),
            h_trials=h,
            h_budget=5 * h,
            epsilon=eps,
            fresh_trials=False,
            refresh_epochs=False,
            nfa=nfa,
        )
    # Theory profile: formulas as stated, computed in logs where needed so the
    # integers stay exact.  gamma folds the per-level union bound allowance.
    eps = min(config.epsilon, (4.0 * m * n) ** -18)
    gamma = math.log2(1.0 / config.delta) + 2 * n
    log2_inv_delta = math.log2(1.0 / config.delta)
    alpha = _ceil(log2_inv_delta**2 * (n * m) ** 13 / eps**5)
    # Overlap trials: h = O(log(4m/delta_p) m^2/eps^2) with
    # log(1/delta_p) = gamma n^20.
    log_delta_p = gamma * float(n) ** 20
    h = _ceil((math.log2(4 * m) + log_delta_p) * m * m / (eps * eps))
    r_bound = 3 * (n * m) ** 4
    eps_inner = min(1.0, (4.0 * n * m) ** 17 * eps)
    gamma_inner = (n * m) ** 3 * math.log2(1.0 / config.delta)
    log_n_bound = (n * m) ** 2 * math.log2(max(2, n * m))
    nfa = NfaParams(
        d_trials=_ceil(gamma_inner * r_bound**5 / eps_inner**2),
        beta=_ceil(gamma_inner * r_bound**3 / eps_inner**2),
        m_rho=_ceil(math.log2(max(2.0, log_n_bound / eps_inner)) * gamma_inner * r_bound**10 / eps_inner**2),
        walk_cap=_ceil(10 * r_bound**4 * math.log2(max(2.0, r_bound * log_n_bound / eps_inner)) * gamma_inner),
        epsilon=eps_inner,
    )
    return EngineParams(
        alpha=alpha,
        pair_cap=0,
        h_trials=h,
        h_budget=5 * h,
        epsilon=eps,
        fresh_trials=True,
        refresh_epochs=True,
        nfa=nfa,
    )


def resolve_nfa_params(config: Config, r: int, k: int) -> NfaParams:
    """Parameters for counting a standalone succinct NFA of size r at length k."""
    if config.profile == "practical":
        eps = config.epsilon
        return NfaParams(
            d_trials=config.c_trials * _ceil(1.0 / (eps * eps)),
            beta=max(16, config.c_sketch),
            m_rho=2 * config.c_rho * _ceil(1.0 / (eps * eps)) // 2,
            walk_cap=64 * config.c_rho,
            epsilon=eps,
        )
    eps = config.epsilon
    gamma = math.log2(1.0 / config.delta)
    log_n_bound = max(2.0, float(k) * math.log2(max(2, r)))
    return NfaParams(
        d_trials=_ceil(gamma * r**5 / eps**2),
        beta=_ceil(gamma * r**3 / eps**2),
        m_rho=_ceil(math.log2(max(2.0, log_n_bound / eps)) * gamma * r**10 / eps**2),
        walk_cap=_ceil(10 * r**4 * math.log2(max(2.0, r * log_n_bound / eps)) * gamma),
        epsilon=eps,
    )
