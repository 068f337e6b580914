"""Closed-form bounds, evaluated exactly as stated.

Every function checks its domain and returns a float.  ``capability_terms``
exposes the five summands of the regret bound separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .histories import DomainError


@dataclass(frozen=True)
class BoundInputs:
    gamma: float = 0.9
    L: float = 0.0
    w_mu: float = 1.0
    epsilon: float = 1.0
    s: float = 0.0
    T: float = 1.0

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise DomainError("gamma must lie in (0, 1)")
        if self.L < 0:
            raise DomainError("L must be >= 0")
        if not 0 < self.w_mu <= 1:
            raise DomainError("w_mu must lie in (0, 1]")
        if self.epsilon <= 0:
            raise DomainError("epsilon must be > 0")
        if self.s < 0:
            raise DomainError("s must be >= 0")
        if self.T < 1:
            raise DomainError("T must be >= 1")


def _log_inv(w_mu: float) -> float:
    if not 0 < w_mu <= 1:
        raise DomainError("w_mu must lie in (0, 1]")
    return -math.log(w_mu)


def lemma_alpha_bound(s: float, w_mu: float) -> float:
    """Bound on the expected sum over t of ``alpha_{t, t+s}``."""
    if s < 0:
        raise DomainError("s must be >= 0")
    return s * _log_inv(w_mu)


def trigger_bound(L: float, gamma: float, s: float, w_mu: float) -> float:
    """Bound on the expected number of steps with ``V*_xi <= -1``."""
    BoundInputs(gamma=gamma, L=L, w_mu=w_mu, s=s)
    return L * (s + 1 / (1 - gamma)) * _log_inv(w_mu)


def capability_terms(T: float, gamma: float, L: float, epsilon: float, w_mu: float) -> tuple:
    BoundInputs(gamma=gamma, L=L, w_mu=w_mu, epsilon=epsilon, T=T)
    lw = _log_inv(w_mu)
    t23 = T ** (2 / 3)
    return (
        t23 * math.log(T) / (4 * (1 - gamma)),
        12 * (L + 1) ** 2 / (1 - gamma) ** 2 * T ** (1 / 3),
        8 * L * (L + 1) ** 2 / (1 - gamma) ** 3 * lw,
        4 * (L + 2) ** 2 / epsilon**2 * t23 * lw,
        6 * (L + 1) ** 2 * t23,
    )


def capability_bound(T: float, gamma: float, L: float, epsilon: float, w_mu: float) -> float:
    """Bound on the expected summed squared shortfall against the best mentor."""
    return math.fsum(capability_terms(T, gamma, L, epsilon, w_mu))


def rollout_step_bound(T: float, gamma: float) -> float:
    """Bound on the expected number of steps spent in random mentor rollouts."""
    BoundInputs(gamma=gamma, T=T)
    return T ** (2 / 3) * math.log(T) / (4 * (1 - gamma))


def safety_threshold(L: float, interleaver_bits: int) -> float:
    """Stopping-mass level at or above which the optimizer never acts.

    A value above 1 means no history reaches it: no guarantee at this ``L``.
    """
    if L < 0:
        raise DomainError("L must be >= 0")
    if interleaver_bits < 0:
        raise DomainError("interleaver_bits must be >= 0")
    return 2.0 ** (interleaver_bits + 1) / (L + 1)


def threshold_is_vacuous(L: float, interleaver_bits: int) -> bool:
    return safety_threshold(L, interleaver_bits) > 1


def corollary_threshold(K_E_bits: int, C_bits: int) -> float:
    """Smallest ``L`` for which the optimizer never causes a first occurrence."""
    if K_E_bits < 0 or C_bits < 0:
        raise DomainError("bit counts must be >= 0")
    return 2.0 ** (K_E_bits + C_bits)
