"""Sticky HDP transition machinery under the weak-limit truncation.

The global weights ``beta`` live on an ``L``-simplex and each row of
``pi`` is Dirichlet around ``alpha * beta`` with ``kappa`` extra mass on its
own diagonal. Resampling ``beta`` needs the restaurant-franchise auxiliaries:

* ``n[j, k]``   transitions j -> k in the mode sequence,
* ``m[j, k]``   tables serving dish k in restaurant j,
* ``w[j]``      tables in restaurant j whose dish was set by the sticky override,
* ``m_bar``     ``m`` with the overrides removed from the diagonal.

Hyperparameters are resampled with auxiliary-variable updates:

* ``gamma`` | m_bar: Escobar-West, with ``sum(m_bar)`` tables and the number
  of dishes that have at least one informative table;
* ``alpha + kappa`` | n, m: the multi-restaurant scheme of Teh et al., one
  ``Beta(c0 + 1, n_j)`` / ``Bernoulli(n_j / (n_j + c0))`` pair per visited row;
* ``rho`` | w, m: ``Beta(c + sum(w), d + sum(m) - sum(w))``.

With no data every update returns a draw from its prior.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ValidationError
from .stats import sample_beta, sample_dirichlet, sample_gamma


@dataclass(frozen=True)
class HdpParams:
    gamma: float
    alpha: float
    kappa: float
    rho: float
    L: int

    def __post_init__(self):
        if self.L < 1:
            raise ParameterError("truncation L must be >= 1")
        if self.gamma <= 0 or self.alpha < 0 or self.kappa < 0:
            raise ParameterError("need gamma > 0, alpha >= 0, kappa >= 0")
        if not 0.0 <= self.rho <= 1.0:
            raise ParameterError("rho must lie in [0, 1]")
        if self.alpha + self.kappa <= 0:
            raise ParameterError("alpha + kappa must be positive")

    @classmethod
    def from_concentrations(cls, gamma, alpha_plus_kappa, rho, L):
        """Split ``alpha + kappa`` by the sticky fraction ``rho``."""
        rho = float(rho)
        return cls(
            gamma=float(gamma),
            alpha=(1.0 - rho) * float(alpha_plus_kappa),
            kappa=rho * float(alpha_plus_kappa),
            rho=rho,
            L=int(L),
        )

    @property
    def alpha_plus_kappa(self):
        return self.alpha + self.kappa


@dataclass(frozen=True)
class HyperPriors:
    """Gamma(a, b) on alpha + kappa, Beta(c, d) on rho, Gamma(e, f) on gamma (rates)."""

    a: float = 10.0
    b: float = 1.0
    c: float = 20.0
    d: float = 2.0
    e: float = 10.0
    f: float = 1.0

    def __post_init__(self):
        for name in "abcdef":
            if not getattr(self, name) > 0:
                raise ParameterError(f"prior parameter {name} must be positive")


@dataclass
class TransitionModel:
    beta: np.ndarray
    pi: np.ndarray

    @property
    def L(self):
        return len(self.beta)


@dataclass
class TransitionStats:
    n: np.ndarray
    m: np.ndarray
    w: np.ndarray
    m_bar: np.ndarray


def sample_hyperpriors(priors, L, rng, sticky=True):
    """Draw ``HdpParams`` from the hyperpriors (rho and kappa pinned to 0 if not sticky)."""
    apk = sample_gamma(priors.a, priors.b, rng)
    rho = sample_beta(priors.c, priors.d, rng) if sticky else 0.0
    gamma = sample_gamma(priors.e, priors.f, rng)
    return HdpParams.from_concentrations(gamma, apk, rho, L)


def init_beta(hp, rng):
    return sample_dirichlet(np.full(hp.L, hp.gamma / hp.L), rng)


def _row_concentration(beta, alpha, kappa):
    conc = alpha * np.broadcast_to(beta, (len(beta), len(beta))).copy()
    conc[np.diag_indices(len(beta))] += kappa
    return conc


def init_transition_model(hp, rng):
    beta = init_beta(hp, rng)
    pi = sample_dirichlet(_positive(_row_concentration(beta, hp.alpha, hp.kappa)), rng)
    return TransitionModel(beta=beta, pi=pi)


def _positive(conc):
    # beta entries can underflow to exactly 0; a Dirichlet shape of 0 is a
    # point mass at 0, which the smallest normal float reproduces
    return np.maximum(conc, np.finfo(float).tiny)


def count_transitions(z, L):
    z = np.asarray(z)
    if z.ndim != 1 or np.any(z < 0) or np.any(z >= L):
        raise ValidationError(f"mode labels must lie in [0, {L})")
    n = np.zeros((L, L), dtype=np.int64)
    np.add.at(n, (z[:-1], z[1:]), 1)
    return n


def sample_table_counts(n, beta, alpha, kappa, rng):
    """Tables opened when ``n[j, k]`` customers are seated one at a time.

    Customer ``i`` (1-based) opens a new table with probability
    ``c / (i - 1 + c)`` where ``c = alpha * beta[k] + kappa * [j == k]``.
    """
    n = np.asarray(n, dtype=np.int64)
    if np.any(n < 0):
        raise ValidationError("transition counts must be nonnegative")
    conc = _row_concentration(np.asarray(beta, dtype=float), alpha, kappa)
    m = np.zeros_like(n)
    rows, cols = np.nonzero(n)
    if len(rows) == 0:
        return m
    counts = n[rows, cols]
    owner = np.repeat(np.arange(len(rows)), counts)
    # seat index within each (j, k) restaurant-dish pair, 0-based
    seat = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    c = conc[rows, cols][owner]
    with np.errstate(invalid="ignore", divide="ignore"):
        p_new = np.where(seat == 0, 1.0, c / (seat + c))
    opened = rng.random(len(seat)) < p_new
    m[rows, cols] = np.bincount(owner, weights=opened, minlength=len(rows)).astype(np.int64)
    return m


def sample_overrides(m, rho, beta, rng):
    """Override counts ``w_j ~ Bin(m_jj, rho / (rho + beta_j (1 - rho)))``."""
    if not 0.0 <= rho <= 1.0:
        raise ParameterError("rho must lie in [0, 1]")
    m = np.asarray(m, dtype=np.int64)
    diag = np.diag(m).copy()
    if rho == 0.0:
        w = np.zeros_like(diag)
    else:
        p = rho / (rho + np.asarray(beta) * (1.0 - rho))
        w = rng.binomial(diag, np.clip(p, 0.0, 1.0)).astype(np.int64)
    m_bar = m.copy()
    m_bar[np.diag_indices(len(diag))] -= w
    return w, m_bar


def sample_global_beta(m_bar, gamma, L, rng):
    m_bar = np.asarray(m_bar)
    if np.any(m_bar < 0):
        raise ValidationError("informative table counts must be nonnegative")
    return sample_dirichlet(gamma / L + m_bar.sum(axis=0), rng)


def sample_transition_rows(beta, n, alpha, kappa, rng):
    if alpha + kappa <= 0:
        raise ParameterError("alpha + kappa must be positive")
    conc = _row_concentration(np.asarray(beta, dtype=float), alpha, kappa) + np.asarray(n)
    return sample_dirichlet(_positive(conc), rng)


def sample_transition_stats(z, transition, hp, rng):
    """Counts, tables and overrides for the current mode sequence."""
    n = count_transitions(z, hp.L)
    m = sample_table_counts(n, transition.beta, hp.alpha, hp.kappa, rng)
    w, m_bar = sample_overrides(m, hp.rho, transition.beta, rng)
    return TransitionStats(n=n, m=m, w=w, m_bar=m_bar)


def _escobar_west(value, n_items, n_clusters, shape, rate, rng):
    """One auxiliary-variable update for a DP concentration under Gamma(shape, rate)."""
    if n_items == 0:
        return sample_gamma(shape, rate, rng)
    eta = rng.beta(value + 1.0, n_items)
    rate_post = rate - np.log(eta)
    shape_post = shape + n_clusters - 1.0
    odds = shape_post / (n_items * rate_post)
    if rng.random() < odds / (1.0 + odds):
        shape_post += 1.0
    return sample_gamma(shape_post, rate_post, rng)


def _multi_restaurant(value, customers, tables, shape, rate, rng):
    """Concentration shared by several restaurants (Teh et al. auxiliary scheme)."""
    customers = customers[customers > 0]
    if customers.size == 0:
        return sample_gamma(shape, rate, rng)
    log_w = np.log(rng.beta(value + 1.0, customers))
    s = rng.random(customers.size) < customers / (customers + value)
    return sample_gamma(shape + tables - s.sum(), rate - log_w.sum(), rng)


def sample_hyperparameters(stats, hp, priors, rng, sticky=True, n_aux=5):
    """Resample ``gamma``, ``alpha + kappa`` and ``rho`` given the auxiliaries.

    ``n_aux`` auxiliary iterations are run for each concentration; ``rho``
    stays at 0 when ``sticky`` is false.
    """
    m_bar_total = int(stats.m_bar.sum())
    dishes = int(np.count_nonzero(stats.m_bar.sum(axis=0)))
    gamma = hp.gamma
    for _ in range(n_aux):
        gamma = _escobar_west(gamma, m_bar_total, dishes, priors.e, priors.f, rng)

    customers = stats.n.sum(axis=1)
    tables = int(stats.m.sum())
    apk = hp.alpha_plus_kappa
    for _ in range(n_aux):
        apk = _multi_restaurant(apk, customers, tables, priors.a, priors.b, rng)

    if sticky:
        overrides = int(stats.w.sum())
        rho = sample_beta(priors.c + overrides, priors.d + tables - overrides, rng)
    else:
        rho = 0.0
    return HdpParams.from_concentrations(gamma, apk, rho, hp.L)


def expected_self_transition(hp, beta):
    """Prior mean of each ``pi_jj`` given ``beta``: ``(alpha beta_j + kappa) / (alpha + kappa)``."""
    return (hp.alpha * np.asarray(beta) + hp.kappa) / hp.alpha_plus_kappa
