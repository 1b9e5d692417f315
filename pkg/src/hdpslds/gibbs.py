"""Gibbs sampler for the sticky HDP switching linear dynamical system.

One sweep runs, in order:

1. sequential resampling of each ``z[t]`` with the states marginalised,
2. block resampling of ``x`` given ``z``,
3. block resampling of ``z`` given ``x``,
4. ``beta`` and the transition rows ``pi``,
5. the concentration hyperparameters (optional),
6. the per-mode dynamics ``(A, Sigma)``.

The first mode has no predecessor and is drawn with ``beta`` as its prior.
"""

import time
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import multigammaln

from .dynamics import DynParams, MniwPrior, sample_dynamics_all, sample_prior_dynamics
from .errors import NotPositiveDefiniteError, ParameterError, SamplerError, ValidationError
from .hdp import (
    HdpParams,
    HyperPriors,
    TransitionModel,
    init_transition_model,
    sample_global_beta,
    sample_hyperparameters,
    sample_hyperpriors,
    sample_transition_rows,
    sample_transition_stats,
)
from .messages import (
    LOG_2PI,
    ObsModel,
    StatePrior,
    backward_info_messages,
    gaussian_logpdf,
    hmm_backward_messages,
    initial_filter_message,
    local_likelihood_params,
    log_transitions,
    mode_log_likelihoods,
    mode_marginal_likelihood,
)
from .stats import sample_categorical, sample_categorical_log, sample_mvn_info, symmetrize


@dataclass(frozen=True)
class SamplerSettings:
    priors: HyperPriors = field(default_factory=HyperPriors)
    sticky: bool = True
    resample_hyperparameters: bool = True


@dataclass
class ModelState:
    z: np.ndarray
    x: np.ndarray
    dynamics: DynParams
    transition: TransitionModel
    hp: HdpParams
    obs: ObsModel
    mniw: MniwPrior
    x0: StatePrior
    settings: SamplerSettings = field(default_factory=SamplerSettings)

    @property
    def T(self):
        return len(self.z)

    @property
    def L(self):
        return self.hp.L

    def check(self):
        """Raise ``ValidationError`` if dimensions or simplex constraints disagree."""
        T, L, D = self.T, self.L, self.obs.state_dim
        problems = []
        if self.x.shape != (T, D):
            problems.append(f"x has shape {self.x.shape}, expected {(T, D)}")
        if self.z.min() < 0 or self.z.max() >= L:
            problems.append("z has labels outside [0, L)")
        if self.dynamics.A.shape != (L, D, D) or self.dynamics.Sigma.shape != (L, D, D):
            problems.append("dynamics do not cover L modes of dimension D")
        if self.transition.pi.shape != (L, L) or self.transition.beta.shape != (L,):
            problems.append("transition model does not have L modes")
        for name, arr in (("beta", self.transition.beta), ("pi", self.transition.pi)):
            if np.any(arr < 0) or np.any(np.abs(arr.sum(-1) - 1.0) > 1e-12):
                problems.append(f"{name} is not a simplex")
        if np.any(np.linalg.eigvalsh(self.dynamics.Sigma)[:, 0] <= 0):
            problems.append("some Sigma is not positive definite")
        if problems:
            raise ValidationError("; ".join(problems))


@dataclass
class ChainResult:
    samples: list
    log_joint_trace: np.ndarray
    best: ModelState
    best_index: int
    config_echo: dict
    timings: dict = field(default_factory=dict)


def check_observations(y):
    y = np.asarray(y, dtype=float)
    if y.ndim != 2 or y.shape[1] == 0:
        raise ValidationError(f"observations must be a (T, D) array with D >= 1, got shape {y.shape}")
    if y.shape[0] < 2:
        raise ValidationError("need at least two time steps")
    if not np.all(np.isfinite(y)):
        raise ValidationError("observations contain NaN or Inf")
    return y


def initialize(y, config, rng):
    """Initial state drawn from the priors; states start at ``C^+ y``."""
    y = check_observations(y)
    obs = config.obs_model(y.shape[1])
    mniw = config.mniw_prior(obs.state_dim)
    settings = SamplerSettings(config.priors, config.sticky, config.resample_hyperparameters)
    hp = sample_hyperpriors(config.priors, config.L, rng, sticky=config.sticky)
    transition = init_transition_model(hp, rng)
    z = np.empty(len(y), dtype=np.int64)
    z[0] = sample_categorical(transition.beta, rng)
    for t in range(1, len(y)):
        z[t] = sample_categorical(transition.pi[z[t - 1]], rng)
    return ModelState(
        z=z,
        x=obs.to_states(y),
        dynamics=sample_prior_dynamics(mniw, config.L, rng),
        transition=transition,
        hp=hp,
        obs=obs,
        mniw=mniw,
        x0=config.state_prior(y, obs),
        settings=settings,
    )


def sequential_sample_modes(state, y, rng, return_weights=False):
    """Resample each ``z[t]`` in turn from ``p(z[t] | z[-t], y)`` with ``x`` integrated out.

    The backward messages are computed once from the incoming sequence: the
    message at ``t`` depends only on ``z[t+1:]``, which is still untouched
    when ``z[t]`` is drawn. The forward filter is advanced with each new
    draw. With ``return_weights`` the normalised weights for every ``t`` are
    returned as well.
    """
    y = np.asarray(y, dtype=float)
    z = state.z.copy()
    T = len(z)
    log_pi = log_transitions(state.transition.pi)
    back = backward_info_messages(y, z, state.dynamics, state.obs)
    weights = []

    logw = np.log(state.transition.beta)
    if T > 1:
        logw = logw + log_pi[:, z[1]]
    z[0] = _draw(logw, rng, weights, return_weights)
    msg = initial_filter_message(y[0], state.x0, state.obs)
    for t in range(1, T):
        params = local_likelihood_params(msg, y[t], state.dynamics, state.obs)
        logw = log_pi[z[t - 1]] + mode_marginal_likelihood(params, back.pred[t])
        if t < T - 1:
            logw = logw + log_pi[:, z[t + 1]]
        z[t] = _draw(logw, rng, weights, return_weights)
        msg = params[z[t]]
    if return_weights:
        return z, np.array(weights)
    return z


def _draw(logw, rng, weights, keep):
    with np.errstate(invalid="ignore"):
        if keep:
            w = np.exp(logw - logw.max())
            weights.append(w / w.sum())
    return sample_categorical_log(logw, rng)


def block_sample_states(state, y, rng):
    """Draw ``x`` jointly from ``p(x | y, z, theta)`` by forward sampling on backward messages."""
    y = np.asarray(y, dtype=float)
    back = backward_info_messages(y, state.z, state.dynamics, state.obs).post
    A, Sigma = state.dynamics.A, state.dynamics.Sigma
    prec = symmetrize(np.linalg.inv(Sigma))
    prior_prec = np.linalg.inv(state.x0.cov)
    x = np.empty_like(state.x)
    lam = prior_prec + back.lam[0]
    theta = prior_prec @ state.x0.mean + back.theta[0]
    for t in range(len(x)):
        if t > 0:
            k = state.z[t]
            lam = prec[k] + back.lam[t]
            theta = prec[k] @ (A[k] @ x[t - 1]) + back.theta[t]
        try:
            x[t] = sample_mvn_info(theta, lam, rng)
        except NotPositiveDefiniteError as exc:
            raise NotPositiveDefiniteError(f"state posterior precision at t={t}", str(exc)) from None
    return x


def block_sample_modes(state, rng, loglik=None):
    """Draw ``z`` jointly from ``p(z | x, pi, beta, theta)``."""
    if loglik is None:
        loglik = mode_log_likelihoods(state.x, state.dynamics)
    log_pi = log_transitions(state.transition.pi)
    msgs = hmm_backward_messages(state.x, state.transition, state.dynamics, loglik).log_values
    z = np.empty(state.T, dtype=np.int64)
    z[0] = sample_categorical_log(np.log(state.transition.beta) + loglik[0] + msgs[0], rng)
    for t in range(1, state.T):
        z[t] = sample_categorical_log(log_pi[z[t - 1]] + loglik[t] + msgs[t], rng)
    return z


def _mniw_log_prior(dynamics, prior):
    D = prior.dim
    nu, S0 = prior.n0, prior.S0
    _, logdet_S0 = np.linalg.slogdet(S0)
    _, logdet_K = np.linalg.slogdet(prior.K)
    _, logdet_sigma = np.linalg.slogdet(dynamics.Sigma)
    sigma_inv = np.linalg.inv(dynamics.Sigma)
    log_iw = (
        0.5 * nu * logdet_S0
        - 0.5 * nu * D * np.log(2.0)
        - multigammaln(0.5 * nu, D)
        - 0.5 * (nu + D + 1) * logdet_sigma
        - 0.5 * np.einsum("ij,kji->k", S0, sigma_inv)
    )
    # A | Sigma ~ MN(M, Sigma, K^-1)
    diff = dynamics.A - prior.M
    quad = np.einsum("kji,kjl,klm,mi->k", diff, sigma_inv, diff, prior.K)
    log_mn = -0.5 * (D * D * LOG_2PI - D * logdet_K + D * logdet_sigma + quad)
    return log_iw + log_mn


def log_joint(state, y):
    """``log p(y, x, z, theta | pi, beta)`` up to a state-independent constant.

    Sums the observation, initial-state, dynamics and mode-sequence terms
    with the MNIW prior density of every mode's ``(A, Sigma)``. The
    Dirichlet densities of ``beta`` and ``pi`` are left out: at
    concentrations below one they are unbounded near the simplex boundary
    and would swamp the comparison between samples.
    """
    y = np.asarray(y, dtype=float)
    z, x = state.z, state.x
    total = state.obs.log_likelihood(y, x).sum()
    total += gaussian_logpdf(x[0] - state.x0.mean, state.x0.cov)
    if state.T > 1:
        k = z[1:]
        resid = x[1:] - np.einsum("tij,tj->ti", state.dynamics.A[k], x[:-1])
        total += gaussian_logpdf(resid, state.dynamics.Sigma[k]).sum()
    with np.errstate(divide="ignore"):
        total += np.log(state.transition.beta[z[0]])
        total += log_transitions(state.transition.pi)[z[:-1], z[1:]].sum()
    total += _mniw_log_prior(state.dynamics, state.mniw).sum()
    return float(total) if not np.isnan(total) else -np.inf


def sample_transitions(state, rng):
    """Steps 4 and 5: ``beta``, ``pi`` and (optionally) the hyperparameters."""
    hp = state.hp
    stats = sample_transition_stats(state.z, state.transition, hp, rng)
    beta = sample_global_beta(stats.m_bar, hp.gamma, hp.L, rng)
    pi = sample_transition_rows(beta, stats.n, hp.alpha, hp.kappa, rng)
    if state.settings.resample_hyperparameters:
        hp = sample_hyperparameters(stats, hp, state.settings.priors, rng, sticky=state.settings.sticky)
    return TransitionModel(beta=beta, pi=pi), hp, stats


def sweep(state, y, rng, timings=None):
    """One full Gibbs sweep; returns a new state and leaves ``state`` untouched."""
    timings = {} if timings is None else timings

    def step(name, fn):
        start = time.perf_counter()
        try:
            return fn()
        except (np.linalg.LinAlgError, ParameterError, FloatingPointError, ValueError) as exc:
            raise SamplerError(name, exc) from exc
        finally:
            timings[name] = timings.get(name, 0.0) + time.perf_counter() - start

    new = replace(state)
    new.z = step("sequential_modes", lambda: sequential_sample_modes(new, y, rng))
    new.x = step("block_states", lambda: block_sample_states(new, y, rng))
    new.z = step("block_modes", lambda: block_sample_modes(new, rng))
    new.transition, hp, _ = step("transitions", lambda: sample_transitions(new, rng))
    new.hp = hp
    new.dynamics = step(
        "dynamics", lambda: sample_dynamics_all(new.x, new.z, new.mniw, new.L, rng)
    )
    return new


def run_chain(y, config, rng):
    """Run ``config.iterations`` sweeps and keep the best of the final window.

    The trace has ``iterations + 1`` entries (index 0 is the initial state).
    Retained samples are every ``thin``-th sweep plus the final window.
    """
    y = check_observations(y)
    timings = {}
    start = time.perf_counter()
    state = initialize(y, config, rng)
    timings["initialize"] = time.perf_counter() - start

    window = min(config.select_window, config.iterations + 1)
    trace = [log_joint(state, y)]
    recent = deque([(0, state, trace[0])], maxlen=window)
    thinned = []
    for i in range(1, config.iterations + 1):
        try:
            state = sweep(state, y, rng, timings)
        except SamplerError as exc:
            raise SamplerError(exc.step, exc.cause, sweep=i) from exc
        trace.append(log_joint(state, y))
        recent.append((i, state, trace[-1]))
        if config.thin and i % config.thin == 0:
            thinned.append((i, state))

    best_index, best, _ = max(recent, key=lambda item: item[2])
    kept = {i: s for i, s in thinned}
    kept.update({i: s for i, s, _ in recent})
    timings["total"] = time.perf_counter() - start
    return ChainResult(
        samples=[kept[i] for i in sorted(kept)],
        log_joint_trace=np.array(trace),
        best=best,
        best_index=best_index,
        config_echo=config.to_flat(),
        timings=timings,
    )
