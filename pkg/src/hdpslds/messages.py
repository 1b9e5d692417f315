"""Gaussian and discrete message passing over a switching linear system.

Model (0-based time, states and observations stored row-wise)::

    x[0] ~ N(mu0, Sigma0)
    x[t] = A[z[t]] x[t-1] + e[t],   e[t] ~ N(0, Sigma[z[t]])   for t >= 1
    y[t] = C x[t] + w[t],           w[t] ~ N(0, R)

Gaussian messages are kept in information form ``(lam, theta)``; a message
may also carry ``log_mass`` so that it stands for the function
``exp(log_mass) * N(x; lam^-1 theta, lam^-1)``.

The backward filter returns two families per time step:

* ``pred[t]``  -- ``p(y[t+1:] | x[t], z[t+1:])``, exactly zero at the end;
* ``post[t]``  -- ``pred[t]`` combined with the local observation ``y[t]``.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np
from scipy.special import logsumexp

from . import _linalg as _la
from .errors import NotPositiveDefiniteError, ValidationError
from .stats import cholesky, symmetrize

LOG_2PI = np.log(2.0 * np.pi)
_JITTER = 1e-10
_MIN_EIG = 1e-12


@dataclass(frozen=True)
class ObsModel:
    C: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        if self.C.ndim != 2 or self.R.shape != (self.C.shape[0], self.C.shape[0]):
            raise ValidationError("C must be (Dy, D) and R must be (Dy, Dy)")
        cholesky(self.R, "R")

    @classmethod
    def identity(cls, dim, noise=1e-4):
        return cls(C=np.eye(dim), R=noise * np.eye(dim))

    @property
    def state_dim(self):
        return self.C.shape[1]

    @cached_property
    def _Rinv(self):
        return np.linalg.inv(self.R)

    @cached_property
    def info_matrix(self):
        """``C^T R^-1 C``: precision contributed by one observation."""
        return symmetrize(self.C.T @ self._Rinv @ self.C)

    def info_vector(self, y):
        """``C^T R^-1 y`` (``y`` may be a stack of rows)."""
        return np.asarray(y) @ (self._Rinv @ self.C)

    def log_likelihood(self, y, x):
        """Per-row ``log N(y[t]; C x[t], R)``."""
        return gaussian_logpdf(np.asarray(y) - np.asarray(x) @ self.C.T, self.R)

    def to_states(self, y):
        """Map observations into state space through the pseudo-inverse of C."""
        return np.asarray(y) @ np.linalg.pinv(self.C).T


@dataclass(frozen=True)
class StatePrior:
    mean: np.ndarray
    cov: np.ndarray

    @classmethod
    def from_first_observation(cls, y, obs):
        """Default prior on ``x[0]``: centred on ``C^+ y[0]`` with covariance ``C^+ R C^+T``."""
        pinv = np.linalg.pinv(obs.C)
        cov = symmetrize(pinv @ obs.R @ pinv.T)
        if np.linalg.eigvalsh(cov).min() <= 0:
            cov = cov + np.eye(obs.state_dim)
        return cls(mean=pinv @ np.asarray(y)[0], cov=cov)


@dataclass
class InfoMessage:
    lam: np.ndarray
    theta: np.ndarray
    log_mass: np.ndarray | float = 0.0

    def __getitem__(self, idx):
        mass = self.log_mass if np.ndim(self.log_mass) == 0 else self.log_mass[idx]
        return InfoMessage(self.lam[idx], self.theta[idx], mass)

    def __len__(self):
        return self.theta.shape[0]

    def mean(self):
        return _la.matvec(_la.inv(self.lam), self.theta)

    def cov(self):
        return symmetrize(_la.inv(self.lam))


class BackwardMessages(NamedTuple):
    pred: InfoMessage
    post: InfoMessage


@dataclass
class DiscreteMessages:
    """Row-normalised backward messages; ``log_values[t]`` is the message into ``z[t]``."""

    log_values: np.ndarray

    @property
    def values(self):
        return np.exp(self.log_values)


def gaussian_logpdf(resid, cov):
    """``log N(resid; 0, cov)`` for a stack of residual rows (``cov`` may be batched)."""
    resid = np.asarray(resid, dtype=float)
    dim = resid.shape[-1]
    if dim <= 2:
        return -0.5 * (_la.quad(resid, _la.inv(cov)) + _la.logdet(cov) + dim * LOG_2PI)
    chol = np.linalg.cholesky(cov)
    sol = np.linalg.solve(chol, resid[..., None])[..., 0]
    logdet = 2.0 * np.log(np.diagonal(chol, axis1=-2, axis2=-1)).sum(-1)
    return -0.5 * ((sol**2).sum(-1) + logdet + dim * LOG_2PI)


def regularize(lam):
    """Add a small ridge to information matrices whose smallest eigenvalue is ~0."""
    lam = symmetrize(lam)
    low = np.linalg.eigvalsh(lam)[..., 0] < _MIN_EIG
    if np.any(low):
        lam = lam + np.where(low[..., None, None], _JITTER * np.eye(lam.shape[-1]), 0.0)
    return lam


def _ensure_invertible(lam):
    # the cheap determinant test screens out the common, well-conditioned case
    logdet = _la.logdet(lam)
    if np.all(logdet > np.log(_MIN_EIG) * lam.shape[-1]):
        return lam, logdet
    lam = regularize(lam)
    return lam, _la.logdet(lam)


def _min_eig(lam):
    if lam.shape[-1] == 1:
        return lam[0, 0]
    if lam.shape[-1] == 2:
        half = 0.5 * (lam[0, 0] + lam[1, 1])
        return half - np.sqrt(max(half * half - _la.det(lam), 0.0))
    return np.linalg.eigvalsh(lam)[0]


def _check_psd(lam, t):
    if _min_eig(lam) < -1e-10 * max(1.0, np.abs(lam).max()):
        raise NotPositiveDefiniteError(f"information matrix at t={t}")


def _check_inputs(y, z, dynamics, obs):
    y = np.asarray(y, dtype=float)
    z = np.asarray(z)
    if y.ndim != 2 or y.shape[1] != obs.C.shape[0]:
        raise ValidationError(f"observations must be (T, {obs.C.shape[0]}), got {y.shape}")
    if z.shape != (y.shape[0],):
        raise ValidationError("mode sequence must align with observations")
    if z.size and (z.min() < 0 or z.max() >= len(dynamics)):
        raise ValidationError("mode sequence references missing dynamics")
    return y, z


def propagate_backward(lam, theta, A, Sigma):
    """Push ``exp(-x'lam x / 2 + theta'x)`` on ``x[t]`` back onto ``x[t-1]``.

    Uses ``(I + lam Sigma)^-1`` so that a zero (or singular) ``lam`` needs no
    inversion.
    """
    dim = lam.shape[-1]
    gain = np.linalg.solve(np.eye(dim) + lam @ Sigma, np.concatenate([lam @ A, theta[:, None]], axis=1))
    return symmetrize(A.T @ gain[:, :dim]), A.T @ gain[:, dim]


def backward_info_messages(y, z, dynamics, obs):
    y, z = _check_inputs(y, z, dynamics, obs)
    T, dim = len(y), obs.state_dim
    J = obs.info_matrix
    h = obs.info_vector(y)
    pred_lam = np.zeros((T, dim, dim))
    pred_theta = np.zeros((T, dim))
    post_lam = np.empty((T, dim, dim))
    post_theta = np.empty((T, dim))
    for t in range(T - 1, -1, -1):
        post_lam[t] = pred_lam[t] + J
        post_theta[t] = pred_theta[t] + h[t]
        if t > 0:
            k = z[t]
            pred_lam[t - 1], pred_theta[t - 1] = propagate_backward(
                post_lam[t], post_theta[t], dynamics.A[k], dynamics.Sigma[k]
            )
            _check_psd(pred_lam[t - 1], t - 1)
    return BackwardMessages(InfoMessage(pred_lam, pred_theta), InfoMessage(post_lam, post_theta))


def initial_filter_message(y0, prior, obs):
    """Prior on ``x[0]`` updated by ``y[0]``, with ``log_mass = log p(y[0])``."""
    S = obs.C @ prior.cov @ obs.C.T + obs.R
    log_mass = gaussian_logpdf(np.asarray(y0) - obs.C @ prior.mean, S)
    prior_prec = np.linalg.inv(prior.cov)
    lam = symmetrize(prior_prec + obs.info_matrix)
    theta = prior_prec @ prior.mean + obs.info_vector(y0)
    return InfoMessage(lam, theta, log_mass)


def local_likelihood_params(forward_msg, y_t, dynamics, obs):
    """Information parameters of ``int p(y_t | x_t) p(x_t | x_{t-1}, k) F(x_{t-1}) dx_{t-1}``.

    ``forward_msg`` is the normalised filter density of ``x[t-1]``. ``dynamics``
    may be a single mode or a stack; the result is batched the same way. The
    returned ``log_mass`` is the predictive log likelihood of ``y_t`` under
    each mode, and ``(lam, theta)`` describe the filtered density of ``x[t]``.
    """
    P = _la.inv(forward_msg.lam)
    m = P @ forward_msg.theta
    A, Sigma = dynamics.A, dynamics.Sigma
    mu_pred = _la.matvec(A, m)
    P_pred = symmetrize(A @ P @ np.swapaxes(A, -1, -2) + Sigma)
    S = obs.C @ P_pred @ obs.C.T + obs.R
    log_mass = gaussian_logpdf(np.asarray(y_t) - mu_pred @ obs.C.T, S)
    prec_pred = symmetrize(_la.inv(P_pred))
    lam = prec_pred + obs.info_matrix
    theta = _la.matvec(prec_pred, mu_pred) + obs.info_vector(y_t)
    return InfoMessage(lam, theta, log_mass)


def mode_marginal_likelihood(params, backward_pred):
    """Log ``f_k``: mass of ``params`` times the backward message, integrated over ``x_t``.

    ``backward_pred`` must exclude ``y_t`` (it already sits in ``params``).
    Returns, up to a constant shared by every mode,

        log_mass + log|lam|/2 - log|lam + lam_b|/2
        + (theta + theta_b)' (lam + lam_b)^-1 (theta + theta_b) / 2
        - theta' lam^-1 theta / 2
    """
    lam, logdet = _ensure_invertible(params.lam)
    tot_lam, logdet_tot = _ensure_invertible(lam + backward_pred.lam)
    tot_theta = params.theta + backward_pred.theta
    quad_tot = _la.quad(tot_theta, _la.inv(tot_lam))
    quad = _la.quad(params.theta, _la.inv(lam))
    return params.log_mass + 0.5 * (logdet - logdet_tot + quad_tot - quad)


def forward_info_messages(y, z, dynamics, obs, prior=None):
    """Filtered densities of ``x[t]`` given ``y[:t+1]`` and ``z[:t+1]``.

    ``log_mass[t]`` holds the one-step predictive log likelihood of ``y[t]``,
    so its sum is the log marginal likelihood of the whole sequence.
    """
    y, z = _check_inputs(y, z, dynamics, obs)
    if prior is None:
        prior = StatePrior.from_first_observation(y, obs)
    T, dim = len(y), obs.state_dim
    lam = np.empty((T, dim, dim))
    theta = np.empty((T, dim))
    mass = np.empty(T)
    msg = initial_filter_message(y[0], prior, obs)
    for t in range(T):
        if t > 0:
            msg = local_likelihood_params(msg, y[t], dynamics[z[t]], obs)
        lam[t], theta[t], mass[t] = msg.lam, msg.theta, msg.log_mass
    return InfoMessage(lam, theta, mass)


def mode_log_likelihoods(x, dynamics):
    """``out[t, k] = log N(x[t]; A_k x[t-1], Sigma_k)`` for ``t >= 1``; row 0 is zero."""
    x = np.asarray(x, dtype=float)
    T = len(x)
    out = np.zeros((T, len(dynamics)))
    if T > 1:
        resid = x[1:, None, :] - np.einsum("kij,tj->tki", dynamics.A, x[:-1])
        out[1:] = gaussian_logpdf(resid, dynamics.Sigma)
    return out


def log_transitions(pi):
    with np.errstate(divide="ignore"):
        return np.log(pi)


def hmm_backward_messages(x, transition, dynamics, loglik=None):
    """Log-space backward messages for block-sampling the mode sequence.

    ``log_values[t, j]`` is proportional to ``p(x[t+1:] | z[t] = j)``; the final
    row is uniform. Each row is normalised to sum to one. The recursion runs
    on max-scaled probabilities and drops to an explicit log-sum-exp only
    for steps where every scaled entry underflows.
    """
    if loglik is None:
        loglik = mode_log_likelihoods(x, dynamics)
    pi = np.asarray(transition.pi)
    log_pi = None
    T, L = loglik.shape
    out = np.empty((T, L))
    out[T - 1] = -np.log(L)
    with np.errstate(divide="ignore"):
        for t in range(T - 1, 0, -1):
            a = loglik[t] + out[t]
            v = pi @ np.exp(a - a.max())
            total = v.sum()
            if total > 0 and np.all(np.isfinite(v)):
                out[t - 1] = np.log(v / total)
            else:
                if log_pi is None:
                    log_pi = log_transitions(pi)
                row = logsumexp(log_pi + a[None, :], axis=1)
                out[t - 1] = row - logsumexp(row)
    return DiscreteMessages(out)
