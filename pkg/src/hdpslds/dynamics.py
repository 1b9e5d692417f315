"""Per-mode linear dynamics under a matrix-normal inverse-Wishart prior.

For mode ``k`` collect the transition pairs ``(x[t-1], x[t])`` with
``z[t] == k`` as columns of ``Xbar`` and ``X``. With prior
``A | Sigma ~ MN(M, Sigma, K^-1)`` and ``Sigma ~ IW(n0, S0)``:

    S_xbarxbar = Xbar Xbar^T + K
    S_xxbar    = X Xbar^T + M K
    S_xx       = X X^T + M K M^T
    Sigma | data     ~ IW(N + n0, S_xx - S_xxbar S_xbarxbar^-1 S_xxbar^T + S0)
    A | Sigma, data  ~ MN(S_xxbar S_xbarxbar^-1, Sigma, S_xbarxbar^-1)

States are stored row-wise: ``x`` has shape ``(T, D)``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .stats import cholesky, sample_inverse_wishart, sample_matrix_normal, symmetrize


@dataclass(frozen=True)
class MniwPrior:
    M: np.ndarray
    K: np.ndarray
    n0: float
    S0: np.ndarray

    def __post_init__(self):
        dim = self.M.shape[0]
        if self.M.shape != (dim, dim) or self.K.shape != (dim, dim) or self.S0.shape != (dim, dim):
            raise ValidationError("MNIW prior matrices must all be D x D")
        cholesky(self.K, "mniw.K")
        cholesky(self.S0, "mniw.S0")
        if not self.n0 > dim - 1:
            raise ValidationError(f"mniw.n0 must exceed D - 1 = {dim - 1}")

    @classmethod
    def default(cls, dim):
        """Persistence-biased prior: M = I, K = 3 I, n0 = D + 2, S0 = 1e-4 I.

        Because the matrix-normal part scales with Sigma, K acts as a pseudo
        scatter ``X X^T`` pulling ``A`` towards ``M``. Data whose states lie
        near a line leave the transverse directions of ``A`` to the prior,
        so K must be large enough to keep freshly instantiated modes near
        persistence. S0 sets the expected noise of an empty mode.
        """
        eye = np.eye(dim)
        return cls(M=eye, K=3.0 * eye, n0=dim + 2.0, S0=1e-4 * eye)

    @property
    def dim(self):
        return self.M.shape[0]


@dataclass
class SufficientStats:
    S_xbarxbar: np.ndarray
    S_xxbar: np.ndarray
    S_xx: np.ndarray
    N: int

    def conditional_scatter(self):
        """``S_xx - S_xxbar S_xbarxbar^-1 S_xxbar^T``, symmetrised."""
        gain = np.linalg.solve(self.S_xbarxbar, self.S_xxbar.T).T
        return symmetrize(self.S_xx - gain @ self.S_xxbar.T)

    def posterior_mean_A(self):
        return np.linalg.solve(self.S_xbarxbar, self.S_xxbar.T).T


@dataclass
class DynParams:
    """Dynamics ``A`` and process noise ``Sigma``; stacked over modes when 3-d."""

    A: np.ndarray
    Sigma: np.ndarray

    def __len__(self):
        return self.A.shape[0] if self.A.ndim == 3 else 1

    def __getitem__(self, k):
        return DynParams(self.A[k], self.Sigma[k])

    def __iter__(self):
        return (self[k] for k in range(len(self)))

    def take(self, index):
        """Reindex the stacked modes, e.g. to apply a label permutation."""
        return DynParams(self.A[index].copy(), self.Sigma[index].copy())


def _pairs(x, z, k):
    x = np.asarray(x, dtype=float)
    z = np.asarray(z)
    if x.ndim != 2 or z.shape != (x.shape[0],):
        raise ValidationError(f"x must be (T, D) with z of length T; got {x.shape} and {z.shape}")
    mask = z[1:] == k
    return x[1:][mask].T, x[:-1][mask].T


def stats_from_pairs(X, Xbar, prior):
    MK = prior.M @ prior.K
    return SufficientStats(
        S_xbarxbar=symmetrize(Xbar @ Xbar.T + prior.K),
        S_xxbar=X @ Xbar.T + MK,
        S_xx=symmetrize(X @ X.T + MK @ prior.M.T),
        N=X.shape[1],
    )


def accumulate_statistics(x, z, k, prior):
    X, Xbar = _pairs(x, z, k)
    if X.shape[0] != prior.dim:
        raise ValidationError(f"state dimension {X.shape[0]} does not match prior dimension {prior.dim}")
    return stats_from_pairs(X, Xbar, prior)


def sample_sigma(stats, prior, rng):
    return sample_inverse_wishart(stats.N + prior.n0, stats.conditional_scatter() + prior.S0, rng)


def sample_A(stats, sigma, rng):
    col_cov = symmetrize(np.linalg.inv(stats.S_xbarxbar))
    return sample_matrix_normal(stats.posterior_mean_A(), sigma, col_cov, rng)


def sample_mode_dynamics(stats, prior, rng):
    """Sigma first, then A conditioned on that Sigma."""
    sigma = sample_sigma(stats, prior, rng)
    return DynParams(sample_A(stats, sigma, rng), sigma)


def sample_prior_dynamics(prior, L, rng):
    empty = np.zeros((prior.dim, 0))
    return _stack([sample_mode_dynamics(stats_from_pairs(empty, empty, prior), prior, rng) for _ in range(L)])


def sample_dynamics_all(x, z, prior, L, rng):
    """Posterior draw of ``(A, Sigma)`` for every mode ``0..L-1``."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z)
    if x.ndim != 2 or x.shape[1] != prior.dim or z.shape != (x.shape[0],):
        raise ValidationError("x must be (T, D) matching the prior, z of length T")
    nxt, prev, lab = x[1:], x[:-1], z[1:]
    empty = stats_from_pairs(np.zeros((prior.dim, 0)), np.zeros((prior.dim, 0)), prior)
    draws = []
    for k in range(L):
        mask = lab == k
        stats = stats_from_pairs(nxt[mask].T, prev[mask].T, prior) if mask.any() else empty
        draws.append(sample_mode_dynamics(stats, prior, rng))
    return _stack(draws)


def _stack(params):
    return DynParams(np.stack([p.A for p in params]), np.stack([p.Sigma for p in params]))
