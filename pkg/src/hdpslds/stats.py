"""Random sampling primitives.

Every sampler takes an explicit ``numpy.random.Generator`` so a chain is a
pure function of its seed. Scalar families (gamma, beta, binomial, normal)
come straight from numpy; the Dirichlet, categorical and Wishart-type draws
are written here because the sampler needs them to behave at extreme
concentrations (tiny Dirichlet weights, process noise near 1e-5).
"""

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from .errors import NotPositiveDefiniteError, ParameterError

RngStream = np.random.Generator


def make_rng(seed):
    """Independent PCG64 stream for a 64-bit seed."""
    return np.random.Generator(np.random.PCG64(int(seed) & (2**64 - 1)))


def symmetrize(mat):
    return 0.5 * (mat + np.swapaxes(mat, -1, -2))


def cholesky(mat, name="matrix"):
    """Lower Cholesky factor, raising :class:`NotPositiveDefiniteError` on failure."""
    mat = np.asarray(mat, dtype=float)
    if not np.all(np.isfinite(mat)):
        raise NotPositiveDefiniteError(name, "non-finite entries")
    try:
        return np.linalg.cholesky(symmetrize(mat))
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(name, str(exc)) from None


def _require_positive(name, value):
    value = np.asarray(value, dtype=float)
    if value.size == 0 or not np.all(np.isfinite(value)) or np.any(value <= 0):
        raise ParameterError(f"{name} must be positive and finite, got {value!r}")
    return value


def sample_gamma(shape, rate, rng, size=None):
    """Gamma draw parameterised by shape and *rate* (mean ``shape / rate``)."""
    shape = _require_positive("shape", shape)
    rate = _require_positive("rate", rate)
    return rng.gamma(shape, 1.0 / rate, size=size)


def sample_beta(c, d, rng, size=None):
    _require_positive("c", c)
    _require_positive("d", d)
    draw = rng.beta(c, d, size=size)
    # numpy can return exact 0/1 for very lopsided parameters
    tiny = np.finfo(float).tiny
    return np.clip(draw, tiny, 1.0 - np.finfo(float).epsneg)


def log_dirichlet(concentration, rng):
    """Log of a Dirichlet draw, computed without underflow.

    Rows of a 2-d ``concentration`` are drawn independently. For shapes
    below one the gamma variate is built as ``G(a + 1) * U ** (1 / a)`` in
    log space, which stays finite even when ``a`` is 1e-20.
    """
    conc = np.asarray(concentration, dtype=float)
    if conc.ndim == 0 or conc.shape[-1] == 0:
        raise ParameterError("Dirichlet concentration must be a non-empty vector")
    _require_positive("concentration", conc)
    small = conc < 1.0
    log_g = np.log(rng.gamma(np.where(small, conc + 1.0, conc)))
    u = rng.random(conc.shape)
    with np.errstate(over="ignore", divide="ignore"):
        log_g = np.where(small, log_g + np.log(u) / conc, log_g)
        dead = np.all(np.isneginf(log_g), axis=-1)
        if np.any(dead):
            # every coordinate underflowed: all mass sits on the one whose
            # log(u) / a is largest, i.e. smallest log(-log u) - log a
            rank = np.log(-np.log(u)) - np.log(conc)
            hit = np.argmin(rank, axis=-1)[..., None] == np.arange(conc.shape[-1])
            log_g = np.where(dead[..., None], np.where(hit, 0.0, -np.inf), log_g)
    return log_g - logsumexp(log_g, axis=-1, keepdims=True)


def sample_dirichlet(concentration, rng):
    """Dirichlet draw (rows independent for a 2-d concentration)."""
    w = np.exp(log_dirichlet(concentration, rng))
    return w / w.sum(axis=-1, keepdims=True)


def sample_categorical(weights, rng):
    """Index drawn with probability proportional to ``weights``."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0 or not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ParameterError("categorical weights must be finite and nonnegative")
    cdf = np.cumsum(w)
    if cdf[-1] <= 0:
        raise ParameterError("categorical weights are all zero")
    return int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))


def sample_categorical_log(log_weights, rng):
    """Categorical draw from unnormalised log weights (max-subtracted)."""
    lw = np.asarray(log_weights, dtype=float)
    if np.any(np.isnan(lw)):
        raise ParameterError("log weights contain NaN")
    top = lw.max()
    if not np.isfinite(top):
        raise ParameterError("log weights are all -inf")
    return sample_categorical(np.exp(lw - top), rng)


def sample_mvn(mean, cov, rng):
    mean = np.asarray(mean, dtype=float)
    chol = cholesky(cov, "cov")
    return mean + chol @ rng.standard_normal(mean.shape[-1])


def sample_mvn_info(theta, lam, rng):
    """Draw from the Gaussian with precision ``lam`` and mean ``lam^-1 theta``."""
    chol = cholesky(lam, "lambda")
    # cholesky() already rejected non-finite input
    white = solve_triangular(chol, theta, lower=True, check_finite=False) + rng.standard_normal(len(theta))
    return solve_triangular(chol.T, white, lower=False, check_finite=False)


def sample_inverse_wishart(dof, scale, rng):
    """Inverse-Wishart draw via a Bartlett factor.

    With ``scale = C C^T``, ``C^-T`` is a square root of ``scale^-1`` so
    ``W = C^-T B B^T C^-1 ~ W(dof, scale^-1)`` and ``W^-1 = (C B^-T)(C B^-T)^T``.
    """
    scale = np.asarray(scale, dtype=float)
    dim = scale.shape[0]
    if not np.isfinite(dof) or dof <= dim - 1:
        raise ParameterError(f"inverse-Wishart dof must exceed {dim - 1}, got {dof}")
    chol_scale = cholesky(scale, "scale")
    bartlett = np.zeros((dim, dim))
    bartlett[np.diag_indices(dim)] = np.sqrt(rng.chisquare(dof - np.arange(dim)))
    lower = np.tril_indices(dim, -1)
    bartlett[lower] = rng.standard_normal(len(lower[0]))
    factor = chol_scale @ solve_triangular(bartlett, np.eye(dim), lower=True).T
    return symmetrize(factor @ factor.T)


def sample_matrix_normal(mean, row_cov, col_cov, rng):
    """Matrix-normal draw: ``vec(X) ~ N(vec(mean), col_cov (x) row_cov)``."""
    mean = np.asarray(mean, dtype=float)
    row_chol = cholesky(row_cov, "row_cov")
    col_chol = cholesky(col_cov, "col_cov")
    return mean + row_chol @ rng.standard_normal(mean.shape) @ col_chol.T
