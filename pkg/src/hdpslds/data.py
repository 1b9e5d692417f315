"""Synthetic switching trajectories and segmentation metrics."""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .dynamics import DynParams
from .errors import ValidationError
from .messages import ObsModel

TOY_A = (
    np.array([[0.0, 1.0], [0.7, 0.36]]),
    np.array([[0.0, 1.0], [0.4, 0.56]]),
    np.array([[0.5, 0.5], [0.32, 0.67]]),
)
TOY_SIGMA = 1e-5
TOY_R = 1e-4
TOY_LAYOUT = ((80, 1), (60, 2), (70, 3), (60, 1), (70, 2), (60, 3))

UNMATCHED = -1


@dataclass
class SldsSpec:
    """Generating system; layout mode labels are 1-based indices into ``dynamics``."""

    dynamics: DynParams
    layout: tuple
    x0: np.ndarray
    obs: ObsModel

    def __post_init__(self):
        self.layout = tuple((int(n), int(k)) for n, k in self.layout)
        if not self.layout:
            raise ValidationError("layout must contain at least one segment")
        for n, k in self.layout:
            if n < 1:
                raise ValidationError(f"segment length must be positive, got {n}")
            if not 1 <= k <= len(self.dynamics):
                raise ValidationError(f"layout mode {k} has no dynamics (have {len(self.dynamics)})")

    @property
    def T(self):
        return sum(n for n, _ in self.layout)

    def labels(self):
        return np.concatenate([np.full(n, k, dtype=np.int64) for n, k in self.layout])


@dataclass
class LabeledTrajectory:
    y: np.ndarray
    x_true: np.ndarray
    z_true: np.ndarray


def parse_layout(text):
    """``"80:1,60:2"`` -> ``((80, 1), (60, 2))``."""
    try:
        pairs = [item.split(":") for item in text.split(",") if item.strip()]
        layout = tuple((int(n), int(k)) for n, k in pairs)
    except ValueError:
        raise ValidationError(f"malformed layout {text!r}; expected 'len:mode,len:mode,...'") from None
    if not layout:
        raise ValidationError("empty layout")
    return layout


def toy_spec(T=400, layout=None, R=TOY_R):
    """The three-mode 2-d toy system with ``x0 = (1, 1)``.

    Without an explicit layout, the default six-segment layout (total 400)
    is rescaled proportionally to ``T``.
    """
    if layout is None:
        layout = _scale_layout(TOY_LAYOUT, T)
    layout = tuple(layout)
    if sum(n for n, _ in layout) != T:
        raise ValidationError(f"layout lengths sum to {sum(n for n, _ in layout)}, expected T={T}")
    dyn = DynParams(np.stack(TOY_A), np.stack([TOY_SIGMA * np.eye(2)] * 3))
    return SldsSpec(dynamics=dyn, layout=layout, x0=np.ones(2), obs=ObsModel.identity(2, R))


def _scale_layout(layout, T):
    total = sum(n for n, _ in layout)
    if T == total:
        return layout
    if T < len(layout):
        raise ValidationError(f"T={T} is shorter than the {len(layout)}-segment default layout")
    bounds = np.round(np.cumsum([0] + [n for n, _ in layout]) * T / total).astype(int)
    lengths = np.maximum(np.diff(bounds), 1)
    lengths[-1] = T - lengths[:-1].sum()
    if lengths[-1] < 1:
        raise ValidationError(f"cannot rescale default layout to T={T}")
    return tuple((int(n), k) for n, (_, k) in zip(lengths, layout))


def _noise_factor(cov):
    # accepts singular (e.g. zero) covariances, unlike a Cholesky factor
    vals, vecs = np.linalg.eigh(cov)
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def generate_slds(spec, rng):
    """Forward-simulate ``x[t] = A x[t-1] + e``, ``y[t] = C x[t] + w`` from ``spec.x0``."""
    z = spec.labels()
    T, dim = len(z), len(spec.x0)
    proc = np.stack([_noise_factor(s) for s in spec.dynamics.Sigma])
    obs_factor = _noise_factor(spec.obs.R)
    x = np.empty((T, dim))
    prev = np.asarray(spec.x0, dtype=float)
    for t in range(T):
        k = z[t] - 1
        prev = spec.dynamics.A[k] @ prev + proc[k] @ rng.standard_normal(dim)
        x[t] = prev
    y = x @ spec.obs.C.T + rng.standard_normal((T, spec.obs.C.shape[0])) @ obs_factor.T
    return LabeledTrajectory(y=y, x_true=x, z_true=z)


def confusion_matrix(z_pred, z_true):
    z_pred, z_true = _check_pair(z_pred, z_true)
    pred_labels, pred_idx = np.unique(z_pred, return_inverse=True)
    true_labels, true_idx = np.unique(z_true, return_inverse=True)
    conf = np.zeros((len(pred_labels), len(true_labels)), dtype=np.int64)
    np.add.at(conf, (pred_idx, true_idx), 1)
    return conf, pred_labels, true_labels


def _check_pair(z_pred, z_true):
    z_pred = np.asarray(z_pred).ravel()
    z_true = np.asarray(z_true).ravel()
    if len(z_pred) != len(z_true):
        raise ValidationError(f"label sequences differ in length: {len(z_pred)} vs {len(z_true)}")
    if len(z_pred) == 0:
        raise ValidationError("label sequences are empty")
    return z_pred, z_true


def match_labels(z_pred, z_true):
    """Overlap-maximising injective map from predicted to true labels.

    Returns ``(mapping, overlap)``; predicted labels left without a partner
    map to ``UNMATCHED``.
    """
    conf, pred_labels, true_labels = confusion_matrix(z_pred, z_true)
    rows, cols = linear_sum_assignment(conf, maximize=True)
    mapping = {int(p): UNMATCHED for p in pred_labels}
    for r, c in zip(rows, cols):
        mapping[int(pred_labels[r])] = int(true_labels[c])
    return mapping, int(conf[rows, cols].sum())


def hamming_error(z_pred, z_true):
    z_pred, z_true = _check_pair(z_pred, z_true)
    _, overlap = match_labels(z_pred, z_true)
    return (len(z_true) - overlap) / len(z_true)


def count_switches(z):
    z = np.asarray(z)
    return int(np.count_nonzero(z[1:] != z[:-1]))


def switch_points(z):
    """Indices ``t`` with ``z[t] != z[t-1]``."""
    z = np.asarray(z)
    return np.flatnonzero(z[1:] != z[:-1]) + 1
