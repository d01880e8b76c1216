"""Exact Gaussian process regression.

Implements the five monotonically decreasing covariance functions, Gram
assembly, Cholesky-based fitting and posterior prediction, and the negative
log marginal likelihood with analytic gradients over log-hyperparameters.

Targets are centered by their sample mean at fit time (zero-mean prior);
the mean is added back on prediction. The Exponential and Rational
Quadratic kernels keep their slightly unusual published forms (exponent
-r/(2*l^2) and mixture argument r rather than r^2) unless
`standard_form=True` selects the textbook variants.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.spatial.distance import cdist, pdist, squareform

from .errors import ConditioningError, DomainError

log = logging.getLogger(__name__)

SQUARED_EXPONENTIAL = "squared_exponential"
EXPONENTIAL = "exponential"
RATIONAL_QUADRATIC = "rational_quadratic"
MATERN32 = "matern32"
MATERN52 = "matern52"

#: Kernel kinds in canonical order (also the tie-break order for selection).
KERNEL_KINDS = (SQUARED_EXPONENTIAL, EXPONENTIAL, RATIONAL_QUADRATIC, MATERN32, MATERN52)

_JITTER_START = 1e-10
_JITTER_STOP = 1e-4


@dataclass(frozen=True)
class KernelSpec:
    """Kernel kind plus hyperparameters.

    `mixture` is the scale-mixture parameter and is required for (and only
    valid with) the rational quadratic kernel.
    """

    kind: str
    signal_std: float
    length_scale: float
    noise_std: float = 0.0
    mixture: float = None
    standard_form: bool = False

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise DomainError(f"unknown kernel kind {self.kind!r}; expected one of {KERNEL_KINDS}")
        if self.signal_std <= 0 or self.length_scale <= 0:
            raise DomainError("signal_std and length_scale must be positive")
        if self.noise_std < 0:
            raise DomainError("noise_std must be nonnegative")
        if self.kind == RATIONAL_QUADRATIC:
            if self.mixture is None or self.mixture <= 0:
                raise DomainError("rational_quadratic requires a positive mixture parameter")
        elif self.mixture is not None:
            raise DomainError(f"mixture parameter is only valid for {RATIONAL_QUADRATIC}")

    @property
    def n_params(self) -> int:
        """Number of log-hyperparameters: (sigma, l, sigma_n) plus mixture for RQ."""
        return 4 if self.kind == RATIONAL_QUADRATIC else 3


@dataclass(frozen=True)
class GprModel:
    """Fitted posterior state: training data, Cholesky factor, and weights."""

    kernel: KernelSpec
    X: np.ndarray
    y_centered: np.ndarray
    target_mean: float
    chol: np.ndarray
    weights: np.ndarray
    jitter: float
    nlml: float

    @property
    def n_train(self) -> int:
        return self.X.shape[0]


def _center(y: np.ndarray):
    """Sample mean and centered targets; a constant vector centers to exact zeros."""
    if np.ptp(y) == 0.0:
        return float(y[0]), np.zeros_like(y)
    mean = float(np.mean(y))
    return mean, y - mean


def pair_distance(x_i: np.ndarray, x_j: np.ndarray) -> float:
    """Euclidean distance between two equal-length vectors."""
    a = np.asarray(x_i, dtype=float)
    b = np.asarray(x_j, dtype=float)
    if a.shape != b.shape:
        raise DomainError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def kernel_eval(spec: KernelSpec, r):
    """Evaluate the covariance function at distance(s) r >= 0.

    Accepts a scalar or array; k(0) = signal_std**2 and k is strictly
    decreasing in r for every supported kind.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise DomainError("distances must be nonnegative")
    s2 = spec.signal_std ** 2
    l = spec.length_scale
    if spec.kind == SQUARED_EXPONENTIAL:
        out = s2 * np.exp(-(r ** 2) / (2 * l ** 2))
    elif spec.kind == EXPONENTIAL:
        arg = r / l if spec.standard_form else r / (2 * l ** 2)
        out = s2 * np.exp(-arg)
    elif spec.kind == RATIONAL_QUADRATIC:
        a = spec.mixture
        arg = r ** 2 if spec.standard_form else r
        out = s2 * (1.0 + arg / (2 * a * l ** 2)) ** (-a)
    elif spec.kind == MATERN32:
        s = np.sqrt(3.0) * r / l
        out = s2 * (1.0 + s) * np.exp(-s)
    else:  # MATERN52
        s = np.sqrt(5.0) * r / l
        out = s2 * (1.0 + s + s ** 2 / 3.0) * np.exp(-s)
    return out if out.ndim else float(out)


def _distance_matrix(X: np.ndarray, X2: np.ndarray = None) -> np.ndarray:
    if X2 is None:
        return squareform(pdist(X))  # exactly symmetric, zero diagonal
    return cdist(X, X2)


def gram(spec: KernelSpec, X: np.ndarray, X2: np.ndarray = None) -> np.ndarray:
    """Covariance matrix K(X, X2); symmetric PSD with X2 omitted."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X2 is not None:
        X2 = np.atleast_2d(np.asarray(X2, dtype=float))
        if X2.shape[1] != X.shape[1]:
            raise DomainError(f"input dimension mismatch: {X.shape[1]} vs {X2.shape[1]}")
    return kernel_eval(spec, _distance_matrix(X, X2))


def _chol_with_jitter(K_noisy: np.ndarray, diag_scale: float):
    """Lower Cholesky factor with an escalating jitter ladder.

    Tries the matrix as-is, then adds jitter from 1e-10 to 1e-4 times
    `diag_scale` in decade steps, logging each escalation. Raises
    ConditioningError with the attempted ladder once exhausted.
    """
    attempted = []
    jitter = 0.0
    while True:
        try:
            L = cholesky(K_noisy + jitter * np.eye(K_noisy.shape[0]), lower=True)
            return L, jitter
        except np.linalg.LinAlgError:
            attempted.append(jitter)
            jitter = _JITTER_START * diag_scale if jitter == 0.0 else jitter * 10.0
            if jitter > _JITTER_STOP * diag_scale * (1 + 1e-12):
                raise ConditioningError(
                    "Cholesky factorization failed; attempted jitter ladder: "
                    f"{attempted}"
                ) from None
            log.warning("Cholesky failed, escalating jitter to %.3e", jitter)


def fit(X: np.ndarray, y: np.ndarray, spec: KernelSpec) -> GprModel:
    """Fit the GP posterior: center targets, factor K + sigma_n^2 I, solve weights."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.shape[0]:
        raise DomainError(f"{X.shape[0]} inputs vs {y.shape[0]} targets")
    if X.shape[0] < 1:
        raise DomainError("need at least one training point")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DomainError("inputs and targets must be finite")

    target_mean, yc = _center(y)
    K = gram(spec, X)
    K_noisy = K + spec.noise_std ** 2 * np.eye(X.shape[0])
    if not np.all(np.isfinite(K_noisy)):
        raise ConditioningError("covariance matrix is not finite; hyperparameters too extreme")
    L, jitter = _chol_with_jitter(K_noisy, float(np.mean(np.diag(K))))
    weights = cho_solve((L, True), yc)
    n = X.shape[0]
    value = float(
        0.5 * yc @ weights + np.sum(np.log(np.diag(L))) + 0.5 * n * np.log(2 * np.pi)
    )
    return GprModel(
        kernel=spec,
        X=X,
        y_centered=yc,
        target_mean=target_mean,
        chol=L,
        weights=weights,
        jitter=jitter,
        nlml=value,
    )


def predict(model: GprModel, X_star: np.ndarray):
    """Posterior mean and variance at the query points.

    mean = K_*^T (K + sigma_n^2 I)^{-1} y (plus the target mean), and
    variance = diag(K_**) - K_*^T (K + sigma_n^2 I)^{-1} K_*. Variances in
    [-1e-10, 0) are clamped to zero; anything lower raises.
    """
    X_star = np.atleast_2d(np.asarray(X_star, dtype=float))
    if X_star.shape[1] != model.X.shape[1]:
        raise DomainError(
            f"query dimension {X_star.shape[1]} != training dimension {model.X.shape[1]}"
        )
    K_star = gram(model.kernel, model.X, X_star)  # n x m
    mean = K_star.T @ model.weights + model.target_mean
    v = solve_triangular(model.chol, K_star, lower=True)
    variance = kernel_eval(model.kernel, 0.0) - np.sum(v ** 2, axis=0)
    bad = variance < -1e-10
    if np.any(bad):
        raise ConditioningError(
            f"predictive variance {variance[bad].min():.3e} below -1e-10; "
            "the posterior is numerically unreliable"
        )
    return mean, np.maximum(variance, 0.0)


def nlml(X: np.ndarray, y: np.ndarray, spec: KernelSpec) -> float:
    """Negative log marginal likelihood of the centered targets.

    0.5*y^T (K+sigma_n^2 I)^{-1} y + 0.5*log|K+sigma_n^2 I| + (n/2)*log(2*pi),
    with the log-determinant read off the Cholesky diagonal.
    """
    return fit(X, y, spec).nlml


def _dk_dlog_params(spec: KernelSpec, r: np.ndarray, K: np.ndarray) -> list:
    """dK/d(log sigma), dK/d(log l) and, for RQ, dK/d(log mixture)."""
    l = spec.length_scale
    s2 = spec.signal_std ** 2
    grads = [2.0 * K]  # d/dlog(sigma): K = sigma^2 * rho
    if spec.kind == SQUARED_EXPONENTIAL:
        grads.append(K * r ** 2 / l ** 2)
    elif spec.kind == EXPONENTIAL:
        grads.append(K * (r / l if spec.standard_form else r / l ** 2))
    elif spec.kind == RATIONAL_QUADRATIC:
        a = spec.mixture
        arg = r ** 2 if spec.standard_form else r
        u = 1.0 + arg / (2 * a * l ** 2)
        grads.append(s2 * u ** (-a - 1.0) * arg / l ** 2)
        grads.append(K * (-a * np.log(u) + arg / (2 * l ** 2 * u)))
    elif spec.kind == MATERN32:
        s = np.sqrt(3.0) * r / l
        grads.append(s2 * s ** 2 * np.exp(-s))
    else:  # MATERN52
        s = np.sqrt(5.0) * r / l
        grads.append(s2 * (s ** 2 / 3.0) * (1.0 + s) * np.exp(-s))
    return grads


def nlml_gradient(X: np.ndarray, y: np.ndarray, spec: KernelSpec) -> np.ndarray:
    """Analytic NLML gradient over (log sigma, log l, log sigma_n[, log mixture]).

    Uses the trace identity dNLML/dtheta = 0.5*tr((K_y^{-1} - w w^T) dK_y/dtheta)
    with w the weight vector.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    _, yc = _center(y)
    n = X.shape[0]
    r = _distance_matrix(X)
    K = kernel_eval(spec, r)
    K_noisy = K + spec.noise_std ** 2 * np.eye(n)
    if not np.all(np.isfinite(K_noisy)):
        raise ConditioningError("covariance matrix is not finite; hyperparameters too extreme")
    L, _ = _chol_with_jitter(K_noisy, float(np.mean(np.diag(K))))
    w = cho_solve((L, True), yc)
    M = cho_solve((L, True), np.eye(n)) - np.outer(w, w)

    kernel_grads = _dk_dlog_params(spec, r, K)
    components = [
        0.5 * np.sum(M * kernel_grads[0]),  # log sigma
        0.5 * np.sum(M * kernel_grads[1]),  # log l
        spec.noise_std ** 2 * np.trace(M),  # log sigma_n
    ]
    if spec.kind == RATIONAL_QUADRATIC:
        components.append(0.5 * np.sum(M * kernel_grads[2]))  # log mixture
    return np.array(components)
