"""Hyperparameter optimization and kernel-type selection.

Hyperparameters are tuned by multi-start gradient descent with a
backtracking line search on the negative log marginal likelihood, working
in log-space so positivity never needs explicit constraints. Kernel types
are then ranked by log(1 + five-fold cross-validation loss) and the
minimizer wins.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist

from . import gpr
from .errors import ConditioningError, DomainError, TrainingError
from .seeding import derive_seed

log = logging.getLogger(__name__)

_ARMIJO_C = 1e-4
_MAX_BACKTRACKS = 25


@dataclass(frozen=True)
class OptimizationBudget:
    """Restart count, per-restart iteration cap, and convergence tolerance."""

    n_restarts: int = 5
    max_iterations: int = 20
    tol: float = 1e-6
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_restarts < 1 or self.max_iterations < 1 or self.tol <= 0:
            raise DomainError("budget fields must be positive")


@dataclass
class RestartTrace:
    """Outcome of one restart: final spec plus accepted-NLML trace."""

    spec: gpr.KernelSpec
    nlml: float
    trace: list


@dataclass
class OptimizationResult:
    """Best spec/NLML over all restarts; unpacks as (spec, nlml)."""

    spec: gpr.KernelSpec
    nlml: float
    restarts: list

    def __iter__(self):
        return iter((self.spec, self.nlml))


def _pack(spec: gpr.KernelSpec) -> np.ndarray:
    theta = [np.log(spec.signal_std), np.log(spec.length_scale), np.log(max(spec.noise_std, 1e-300))]
    if spec.kind == gpr.RATIONAL_QUADRATIC:
        theta.append(np.log(spec.mixture))
    return np.array(theta)


def _unpack(kind: str, theta: np.ndarray, standard_form: bool) -> gpr.KernelSpec:
    mixture = float(np.exp(theta[3])) if kind == gpr.RATIONAL_QUADRATIC else None
    return gpr.KernelSpec(
        kind=kind,
        signal_std=float(np.exp(theta[0])),
        length_scale=float(np.exp(theta[1])),
        noise_std=float(np.exp(theta[2])),
        mixture=mixture,
        standard_form=standard_form,
    )


def optimize_hyperparams(
    X: np.ndarray,
    y: np.ndarray,
    kind: str,
    budget: OptimizationBudget,
    standard_form: bool = False,
) -> OptimizationResult:
    """Minimize the NLML over log-hyperparameters with seeded multi-start descent.

    Each restart draws log(length_scale) uniformly between 0.01x and 10x the
    median pairwise distance; signal_std starts at the target standard
    deviation and noise_std at a tenth of it. Accepted line-search steps
    never increase the NLML. As a numerical guardrail, every parameter stays
    within 15 log-units of its restart initialization (the NLML is unbounded
    below in degenerate corners such as constant targets). Raises
    TrainingError if every restart fails conditioning at its starting point.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] < 5:
        raise DomainError("hyperparameter optimization needs at least 5 samples")
    rng = np.random.default_rng(budget.rng_seed)

    dists = pdist(X)
    median_dist = float(np.median(dists[dists > 0])) if np.any(dists > 0) else 1.0
    # floor the scale so degenerate (near-)constant targets stay well-posed
    sigma0 = max(float(np.std(y)), 1e-8 * max(1.0, abs(float(np.mean(y)))))

    def objective_and_grad(theta):
        spec = _unpack(kind, theta, standard_form)
        value = gpr.nlml(X, y, spec)
        grad = gpr.nlml_gradient(X, y, spec)
        return value, grad

    def objective_only(theta):
        try:
            return gpr.nlml(X, y, _unpack(kind, theta, standard_form))
        except ConditioningError:
            return np.inf

    restarts = []
    for _ in range(budget.n_restarts):
        log_l = rng.uniform(np.log(0.01 * median_dist), np.log(10.0 * median_dist))
        theta = np.array([np.log(sigma0), log_l, np.log(0.1 * sigma0)])
        if kind == gpr.RATIONAL_QUADRATIC:
            theta = np.append(theta, 0.0)  # mixture starts at 1
        lower, upper = theta - 15.0, theta + 15.0
        try:
            value, grad = objective_and_grad(theta)
        except ConditioningError:
            log.warning("restart discarded: conditioning failure at the initial point")
            continue

        trace = [value]
        for _ in range(budget.max_iterations):
            gnorm2 = float(grad @ grad)
            if gnorm2 == 0.0:
                break
            # cap the first trial step: at most 2 log-units of parameter change
            step = min(1.0, 2.0 / float(np.max(np.abs(grad))))
            accepted = False
            for _ in range(_MAX_BACKTRACKS):
                candidate = np.clip(theta - step * grad, lower, upper)
                cand_value = objective_only(candidate)
                if cand_value <= value - _ARMIJO_C * step * gnorm2:
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                break
            improvement = value - cand_value
            theta = candidate
            value, grad = objective_and_grad(theta)
            trace.append(value)
            if improvement < budget.tol:
                break
        restarts.append(RestartTrace(spec=_unpack(kind, theta, standard_form), nlml=value, trace=trace))

    if not restarts:
        raise TrainingError(f"all restarts failed conditioning for kernel {kind!r}")
    best = min(restarts, key=lambda r: r.nlml)
    return OptimizationResult(spec=best.spec, nlml=best.nlml, restarts=restarts)


def cv_loss(X: np.ndarray, y: np.ndarray, spec: gpr.KernelSpec, k_folds: int = 5, rng_seed: int = 0) -> float:
    """Mean squared held-out prediction error over seeded contiguous folds."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    n = X.shape[0]
    if k_folds < 2:
        raise DomainError("need at least 2 folds")
    if n < k_folds:
        raise DomainError(f"{n} samples cannot form {k_folds} folds")
    order = np.random.default_rng(rng_seed).permutation(n)
    squared_errors = np.empty(n)
    for fold in np.array_split(order, k_folds):
        train = np.setdiff1d(order, fold, assume_unique=True)
        model = gpr.fit(X[train], y[train], spec)
        mean, _ = gpr.predict(model, X[fold])
        squared_errors[fold] = (mean - y[fold]) ** 2
    return float(np.mean(squared_errors))


def objective(cv: float) -> float:
    """Kernel-selection objective log(1 + cv); zero at zero, monotone in cv."""
    if cv < 0:
        raise DomainError("cross-validation loss must be nonnegative")
    return float(np.log1p(cv))


@dataclass
class KernelEntry:
    """Per-kernel selection record: tuned spec with its NLML, CV loss, and objective."""

    kind: str
    spec: gpr.KernelSpec
    nlml: float
    cv: float
    of: float


@dataclass
class SurfaceSample:
    """One evaluated (hyperparameters, objective) point, for diagnostics plots."""

    kind: str
    spec: gpr.KernelSpec
    nlml: float
    cv: float
    of: float


@dataclass
class KernelSelectionReport:
    """Ranking of all kernel kinds with the objective-minimizing winner."""

    entries: list
    winner: str
    surface: list = field(default_factory=list)

    def entry(self, kind: str) -> KernelEntry:
        return next(e for e in self.entries if e.kind == kind)

    @property
    def winning_entry(self) -> KernelEntry:
        return self.entry(self.winner)


def select_kernel(
    X: np.ndarray,
    y: np.ndarray,
    budget: OptimizationBudget,
    k_folds: int = 5,
    surface: bool = True,
) -> KernelSelectionReport:
    """Tune every kernel kind, score each by objective(cv_loss), pick the argmin.

    A kind whose optimization fails conditioning is recorded with infinite
    objective; only all five failing is fatal. With `surface` set, every
    restart endpoint is also scored, giving an objective-surface sample per
    evaluated hyperparameter point.
    """
    entries = []
    samples = []
    for i, kind in enumerate(gpr.KERNEL_KINDS):
        sub_budget = OptimizationBudget(
            n_restarts=budget.n_restarts,
            max_iterations=budget.max_iterations,
            tol=budget.tol,
            rng_seed=derive_seed(budget.rng_seed, f"kernel-{kind}"),
        )
        cv_seed = derive_seed(budget.rng_seed, "cv-folds")
        try:
            result = optimize_hyperparams(X, y, kind, sub_budget)
            cv = cv_loss(X, y, result.spec, k_folds=k_folds, rng_seed=cv_seed)
            entries.append(KernelEntry(kind, result.spec, result.nlml, cv, objective(cv)))
            if surface:
                for restart in result.restarts:
                    r_cv = cv_loss(X, y, restart.spec, k_folds=k_folds, rng_seed=cv_seed)
                    samples.append(
                        SurfaceSample(kind, restart.spec, restart.nlml, r_cv, objective(r_cv))
                    )
        except (ConditioningError, TrainingError) as exc:
            log.warning("kernel %s failed and is ranked last: %s", kind, exc)
            placeholder = gpr.KernelSpec(kind=kind, signal_std=1.0, length_scale=1.0,
                                         mixture=1.0 if kind == gpr.RATIONAL_QUADRATIC else None)
            entries.append(KernelEntry(kind, placeholder, np.inf, np.inf, np.inf))

    ofs = [e.of for e in entries]
    if not np.isfinite(ofs).any():
        raise TrainingError("every kernel kind failed conditioning")
    winner = entries[int(np.argmin(ofs))].kind  # argmin keeps first on ties
    return KernelSelectionReport(entries=entries, winner=winner, surface=samples)


@dataclass
class PositionModels:
    """Independent per-coordinate regressors with their selection reports."""

    gpr_x: gpr.GprModel
    gpr_y: gpr.GprModel
    report_x: KernelSelectionReport
    report_y: KernelSelectionReport

    def __iter__(self):
        return iter((self.gpr_x, self.gpr_y))


def train_position_models(
    X: np.ndarray,
    positions: np.ndarray,
    budget: OptimizationBudget,
    k_folds: int = 5,
    surface: bool = True,
) -> PositionModels:
    """Select a kernel and fit one GPR per coordinate of the 2-D positions."""
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    if positions.shape[1] != 2:
        raise DomainError("positions must be n x 2")
    if positions.shape[0] != np.atleast_2d(X).shape[0]:
        raise DomainError("inputs and positions disagree on the sample count")

    models = {}
    reports = {}
    for axis, name in enumerate(("x", "y")):
        sub_budget = OptimizationBudget(
            n_restarts=budget.n_restarts,
            max_iterations=budget.max_iterations,
            tol=budget.tol,
            rng_seed=derive_seed(budget.rng_seed, f"coordinate-{name}"),
        )
        report = select_kernel(X, positions[:, axis], sub_budget, k_folds=k_folds, surface=surface)
        models[name] = gpr.fit(X, positions[:, axis], report.winning_entry.spec)
        reports[name] = report
    return PositionModels(models["x"], models["y"], reports["x"], reports["y"])
