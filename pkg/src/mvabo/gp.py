"""Exact Gaussian-process regression over the joint design/environment space.

The posterior keeps a lower Cholesky factor of ``K_t + noise * I`` that is
extended by one row per observation, so ``ln det(I + K_t / noise)`` (the
information term inside the confidence multiplier) is available for free.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import linalg, optimize
from scipy.spatial.distance import cdist

__all__ = [
    "KernelSpec",
    "Observation",
    "GpPosterior",
    "BetaSchedule",
    "NumericalError",
    "HyperparameterFitWarning",
    "kernel_eval",
    "kernel_matrix",
    "posterior_query",
    "update",
    "beta",
    "pointwise_bounds",
    "log_marginal_likelihood",
    "fit_kernel",
    "fit_hyperparameters",
    "GridPosterior",
]

JITTER = 1e-10
LENGTHSCALE_BOUNDS = (1e-2, 1e1)
SIGNAL_VARIANCE_BOUNDS = (1e-2, 1e2)


class NumericalError(RuntimeError):
    """Raised when the kernel matrix cannot be factorized, even with jitter."""

    def __init__(self, message, condition_number=None):
        if condition_number is not None:
            message = f"{message} (condition number ~ {condition_number:.3e})"
        super().__init__(message)
        self.condition_number = condition_number


class HyperparameterFitWarning(UserWarning):
    pass


@dataclass(frozen=True)
class KernelSpec:
    """Gaussian (RBF) kernel ``s2 * exp(-sum_i (a_i - b_i)^2 / (2 l_i^2))``.

    ``family`` is ``"isotropic-gaussian"`` (one lengthscale shared by every
    input dimension) or ``"ard-gaussian"`` (one lengthscale per dimension).
    """

    family: str = "isotropic-gaussian"
    signal_variance: float = 1.0
    lengthscales: tuple = (0.25,)

    def __post_init__(self):
        if self.family not in ("isotropic-gaussian", "ard-gaussian"):
            raise ValueError(f"unknown kernel family {self.family!r}")
        ls = tuple(float(v) for v in np.atleast_1d(self.lengthscales))
        object.__setattr__(self, "lengthscales", ls)
        if self.family == "isotropic-gaussian" and len(ls) != 1:
            raise ValueError("isotropic kernel takes exactly one lengthscale")
        if not ls or min(ls) <= 0:
            raise ValueError("lengthscales must be positive")
        if not self.signal_variance > 0:
            raise ValueError("signal variance must be positive")

    @classmethod
    def isotropic(cls, lengthscale=0.25, signal_variance=1.0):
        return cls("isotropic-gaussian", float(signal_variance), (float(lengthscale),))

    @classmethod
    def ard(cls, lengthscales, signal_variance=1.0):
        return cls("ard-gaussian", float(signal_variance), tuple(lengthscales))

    def scales_for(self, dim):
        if self.family == "isotropic-gaussian":
            return np.full(dim, self.lengthscales[0])
        if len(self.lengthscales) != dim:
            raise ValueError(
                f"ARD kernel has {len(self.lengthscales)} lengthscales, inputs have {dim} dims"
            )
        return np.asarray(self.lengthscales)


def kernel_matrix(spec: KernelSpec, a, b) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    ls = spec.scales_for(a.shape[1])
    sq = cdist(a / ls, b / ls, "sqeuclidean")
    return spec.signal_variance * np.exp(-0.5 * sq)


def kernel_eval(spec: KernelSpec, z1, z2) -> float:
    z1 = np.atleast_1d(np.asarray(z1, dtype=float))
    z2 = np.atleast_1d(np.asarray(z2, dtype=float))
    if z1.ndim != 1 or z1.shape != z2.shape:
        raise ValueError(f"dimension mismatch: {z1.shape} vs {z2.shape}")
    return float(kernel_matrix(spec, z1[None, :], z2[None, :])[0, 0])


@dataclass(frozen=True)
class Observation:
    x: np.ndarray
    w: np.ndarray
    y: float
    step: int = 0

    @property
    def joint(self):
        return np.concatenate([np.atleast_1d(self.x), np.atleast_1d(self.w)]).astype(float)


def _cholesky(matrix):
    """Lower Cholesky factor; retries once with jitter before giving up."""
    try:
        return linalg.cholesky(matrix, lower=True), 0.0
    except linalg.LinAlgError:
        pass
    try:
        jittered = matrix + JITTER * np.eye(len(matrix))
        return linalg.cholesky(jittered, lower=True), JITTER
    except linalg.LinAlgError:
        raise NumericalError(
            "kernel matrix is not positive definite", np.linalg.cond(matrix)
        ) from None


@dataclass(frozen=True, eq=False)
class GpPosterior:
    """Zero-mean GP posterior given ``(points, targets)``.

    Treat instances as immutable: :meth:`add` returns a new posterior.
    """

    kernel: KernelSpec
    noise_variance: float
    points: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    targets: np.ndarray = field(default_factory=lambda: np.empty(0))
    chol: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    jitter: float = 0.0

    def __post_init__(self):
        if not self.noise_variance > 0:
            raise ValueError("noise variance must be positive")

    @classmethod
    def fit(cls, kernel, noise_variance, points, targets):
        """Factorize from scratch."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        targets = np.asarray(targets, dtype=float).ravel()
        if len(points) != len(targets):
            raise ValueError("points and targets differ in length")
        if not np.all(np.isfinite(targets)):
            raise ValueError("targets must be finite")
        if len(targets) == 0:
            return cls(kernel, noise_variance)
        gram = kernel_matrix(kernel, points, points)
        gram[np.diag_indices_from(gram)] += noise_variance
        chol, jitter = _cholesky(gram)
        return cls(kernel, noise_variance, points, targets, chol, jitter)

    @property
    def t(self) -> int:
        return len(self.targets)

    @property
    def dim(self):
        return self.points.shape[1] if self.t else None

    @property
    def log_det_term(self) -> float:
        """``ln det(I_t + K_t / noise)``."""
        if self.t == 0:
            return 0.0
        return float(2.0 * np.sum(np.log(np.diag(self.chol))) - self.t * np.log(self.noise_variance))

    @property
    def weights(self):
        """``(K_t + noise I)^{-1} y_t``."""
        if self.t == 0:
            return np.empty(0)
        return linalg.cho_solve((self.chol, True), self.targets)

    def add(self, z, y) -> "GpPosterior":
        """Posterior after one more observation, via a rank-one Cholesky extension."""
        z = np.atleast_1d(np.asarray(z, dtype=float))
        if not np.isfinite(y):
            raise ValueError(f"observation must be finite, got {y!r}")
        if self.t == 0:
            return GpPosterior.fit(self.kernel, self.noise_variance, z[None, :], [y])
        if z.shape != (self.dim,):
            raise ValueError(f"point has shape {z.shape}, expected ({self.dim},)")
        cross = kernel_matrix(self.kernel, self.points, z[None, :])[:, 0]
        row = linalg.solve_triangular(self.chol, cross, lower=True)
        pivot = self.kernel.signal_variance + self.noise_variance + self.jitter - row @ row
        points = np.vstack([self.points, z])
        targets = np.append(self.targets, float(y))
        if pivot <= 1e-14 * (self.kernel.signal_variance + self.noise_variance):
            return GpPosterior.fit(self.kernel, self.noise_variance, points, targets)
        t = self.t
        chol = np.zeros((t + 1, t + 1))
        chol[:t, :t] = self.chol
        chol[t, :t] = row
        chol[t, t] = np.sqrt(pivot)
        return GpPosterior(self.kernel, self.noise_variance, points, targets, chol, self.jitter)

    def refit(self, kernel=None) -> "GpPosterior":
        return GpPosterior.fit(kernel or self.kernel, self.noise_variance, self.points, self.targets)

    def query(self, queries):
        """Posterior mean and variance at each row of ``queries``."""
        queries = np.atleast_2d(np.asarray(queries, dtype=float))
        prior = np.full(len(queries), self.kernel.signal_variance)
        if self.t == 0:
            return np.zeros(len(queries)), prior
        cross = kernel_matrix(self.kernel, queries, self.points)
        mean = cross @ self.weights
        v = linalg.solve_triangular(self.chol, cross.T, lower=True)
        var = prior - np.einsum("ij,ij->j", v, v)
        if not np.all(np.isfinite(mean)):
            raise NumericalError("non-finite posterior mean", np.linalg.cond(self.chol) ** 2)
        return mean, np.maximum(var, 0.0)


def posterior_query(model: GpPosterior, queries):
    return model.query(queries)


def update(model: GpPosterior, obs: Observation) -> GpPosterior:
    return model.add(obs.joint, obs.y)


@dataclass(frozen=True)
class BetaSchedule:
    """Confidence multiplier settings.

    ``delta_divisor`` is 1 for a single confidence statement and 3 when the
    failure probability is split across three events (scenario drivers).
    ``fixed`` replaces the schedule by a constant, the usual heuristic in
    practice; ``None`` keeps the theoretical value and its guarantee.
    """

    rkhs_bound: float = 2.0
    delta: float = 0.1
    delta_divisor: int = 3
    fixed: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.rkhs_bound <= 0 or self.delta_divisor <= 0:
            raise ValueError("rkhs_bound and delta_divisor must be positive")
        if self.fixed is not None and not self.fixed >= 0:
            raise ValueError("fixed beta must be nonnegative")


def beta(model: GpPosterior, schedule: BetaSchedule) -> float:
    if schedule.fixed is not None:
        return float(schedule.fixed)
    info = model.log_det_term + 2.0 * np.log(schedule.delta_divisor / schedule.delta)
    return float((np.sqrt(max(info, 0.0)) + schedule.rkhs_bound) ** 2)


def pointwise_bounds(model: GpPosterior, beta_t: float, points):
    """Lower/upper confidence bounds ``mu -/+ sqrt(beta) * sigma`` at ``points``."""
    if beta_t < 0:
        raise ValueError("beta must be nonnegative")
    mean, var = model.query(points)
    half = np.sqrt(beta_t) * np.sqrt(var)
    return mean - half, mean + half


def log_marginal_likelihood(kernel, noise_variance, points, targets) -> float:
    model = GpPosterior.fit(kernel, noise_variance, points, targets)
    alpha = model.weights
    return float(
        -0.5 * model.targets @ alpha
        - np.sum(np.log(np.diag(model.chol)))
        - 0.5 * model.t * np.log(2 * np.pi)
    )


def _pack(spec, dim):
    ls = spec.lengthscales if spec.family == "ard-gaussian" else spec.lengthscales[:1]
    return np.log(np.concatenate([[spec.signal_variance], ls]))


def _unpack(theta, family):
    theta = np.exp(theta)
    return KernelSpec(family, float(theta[0]), tuple(theta[1:]))


def fit_kernel(points, targets, init: KernelSpec, noise_variance, n_starts=4, rng=None):
    """Maximize the log marginal likelihood over kernel hyperparameters.

    Searches log-parameters with L-BFGS-B inside the box
    ``lengthscale in [1e-2, 1e1]``, ``signal variance in [1e-2, 1e2]``,
    starting from ``init`` plus ``n_starts - 1`` random points. The noise
    variance stays fixed. Never returns a spec worse than ``init``; on total
    failure ``init`` comes back together with a :class:`HyperparameterFitWarning`.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    targets = np.asarray(targets, dtype=float).ravel()
    if len(targets) < 2:
        raise ValueError("need at least two observations to fit hyperparameters")
    rng = np.random.default_rng(0) if rng is None else rng
    dim = points.shape[1]
    if init.family == "ard-gaussian":
        init.scales_for(dim)

    def objective(theta):
        try:
            return -log_marginal_likelihood(_unpack(theta, init.family), noise_variance, points, targets)
        except (NumericalError, ValueError):
            return np.inf

    n_ls = len(_pack(init, dim)) - 1
    bounds = [tuple(np.log(SIGNAL_VARIANCE_BOUNDS))] + [tuple(np.log(LENGTHSCALE_BOUNDS))] * n_ls
    lo, hi = np.array(bounds).T
    starts = [np.clip(_pack(init, dim), lo, hi)]
    starts += [rng.uniform(lo, hi) for _ in range(n_starts - 1)]

    best_theta, best_value = None, np.inf
    for start in starts:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                res = optimize.minimize(objective, start, method="L-BFGS-B", bounds=bounds)
        except (ValueError, FloatingPointError):
            continue
        if np.isfinite(res.fun) and res.fun < best_value:
            best_theta, best_value = res.x, res.fun

    init_value = objective(_pack(init, dim))
    if best_theta is None:
        warnings.warn("hyperparameter search failed; keeping initial kernel", HyperparameterFitWarning)
        return init
    if best_value > init_value:
        return init
    return _unpack(best_theta, init.family)


def fit_hyperparameters(data: Sequence[Observation], init: KernelSpec, noise_variance, **kwargs):
    if len(data) < 2:
        raise ValueError("need at least two observations to fit hyperparameters")
    points = np.array([obs.joint for obs in data])
    targets = np.array([obs.y for obs in data])
    return fit_kernel(points, targets, init, noise_variance, **kwargs)


class GridPosterior:
    """Posterior mean/variance on a fixed query grid, updated in O(n t) per point.

    Keeps ``V = L^{-1} k_t(grid)^T`` and ``c = L^{-1} y_t`` so that a rank-one
    Cholesky extension only appends one row to each. Falls back to a full
    recomputation whenever the factor is rebuilt (jitter, refit).
    """

    def __init__(self, model: GpPosterior, grid):
        self.grid = np.atleast_2d(np.asarray(grid, dtype=float))
        self._reset(model)

    def _reset(self, model):
        self.model = model
        n = len(self.grid)
        if model.t == 0:
            self._rows = np.empty((0, n))
            self._coef = np.empty(0)
            self.mean = np.zeros(n)
            self._var = np.full(n, model.kernel.signal_variance)
            return
        cross = kernel_matrix(model.kernel, self.grid, model.points)
        self._rows = linalg.solve_triangular(model.chol, cross.T, lower=True)
        self._coef = linalg.solve_triangular(model.chol, model.targets, lower=True)
        self.mean = self._rows.T @ self._coef
        self._var = model.kernel.signal_variance - np.einsum("ij,ij->j", self._rows, self._rows)

    @property
    def var(self):
        return np.maximum(self._var, 0.0)

    @property
    def std(self):
        return np.sqrt(self.var)

    def add(self, z, y):
        old = self.model
        new = old.add(z, y)
        t = old.t
        if t == 0 or new.jitter != old.jitter or not np.array_equal(new.chol[:t, :t], old.chol):
            self._reset(new)
            return new
        row, pivot = new.chol[t, :t], new.chol[t, t]
        k_new = kernel_matrix(new.kernel, self.grid, new.points[-1:])[:, 0]
        v_new = (k_new - row @ self._rows) / pivot
        c_new = (new.targets[-1] - row @ self._coef) / pivot
        self._rows = np.vstack([self._rows, v_new])
        self._coef = np.append(self._coef, c_new)
        self.mean = self.mean + v_new * c_new
        self._var = self._var - v_new**2
        self.model = new
        return new

    def replace(self, model: GpPosterior):
        self._reset(model)
