"""Covariance functions for the incidence forecaster.

The covariance between two weeks is the sum of three parts:

    k(i, j) = k_loc(dt) + k_qp(dt) * k_per(dt) + k_lin(x_i, x_j)

where dt = |i - j| is the distance in weeks and x_i, x_j are the
standardized climate covariates (rainfall, temperature, humidity)
attached to each week.

* k_loc  -- Matern-5/2 over time: nearby weeks correlate.
* k_qp * k_per -- quasi-periodic part: a Matern-5/2 envelope times an
  exp-sine-squared kernel, correlating the same phase of nearby seasons
  while letting distant seasons decorrelate.
* k_lin  -- linear kernel with a bias term and one inverse-squared
  lengthscale per covariate (large lengthscale = irrelevant covariate).

Observation noise enters the Gram matrix as an additive sigma_noise^2
on the diagonal.  All gradients are taken with respect to the natural
logarithm of each hyperparameter, which is the parameterization the
optimizer works in.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields

import numpy as np

SQRT5 = math.sqrt(5.0)

#: Canonical hyperparameter order for log-vector packing and gradients.
PARAM_NAMES = (
    "sigma_loc_sq",
    "ell_loc",
    "sigma_qp_sq",
    "ell_qp",
    "ell_per",
    "period",
    "sigma_lin_sq",
    "ell_rain",
    "ell_temp",
    "ell_hum",
    "sigma_noise_sq",
)

COVARIATE_DIM = 3


@dataclass(frozen=True)
class KernelHyperparameters:
    """The ten covariance-function parameters plus observation noise.

    Variances are on the squared log-incidence scale, time lengthscales
    in weeks, the ARD lengthscales in standardized-covariate units.
    All values are stored on the natural scale; ``to_log_vector`` /
    ``from_log_vector`` convert to the unconstrained representation used
    by the optimizer.

    ``sigma_noise_sq`` may be exactly zero (noiseless interpolation);
    every other parameter must be strictly positive.
    """

    sigma_loc_sq: float
    ell_loc: float
    sigma_qp_sq: float
    ell_qp: float
    ell_per: float
    period: float
    sigma_lin_sq: float
    ell_rain: float
    ell_temp: float
    ell_hum: float
    sigma_noise_sq: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not np.isfinite(v):
                raise ValueError(f"{f.name} must be finite, got {v!r}")
            if f.name == "sigma_noise_sq":
                if v < 0:
                    raise ValueError(f"sigma_noise_sq must be >= 0, got {v!r}")
            elif v <= 0:
                raise ValueError(f"{f.name} must be > 0, got {v!r}")

    @property
    def ard_lengthscales(self) -> np.ndarray:
        return np.array([self.ell_rain, self.ell_temp, self.ell_hum])

    def to_log_vector(self) -> np.ndarray:
        """Pack all 11 parameters as natural logs, in PARAM_NAMES order."""
        with np.errstate(divide="ignore"):  # log(0) -> -inf for zero noise
            return np.log([getattr(self, n) for n in PARAM_NAMES])

    @classmethod
    def from_log_vector(cls, log_theta) -> "KernelHyperparameters":
        log_theta = np.asarray(log_theta, dtype=float)
        if log_theta.shape != (len(PARAM_NAMES),):
            raise ValueError(f"expected {len(PARAM_NAMES)} log-parameters")
        return cls(**dict(zip(PARAM_NAMES, np.exp(log_theta))))

    def replace(self, **updates) -> "KernelHyperparameters":
        vals = {n: getattr(self, n) for n in PARAM_NAMES}
        vals.update(updates)
        return KernelHyperparameters(**vals)

    def to_dict(self) -> dict:
        return {n: float(getattr(self, n)) for n in PARAM_NAMES}

    @classmethod
    def from_dict(cls, d: dict) -> "KernelHyperparameters":
        return cls(**{n: float(d[n]) for n in PARAM_NAMES})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, s: str) -> "KernelHyperparameters":
        return cls.from_dict(json.loads(s))


@dataclass(frozen=True)
class KernelInput:
    """One week's kernel input: the week index plus its standardized
    (rainfall, temperature, humidity) covariate vector."""

    week: int
    covariates: np.ndarray

    def __post_init__(self):
        cov = np.asarray(self.covariates, dtype=float)
        if cov.shape != (COVARIATE_DIM,):
            raise ValueError(f"covariates must have shape ({COVARIATE_DIM},)")
        if not np.all(np.isfinite(cov)):
            raise ValueError("covariates must be finite")
        object.__setattr__(self, "covariates", cov)


def _check_positive(**params):
    for name, v in params.items():
        if not np.isfinite(v) or v <= 0:
            raise ValueError(f"{name} must be a finite positive number, got {v!r}")


def matern52(dt, variance, lengthscale):
    """Matern-5/2 kernel over the time axis.

        k(dt) = variance * (1 + sqrt(5) dt / l + 5 dt^2 / (3 l^2))
                         * exp(-sqrt(5) dt / l)

    Accepts a scalar or array of nonnegative week distances.
    """
    _check_positive(variance=variance, lengthscale=lengthscale)
    a = SQRT5 * np.asarray(dt, dtype=float) / lengthscale
    return variance * (1.0 + a + a * a / 3.0) * np.exp(-a)


def periodic(dt, period, roughness):
    """Exp-sine-squared kernel: exp(-2 sin^2(pi dt / p) / l_per^2).

    Unit amplitude; equals 1 exactly when dt is a multiple of the period.
    """
    _check_positive(period=period, roughness=roughness)
    s = np.sin(np.pi * np.asarray(dt, dtype=float) / period)
    return np.exp(-2.0 * s * s / (roughness * roughness))


def linear_ard(x_i, x_j, bias, lengthscales):
    """Linear kernel with bias: bias + sum_d x_i[d] x_j[d] / l_d^2."""
    x_i = np.asarray(x_i, dtype=float)
    x_j = np.asarray(x_j, dtype=float)
    ell = np.asarray(lengthscales, dtype=float)
    if x_i.shape != x_j.shape or x_i.shape != ell.shape:
        raise ValueError("covariate vectors and lengthscales must share a shape")
    _check_positive(**{f"lengthscale[{d}]": ell[d] for d in range(ell.size)})
    return float(bias + np.sum(x_i * x_j / (ell * ell)))


def composite_kernel(a: KernelInput, b: KernelInput, h: KernelHyperparameters) -> float:
    """Full three-part covariance between two weekly inputs (no noise)."""
    dt = abs(a.week - b.week)
    k1 = matern52(dt, h.sigma_loc_sq, h.ell_loc)
    k2 = matern52(dt, h.sigma_qp_sq, h.ell_qp) * periodic(dt, h.period, h.ell_per)
    k3 = linear_ard(a.covariates, b.covariates, h.sigma_lin_sq, h.ard_lengthscales)
    return float(k1 + k2 + k3)


def stack_inputs(inputs) -> tuple[np.ndarray, np.ndarray]:
    """Split a sequence of KernelInput into (weeks, covariate matrix)."""
    if len(inputs) == 0:
        raise ValueError("inputs must be non-empty")
    weeks = np.array([p.week for p in inputs], dtype=float)
    cov = np.vstack([p.covariates for p in inputs])
    return weeks, cov


def gram_from_arrays(weeks, cov, h: KernelHyperparameters, include_noise: bool) -> np.ndarray:
    """Vectorized Gram matrix over (weeks, covariates) arrays.

    The upper triangle is computed and mirrored so the result is exactly
    symmetric (BLAS matmuls are not).
    """
    weeks = np.asarray(weeks, dtype=float)
    cov = np.asarray(cov, dtype=float)
    dt = np.abs(weeks[:, None] - weeks[None, :])
    k = matern52(dt, h.sigma_loc_sq, h.ell_loc)
    k += matern52(dt, h.sigma_qp_sq, h.ell_qp) * periodic(dt, h.period, h.ell_per)
    ell = h.ard_lengthscales
    k += h.sigma_lin_sq + (cov / (ell * ell)) @ cov.T
    k = np.triu(k) + np.triu(k, 1).T
    if include_noise:
        k[np.diag_indices_from(k)] += h.sigma_noise_sq
    return k


def gram_matrix(inputs, h: KernelHyperparameters, include_noise: bool = True) -> np.ndarray:
    """Gram matrix K[i][j] = k(inputs[i], inputs[j]) (+ noise on the diagonal)."""
    weeks, cov = stack_inputs(inputs)
    return gram_from_arrays(weeks, cov, h, include_noise)


def kernel_vector(weeks, cov, query: KernelInput, h: KernelHyperparameters) -> np.ndarray:
    """Covariances k(query, x_i) against a training set, noise-free."""
    dt = np.abs(np.asarray(weeks, dtype=float) - float(query.week))
    k = matern52(dt, h.sigma_loc_sq, h.ell_loc)
    k += matern52(dt, h.sigma_qp_sq, h.ell_qp) * periodic(dt, h.period, h.ell_per)
    ell = h.ard_lengthscales
    k += h.sigma_lin_sq + np.asarray(cov, dtype=float) @ (query.covariates / (ell * ell))
    return k


def _matern_log_ell_grad(dt, variance, lengthscale):
    # d k / d log(l) for the Matern-5/2 part: variance * exp(-a) a^2 (1+a) / 3,
    # with a = sqrt(5) dt / l.
    a = SQRT5 * np.asarray(dt, dtype=float) / lengthscale
    return variance * np.exp(-a) * a * a * (1.0 + a) / 3.0


def gram_gradients(weeks, cov, h: KernelHyperparameters, include_noise: bool) -> np.ndarray:
    """Stack of dK/d(log theta) matrices, one per entry of PARAM_NAMES.

    Used by the marginal-likelihood gradient.  Each slice is mirrored
    from its upper triangle for exact symmetry, matching the Gram build.
    """
    weeks = np.asarray(weeks, dtype=float)
    cov = np.asarray(cov, dtype=float)
    n = weeks.size
    dt = np.abs(weeks[:, None] - weeks[None, :])

    k_loc = matern52(dt, h.sigma_loc_sq, h.ell_loc)
    m_qp = matern52(dt, h.sigma_qp_sq, h.ell_qp)
    k_per = periodic(dt, h.period, h.ell_per)
    u = np.pi * dt / h.period
    sin_u = np.sin(u)

    grads = np.empty((len(PARAM_NAMES), n, n))
    grads[0] = k_loc
    grads[1] = _matern_log_ell_grad(dt, h.sigma_loc_sq, h.ell_loc)
    grads[2] = m_qp * k_per
    grads[3] = _matern_log_ell_grad(dt, h.sigma_qp_sq, h.ell_qp) * k_per
    grads[4] = m_qp * k_per * 4.0 * sin_u * sin_u / (h.ell_per**2)
    grads[5] = m_qp * k_per * 2.0 * u * np.sin(2.0 * u) / (h.ell_per**2)
    grads[6] = np.full((n, n), h.sigma_lin_sq)
    ell = h.ard_lengthscales
    for d in range(COVARIATE_DIM):
        grads[7 + d] = -2.0 * np.outer(cov[:, d], cov[:, d]) / (ell[d] * ell[d])
    if include_noise:
        grads[10] = h.sigma_noise_sq * np.eye(n)
    else:
        grads[10] = np.zeros((n, n))

    for i in range(len(PARAM_NAMES)):
        grads[i] = np.triu(grads[i]) + np.triu(grads[i], 1).T
    return grads


def kernel_gradients(a: KernelInput, b: KernelInput, h: KernelHyperparameters) -> np.ndarray:
    """Partial derivatives of composite_kernel(a, b, h) w.r.t. each
    log-hyperparameter, in PARAM_NAMES order.

    The noise entry is identically zero: the pairwise kernel carries no
    Kronecker-delta term (that lives on the Gram diagonal only).
    """
    weeks = np.array([a.week, b.week], dtype=float)
    cov = np.vstack([a.covariates, b.covariates])
    return gram_gradients(weeks, cov, h, include_noise=False)[:, 0, 1]
