"""Application models: parameter classes, losses, the median wavelet estimator
and the modulus of continuity."""

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy import stats

from . import haar
from .errors import ConfigurationError, ContractError
from .measures import (
    ContaminatedSource,
    EmpiricalMeasure,
    HaarDensity,
    LinearRegression,
    PointMass,
    TraceRegression,
    WhiteNoiseSequence,
    make_model,
    sample,
    tv_distance,
)


def diagonal_design_covariance(p, condition=4.0):
    """Diagonal covariance with eigenvalues evenly spread on ``[1, condition]``.

    Keeps the sparse/restricted eigenvalue levels within ``sqrt(condition)``
    of each other.
    """
    if condition < 1:
        raise ConfigurationError("condition number must be >= 1")
    return np.diag(np.linspace(1.0, condition, p)) if p > 1 else np.eye(1)


def sparse_eigenvalue_bounds(cov, k, max_subsets=20_000):
    """``(kappa, kappa_u)``: extreme values of ``||cov^{1/2} v|| / ||v||`` over ``k``-sparse ``v``.

    Exact by subset enumeration when feasible; for diagonal ``cov`` the
    answer is read off the diagonal.
    """
    cov = np.asarray(cov, dtype=float)
    p = cov.shape[0]
    k = min(k, p)
    if np.allclose(cov, np.diag(np.diag(cov))):
        d = np.sort(np.diag(cov))
        return float(np.sqrt(d[0])), float(np.sqrt(d[-1]))
    lo, hi = np.inf, 0.0
    for i, S in enumerate(combinations(range(p), k)):
        if i >= max_subsets:
            raise ConfigurationError("too many supports to enumerate; use a diagonal covariance")
        ev = np.linalg.eigvalsh(cov[np.ix_(S, S)])
        lo, hi = min(lo, ev[0]), max(hi, ev[-1])
    return float(np.sqrt(lo)), float(np.sqrt(hi))


def _ratios(cov, directions):
    return np.sqrt(np.einsum("ij,jk,ik->i", directions, cov, directions)) / np.linalg.norm(directions, axis=1)


def spot_check_sparse_eigenvalues(cov, s, kappa, kappa_u, n_dirs=500, seed=0):
    """True when random ``2s``-sparse directions respect ``[kappa, kappa_u]``."""
    rng = np.random.default_rng(seed)
    p = np.shape(cov)[0]
    dirs = np.zeros((n_dirs, p))
    for i in range(n_dirs):
        S = rng.choice(p, size=min(2 * s, p), replace=False)
        dirs[i, S] = rng.standard_normal(len(S))
    r = _ratios(np.asarray(cov), dirs)
    return bool(np.all(r >= kappa * (1 - 1e-12)) and np.all(r <= kappa_u * (1 + 1e-12)))


def spot_check_restricted_isometry(cov, shape, r, kappa, kappa_u, n_dirs=500, seed=0):
    """True when random rank-``<= 2r`` matrices respect ``[kappa, kappa_u]``."""
    rng = np.random.default_rng(seed)
    p1, p2 = shape
    rank = min(2 * r, p1, p2)
    A = rng.standard_normal((n_dirs, p1, rank)) @ rng.standard_normal((n_dirs, rank, p2))
    vecs = A.transpose(0, 2, 1).reshape(n_dirs, -1)  # column-major vec
    ratios = _ratios(np.asarray(cov), vecs)
    return bool(np.all(ratios >= kappa * (1 - 1e-12)) and np.all(ratios <= kappa_u * (1 + 1e-12)))


@dataclass(frozen=True, eq=False)
class SparseRegressionParam:
    """A point of ``{theta : |supp| <= s, ||theta|| <= snr sigma / kappa}``."""

    theta: np.ndarray
    s: int
    cov: np.ndarray
    sigma: float = 1.0
    snr: float = 1.0

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "cov", cov)
        if self.sigma <= 0:
            raise ConfigurationError("sigma must be positive")
        if np.count_nonzero(theta) > self.s:
            raise ConfigurationError(f"theta has {np.count_nonzero(theta)} nonzeros, cap is {self.s}")
        if np.linalg.norm(theta) > self.radius * (1 + 1e-12):
            raise ConfigurationError(f"||theta|| exceeds snr sigma / kappa = {self.radius:.6g}")

    @property
    def kappas(self):
        return sparse_eigenvalue_bounds(self.cov, 2 * self.s)

    @property
    def radius(self):
        return self.snr * self.sigma / self.kappas[0]

    def model(self):
        return LinearRegression(self.theta, self.cov, self.sigma)


@dataclass(frozen=True, eq=False)
class LowRankParam:
    """A point of ``{A : rank(A) <= r, ||A||_F <= snr sigma / kappa}``.

    ``kappa`` defaults to the smallest singular value of ``cov^{1/2}``, a
    valid (conservative) restricted isometry constant.
    """

    A: np.ndarray
    r: int
    cov: np.ndarray
    sigma: float = 1.0
    snr: float = 1.0

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "cov", np.asarray(self.cov, dtype=float))
        if self.sigma <= 0:
            raise ConfigurationError("sigma must be positive")
        if np.linalg.matrix_rank(A, tol=1e-9) > self.r:
            raise ConfigurationError(f"rank(A) exceeds {self.r}")
        if np.linalg.norm(A) > self.radius * (1 + 1e-12):
            raise ConfigurationError(f"||A||_F exceeds snr sigma / kappa = {self.radius:.6g}")

    @property
    def kappas(self):
        ev = np.linalg.eigvalsh(self.cov)
        return float(np.sqrt(ev[0])), float(np.sqrt(ev[-1]))

    @property
    def radius(self):
        return self.snr * self.sigma / self.kappas[0]

    def model(self):
        return TraceRegression(self.A, self.cov, self.sigma)


def check_holder(coeffs, beta, scale, density=False, tol=1e-9):
    """Membership in the Haar Holder ball (and the density class when ``density``)."""
    ok = haar.holder_radius(coeffs, beta) <= scale * (1 + tol)
    if density:
        ok = ok and haar.synthesize(coeffs, base=1.0).min() >= -tol
    return bool(ok)


def random_holder_coefficients(rng, max_level, beta, scale, density=True, max_tries=1000):
    """Uniform draw from the coefficient box, redrawn until it is a valid density."""
    caps = haar.holder_bounds(max_level, beta, scale)
    for _ in range(max_tries):
        c = rng.uniform(-1.0, 1.0, size=caps.size) * caps
        if not density or haar.synthesize(c, base=1.0).min() >= 0:
            return c
    raise ConfigurationError("could not draw a nonnegative density; lower the scale")


@dataclass(frozen=True, eq=False)
class WhiteNoiseSample:
    """``n`` observed coefficient arrays ``y_{lk,i}`` for levels ``0..max_level``."""

    y: np.ndarray
    mask: np.ndarray = None

    def __post_init__(self):
        y = np.atleast_2d(np.asarray(self.y, dtype=float))
        object.__setattr__(self, "y", y)
        haar.max_level_of(y)

    @property
    def n(self):
        return self.y.shape[0]

    @property
    def max_level(self):
        return haar.max_level_of(self.y)

    @classmethod
    def from_empirical(cls, data):
        return cls(data.samples, data.mask)


def truncation_level(n, beta, eps):
    """Largest level ``J`` with ``2**J <= (log n / n  v  eps^2)^(-1/(2 beta + 1))``."""
    rate = max(np.log(n) / n, eps**2)
    bound = rate ** (-1.0 / (2.0 * beta + 1.0))
    level = int(np.floor(np.log2(bound)))
    # guard the floor against rounding when bound is an exact power of two
    while 2.0 ** (level + 1) <= bound:
        level += 1
    while level > 0 and 2.0**level > bound:
        level -= 1
    return max(level, 0)


def median_wavelet_estimator(data, beta, eps):
    """Coordinatewise median of the empirical wavelet coefficients up to the truncation level.

    Uses the lower median (order statistic ``(n-1)//2``) so that the
    estimate is exactly shift-equivariant in floating point for any ``n``.
    Coefficients above the level are zero.  Returns a vector with the data's
    coefficient layout.
    """
    if isinstance(data, EmpiricalMeasure):
        data = WhiteNoiseSample.from_empirical(data)
    if not eps < 0.25:
        raise ConfigurationError("the median estimator needs eps < 1/4")
    n = data.n
    if n < 2:
        raise ConfigurationError("need at least two observations")
    level = truncation_level(n, beta, eps)
    if data.max_level < level:
        raise ConfigurationError(f"data resolve levels up to {data.max_level}, estimator needs {level}")
    est = np.zeros(data.y.shape[1])
    keep = haar.n_coefficients(level)
    k = (n - 1) // 2
    est[:keep] = np.partition(data.y[:, :keep], k, axis=0)[k]
    return est


def losses(estimate, truth):
    """Every loss that applies to the pair's family, as a dict of floats."""
    if not estimate.compatible(truth):
        raise ContractError("estimate and truth must come from the same family")
    out = {"tv_loss": tv_distance(estimate, truth)}
    family = truth.family
    if family == "gaussian-location":
        d = estimate.theta - truth.theta
        out["l2_sq"] = float(d @ d)
        out["mahalanobis_sq"] = float(truth.mahalanobis(estimate.theta)[0] ** 2)
    elif family == "regression":
        d = estimate.theta - truth.theta
        out["prediction_loss"] = float(d @ truth.cov @ d)
        out["estimation_loss"] = float(d @ d)
    elif family == "trace-regression":
        d = (estimate.theta - truth.theta).reshape(-1, order="F")
        out["prediction_loss"] = float(d @ truth.cov @ d)
        out["frobenius_loss"] = float(d @ d)
    elif family == "haar-density":
        diff = estimate.values - truth.values
        out["l1"] = float(np.mean(np.abs(diff)))
        out["l1_sq"] = out["l1"] ** 2
        out["sup_loss"] = float(np.max(np.abs(diff)))
        out["sup_loss_sq"] = out["sup_loss"] ** 2
        out["wavelet_sup"] = haar.wavelet_sup_norm(estimate.theta - truth.theta)
    elif family == "white-noise-seq":
        d = estimate.theta - truth.theta
        out["l2_sq"] = float(d @ d)
        out["sup_loss"] = float(np.max(np.abs(haar.synthesize(d))))
        out["sup_loss_sq"] = out["sup_loss"] ** 2
        out["wavelet_sup"] = haar.wavelet_sup_norm(d)
    return out


@dataclass
class ModulusResult:
    value: float
    pair: tuple
    feasible: bool = True
    threshold: float = float("nan")


def _tv_threshold(eps):
    if not 0.0 < eps < 1.0:
        raise ConfigurationError("eps must lie in (0, 1)")
    return eps / (1.0 - eps)


def modulus_of_continuity(net, eps, loss="tv_loss"):
    """``sup {loss(a, b) : TV(P_a, P_b) <= eps/(1-eps)}`` over pairs of net centers.

    ``loss`` is a key of :func:`losses` or a callable on two models.  When no
    distinct pair is feasible the result is ``0`` with ``feasible=False``.
    """
    t = _tv_threshold(eps)
    fn = loss if callable(loss) else (lambda a, b: losses(a, b)[loss])
    best, pair = 0.0, None
    models = net.models
    for i in range(net.m):
        for j in range(i + 1, net.m):
            if net.tv_matrix[i, j] <= t:
                v = fn(models[i], models[j])
                if pair is None or v > best:
                    best, pair = v, (i, j)
    return ModulusResult(float(best), pair, pair is not None, t)


def gaussian_location_modulus(eps):
    """Closed form for squared-l2 loss on an unbounded identity-covariance location family."""
    t = _tv_threshold(eps)
    if t >= 1.0:
        return ModulusResult(np.inf, None, True, t)
    delta = 2.0 * stats.norm.ppf((1.0 + t) / 2.0)
    return ModulusResult(float(delta**2), (0.0, float(delta)), True, t)


def white_noise_sup_modulus(eps, beta, scale, max_level=None):
    """Sup-norm modulus realised by ``f1 = 0``, ``f2 = eps * psi_{top, 1}``.

    ``top`` is the largest level with ``2**(top (1/2 + beta)) eps <= scale``.
    Returns the sup-norm distance and the two coefficient vectors.
    """
    t = _tv_threshold(eps)
    top = int(np.floor(np.log2(scale / eps) / (0.5 + beta)))
    while 2.0 ** ((top + 1) * (0.5 + beta)) * eps <= scale:
        top += 1
    while top > 0 and 2.0 ** (top * (0.5 + beta)) * eps > scale:
        top -= 1
    if top < 0:
        return ModulusResult(0.0, None, False, t)
    depth = top if max_level is None else max(max_level, top)
    f1 = np.zeros(haar.n_coefficients(depth))
    f2 = f1.copy()
    k = min(1, 2**top - 1)
    f2[2**top - 1 + k] = eps
    m1, m2 = WhiteNoiseSequence(f1), WhiteNoiseSequence(f2)
    value = float(np.max(np.abs(haar.synthesize(f2 - f1))))
    return ModulusResult(value, (f1, f2), tv_distance(m1, m2) <= t, t)


# -- sampler factories -----------------------------------------------------


def build_model_samplers(family, theta, **nuisance):
    """Model plus a factory of contaminated sources for it.

    Returns ``(model, source)`` where ``source(eps, contaminant=None, seed=0)``
    builds a :class:`ContaminatedSource`.
    """
    model = make_model(family, theta, **nuisance)

    def source(eps, contaminant=None, seed=0):
        return ContaminatedSource(eps, model, PointMass(0.0) if contaminant is None else contaminant, seed)

    return model, source


def white_noise_data(f, n, eps=0.0, contaminant=None, seed=0):
    """Sample ``n`` coefficient arrays from ``(1-eps) P_f + eps Q``."""
    model = WhiteNoiseSequence(f)
    src = ContaminatedSource(eps, model, PointMass(0.0) if contaminant is None else contaminant, seed)
    return WhiteNoiseSample.from_empirical(sample(src, n, seed))


def haar_density_model(coeffs, beta=None, scale=None):
    """Haar density, checked against the Holder ball when ``beta`` and ``scale`` are given."""
    if beta is not None and scale is not None and not check_holder(coeffs, beta, scale, density=True):
        raise ConfigurationError("coefficients are outside the Holder density class")
    return HaarDensity(coeffs)
