"""Model families, contaminated sampling and closed-form distances.

Every family exposes the same small surface used by the tests and the
tournament: ``logpdf``, ``sample``, ``with_theta``, ``tv_many`` (total
variation from ``self`` to a stack of parameters) and ``set_probability``
(the probability, under ``self``, of the set ``{p_a > p_b}``).

Sample points are always rows of a 2-D float array:

* ``gaussian-location``: ``x`` in R^d
* ``regression``: ``[X_1 .. X_p, y]``
* ``trace-regression``: ``[vec(X) (column-major), y]``
* ``haar-density``: a single coordinate in ``[0, 1)``
* ``white-noise-seq``: the Haar coefficients ``y_lk`` up to the model level
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from . import haar
from .errors import ConfigurationError, ContractError, DomainError

FAMILIES = (
    "gaussian-location",
    "regression",
    "trace-regression",
    "haar-density",
    "white-noise-seq",
)

QUADRATURE_NODES = 64
_HALF_LINE_END = 10.0
_LEG_X, _LEG_W = np.polynomial.legendre.leggauss(QUADRATURE_NODES)

MC_SET_DRAWS = 10**6


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _half_line_rule(split):
    """Nodes/weights for E[g(|Z|)] on Gauss-Legendre panels [0, split], [split, 10].

    Vectorised over an array of split points; a zero-width second panel gets
    zero weight.
    """
    split = np.asarray(split, dtype=float)[..., None]
    u = (_LEG_X + 1.0) / 2.0
    z = np.concatenate([split * u, split + (_HALF_LINE_END - split) * u], axis=-1)
    half_w = _LEG_W / 2.0
    w = np.concatenate([split * half_w, (_HALF_LINE_END - split) * half_w], axis=-1)
    return z, w * 2.0 * np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)


def _abs_normal_expectation(func, a):
    """``E func(a, |Z|)`` for Z ~ N(0, 1), vectorised over the scale ``a``.

    The integrand is smooth on the half line, so it is integrated there to
    avoid the kink of ``|z|`` at the origin.  For ``a > 1`` the first panel
    ends at ``10 / a`` where the integrand saturates.
    """
    arr = np.asarray(a, dtype=float)
    flat = np.atleast_1d(arr).ravel()
    split = np.where(flat > 1.0, _HALF_LINE_END / np.maximum(flat, 1.0), _HALF_LINE_END)
    z, w = _half_line_rule(split)
    out = np.sum(w * func(flat[:, None], z), axis=-1)
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


def design_tv(a):
    """``E[2 Phi(a |Z| / 2) - 1]``: TV between Gaussian-design regressions."""
    return _abs_normal_expectation(lambda s, z: special.erf(s * z / (2.0 * np.sqrt(2.0))), a)


def design_affinity(a):
    """Hellinger affinity ``E exp(-a^2 Z^2 / 8)`` for Gaussian-design regressions."""
    return _abs_normal_expectation(lambda s, z: np.exp(-(s * z) ** 2 / 8.0), a)


def location_tv(delta):
    """``2 Phi(delta/2) - 1``, TV between Gaussians at Mahalanobis distance ``delta``."""
    return special.erf(np.asarray(delta, dtype=float) / (2.0 * np.sqrt(2.0)))


def _check_cov(cov, dim):
    cov = np.array(cov, dtype=float)
    if cov.shape != (dim, dim):
        raise ConfigurationError(f"covariance must be {dim}x{dim}, got {cov.shape}")
    if not np.allclose(cov, cov.T, atol=1e-12):
        raise ConfigurationError("covariance must be symmetric")
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise ConfigurationError("covariance must be positive definite") from None
    return _frozen(cov), _frozen(chol)


def _check_sigma(sigma):
    sigma = float(sigma)
    if not sigma > 0:
        raise ConfigurationError(f"noise scale must be positive, got {sigma}")
    return sigma


class Model:
    """A member ``P_theta`` of one parametric family.

    Subclasses are immutable after construction and safe to share between
    threads; sampling takes an explicit generator.
    """

    family = None

    @property
    def dim(self):
        raise NotImplementedError

    def logpdf(self, x):
        raise NotImplementedError

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def sample(self, rng, n):
        raise NotImplementedError

    def nuisance(self):
        """JSON-friendly dict of everything except ``theta``."""
        return {}

    def with_theta(self, theta):
        return type(self)(theta, **self._nuisance_kwargs())

    def _nuisance_kwargs(self):
        return {}

    def compatible(self, other):
        if type(self) is not type(other) or self.theta.shape != other.theta.shape:
            return False
        mine, theirs = self._nuisance_kwargs(), other._nuisance_kwargs()
        return all(np.array_equal(np.asarray(mine[k]), np.asarray(theirs[k])) for k in mine)

    def check_compatible(self, other):
        if not self.compatible(other):
            raise ContractError(
                f"models are not comparable: {self.family} vs {getattr(other, 'family', other)}"
            )

    def tv_many(self, thetas):
        """Total variation from ``self`` to each parameter in ``thetas``."""
        raise NotImplementedError

    def set_probability(self, a, b):
        """``P_self({p_a > p_b})``; Monte Carlo unless a subclass knows better."""
        return monte_carlo_set_probability(self, a, b)[0]

    def hellinger(self, other):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(theta={self.theta.tolist()!r})"


def monte_carlo_set_probability(model, a, b, draws=MC_SET_DRAWS, seed=0):
    """Seeded Monte Carlo estimate of ``P_model({p_a > p_b})`` and its standard error."""
    rng = np.random.default_rng(seed)
    x = model.sample(rng, draws)
    p = float(np.mean(a.logpdf(x) > b.logpdf(x)))
    return p, float(np.sqrt(max(p * (1.0 - p), 0.0) / draws))


class GaussianLocation(Model):
    """``N(theta, cov)`` with known covariance (identity by default)."""

    family = "gaussian-location"

    def __init__(self, theta, cov=None):
        self.theta = _frozen(np.atleast_1d(theta))
        if self.theta.ndim != 1:
            raise ConfigurationError("location parameter must be a vector")
        d = self.theta.size
        self.cov, self._chol = _check_cov(np.eye(d) if cov is None else cov, d)
        self._prec = _frozen(np.linalg.inv(self.cov))
        self._logdet = float(2.0 * np.sum(np.log(np.diag(self._chol))))

    @property
    def dim(self):
        return self.theta.size

    def _nuisance_kwargs(self):
        return {"cov": self.cov}

    def nuisance(self):
        return {"cov": self.cov.tolist()}

    def mahalanobis(self, thetas):
        d = np.atleast_2d(np.asarray(thetas, dtype=float)) - self.theta
        return np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", d, self._prec, d), 0.0))

    def logpdf(self, x):
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        d = x - self.theta
        q = np.einsum("ij,jk,ik->i", d, self._prec, d)
        return -0.5 * (q + self._logdet + self.dim * np.log(2.0 * np.pi))

    def sample(self, rng, n):
        return self.theta + rng.standard_normal((n, self.dim)) @ self._chol.T

    def tv_many(self, thetas):
        return location_tv(self.mahalanobis(thetas))

    def set_probability(self, a, b):
        u = b.theta - a.theta
        s = float(np.sqrt(u @ self._prec @ u))
        if s == 0.0:
            return 0.0
        c = b.theta @ self._prec @ b.theta - a.theta @ self._prec @ a.theta
        return float(stats.norm.cdf((c - 2.0 * u @ self._prec @ self.theta) / (2.0 * s)))

    def hellinger(self, other):
        self.check_compatible(other)
        delta = self.mahalanobis(other.theta)[0]
        return float(np.sqrt(2.0 - 2.0 * np.exp(-(delta**2) / 8.0)))


class LinearRegression(Model):
    """``X ~ N(0, cov)``, ``y | X ~ N(X^T theta, sigma^2)``."""

    family = "regression"

    def __init__(self, theta, cov=None, sigma=1.0):
        self.theta = _frozen(np.atleast_1d(theta))
        if self.theta.ndim != 1:
            raise ConfigurationError("regression parameter must be a vector")
        p = self.theta.size
        self.cov, self._chol = _check_cov(np.eye(p) if cov is None else cov, p)
        self.sigma = _check_sigma(sigma)
        self._prec = _frozen(np.linalg.inv(self.cov))
        self._logdet = float(2.0 * np.sum(np.log(np.diag(self._chol))))

    @property
    def p(self):
        return self.theta.size

    @property
    def dim(self):
        return self.p + 1

    def _nuisance_kwargs(self):
        return {"cov": self.cov, "sigma": self.sigma}

    def nuisance(self):
        return {"cov": self.cov.tolist(), "sigma": self.sigma}

    def _flat(self, theta):
        return np.asarray(theta, dtype=float).reshape(-1, self.p)

    def signal_to_noise(self, thetas):
        """``||cov^{1/2} (theta' - theta)|| / sigma`` for each ``theta'``."""
        d = self._flat(thetas) - self.theta.reshape(-1)
        return np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", d, self.cov, d), 0.0)) / self.sigma

    def split(self, x):
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        return x[:, :-1], x[:, -1]

    def logpdf(self, x):
        X, y = self.split(x)
        qx = np.einsum("ij,jk,ik->i", X, self._prec, X)
        r = y - X @ self.theta.reshape(-1)
        return (
            -0.5 * (qx + self._logdet + self.p * np.log(2.0 * np.pi))
            - 0.5 * (r / self.sigma) ** 2
            - np.log(self.sigma)
            - 0.5 * np.log(2.0 * np.pi)
        )

    def sample(self, rng, n):
        X = rng.standard_normal((n, self.p)) @ self._chol.T
        y = X @ self.theta.reshape(-1) + self.sigma * rng.standard_normal(n)
        return np.column_stack([X, y])

    def tv_many(self, thetas):
        return design_tv(self.signal_to_noise(thetas))

    def set_probability(self, a, b):
        ta, tb, tc = (m.theta.reshape(-1) for m in (a, b, self))
        ud = tb - ta
        if not np.any(ud):
            return 0.0
        if np.array_equal(tc, ta) or np.array_equal(tc, tb):
            inside = 0.5 * (1.0 + design_tv(self.signal_to_noise(ud + self.theta.reshape(-1)))[0])
            return float(inside if np.array_equal(tc, ta) else 1.0 - inside)
        # {p_a > p_b} = {d * w < 0} with (d, w) a centred bivariate normal
        ue = 2.0 * tc - ta - tb
        cov_dw = ud @ self.cov @ ue
        var_d = ud @ self.cov @ ud
        var_w = ue @ self.cov @ ue + 4.0 * self.sigma**2
        rho = np.clip(cov_dw / np.sqrt(var_d * var_w), -1.0, 1.0)
        return float(0.5 - np.arcsin(rho) / np.pi)

    def hellinger(self, other):
        self.check_compatible(other)
        aff = design_affinity(self.signal_to_noise(other.theta))[0]
        return float(np.sqrt(max(2.0 - 2.0 * aff, 0.0)))


class TraceRegression(LinearRegression):
    """``vec(X) ~ N(0, cov)``, ``y | X ~ N(Tr(X^T A), sigma^2)``.

    ``vec`` is column-major throughout, so ``Tr(X^T A) = vec(X) . vec(A)``.
    """

    family = "trace-regression"

    def __init__(self, theta, cov=None, sigma=1.0):
        A = np.array(theta, dtype=float)
        if A.ndim != 2:
            raise ConfigurationError("trace-regression parameter must be a matrix")
        self.shape = A.shape
        super().__init__(A.reshape(-1, order="F"), cov=cov, sigma=sigma)
        self.theta = _frozen(A)

    @property
    def p(self):
        return self.shape[0] * self.shape[1]

    def _flat(self, theta):
        t = np.asarray(theta, dtype=float)
        if t.shape == self.shape:
            return t.reshape(1, -1, order="F")
        if t.ndim == 3:
            return t.reshape(t.shape[0], -1, order="F")
        return t.reshape(-1, self.p)

    def signal_to_noise(self, thetas):
        d = self._flat(thetas) - self.theta.reshape(-1, order="F")
        return np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", d, self.cov, d), 0.0)) / self.sigma

    def logpdf(self, x):
        X, y = self.split(x)
        qx = np.einsum("ij,jk,ik->i", X, self._prec, X)
        r = y - X @ self.theta.reshape(-1, order="F")
        return (
            -0.5 * (qx + self._logdet + self.p * np.log(2.0 * np.pi))
            - 0.5 * (r / self.sigma) ** 2
            - np.log(self.sigma)
            - 0.5 * np.log(2.0 * np.pi)
        )

    def sample(self, rng, n):
        X = rng.standard_normal((n, self.p)) @ self._chol.T
        y = X @ self.theta.reshape(-1, order="F") + self.sigma * rng.standard_normal(n)
        return np.column_stack([X, y])

    def set_probability(self, a, b):
        flat = [LinearRegression(m.theta.reshape(-1, order="F"), self.cov, self.sigma) for m in (a, b, self)]
        if self is a:
            flat[2] = flat[0]
        elif self is b:
            flat[2] = flat[1]
        return flat[2].set_probability(flat[0], flat[1])

    def hellinger(self, other):
        self.check_compatible(other)
        aff = design_affinity(self.signal_to_noise(other.theta))[0]
        return float(np.sqrt(max(2.0 - 2.0 * aff, 0.0)))


class HaarDensity(Model):
    """Density ``1 + sum_lk f_lk psi_lk`` on ``[0, 1]``.

    ``theta`` is the Haar detail-coefficient vector for levels ``0..max_level``;
    the density is piecewise constant on ``2**(max_level+1)`` cells.
    """

    family = "haar-density"

    def __init__(self, theta, tol=1e-12):
        self.theta = _frozen(theta)
        self.max_level = haar.max_level_of(self.theta)
        values = haar.synthesize(self.theta, base=1.0)
        if np.min(values) < -tol:
            raise ConfigurationError("Haar coefficients give a negative density")
        self.values = _frozen(np.maximum(values, 0.0))

    @property
    def dim(self):
        return 1

    @property
    def n_cells(self):
        return self.values.size

    def _nuisance_kwargs(self):
        return {}

    def compatible(self, other):
        return type(other) is HaarDensity and other.max_level == self.max_level

    def nuisance(self):
        return {"max_level": self.max_level}

    def cell_of(self, x):
        x = np.asarray(x, dtype=float).reshape(-1)
        return np.clip(np.floor(x * self.n_cells), 0, self.n_cells - 1).astype(np.intp)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float).reshape(-1)
        inside = (x >= 0.0) & (x < 1.0)
        with np.errstate(divide="ignore"):
            logv = np.log(self.values)
        return np.where(inside, logv[self.cell_of(x)], -np.inf)

    def sample(self, rng, n):
        probs = self.values / self.values.sum()
        cells = rng.choice(self.n_cells, size=n, p=probs)
        return ((cells + rng.random(n)) / self.n_cells).reshape(-1, 1)

    def cell_values_many(self, thetas):
        return haar.synthesize(np.atleast_2d(thetas), base=1.0)

    def tv_many(self, thetas):
        other = np.maximum(self.cell_values_many(thetas), 0.0)
        return 0.5 * np.mean(np.abs(other - self.values), axis=1)

    def set_probability(self, a, b):
        cells = a.values > b.values
        return float(np.sum(self.values[cells]) / self.n_cells)

    def hellinger(self, other):
        self.check_compatible(other)
        return float(np.sqrt(np.mean((np.sqrt(self.values) - np.sqrt(other.values)) ** 2)))


class WhiteNoiseSequence(Model):
    """Sequence-space white noise: ``y_lk = f_lk + z_lk``, ``z_lk ~ N(0, 1)``."""

    family = "white-noise-seq"

    def __init__(self, theta):
        self.theta = _frozen(theta)
        self.max_level = haar.max_level_of(self.theta)

    @property
    def dim(self):
        return self.theta.size

    def compatible(self, other):
        return type(other) is WhiteNoiseSequence and other.max_level == self.max_level

    def nuisance(self):
        return {"max_level": self.max_level}

    def logpdf(self, x):
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        return -0.5 * np.sum((x - self.theta) ** 2, axis=1) - 0.5 * self.dim * np.log(2.0 * np.pi)

    def sample(self, rng, n):
        return self.theta + rng.standard_normal((n, self.dim))

    def tv_many(self, thetas):
        d = np.atleast_2d(np.asarray(thetas, dtype=float)) - self.theta
        return location_tv(np.linalg.norm(d, axis=1))

    def set_probability(self, a, b):
        u = b.theta - a.theta
        s = float(np.linalg.norm(u))
        if s == 0.0:
            return 0.0
        c = b.theta @ b.theta - a.theta @ a.theta
        return float(stats.norm.cdf((c - 2.0 * u @ self.theta) / (2.0 * s)))

    def hellinger(self, other):
        self.check_compatible(other)
        delta = float(np.linalg.norm(self.theta - other.theta))
        return float(np.sqrt(2.0 - 2.0 * np.exp(-(delta**2) / 8.0)))


_FAMILY_CLASSES = {
    "gaussian-location": GaussianLocation,
    "regression": LinearRegression,
    "trace-regression": TraceRegression,
    "haar-density": HaarDensity,
    "white-noise-seq": WhiteNoiseSequence,
}


def make_model(family, theta, **nuisance):
    """Build a model from its family tag, parameter and JSON nuisance dict."""
    try:
        cls = _FAMILY_CLASSES[family]
    except KeyError:
        raise ConfigurationError(f"unknown family {family!r}; expected one of {FAMILIES}") from None
    nuisance = dict(nuisance)
    nuisance.pop("max_level", None)
    return cls(theta, **nuisance)


def tv_distance(p, q):
    """Exact total variation distance between two members of one family."""
    p.check_compatible(q)
    return float(p.tv_many(q.theta[None, ...])[0])


def hellinger_distance(p, q):
    """Hellinger distance ``[int (sqrt dP - sqrt dQ)^2]^{1/2}``, in ``[0, sqrt 2]``."""
    p.check_compatible(q)
    return p.hellinger(q)


def lecam_birge_bound(p0, p1, tau, n):
    """Hellinger-ball testing error ``2 exp(-n/2 (H(P0,P1) - 2 tau)^2)``."""
    h = hellinger_distance(p0, p1)
    return hellinger_ball_bound(h, tau, n)


def hellinger_ball_bound(h, tau, n):
    if not tau < h / 2.0:
        raise DomainError(f"need tau < H/2 = {h / 2.0}, got tau = {tau}")
    return float(2.0 * np.exp(-n / 2.0 * (h - 2.0 * tau) ** 2))


# -- contamination ---------------------------------------------------------


class Contaminant:
    """A distribution ``Q`` over the sample space of some core model."""

    name = "contaminant"

    def sample(self, rng, n, core):
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True)
class PointMass(Contaminant):
    """All contaminated draws equal ``location`` (a scalar is broadcast)."""

    location: object = 0.0
    name = "point-mass"

    def sample(self, rng, n, core):
        loc = np.broadcast_to(np.asarray(self.location, dtype=float), (core.dim,))
        return np.tile(loc, (n, 1))

    def to_dict(self):
        return {"kind": "point-mass", "location": np.asarray(self.location).tolist()}


@dataclass(frozen=True)
class ShiftedGaussian(Contaminant):
    """A core draw translated by ``shift``.

    For the Gaussian families this is a Gaussian with shifted mean.
    """

    shift: object = 10.0
    name = "gaussian-shifted"

    def sample(self, rng, n, core):
        shift = np.broadcast_to(np.asarray(self.shift, dtype=float), (core.dim,))
        return core.sample(rng, n) + shift

    def to_dict(self):
        return {"kind": "gaussian-shifted", "shift": np.asarray(self.shift).tolist()}


@dataclass(frozen=True)
class Cauchy(Contaminant):
    """Independent Cauchy coordinates."""

    loc: float = 0.0
    scale: float = 1.0
    name = "cauchy"

    def sample(self, rng, n, core):
        return self.loc + self.scale * rng.standard_cauchy((n, core.dim))

    def to_dict(self):
        return {"kind": "cauchy", "loc": self.loc, "scale": self.scale}


@dataclass(frozen=True)
class SampleList(Contaminant):
    """Uniform resampling from a user-supplied list of points."""

    points: tuple = ()
    name = "sample-list"

    def sample(self, rng, n, core):
        pts = np.asarray(self.points, dtype=float).reshape(-1, core.dim)
        if len(pts) == 0:
            raise ConfigurationError("sample-list contaminant is empty")
        return pts[rng.integers(0, len(pts), size=n)]

    def to_dict(self):
        return {"kind": "sample-list", "points": np.asarray(self.points).tolist()}


def contaminant_from_dict(spec):
    spec = dict(spec)
    kind = spec.pop("kind", None)
    builders = {
        "point-mass": PointMass,
        "gaussian-shifted": ShiftedGaussian,
        "cauchy": Cauchy,
        "sample-list": lambda points: SampleList(tuple(map(tuple, np.atleast_2d(points)))),
    }
    if kind not in builders:
        raise ConfigurationError(f"unknown contaminant kind {kind!r}")
    try:
        return builders[kind](**spec)
    except TypeError as exc:
        raise ConfigurationError(f"bad {kind} contaminant: {exc}") from None


@dataclass(frozen=True, eq=False)
class ContaminatedSource:
    """The mixture ``(1 - epsilon) P_theta + epsilon Q``."""

    epsilon: float
    core: Model
    contaminant: Contaminant = field(default_factory=PointMass)
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 1.0:
            raise ConfigurationError(f"epsilon must lie in [0, 1), got {self.epsilon}")


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """Observed sample with the (diagnostic) contamination mask."""

    samples: np.ndarray
    mask: np.ndarray = None

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim == 1:
            s = s.reshape(-1, 1)
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        if self.mask is None:
            object.__setattr__(self, "mask", np.zeros(len(s), dtype=bool))

    @property
    def n(self):
        return len(self.samples)

    def prob(self, predicate):
        """``P_n(A) = #{i : x_i in A} / n`` for a vectorised predicate."""
        return float(np.mean(predicate(self.samples)))


def sample(source, n, seed=None):
    """Draw ``n`` i.i.d. observations from a contaminated source.

    Each observation is contaminated independently with probability
    ``epsilon``; the result is a pure function of ``seed`` (falls back to
    ``source.seed``).
    """
    if n < 1:
        raise ConfigurationError("need at least one observation")
    if not 0.0 <= source.epsilon < 1.0:
        raise ConfigurationError(f"epsilon must lie in [0, 1), got {source.epsilon}")
    rng = np.random.default_rng(source.seed if seed is None else seed)
    mask = rng.random(n) < source.epsilon
    n_bad = int(mask.sum())
    x = np.empty((n, source.core.dim))
    x[~mask] = source.core.sample(rng, n - n_bad)
    if n_bad:
        x[mask] = source.contaminant.sample(rng, n_bad, source.core)
    return EmpiricalMeasure(x, mask)
