"""Packing/covering nets in total variation over a parameter space."""

import json
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations, product

import numpy as np

from . import haar
from .errors import ConfigurationError, EmptyNetError
from .measures import make_model

MAX_CENTERS = 512


@dataclass(eq=False)
class ParameterSpace:
    """A constraint set of parameters for one family.

    Exactly one of ``grid`` (an enumerable stack of candidates, used in its
    stored order) and ``sampler`` (``(rng, k) -> stack``) is set.  ``check``
    returns True for admissible parameters; rejected sampler draws are
    discarded.
    """

    family: str
    nuisance: dict
    check: object
    grid: np.ndarray = None
    sampler: object = None
    spec: dict = field(default_factory=dict)

    def model(self, theta):
        return make_model(self.family, theta, **self.nuisance)

    @property
    def enumerable(self):
        return self.grid is not None

    def candidates(self, budget, seed=0):
        """Up to ``budget`` admissible candidates in a reproducible order."""
        if self.grid is not None:
            keep = [t for t in self.grid if self.check(t)]
            return np.array(keep[:budget])
        rng = np.random.default_rng(seed)
        out = []
        tries = 0
        while len(out) < budget and tries < 50 * budget:
            k = min(4096, budget - len(out))
            draws = self.sampler(rng, k)
            tries += k
            out.extend(t for t in draws if self.check(t))
        return np.array(out[:budget])


def gaussian_location_space(low=-1.0, high=1.0, points=2001, cov=None):
    """Equally spaced 1-D location grid on ``[low, high]``."""
    grid = np.linspace(low, high, points).reshape(-1, 1)
    nuisance = {} if cov is None else {"cov": np.asarray(cov, dtype=float).tolist()}
    return ParameterSpace(
        "gaussian-location",
        nuisance,
        check=lambda t: bool(low - 1e-12 <= t[0] <= high + 1e-12),
        grid=grid,
        spec={"family": "gaussian-location", "low": low, "high": high, "points": points},
    )


def location_box_space(dim, radius, cov=None):
    """Uniform draws from the cube ``[-radius, radius]^dim``."""
    nuisance = {} if cov is None else {"cov": np.asarray(cov, dtype=float).tolist()}
    return ParameterSpace(
        "gaussian-location",
        nuisance,
        check=lambda t: bool(np.all(np.abs(t) <= radius + 1e-12)),
        sampler=lambda rng, k: rng.uniform(-radius, radius, size=(k, dim)),
        spec={"family": "gaussian-location", "dim": dim, "radius": radius},
    )


def sparse_regression_space(p, s, radius, levels=None, cov=None, sigma=1.0):
    """``{theta : |supp| <= s, ||theta|| <= radius}``.

    With ``levels`` the space is the enumerable grid of ``s``-sparse vectors
    whose nonzero entries take values in ``levels`` (zero vector excluded);
    otherwise candidates are drawn with a uniform random support and a
    uniformly random direction and radius.
    """
    cov = np.eye(p) if cov is None else np.asarray(cov, dtype=float)
    nuisance = {"cov": cov.tolist(), "sigma": float(sigma)}

    def check(t):
        return bool(np.count_nonzero(t) <= s and np.linalg.norm(t) <= radius * (1 + 1e-12))

    spec = {"family": "regression", "p": p, "s": s, "radius": radius, "sigma": sigma}
    if levels is not None:
        grid = []
        for k in range(1, s + 1):
            for support in combinations(range(p), k):
                for values in product(levels, repeat=k):
                    t = np.zeros(p)
                    t[list(support)] = values
                    grid.append(t)
        spec["levels"] = list(levels)
        return ParameterSpace("regression", nuisance, check, grid=np.array(grid), spec=spec)

    def sampler(rng, k):
        out = np.zeros((k, p))
        for i in range(k):
            support = rng.choice(p, size=s, replace=False)
            v = rng.standard_normal(s)
            out[i, support] = v / np.linalg.norm(v) * radius * rng.random() ** (1.0 / s)
        return out

    return ParameterSpace("regression", nuisance, check, sampler=sampler, spec=spec)


def low_rank_space(p1, p2, r, radius, cov=None, sigma=1.0):
    """``{A : rank(A) <= r, ||A||_F <= radius}`` by seeded rejection sampling."""
    cov = np.eye(p1 * p2) if cov is None else np.asarray(cov, dtype=float)
    nuisance = {"cov": cov.tolist(), "sigma": float(sigma)}

    def check(A):
        return bool(np.linalg.matrix_rank(A, tol=1e-9) <= r and np.linalg.norm(A) <= radius * (1 + 1e-12))

    def sampler(rng, k):
        U = rng.standard_normal((k, p1, r))
        V = rng.standard_normal((k, r, p2))
        A = U @ V
        # radius drawn from the volume-uniform law of a ball in p1*p2 dimensions, overshooting by 10%
        scale = 1.1 * radius * rng.random(k) ** (1.0 / (p1 * p2)) / np.linalg.norm(A, axis=(1, 2))
        return A * scale[:, None, None]

    return ParameterSpace(
        "trace-regression",
        nuisance,
        check,
        sampler=sampler,
        spec={"family": "trace-regression", "p1": p1, "p2": p2, "r": r, "radius": radius, "sigma": sigma},
    )


def project_density(coeffs):
    """Clip the density ``1 + sum c psi`` at zero, renormalise, return coefficients."""
    values = np.maximum(haar.synthesize(coeffs, base=1.0), 0.0)
    total = values.mean()
    if total <= 0:
        raise ConfigurationError("cannot renormalise an identically zero density")
    return haar.analyze(values / total)[1]


def haar_density_space(beta, scale, max_level, quantum=None):
    """Haar densities with ``2**(l(1/2+beta)) |c_lk| <= scale`` up to ``max_level``.

    Draws are uniform on the coefficient box, optionally rounded to a grid of
    step ``quantum``, then projected to nonnegativity and renormalised; draws
    leaving the class after projection are rejected.
    """
    caps = haar.holder_bounds(max_level, beta, scale)

    def check(t):
        values = haar.synthesize(t, base=1.0)
        return bool(values.min() >= -1e-12 and np.all(np.abs(t) <= caps * (1 + 1e-9)))

    def sampler(rng, k):
        c = rng.uniform(-1.0, 1.0, size=(k, caps.size)) * caps
        if quantum:
            c = np.round(c / quantum) * quantum
        values = haar.synthesize(c, base=1.0)
        bad = values.min(axis=1) < 0
        for i in np.flatnonzero(bad):
            c[i] = project_density(c[i])
        return c

    return ParameterSpace(
        "haar-density",
        {"max_level": max_level},
        check,
        sampler=sampler,
        spec={"family": "haar-density", "beta": beta, "scale": scale, "max_level": max_level, "quantum": quantum},
    )


def white_noise_space(beta, scale, max_level):
    """Coefficient box ``|c_lk| <= scale 2**(-l(1/2+beta))`` for the sequence model."""
    caps = haar.holder_bounds(max_level, beta, scale)
    return ParameterSpace(
        "white-noise-seq",
        {"max_level": max_level},
        check=lambda t: bool(np.all(np.abs(t) <= caps * (1 + 1e-9))),
        sampler=lambda rng, k: rng.uniform(-1.0, 1.0, size=(k, caps.size)) * caps,
        spec={"family": "white-noise-seq", "beta": beta, "scale": scale, "max_level": max_level},
    )


def finite_space(family, candidates, **nuisance):
    """An explicit list of candidate parameters (used in the given order)."""
    return ParameterSpace(
        family, nuisance, check=lambda t: True, grid=np.asarray(candidates, dtype=float),
        spec={"family": family, "finite": len(candidates)},
    )


def space_from_spec(spec):
    """Build a space from its JSON description (as used by configs and the CLI)."""
    spec = dict(spec)
    family = spec.pop("family", None)
    try:
        if family == "gaussian-location":
            if "dim" in spec:
                return location_box_space(spec["dim"], spec["radius"], spec.get("cov"))
            return gaussian_location_space(spec.get("low", -1.0), spec.get("high", 1.0),
                                           spec.get("points", 2001), spec.get("cov"))
        if family == "regression":
            return sparse_regression_space(spec["p"], spec["s"], spec["radius"], spec.get("levels"),
                                           spec.get("cov"), spec.get("sigma", 1.0))
        if family == "trace-regression":
            return low_rank_space(spec["p1"], spec["p2"], spec["r"], spec["radius"],
                                  spec.get("cov"), spec.get("sigma", 1.0))
        if family == "haar-density":
            return haar_density_space(spec["beta"], spec["scale"], spec["max_level"], spec.get("quantum"))
        if family == "white-noise-seq":
            return white_noise_space(spec["beta"], spec["scale"], spec["max_level"])
        if family in ("finite",):
            inner = spec.pop("of")
            return finite_space(inner, spec.pop("candidates"), **spec)
    except KeyError as exc:
        raise ConfigurationError(f"space spec for {family!r} is missing {exc}") from None
    raise ConfigurationError(f"unknown family {family!r} in space spec")


@dataclass(eq=False)
class CoveringNet:
    """Centers ``theta_1..theta_m`` with their pairwise TV matrix."""

    family: str
    nuisance: dict
    centers: np.ndarray
    delta: float
    tv_matrix: np.ndarray
    kind: str = "packing"
    probe_radius: float = None
    truncated: bool = False

    @property
    def m(self):
        return len(self.centers)

    @cached_property
    def models(self):
        return [make_model(self.family, c, **self.nuisance) for c in self.centers]

    def model(self, j):
        return self.models[j]

    def min_separation(self):
        if self.m < 2:
            return np.inf
        off = self.tv_matrix[~np.eye(self.m, dtype=bool)]
        return float(off.min())

    def to_dict(self):
        return {
            "version": 1,
            "family": self.family,
            "nuisance": self.nuisance,
            "kind": self.kind,
            "delta": self.delta,
            "center_shape": list(self.centers.shape[1:]),
            "centers": self.centers.tolist(),
            "tv_matrix": self.tv_matrix.tolist(),
            "probe_radius": self.probe_radius,
            "truncated": self.truncated,
        }

    @classmethod
    def from_dict(cls, d):
        centers = np.array(d["centers"], dtype=float).reshape([len(d["centers"])] + list(d["center_shape"]))
        return cls(
            family=d["family"],
            nuisance=d["nuisance"],
            centers=centers,
            delta=d["delta"],
            tv_matrix=np.array(d["tv_matrix"], dtype=float).reshape(len(centers), len(centers)),
            kind=d.get("kind", "packing"),
            probe_radius=d.get("probe_radius"),
            truncated=d.get("truncated", False),
        )

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def tv_matrix(family, nuisance, centers):
    """Symmetric pairwise TV matrix of a stack of parameters."""
    m = len(centers)
    out = np.zeros((m, m))
    for i in range(m - 1):
        row = make_model(family, centers[i], **nuisance).tv_many(centers[i + 1:])
        out[i, i + 1:] = row
        out[i + 1:, i] = row
    return out


def net_from_centers(family, centers, delta=0.0, kind="packing", **nuisance):
    centers = np.asarray(centers, dtype=float)
    return CoveringNet(family, nuisance, centers, float(delta), tv_matrix(family, nuisance, centers), kind)


def build_greedy_packing(space, delta, budget=10_000, seed=0, max_centers=MAX_CENTERS, patience=None):
    """Greedy delta-packing of the space's candidates.

    Candidates are scanned in order (grid order, or seeded draw order) and a
    candidate joins the net iff its TV to every current center is at least
    ``delta``.  The scan stops after ``budget`` candidates, after ``patience``
    consecutive rejections, or at ``max_centers``.  Unless truncated, the
    result is maximal, so every scanned candidate lies within ``delta`` of
    some center.
    """
    if not delta > 0:
        raise ConfigurationError("delta must be positive")
    cands = space.candidates(budget, seed)
    if len(cands) == 0:
        raise EmptyNetError("the parameter space produced no admissible candidates")
    patience = len(cands) if patience is None else int(patience)
    nearest = np.full(len(cands), np.inf)
    chosen = []
    last = -1
    truncated = False
    while True:
        admissible = np.flatnonzero(nearest[last + 1:] >= delta)
        if admissible.size == 0:
            break
        nxt = last + 1 + int(admissible[0])
        if nxt - last - 1 >= patience:
            break
        if len(chosen) == max_centers:
            truncated = True
            break
        chosen.append(nxt)
        nearest = np.minimum(nearest, space.model(cands[nxt]).tv_many(cands))
        last = nxt
    centers = cands[chosen]
    return CoveringNet(
        space.family,
        dict(space.nuisance),
        centers,
        float(delta),
        tv_matrix(space.family, space.nuisance, centers),
        kind="packing",
        truncated=truncated,
    )


def covering_radius(net, probes):
    """``max_probe min_center TV``: how well ``net`` covers the given probes."""
    probes = np.asarray(probes, dtype=float)
    if len(probes) == 0:
        return 0.0
    dist = np.full(len(probes), np.inf)
    for model in net.models:
        dist = np.minimum(dist, model.tv_many(probes))
    return float(dist.max())


def record_probe_radius(net, space, n_probes=2000, seed=1):
    """Measure the covering radius on fresh held-out candidates and store it."""
    probes = space.candidates(n_probes, seed)
    net.probe_radius = covering_radius(net, probes)
    return net.probe_radius


def shell_index(tv, delta):
    """Index ``l`` with ``l delta < tv <= (l+1) delta`` (tv > 0)."""
    return np.ceil(np.asarray(tv) / delta).astype(int) - 1


def local_entropy(net, delta=None):
    """``D_l(delta)``: the largest number of centers in any TV shell around a center.

    Returns the list ``[D_0, D_1, ...]`` truncated after its last nonzero
    entry (empty when ``m == 1``).
    """
    delta = net.delta if delta is None else delta
    if net.m == 0:
        raise EmptyNetError("net has no centers")
    counts = []
    for j in range(net.m):
        others = np.delete(net.tv_matrix[j], j)
        others = others[others > 0]
        counts.append(np.bincount(shell_index(others, delta), minlength=1) if others.size else np.zeros(1, int))
    width = max(len(c) for c in counts)
    table = np.zeros((net.m, width), dtype=int)
    for j, c in enumerate(counts):
        table[j, : len(c)] = c
    worst = table.max(axis=0)
    nz = np.flatnonzero(worst)
    return [] if nz.size == 0 else worst[: nz[-1] + 1].tolist()
