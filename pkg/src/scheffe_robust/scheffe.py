"""Robust two-point testing with Scheffe sets, plus likelihood-ratio baselines."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DegenerateSetError, DomainError
from .measures import Model, monte_carlo_set_probability, tv_distance

TIE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ScheffeSet:
    """The set ``A = {p0 > p1}`` together with ``P0(A)`` and ``P1(A)``.

    ``prob0_se``/``prob1_se`` are zero for closed-form probabilities and the
    Monte Carlo standard error otherwise.
    """

    p0: Model
    p1: Model
    prob0: float
    prob1: float
    prob0_se: float = 0.0
    prob1_se: float = 0.0
    method: str = "closed-form"

    def member(self, x):
        return self.p0.logpdf(x) > self.p1.logpdf(x)

    @property
    def separation(self):
        return self.prob0 - self.prob1


@dataclass(frozen=True)
class TestDecision:
    """Outcome of a two-point test; ``phi == 1`` rejects H0 in favour of P1.

    For the Scheffe test ``stat0 = |P_n(A) - P0(A)|`` and
    ``stat1 = |P_n(A) - P1(A)|``.  The likelihood-ratio tests report the
    (clipped) log-likelihood ratio as ``stat0`` and the log-threshold ``0`` as
    ``stat1``.  Either way ``phi = 1`` iff ``stat0 > stat1``.
    """

    __test__ = False

    phi: int
    stat0: float
    stat1: float
    empirical: float = float("nan")


def _has_closed_form(model):
    return type(model).set_probability is not Model.set_probability


def build_scheffe_set(p0, p1, mc_draws=10**6, seed=0):
    """Scheffe set separating ``p0`` from ``p1``.

    Probabilities come from the family's closed form when available and from
    ``mc_draws`` seeded draws otherwise.
    """
    p0.check_compatible(p1)
    if tv_distance(p0, p1) == 0.0:
        raise DegenerateSetError("P0 and P1 coincide; the Scheffe set is empty")
    if _has_closed_form(p0):
        return ScheffeSet(p0, p1, p0.set_probability(p0, p1), p1.set_probability(p0, p1))
    prob0, se0 = monte_carlo_set_probability(p0, p0, p1, draws=mc_draws, seed=seed)
    prob1, se1 = monte_carlo_set_probability(p1, p0, p1, draws=mc_draws, seed=seed + 1)
    return ScheffeSet(p0, p1, prob0, prob1, se0, se1, method="monte-carlo")


def decide(pn, prob0, prob1):
    """Scheffe decision from the empirical frequency of ``A``; ties keep H0."""
    stat0 = abs(pn - prob0)
    stat1 = abs(pn - prob1)
    return TestDecision(int(stat0 - stat1 > TIE_TOL), stat0, stat1, pn)


def scheffe_test(sset, data):
    """Accept whichever of P0, P1 predicts ``P_n(A)`` more closely."""
    if data.n == 0:
        raise ConfigurationError("empty data")
    pn = data.prob(sset.member)
    return decide(pn, sset.prob0, sset.prob1)


def _log_ratio(p0, p1, x):
    l0 = p0.logpdf(x)
    l1 = p1.logpdf(x)
    with np.errstate(invalid="ignore"):
        r = l1 - l0
    # both densities zero: the point carries no evidence
    return np.where(np.isneginf(l0) & np.isneginf(l1), 0.0, r)


def _sum_with_infinities(r):
    pos = int(np.sum(np.isposinf(r)))
    neg = int(np.sum(np.isneginf(r)))
    finite = float(np.sum(r[np.isfinite(r)]))
    if pos == neg:
        return finite
    return np.inf if pos > neg else -np.inf


def lrt_test(p0, p1, data):
    """Neyman-Pearson test ``sum log(p1/p0) > 0`` (threshold ``t = 1``)."""
    p0.check_compatible(p1)
    llr = _sum_with_infinities(_log_ratio(p0, p1, data.samples))
    return TestDecision(int(llr > 0.0), llr, 0.0)


def huber_clipped_test(p0, p1, lower, upper, data):
    """Likelihood-ratio test with each ratio clipped to ``[lower, upper]``.

    ``lower == upper`` is accepted as the fully clipped, always-tied test.
    """
    if not 0.0 < lower <= upper:
        raise ConfigurationError(f"need 0 < lower <= upper, got lower={lower}, upper={upper}")
    p0.check_compatible(p1)
    r = np.clip(_log_ratio(p0, p1, data.samples), np.log(lower), np.log(upper))
    stat = float(np.sum(r))
    return TestDecision(int(stat > 0.0), stat, 0.0)


def scheffe_error_bound(tv, eps, n):
    """``4 exp(-n (TV - 2 eps)^2 / 2)``, valid when ``TV > 2 eps``."""
    if not tv > 2.0 * eps:
        raise DomainError(f"need TV > 2 eps, got TV={tv}, eps={eps}")
    return 4.0 * np.exp(-0.5 * np.asarray(n, dtype=float) * (tv - 2.0 * eps) ** 2)


@dataclass
class ExponentFit:
    n_grid: list
    type1: list
    type2: list
    total: list
    se: list
    bound: list
    worst_q: list
    tv: float
    eps: float
    floor: float
    slope: float
    intercept: float
    censored: bool
    n_fitted: int = 0
    notes: list = field(default_factory=list)

    def rows(self):
        for i, n in enumerate(self.n_grid):
            yield {
                "n": n,
                "type1": self.type1[i],
                "type2": self.type2[i],
                "total": self.total[i],
                "se": self.se[i],
                "bound": self.bound[i],
            }


def _rejection_rate(sset, core, eps, contaminant, n, replicates, seed, batch):
    """Fraction of replicates in which the Scheffe test rejects H0."""
    rng = np.random.default_rng(seed)
    rejected = 0
    done = 0
    while done < replicates:
        r = min(batch, replicates - done)
        mask = rng.random(r * n) < eps
        x = np.empty((r * n, core.dim))
        n_bad = int(mask.sum())
        x[~mask] = core.sample(rng, r * n - n_bad)
        if n_bad:
            x[mask] = contaminant.sample(rng, n_bad, core)
        pn = sset.member(x).reshape(r, n).mean(axis=1)
        stat0 = np.abs(pn - sset.prob0)
        stat1 = np.abs(pn - sset.prob1)
        rejected += int(np.sum(stat0 - stat1 > TIE_TOL))
        done += r
    return rejected / replicates


def estimate_error_exponent(p0, p1, eps, contaminants, n_grid, replicates=10**4, seed=0, batch=None):
    """Monte Carlo testing error of the Scheffe test and its decay rate in ``n``.

    For each ``n`` the type-I error is the worst over ``contaminants`` of the
    rejection rate under ``(1-eps) P0 + eps Q``, and symmetrically for type II.
    The exponent is the least-squares slope of ``-log(total error)`` against
    ``n`` over grid points with at least one error.  With fewer than two such
    points the fit is censored and ``slope`` is the lower bound
    ``log(4 R) / n`` at the first error-free ``n`` (``R`` replicates).
    """
    tv = tv_distance(p0, p1)
    if not tv > 2.0 * eps:
        raise DomainError(f"need TV(P0, P1) > 2 eps; TV={tv:.6g}, eps={eps}")
    n_grid = [int(n) for n in n_grid]
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ConfigurationError("n_grid must be strictly increasing")
    if replicates < 1:
        raise ConfigurationError("need at least one replicate")
    contaminants = list(contaminants)
    sset = build_scheffe_set(p0, p1)
    if batch is None:
        batch = max(1, 2_000_000 // (max(n_grid) * p0.dim))
    seeds = np.random.SeedSequence(seed).spawn(len(n_grid) * 2 * len(contaminants))

    t1, t2, total, se, worst = [], [], [], [], []
    for i, n in enumerate(n_grid):
        rates = {0: [], 1: []}
        for h, core in ((0, p0), (1, p1)):
            for j, q in enumerate(contaminants):
                s = seeds[(i * 2 + h) * len(contaminants) + j]
                rej = _rejection_rate(sset, core, eps, q, n, replicates, s, batch)
                rates[h].append(rej if h == 0 else 1.0 - rej)
        j0 = int(np.argmax(rates[0]))
        j1 = int(np.argmax(rates[1]))
        e1, e2 = rates[0][j0], rates[1][j1]
        t1.append(e1)
        t2.append(e2)
        total.append(e1 + e2)
        se.append(float(np.sqrt((e1 * (1 - e1) + e2 * (1 - e2)) / replicates)))
        worst.append((getattr(contaminants[j0], "name", str(j0)), getattr(contaminants[j1], "name", str(j1))))

    bound = [float(b) for b in scheffe_error_bound(tv, eps, n_grid)]
    floor = 0.5 * (tv - 2.0 * eps) ** 2
    ns = np.array(n_grid, dtype=float)
    tot = np.array(total)
    ok = tot > 0
    notes = []
    if ok.sum() >= 2:
        coef = np.polyfit(ns[ok], np.log(tot[ok]), 1)
        slope, intercept, censored = float(-coef[0]), float(coef[1]), False
        if (~ok).any():
            notes.append(f"{int((~ok).sum())} grid points had no errors and were left out of the fit")
    else:
        zero_n = ns[~ok]
        n_ref = zero_n[0] if zero_n.size else ns[-1]
        slope, intercept, censored = float(np.log(4.0 * replicates) / n_ref), float(np.log(4.0)), True
        notes.append("fewer than two grid points with errors; slope is a lower bound")
    return ExponentFit(
        n_grid=n_grid,
        type1=t1,
        type2=t2,
        total=total,
        se=se,
        bound=bound,
        worst_q=worst,
        tv=tv,
        eps=eps,
        floor=floor,
        slope=slope,
        intercept=intercept,
        censored=censored,
        n_fitted=int(ok.sum()),
        notes=notes,
    )
