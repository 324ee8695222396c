"""Scheffe tournament over a net, the minimum-distance variant, and failure bounds."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError, EmptyNetError
from .scheffe import TIE_TOL


@dataclass
class TournamentResult:
    """Outcome of one tournament.

    ``pairwise_decisions[j, k] == 1`` means ``theta_k`` beat ``theta_j`` in
    their pairwise test; ``loss_counts[j]`` is the row sum.
    """

    winner_index: int
    loss_counts: np.ndarray
    pairwise_decisions: np.ndarray
    tie_set: list
    skipped_pairs: list = field(default_factory=list)

    def to_dict(self):
        return {
            "winner_index": self.winner_index,
            "loss_counts": self.loss_counts.tolist(),
            "pairwise_decisions": self.pairwise_decisions.tolist(),
            "tie_set": list(self.tie_set),
            "skipped_pairs": [list(p) for p in self.skipped_pairs],
        }


class ScheffeTournament:
    """Pairwise Scheffe sets of a net, computed once and reused across datasets.

    For each pair ``j < k`` the set is ``A_jk = {p_j > p_k}`` with cached
    ``P_j(A_jk)`` and ``P_k(A_jk)``.  Pairs at TV distance zero are skipped.
    """

    def __init__(self, net):
        if net.m < 1:
            raise EmptyNetError("tournament needs at least one center")
        self.net = net
        m = net.m
        self.prob_own = np.zeros((m, m))
        self.prob_other = np.zeros((m, m))
        self.skipped = []
        models = net.models
        for j in range(m):
            for k in range(j + 1, m):
                if net.tv_matrix[j, k] == 0.0:
                    self.skipped.append((j, k))
                    continue
                self.prob_own[j, k] = models[j].set_probability(models[j], models[k])
                self.prob_other[j, k] = models[k].set_probability(models[j], models[k])
        self._third_party = None

    @property
    def m(self):
        return self.net.m

    def log_densities(self, data):
        return np.vstack([model.logpdf(data.samples) for model in self.net.models])

    def _fast_path(self):
        family = self.net.family
        if family == "haar-density":
            return "cells"
        if family == "gaussian-location" and self.net.centers.shape[1] == 1:
            return "line"
        return None

    def pairwise_frequencies(self, data, logdens=None):
        """``P_n({p_j > p_k})`` for every ordered pair (diagonal zero).

        Haar nets reduce the data to cell counts and 1-D location nets to
        empirical CDF lookups at pair midpoints; otherwise the log-densities
        are compared point by point.
        """
        m = self.m
        path = self._fast_path() if logdens is None else None
        if path == "cells":
            models = self.net.models
            cells = models[0].cell_of(data.samples)
            x = data.samples.reshape(-1)
            inside = (x >= 0.0) & (x < 1.0)
            freq = np.bincount(cells[inside], minlength=models[0].n_cells) / data.n
            with np.errstate(divide="ignore"):
                logv = np.log(np.vstack([mod.values for mod in models]))
            above = logv[:, None, :] > logv[None, :, :]
            return above @ freq
        if path == "line":
            xs = np.sort(data.samples[:, 0])
            theta = self.net.centers[:, 0]
            mid = 0.5 * (theta[:, None] + theta[None, :])
            below = np.searchsorted(xs, mid, side="left") / data.n
            above = 1.0 - np.searchsorted(xs, mid, side="right") / data.n
            # p_j > p_k on the side of the midpoint nearer to theta_j
            out = np.where(theta[:, None] < theta[None, :], below, above)
            out[theta[:, None] == theta[None, :]] = 0.0
            return out
        logd = self.log_densities(data) if logdens is None else logdens
        out = np.zeros((m, m))
        for j in range(m):
            out[j] = np.mean(logd[j][None, :] > logd, axis=1)
        return out

    def empirical_frequencies(self, data, logdens=None):
        """``P_n(A_jk)`` for ``j < k`` (upper triangle)."""
        return np.triu(self.pairwise_frequencies(data, logdens), 1)

    def statistics(self, data, logdens=None):
        """Upper-triangular ``|P_n - P_j|`` and ``|P_n - P_k|`` matrices."""
        pn = self.empirical_frequencies(data, logdens)
        iu = np.triu(np.ones((self.m, self.m), dtype=bool), 1)
        return np.where(iu, np.abs(pn - self.prob_own), 0.0), np.where(iu, np.abs(pn - self.prob_other), 0.0)

    def run(self, data, logdens=None):
        if data.n == 0:
            raise ConfigurationError("empty data")
        m = self.m
        if m == 1:
            return TournamentResult(0, np.zeros(1, dtype=int), np.zeros((1, 1), dtype=int), [0])
        stat_own, stat_other = self.statistics(data, logdens)
        iu = np.triu(np.ones((m, m), dtype=bool), 1)
        for j, k in self.skipped:
            iu[j, k] = False
        upper = iu & (stat_own - stat_other > TIE_TOL)  # theta_k favoured over theta_j
        lower = iu & (stat_other - stat_own > TIE_TOL)  # theta_j favoured over theta_k
        phi = upper.astype(int) + lower.T.astype(int)
        losses = phi.sum(axis=1)
        best = losses.min()
        tie_set = np.flatnonzero(losses == best).tolist()
        return TournamentResult(tie_set[0], losses, phi, tie_set, list(self.skipped))

    def pairwise_margins(self, data, logdens=None):
        """``|stat_j - stat_k|`` for every tested pair (upper triangle)."""
        stat_own, stat_other = self.statistics(data, logdens)
        return np.abs(stat_own - stat_other)

    def _yatracos_probabilities(self):
        # P_i({p_j > p_k}) for every center i and ordered pair j != k
        if self._third_party is None:
            models = self.net.models
            m = self.m
            probs = np.zeros((m, m, m))
            for j in range(m):
                for k in range(m):
                    if j == k:
                        continue
                    for i in range(m):
                        probs[i, j, k] = models[i].set_probability(models[j], models[k])
            self._third_party = probs
        return self._third_party

    def yatracos(self, data, logdens=None):
        """Center minimising ``sup_A |P_n(A) - P_j(A)|`` over the Yatracos class."""
        m = self.m
        if m < 2:
            raise ConfigurationError("the minimum-distance estimator needs at least two centers")
        pn = self.pairwise_frequencies(data, logdens)
        probs = self._yatracos_probabilities()
        off = ~np.eye(m, dtype=bool)
        for j, k in self.skipped:
            off[j, k] = off[k, j] = False
        dev = np.abs(pn[None, :, :] - probs)
        score = np.where(off[None, :, :], dev, -np.inf).reshape(m, -1).max(axis=1)
        return int(np.flatnonzero(score <= score.min() + TIE_TOL)[0])


def run_tournament(net, data, tournament=None):
    """Scheffe tournament winner: the center losing the fewest pairwise tests.

    Ties go to the lowest index.  Pass a prebuilt :class:`ScheffeTournament`
    to reuse its cached sets across datasets.
    """
    tournament = ScheffeTournament(net) if tournament is None else tournament
    return tournament.run(data)


def yatracos_minimum_distance(net, data, tournament=None):
    tournament = ScheffeTournament(net) if tournament is None else tournament
    return tournament.yatracos(data)


def global_failure_bound(m, delta, eps, eta, n, c=0.25):
    """Bound on ``P{TV(P_hat, P_theta) > eta + delta}`` for a net of size ``m``.

    With the default split ``c = 1/4`` this is
    ``4 m^2 exp(-n (eta/4 - 2(eps + delta))^2 / 2)``.  Other ``c`` give the
    two-term form ``2 m e^{-n a^2/2} + 2 m^2 e^{-n b^2/2}`` with
    ``a = c eta - 2(eps + delta)`` and ``b = (1 - c) eta - 2(eps + delta + c eta)``.
    """
    if not 0.0 < c < 1.0:
        raise DomainError("split constant c must lie in (0, 1)")
    a = c * eta - 2.0 * (eps + delta)
    b = (1.0 - c) * eta - 2.0 * (eps + delta + c * eta)
    if c == 0.25:
        if not eta > 8.0 * (eps + delta):
            raise DomainError(f"need eta > 8 (eps + delta); eta={eta}, eps={eps}, delta={delta}")
        return float(4.0 * m**2 * np.exp(-0.5 * n * a**2))
    if not (a > 0 and b > 0):
        raise DomainError("both exponents must be positive for this split constant")
    return float(2.0 * m * np.exp(-0.5 * n * a**2) + 2.0 * m**2 * np.exp(-0.5 * n * b**2))


def local_failure_bound(shell_counts, delta, eps, shells, n):
    """Bound on ``P{TV(P_hat, P_theta) > (shells + 1) delta}`` from local shell counts.

    ``shell_counts[l]`` is the local entropy count of shell ``l`` (see
    :func:`scheffe_robust.nets.local_entropy`).  ``shells`` must be a positive
    multiple of 4 with ``(shells/4) delta > 2 eps + 2 delta``.
    """
    if shells % 4 != 0 or shells <= 0:
        raise DomainError("shells must be a positive multiple of 4")
    q = shells // 4
    if not q * delta - 2.0 * eps - 2.0 * delta > 0:
        raise DomainError("need (shells/4) delta > 2 eps + 2 delta")
    counts = np.asarray(shell_counts, dtype=float)
    ls = np.arange(len(counts))
    first = np.sum(np.where(ls >= q, counts * np.exp(-0.5 * n * (ls * delta - 2.0 * (eps + delta)) ** 2), 0.0))
    inner = counts[:q].sum()
    second = np.sum(
        np.where(ls >= shells, counts * np.exp(-0.5 * n * ((ls - 3 * q) * delta - 2.0 * (eps + delta)) ** 2), 0.0)
    )
    return float(2.0 * first + 2.0 * inner * second)


def failure_bound(size_or_counts, delta, eps, eta, n, shells=None):
    """Dispatch: an integer net size gives the global bound, a list of shell counts the local one."""
    if np.isscalar(size_or_counts):
        return global_failure_bound(int(size_or_counts), delta, eps, eta, n)
    if shells is None:
        raise DomainError("the local bound needs shells")
    return local_failure_bound(size_or_counts, delta, eps, shells, n)
