"""Seeded Monte Carlo sweeps over (n, eps, Q, delta) with streaming CSV output.

Seeds
-----
Replicate ``r`` of grid point ``g`` under master seed ``s`` uses the integer
``SeedSequence([s, g, r]).generate_state(1, uint64)[0]``; the value is stored
in the ``seed`` column so any row can be regenerated in isolation.  Nets are
built once per distinct ``delta`` from ``SeedSequence([s, NET_STREAM, i])``.

Output
------
``out`` receives one row per (grid point, replicate, estimator), written in
that order as soon as a replicate finishes.  Line 1 is a ``#`` timestamp
comment, line 2 a ``#`` comment naming the column-set version, line 3 the
header.  A summary CSV (``<out stem>.summary.csv``) and a timing sidecar
(``<out stem>.timing.csv``) are written next to it.
"""

import csv
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from itertools import product

import numpy as np

from .errors import ConfigurationError, DomainError, ScheffeRobustError
from .measures import FAMILIES, ContaminatedSource, contaminant_from_dict, sample
from .models import WhiteNoiseSample, losses, median_wavelet_estimator
from .nets import build_greedy_packing, space_from_spec
from .tournament import ScheffeTournament, global_failure_bound

CSV_VERSION = 1
NET_STREAM = 2**31 - 1
ESTIMATORS = ("tournament", "yatracos", "naive", "median-wavelet")
LOSS_COLUMNS = (
    "tv_loss",
    "l2_sq",
    "mahalanobis_sq",
    "prediction_loss",
    "estimation_loss",
    "frobenius_loss",
    "l1",
    "l1_sq",
    "sup_loss",
    "sup_loss_sq",
    "wavelet_sup",
)
KEY_COLUMNS = ("grid_index", "replicate", "estimator", "family", "n", "eps", "q", "delta")
COLUMNS = KEY_COLUMNS + ("seed", "m", "winner_index", "n_contaminated", "status") + LOSS_COLUMNS + ("message",)
GROUP_COLUMNS = ("estimator", "n", "eps", "q", "delta")
SUMMARY_COLUMNS = GROUP_COLUMNS + ("count", "errors", "eta", "failure_bound", "exceed_rate") + tuple(
    f"{loss}_{stat}" for loss in LOSS_COLUMNS for stat in ("median", "q90")
)


def _as_list(x):
    return list(x) if isinstance(x, (list, tuple)) else [x]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return "" if np.isnan(v) else repr(float(v))
    return str(v)


@dataclass
class ExperimentConfig:
    """A sweep description; see ``configs/`` for annotated JSON examples.

    ``net`` holds either ``delta`` (a number or a list) or ``delta_rule``
    (``{"c": c, "power": a}`` giving ``delta = c n**-a``), plus optional
    ``budget``, ``max_centers`` and ``patience``.  ``truth`` is
    ``{"theta": [...]}`` or ``{"random": true}`` (a fresh admissible draw per
    replicate).  ``eta`` enables the failure-bound and exceedance columns.
    """

    family: str
    space: dict
    truth: dict
    net: dict
    contamination: dict
    n: list
    replicates: int
    estimators: list
    seed: int = 0
    out: str = "result.csv"
    eta: float = None
    workers: int = 1
    timeout: float = None
    beta: float = None
    dump_samples: bool = False
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown family {self.family!r}")
        self.n = [int(v) for v in _as_list(self.n)]
        if not self.n or min(self.n) < 1:
            raise ConfigurationError("n grid must be nonempty with positive entries")
        if int(self.replicates) < 1:
            raise ConfigurationError("replicates must be >= 1")
        self.replicates = int(self.replicates)
        self.estimators = _as_list(self.estimators)
        if not self.estimators:
            raise ConfigurationError("estimator list is empty")
        for e in self.estimators:
            if e not in ESTIMATORS:
                raise ConfigurationError(f"unknown estimator {e!r}; choose from {ESTIMATORS}")
        if "median-wavelet" in self.estimators and self.family != "white-noise-seq":
            raise ConfigurationError("median-wavelet applies to the white-noise-seq family only")
        eps = _as_list(self.contamination.get("eps", [0.0]))
        if not eps or any(not 0.0 <= e < 1.0 for e in eps):
            raise ConfigurationError("eps grid must be nonempty with values in [0, 1)")
        q = self.contamination.get("Q", [{"kind": "point-mass", "location": 0.0}])
        q = q if isinstance(q, list) else [q]
        if not q:
            raise ConfigurationError("Q list is empty")
        self.contaminants = [contaminant_from_dict(spec) for spec in q]
        self.eps_grid = [float(e) for e in eps]
        if "delta" in self.net:
            self.delta_grid = [float(d) for d in _as_list(self.net["delta"])]
            if not self.delta_grid or min(self.delta_grid) <= 0:
                raise ConfigurationError("delta grid must be nonempty and positive")
        elif "delta_rule" in self.net:
            rule = self.net["delta_rule"]
            if rule.get("c", 0) <= 0:
                raise ConfigurationError("delta_rule needs a positive c")
            self.delta_grid = [None]
        elif self.estimators != ["median-wavelet"]:
            raise ConfigurationError("net spec needs delta or delta_rule")
        else:
            self.delta_grid = [None]
        spec = dict(self.space, family=self.family)
        self.parameter_space = space_from_spec(spec)
        if self.beta is None:
            self.beta = self.space.get("beta")
        if "median-wavelet" in self.estimators and self.beta is None:
            raise ConfigurationError("median-wavelet needs beta (in the config or the space)")
        if "theta" in self.truth:
            theta = np.asarray(self.truth["theta"], dtype=float)
            self.parameter_space.model(theta)
        elif not self.truth.get("random"):
            raise ConfigurationError("truth must give theta or set random: true")
        self.workers = max(1, int(self.workers))

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        known = {f for f in cls.__dataclass_fields__ if f != "extra"}
        missing = [k for k in ("family", "space", "truth", "net", "contamination", "n", "replicates", "estimators")
                   if k not in d and not (k == "net" and d.get("estimators") == ["median-wavelet"])]
        if missing:
            raise ConfigurationError(f"config is missing {missing}")
        d.setdefault("net", {})
        extra = {k: d.pop(k) for k in list(d) if k not in known}
        return cls(**d, extra=extra)

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                return cls.from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None

    def delta_for(self, n, delta):
        if delta is not None:
            return delta
        if "delta_rule" not in self.net:
            return None
        rule = self.net["delta_rule"]
        return float(rule["c"]) * n ** (-float(rule.get("power", 0.5)))

    def grid(self):
        """Grid points ``(n, eps, contaminant_index, delta)`` in row order."""
        return [
            (n, eps, qi, self.delta_for(n, d))
            for n, eps, qi, d in product(self.n, self.eps_grid, range(len(self.contaminants)), self.delta_grid)
        ]

    @property
    def expected_rows(self):
        return len(self.estimators) * len(self.grid()) * self.replicates


def replicate_seed(master, grid_index, replicate):
    """The documented counter-based per-replicate seed."""
    return int(np.random.SeedSequence([int(master), int(grid_index), int(replicate)]).generate_state(1, np.uint64)[0])


def contaminant_label(contaminant):
    """Readable, parameter-bearing label for the ``q`` column."""
    spec = contaminant.to_dict()
    kind = spec.pop("kind")
    if kind == "sample-list":
        return f"{kind}(points={len(spec['points'])})"
    return f"{kind}(" + ";".join(f"{k}={json.dumps(v)}" for k, v in spec.items()) + ")"


def _draw_truth(space, rng):
    if space.grid is not None:
        grid = space.candidates(len(space.grid))
        return grid[rng.integers(len(grid))]
    for _ in range(1000):
        t = space.sampler(rng, 1)[0]
        if space.check(t):
            return t
    raise ConfigurationError("could not draw an admissible truth")


def naive_net_mle(tournament, data):
    """Maximum likelihood over the net centers (non-robust baseline)."""
    ll = tournament.log_densities(data).sum(axis=1)
    ll = np.where(np.isnan(ll), -np.inf, ll)
    return int(np.argmax(ll))


class _Runner:
    def __init__(self, config):
        self.config = config
        self.space = config.parameter_space
        self.nets = {}
        self.tournaments = {}
        deltas = sorted({d for (_, _, _, d) in config.grid() if d is not None})
        for i, d in enumerate(deltas):
            net_seed = int(np.random.SeedSequence([config.seed, NET_STREAM, i]).generate_state(1, np.uint64)[0] % 2**63)
            net = build_greedy_packing(
                self.space,
                d,
                budget=int(config.net.get("budget", 10_000)),
                seed=net_seed,
                max_centers=int(config.net.get("max_centers", 512)),
                patience=config.net.get("patience"),
            )
            self.nets[d] = net
            self.tournaments[d] = ScheffeTournament(net)

    def replicate(self, g, point, r):
        cfg = self.config
        n, eps, qi, delta = point
        seed = replicate_seed(cfg.seed, g, r)
        rng = np.random.default_rng(seed)
        contaminant = cfg.contaminants[qi]
        base = {
            "grid_index": g,
            "replicate": r,
            "family": cfg.family,
            "n": n,
            "eps": eps,
            "q": contaminant_label(contaminant),
            "delta": delta,
            "seed": seed,
        }
        t0 = time.perf_counter()
        rows = []
        try:
            theta = np.asarray(cfg.truth["theta"], dtype=float) if "theta" in cfg.truth else _draw_truth(self.space, rng)
            truth = self.space.model(theta)
            data = sample(ContaminatedSource(eps, truth, contaminant), n, seed=rng.integers(2**63))
            if cfg.dump_samples:
                self._dump(g, r, data)
            n_bad = int(data.mask.sum())
            tour = self.tournaments.get(delta)
            for est in cfg.estimators:
                row = dict(base, estimator=est, n_contaminated=n_bad, status="ok")
                try:
                    if est == "median-wavelet":
                        coeffs = median_wavelet_estimator(WhiteNoiseSample.from_empirical(data), cfg.beta, eps)
                        estimate = truth.with_theta(coeffs)
                        row["m"] = ""
                        row["winner_index"] = ""
                    else:
                        if est == "tournament":
                            j = tour.run(data).winner_index
                        elif est == "yatracos":
                            j = tour.yatracos(data) if tour.m > 1 else 0
                        else:
                            j = naive_net_mle(tour, data)
                        estimate = tour.net.model(j)
                        row["m"] = tour.m
                        row["winner_index"] = j
                    row.update(losses(estimate, truth))
                except (ScheffeRobustError, FloatingPointError, ValueError, np.linalg.LinAlgError) as exc:
                    row.update(status="error", message=f"{type(exc).__name__}: {exc}")
                rows.append(row)
        except Exception as exc:  # noqa: BLE001 - the sweep must survive any replicate failure
            rows = [dict(base, estimator=est, status="error", message=f"{type(exc).__name__}: {exc}")
                    for est in cfg.estimators]
        elapsed = time.perf_counter() - t0
        if cfg.timeout is not None and elapsed > cfg.timeout:
            for row in rows:
                row.update(status="timeout", message=f"replicate took {elapsed:.3f}s > {cfg.timeout}s")
        return rows, elapsed

    def _dump(self, g, r, data):
        stem = os.path.splitext(self.config.out)[0]
        folder = f"{stem}.samples"
        os.makedirs(folder, exist_ok=True)
        table = np.column_stack([data.samples, data.mask.astype(float)])
        np.savetxt(os.path.join(folder, f"g{g}_r{r}.csv"), table, delimiter=",", fmt="%.17g")


def _sidecar(out, suffix):
    stem = os.path.splitext(out)[0]
    return f"{stem}.{suffix}.csv"


@dataclass
class ExperimentResult:
    path: str
    summary_path: str
    timing_path: str
    rows: list
    summary: list

    @property
    def n_rows(self):
        return len(self.rows)


def run_experiment(config):
    """Run a sweep and stream its rows to ``config.out``.

    Deterministic given the master seed; the timestamp comment on line 1 is
    the only run-dependent content of the result and summary files.
    """
    if isinstance(config, dict):
        config = ExperimentConfig.from_dict(config)
    runner = _Runner(config)
    grid = config.grid()
    tasks = [(g, point, r) for g, point in enumerate(grid) for r in range(config.replicates)]
    out_dir = os.path.dirname(os.path.abspath(config.out))
    os.makedirs(out_dir, exist_ok=True)
    all_rows = []
    timing = []
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    with open(config.out, "w", newline="") as fh:
        fh.write(f"# generated {stamp}\n")
        fh.write(f"# scheffe-robust result columns v{CSV_VERSION}\n")
        writer = csv.DictWriter(fh, fieldnames=COLUMNS, lineterminator="\n", extrasaction="ignore")
        writer.writeheader()
        fh.flush()

        def work(task):
            return runner.replicate(*task)

        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            # map yields in submission order, so rows land in (grid, replicate) order
            for (g, _, r), (rows, elapsed) in zip(tasks, pool.map(work, tasks)):
                for row in rows:
                    writer.writerow({k: _fmt(row.get(k)) for k in COLUMNS})
                fh.flush()
                all_rows.extend(rows)
                timing.append((g, r, elapsed))

    with open(_sidecar(config.out, "timing"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("grid_index", "replicate", "seconds"))
        w.writerows((g, r, f"{t:.6f}") for g, r, t in timing)

    summary = summarize(all_rows, config.eta, {d: runner.nets[d].m for d in runner.nets})
    summary_path = _sidecar(config.out, "summary")
    write_summary(summary, summary_path, stamp)
    return ExperimentResult(config.out, summary_path, _sidecar(config.out, "timing"), all_rows, summary)


def _to_float(v):
    if v is None or v == "":
        return np.nan
    return float(v)


def summarize(rows, eta=None, net_sizes=None):
    """Group rows by (estimator, n, eps, q, delta) and reduce each loss to median and 0.9-quantile."""
    groups = {}
    for row in rows:
        key = tuple(_fmt(row.get(k)) if not isinstance(row.get(k), str) else row.get(k) for k in GROUP_COLUMNS)
        groups.setdefault(key, []).append(row)
    out = []
    for key, members in groups.items():
        ok = [r for r in members if r.get("status") == "ok"]
        rec = dict(zip(GROUP_COLUMNS, key))
        rec["count"] = len(ok)
        rec["errors"] = len(members) - len(ok)
        for loss in LOSS_COLUMNS:
            vals = np.array([_to_float(r.get(loss)) for r in ok], dtype=float)
            vals = vals[~np.isnan(vals)]
            rec[f"{loss}_median"] = float(np.median(vals)) if vals.size else np.nan
            rec[f"{loss}_q90"] = float(np.quantile(vals, 0.9)) if vals.size else np.nan
        rec["eta"] = eta
        rec["failure_bound"] = np.nan
        rec["exceed_rate"] = np.nan
        delta = _to_float(rec["delta"])
        if eta is not None and not np.isnan(delta):
            tv = np.array([_to_float(r.get("tv_loss")) for r in ok])
            rec["exceed_rate"] = float(np.mean(tv > eta + delta)) if tv.size else np.nan
            m = None
            if net_sizes:
                m = next((v for d, v in net_sizes.items() if abs(d - delta) <= 1e-12 * max(1.0, d)), None)
            if m is None and ok and ok[0].get("m") not in (None, ""):
                m = int(ok[0]["m"])
            if m is not None:
                try:
                    rec["failure_bound"] = global_failure_bound(m, delta, _to_float(rec["eps"]), eta, _to_float(rec["n"]))
                except DomainError:
                    pass
        out.append(rec)
    return out


def write_summary(summary, path, stamp=None):
    with open(path, "w", newline="") as fh:
        if stamp is not None:
            fh.write(f"# generated {stamp}\n")
        fh.write(f"# scheffe-robust summary columns v{CSV_VERSION}\n")
        w = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for rec in summary:
            w.writerow({k: _fmt(rec.get(k)) for k in SUMMARY_COLUMNS})


def read_rows(path):
    """Rows of a result CSV as dicts of strings (comment lines skipped)."""
    with open(path, newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(lines))


def report(path, out=None, eta=None):
    """Summary table of a result CSV; written to ``out`` when given."""
    rows = read_rows(path)
    missing = [c for c in KEY_COLUMNS if rows and c not in rows[0]]
    if missing:
        raise ConfigurationError(f"{path} lacks columns {missing}")
    summary = summarize(rows, eta)
    if out is not None:
        write_summary(summary, out)
    return summary


def format_summary(summary, losses_shown=("tv_loss",)):
    """Plain-text table of selected medians and 0.9-quantiles."""
    cols = list(GROUP_COLUMNS) + ["count", "errors"]
    for loss in losses_shown:
        cols += [f"{loss}_median", f"{loss}_q90"]
    cells = [[_fmt(rec.get(c)) if not isinstance(rec.get(c), float) else f"{rec[c]:.6g}" for c in cols]
             for rec in summary]
    widths = [max(len(c), *(len(r[i]) for r in cells)) if cells else len(c) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.ljust(w) for v, w in zip(r, widths)) for r in cells]
    return "\n".join(lines)
