"""Prediction-error distributions, the chance constraint and the ramping-pair search.

The chance constraint asks that the aggregate prediction error ``e`` falls
inside ``[-f_d, f_u]`` with probability at least ``p``, using the empirical
distribution of historical errors.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .surface import CostSurface, OutOfRegionError

BANDS = (
    ("low", 0.10, 0.30),
    ("mid", 0.30, 0.70),
    ("high", 0.70, math.inf),
)
TRIM_FRACTION = 0.10

# error moments (MW) reported for a 4500 MW wind plant, per band
REFERENCE_CAPACITY = 4500.0
REFERENCE_MOMENTS = {"low": (7.8, 223.0), "mid": (-70.7, 300.0), "high": (-77.7, 175.0)}


class EmptyDistributionError(ValueError):
    pass


class EmptyBandError(LookupError):
    pass


class NoFeasiblePairError(RuntimeError):
    pass


@dataclass(frozen=True)
class EmpiricalErrorDistribution:
    """Sorted sample of aggregate prediction errors (MW)."""

    samples: np.ndarray
    label: str = ""

    def __post_init__(self):
        s = np.sort(np.asarray(self.samples, dtype=float).ravel())
        if s.size == 0:
            raise EmptyDistributionError("distribution needs at least one sample")
        if not np.all(np.isfinite(s)):
            raise ValueError("samples must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def n(self) -> int:
        return self.samples.size

    @property
    def a(self) -> float:
        return float(self.samples[0])

    @property
    def b(self) -> float:
        return float(self.samples[-1])

    @property
    def mean(self) -> float:
        return float(self.samples.mean())

    @property
    def std(self) -> float:
        return float(self.samples.std())

    def confidence(self, f_u, f_d):
        """Fraction of samples inside the closed interval ``[-f_d, f_u]``.

        Vectorizes over array arguments.
        """
        f_u = np.asarray(f_u, dtype=float)
        f_d = np.asarray(f_d, dtype=float)
        if np.any(f_u < 0) or np.any(f_d < 0):
            raise ValueError("ramping requirements must be >= 0")
        hi = np.searchsorted(self.samples, f_u, side="right")
        lo = np.searchsorted(self.samples, -f_d, side="left")
        out = (hi - lo) / self.n
        return float(out) if out.ndim == 0 else out

    def scaled(self, factor: float, label: Optional[str] = None) -> "EmpiricalErrorDistribution":
        return EmpiricalErrorDistribution(self.samples * factor, label or self.label)

    def to_dict(self, band: Optional[tuple] = None) -> dict:
        out = {"label": self.label, "n": self.n, "mean": self.mean, "std": self.std,
               "a": self.a, "b": self.b, "samples": self.samples.tolist()}
        if band is not None:
            out["band"] = list(band)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "EmpiricalErrorDistribution":
        return cls(np.array(data["samples"], dtype=float), data.get("label", ""))


def confidence(dist: EmpiricalErrorDistribution, f_u: float, f_d: float) -> float:
    return dist.confidence(f_u, f_d)


@dataclass(frozen=True)
class RegimeModel:
    """Error distributions per forecast-output band of a plant."""

    capacity: float
    samples: dict
    trimmed: int = 0

    def band(self, name: str) -> EmpiricalErrorDistribution:
        if name not in self.samples:
            raise KeyError(f"unknown band {name!r}; bands are {[b[0] for b in BANDS]}")
        s = self.samples[name]
        if len(s) == 0:
            raise EmptyBandError(f"band {name!r} has no records")
        return EmpiricalErrorDistribution(s, name)

    def counts(self) -> dict:
        return {k: len(v) for k, v in self.samples.items()}

    @staticmethod
    def band_for(fraction: float) -> Optional[str]:
        """Band name for an output fraction, or None when it is trimmed."""
        for name, lo, hi in BANDS:
            if lo < fraction <= hi:
                return name
        return None

    def to_dict(self) -> dict:
        bands = {}
        for name, lo, hi in BANDS:
            if len(self.samples[name]):
                bands[name] = self.band(name).to_dict((lo, None if math.isinf(hi) else hi))
            else:
                bands[name] = {"label": name, "n": 0, "samples": []}
        return {"capacity": self.capacity, "trimmed": self.trimmed, "bands": bands}


def ingest_samples(records: Iterable, capacity: float, as_net_load: bool = False) -> RegimeModel:
    """Split ``(predicted_mw, actual_mw)`` records into output bands.

    Records whose predicted output is at or below 10% of ``capacity`` are
    dropped. Errors are ``actual - predicted``; with ``as_net_load`` the
    sign is flipped, since more renewable output means less net load.
    """
    if not capacity > 0:
        raise ValueError("capacity must be positive")
    rec = np.asarray(list(records), dtype=float).reshape(-1, 2)
    pred, act = rec[:, 0], rec[:, 1]
    err = act - pred
    if as_net_load:
        err = -err
    frac = pred / capacity
    out = {}
    keep = np.zeros(len(rec), dtype=bool)
    for name, lo, hi in BANDS:
        mask = (frac > lo) & (frac <= hi)
        keep |= mask
        out[name] = err[mask]
    return RegimeModel(float(capacity), out, int((~keep).sum()))


def read_records_csv(text: str) -> list:
    """Parse CSV text with header ``predicted_mw,actual_mw``."""
    rows = csv.DictReader(io.StringIO(text))
    if rows.fieldnames is None or not {"predicted_mw", "actual_mw"} <= set(rows.fieldnames):
        raise ValueError("sample CSV needs columns predicted_mw,actual_mw")
    return [(float(r["predicted_mw"]), float(r["actual_mw"])) for r in rows]


def write_records_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["predicted_mw", "actual_mw"])
    for p, a in records:
        w.writerow([repr(float(p)), repr(float(a))])
    return buf.getvalue()


def read_errors_csv(text: str) -> EmpiricalErrorDistribution:
    """Distribution from a CSV of records, or a single ``error_mw`` column."""
    head = text.lstrip().split("\n", 1)[0]
    if "error_mw" in head:
        rows = csv.DictReader(io.StringIO(text))
        return EmpiricalErrorDistribution([float(r["error_mw"]) for r in rows])
    rec = np.asarray(read_records_csv(text), dtype=float).reshape(-1, 2)
    return EmpiricalErrorDistribution(rec[:, 1] - rec[:, 0])


# ---------------------------------------------------------------------------
# Synthetic data
# ---------------------------------------------------------------------------

def skewed_samples(mean: float, std: float, n: int, skew: float = 1.0,
                   rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Skewed samples rescaled to exactly the requested mean and std.

    ``skew`` > 0 gives a long right tail, < 0 a long left tail, 0 a normal shape.
    """
    rng = rng if rng is not None else np.random.default_rng()
    if n < 2:
        return np.full(n, float(mean))
    if skew == 0:
        z = rng.standard_normal(n)
    else:
        # gamma with shape k has skewness 2/sqrt(k)
        k = 4.0 / skew ** 2
        z = rng.gamma(k, 1.0, n) * np.sign(skew)
    z = (z - z.mean()) / z.std()
    return mean + std * z


def synthetic_records(n_per_band: int, capacity: float = REFERENCE_CAPACITY,
                      moments: Optional[dict] = None, skew: float = 1.0,
                      rng: Optional[np.random.Generator] = None) -> list:
    """(predicted, actual) records whose per-band errors hit the given moments.

    Moments default to the reference plant's, scaled linearly with ``capacity``.
    Predicted outputs are uniform within each band (high band capped at full
    output), plus ``n_per_band // 10`` trimmed records below 10%.
    """
    rng = rng if rng is not None else np.random.default_rng()
    ratio = capacity / REFERENCE_CAPACITY
    moments = moments or {k: (m * ratio, s * ratio) for k, (m, s) in REFERENCE_MOMENTS.items()}
    out = []
    for name, lo, hi in BANDS:
        mean, std = moments[name]
        hi = min(hi, 1.0)
        # open lower edge: stay strictly above lo
        pred = capacity * rng.uniform(lo + 1e-6, hi, n_per_band)
        err = skewed_samples(mean, std, n_per_band, skew, rng)
        out.extend(zip(pred.tolist(), (pred + err).tolist()))
    n_trim = n_per_band // 10
    pred = capacity * rng.uniform(0.0, TRIM_FRACTION, n_trim)
    out.extend(zip(pred.tolist(), (pred + rng.normal(0, 1, n_trim)).tolist()))
    return out


# ---------------------------------------------------------------------------
# Search
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SearchGrid:
    """Candidate requirements: ``f_d`` descending from ``-a`` to 0, ``f_u`` ascending to ``b``."""

    f_d: np.ndarray
    f_u: np.ndarray
    delta: float

    @classmethod
    def for_distribution(cls, dist: EmpiricalErrorDistribution, delta: Optional[float] = None):
        # the loops need a <= 0 <= b; one-sided supports are clipped
        a, b = min(dist.a, 0.0), max(dist.b, 0.0)
        if delta is None:
            delta = (b - a) / 200 if b > a else 1.0
        if not delta > 0:
            raise ValueError("delta must be positive")
        nd = int(math.ceil(-a / delta - 1e-12)) if a < 0 else 0
        nu = int(math.ceil(b / delta - 1e-12)) if b > 0 else 0
        fd = np.maximum(-a - delta * np.arange(nd + 1), 0.0)
        fu = np.minimum(delta * np.arange(nu + 1), b)
        return cls(fd, fu, float(delta))


@dataclass(frozen=True)
class RiskDispatchResult:
    f_u: float
    f_d: float
    cost: float
    ds: float
    confidence: float
    p: float
    delta: float
    checks: int = 0
    queries: int = 0
    outer_iterations: int = 0
    skipped: int = 0
    greedy: Optional[dict] = None

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in (
            "f_u", "f_d", "cost", "ds", "confidence", "p", "delta",
            "checks", "queries", "outer_iterations", "skipped")}
        out["greedy"] = self.greedy
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RiskDispatchResult":
        ints = ("checks", "queries", "outer_iterations", "skipped")
        kw = {k: (int(v) if k in ints else float(v)) for k, v in data.items() if k != "greedy"}
        return cls(greedy=data.get("greedy"), **kw)


def _check_p(p: float):
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be a fraction in [0, 1]")


def _surface_cost(surface: CostSurface, fu: float, fd: float) -> Optional[float]:
    try:
        return surface.query(fu, fd)
    except OutOfRegionError:
        return None


def greedy_dispatch(dist: EmpiricalErrorDistribution, p: float,
                    delta: Optional[float] = None) -> tuple:
    """Shortest covering interval on the search grid: min ``f_u + f_d``.

    Ties go to the smaller ``f_d``, then the smaller ``f_u``.
    """
    _check_p(p)
    grid = SearchGrid.for_distribution(dist, delta)
    conf = dist.confidence(grid.f_u[None, :], grid.f_d[:, None])
    ok = conf >= p
    if not ok.any():
        raise NoFeasiblePairError(f"no grid pair reaches confidence {p}")
    total = np.where(ok, grid.f_u[None, :] + grid.f_d[:, None], np.inf)
    best = total.min()
    tie = 1e-12 * max(1.0, best)
    cand = [(grid.f_d[i], grid.f_u[j]) for i, j in zip(*np.nonzero(total <= best + tie))]
    fd, fu = min(cand)
    return float(fu), float(fd)


def risk_dispatch(surface: CostSurface, dist: EmpiricalErrorDistribution, p: float,
                  delta: Optional[float] = None, compare_greedy: bool = True) -> RiskDispatchResult:
    """Cheapest grid pair meeting the chance constraint, by warm-started linear search.

    The outer loop steps ``f_d`` down from ``-a``; the inner loop steps
    ``f_u`` up from where the previous covering ``f_u`` was found. Covering
    pairs outside the feasible region are skipped. Once no ``f_u`` covers a
    given ``f_d``, smaller ``f_d`` cannot cover either and the search stops.

    Raises
    ------
    NoFeasiblePairError
        If no feasible grid pair reaches confidence ``p``.
    """
    _check_p(p)
    grid = SearchGrid.for_distribution(dist, delta)
    fu_grid = grid.f_u
    start = 0
    opt, best = math.inf, None
    checks = queries = outer = skipped = 0
    for fd in grid.f_d:
        outer += 1
        hit = None
        for j in range(start, len(fu_grid)):
            checks += 1
            if dist.confidence(fu_grid[j], fd) >= p:
                hit = j
                break
        if hit is None:
            break
        start = hit
        fu = fu_grid[hit]
        queries += 1
        cost = _surface_cost(surface, fu, fd)
        if cost is None:
            skipped += 1
            continue
        if cost <= opt:
            opt, best = cost, (float(fu), float(fd))
    if best is None:
        if skipped:
            raise NoFeasiblePairError(
                f"every covering pair exceeds the feasible region "
                f"(max up {surface.region[:, 0].max():.6g} MW, "
                f"max down {surface.region[:, 1].max():.6g} MW)")
        raise NoFeasiblePairError(f"no grid pair reaches confidence {p}")
    fu, fd = best
    greedy = None
    if compare_greedy:
        g_fu, g_fd = greedy_dispatch(dist, p, grid.delta)
        g_cost = _surface_cost(surface, g_fu, g_fd)
        greedy = {"f_u": g_fu, "f_d": g_fd, "cost": g_cost,
                  "ds": None if g_cost is None else g_cost - surface.base_cost}
    return RiskDispatchResult(fu, fd, opt, opt - surface.base_cost, dist.confidence(fu, fd),
                              p, grid.delta, checks, queries, outer, skipped, greedy)


def distribution_json(model: RegimeModel) -> str:
    return json.dumps(model.to_dict(), sort_keys=True)
