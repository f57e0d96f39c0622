"""Grid data model, DC shift factors and the dispatch LPs.

The dispatch problem covers periods ``t = 0..T-1``. Ramping awards exist for
``t >= 1`` only; every period ``t >= 1`` carries the same up/down requirement
(for ``T = 2`` that is the usual single pair of parameters).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import lp as lpmod
from .lp import FEAS_TOL, LinearProgram

BASE_MVA = 100.0


class ModelError(ValueError):
    """Grid data violates a model invariant."""


class NegativeParameterError(ValueError):
    pass


class InfeasibleDispatchError(RuntimeError):
    """The dispatch LP has no feasible point for the requested parameters."""


@dataclass(frozen=True)
class Generator:
    id: str
    bus: int
    cost: float
    ramp: float
    g_max: float
    initial: float
    g_min: float = 0.0
    ramp_up_bid: float = 0.0
    ramp_down_bid: float = 0.0

    def __post_init__(self):
        if not 0 <= self.g_min <= self.g_max:
            raise ModelError(f"generator {self.id}: need 0 <= g_min <= g_max")
        if self.ramp < 0:
            raise ModelError(f"generator {self.id}: negative ramp limit")
        if not self.g_min - FEAS_TOL <= self.initial <= self.g_max + FEAS_TOL:
            raise ModelError(f"generator {self.id}: initial output outside [g_min, g_max]")


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    reactance: float
    capacity: Optional[float] = None  # None: unconstrained, rows omitted


@dataclass(frozen=True)
class GridModel:
    buses: tuple
    lines: tuple
    generators: tuple
    slack_bus: int
    loads: np.ndarray  # (T, n_bus) predicted demand, MW
    name: str = ""
    _shift: Optional[np.ndarray] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "buses", tuple(self.buses))
        set_(self, "lines", tuple(self.lines))
        set_(self, "generators", tuple(self.generators))
        loads = np.array(self.loads, dtype=float)
        if loads.ndim != 2 or loads.shape[1] != len(self.buses):
            raise ModelError("loads must be a (horizon, n_bus) array")
        if loads.shape[0] < 2:
            raise ModelError("horizon must be at least 2")
        loads.setflags(write=False)
        set_(self, "loads", loads)
        if len(set(self.buses)) != len(self.buses):
            raise ModelError("duplicate bus ids")
        if self.slack_bus not in self.buses:
            raise ModelError(f"slack bus {self.slack_bus} not in bus list")
        for g in self.generators:
            if g.bus not in self.buses:
                raise ModelError(f"generator {g.id} sits on unknown bus {g.bus}")
        if len({g.id for g in self.generators}) != len(self.generators):
            raise ModelError("duplicate generator ids")
        for ln in self.lines:
            if ln.from_bus not in self.buses or ln.to_bus not in self.buses:
                raise ModelError(f"line {ln.from_bus}-{ln.to_bus} references unknown bus")
        if len(self.buses) > 1:
            # validates connectivity and reactances up front
            set_(self, "_shift", compute_shift_factors(self))
        else:
            set_(self, "_shift", np.zeros((len(self.lines), 1)))

    @property
    def horizon(self) -> int:
        return self.loads.shape[0]

    @property
    def n_gen(self) -> int:
        return len(self.generators)

    def bus_index(self, bus: int) -> int:
        return self.buses.index(bus)

    @property
    def shift_factors(self) -> np.ndarray:
        return self._shift

    def total_ramp(self) -> float:
        return float(sum(g.ramp for g in self.generators))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "buses": list(self.buses),
            "slack_bus": self.slack_bus,
            "horizon": self.horizon,
            "lines": [
                {"from": ln.from_bus, "to": ln.to_bus, "reactance": ln.reactance,
                 "capacity": ln.capacity}
                for ln in self.lines
            ],
            "generators": [
                {"id": g.id, "bus": g.bus, "cost": g.cost, "ramp": g.ramp,
                 "g_min": g.g_min, "g_max": g.g_max, "initial": g.initial,
                 "ramp_up_bid": g.ramp_up_bid, "ramp_down_bid": g.ramp_down_bid}
                for g in self.generators
            ],
            "loads": self.loads.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GridModel":
        try:
            buses = tuple(int(b) for b in data["buses"])
            lines = tuple(
                Line(int(d["from"]), int(d["to"]), float(d["reactance"]),
                     None if d.get("capacity") is None else float(d["capacity"]))
                for d in data.get("lines", [])
            )
            gens = tuple(
                Generator(
                    id=str(d["id"]), bus=int(d["bus"]), cost=float(d["cost"]),
                    ramp=float(d["ramp"]), g_max=float(d["g_max"]),
                    initial=float(d["initial"]), g_min=float(d.get("g_min", 0.0)),
                    ramp_up_bid=float(d.get("ramp_up_bid", 0.0)),
                    ramp_down_bid=float(d.get("ramp_down_bid", 0.0)),
                )
                for d in data["generators"]
            )
            loads = data["loads"]
            slack = int(data["slack_bus"])
        except (KeyError, TypeError) as exc:
            raise ModelError(f"malformed grid model: {exc!r}") from exc
        model = cls(buses, lines, gens, slack, loads, name=str(data.get("name", "")))
        if "horizon" in data and int(data["horizon"]) != model.horizon:
            raise ModelError("horizon does not match number of load rows")
        return model


def load_model(path) -> GridModel:
    with open(path, encoding="utf-8") as fh:
        return GridModel.from_dict(json.load(fh))


def bundled_model_path(name: str) -> Path:
    """Path of a model shipped with the package (``threebus`` or ``garver6``)."""
    stem = name[:-5] if name.endswith(".json") else name
    return Path(__file__).parent / "data" / f"{stem}.json"


def bundled_model(name: str) -> GridModel:
    return load_model(bundled_model_path(name))


def compute_shift_factors(model: GridModel) -> np.ndarray:
    """DC power transfer distribution factors, shape ``(n_line, n_bus)``.

    Entry ``[l, k]`` is the flow on line ``l`` (from -> to positive) caused by
    injecting 1 MW at bus ``k`` and withdrawing it at the slack bus.
    """
    nb, nl = len(model.buses), len(model.lines)
    idx = {b: i for i, b in enumerate(model.buses)}
    if nb == 1:
        return np.zeros((nl, 1))
    x = np.array([ln.reactance for ln in model.lines], dtype=float)
    if np.any(x <= 0):
        raise ModelError("line reactances must be positive")
    rows = np.arange(nl)
    f = np.array([idx[ln.from_bus] for ln in model.lines], dtype=int)
    t = np.array([idx[ln.to_bus] for ln in model.lines], dtype=int)

    adj = csr_matrix((np.ones(nl), (f, t)), shape=(nb, nb))
    n_comp, _ = connected_components(adj, directed=False)
    if n_comp != 1:
        raise ModelError(f"network is disconnected ({n_comp} islands)")

    # incidence (line x bus); susceptance in p.u. on BASE_MVA (cancels in the ratio)
    inc = np.zeros((nl, nb))
    inc[rows, f] = 1.0
    inc[rows, t] = -1.0
    b = BASE_MVA / x
    bf = b[:, None] * inc
    bbus = inc.T @ bf
    keep = [i for i in range(nb) if i != idx[model.slack_bus]]
    ptdf = np.zeros((nl, nb))
    ptdf[:, keep] = np.linalg.solve(bbus[np.ix_(keep, keep)].T, bf[:, keep].T).T
    return ptdf


# ---------------------------------------------------------------------------
# LP construction
# ---------------------------------------------------------------------------

class _Builder:
    """Accumulates labelled rows over a fixed variable layout."""

    def __init__(self, model: GridModel, extra_vars: Sequence = ()):
        self.model = model
        T, N = model.horizon, model.n_gen
        labels = [("g", n, t) for t in range(T) for n in range(N)]
        labels += [("ru", n, t) for t in range(1, T) for n in range(N)]
        labels += [("rd", n, t) for t in range(1, T) for n in range(N)]
        labels += list(extra_vars)
        self.labels = labels
        self.col = {lab: i for i, lab in enumerate(labels)}
        self.eq_rows, self.eq_rhs, self.eq_labels = [], [], []
        self.ub_rows, self.ub_rhs, self.ub_labels = [], [], []

    def row(self, coeffs: dict) -> np.ndarray:
        r = np.zeros(len(self.labels))
        for lab, v in coeffs.items():
            r[self.col[lab]] += v
        return r

    def eq(self, label, coeffs, rhs):
        self.eq_rows.append(self.row(coeffs))
        self.eq_rhs.append(rhs)
        self.eq_labels.append(label)

    def ub(self, label, coeffs, rhs):
        self.ub_rows.append(self.row(coeffs))
        self.ub_rhs.append(rhs)
        self.ub_labels.append(label)

    def cost_coeffs(self) -> dict:
        m, T = self.model, self.model.horizon
        c = {}
        for n, g in enumerate(m.generators):
            for t in range(T):
                c[("g", n, t)] = g.cost
            for t in range(1, T):
                c[("ru", n, t)] = g.ramp_up_bid
                c[("rd", n, t)] = g.ramp_down_bid
        return c

    def program(self, cost: dict, sense: str, lower: dict, upper: dict) -> LinearProgram:
        lo = np.zeros(len(self.labels))
        hi = np.full(len(self.labels), np.inf)
        for lab, v in lower.items():
            lo[self.col[lab]] = v
        for lab, v in upper.items():
            hi[self.col[lab]] = v
        n = len(self.labels)
        return LinearProgram(
            self.row(cost),
            np.array(self.eq_rows).reshape(-1, n), np.array(self.eq_rhs, dtype=float),
            np.array(self.ub_rows).reshape(-1, n), np.array(self.ub_rhs, dtype=float),
            lo, hi, sense=sense, var_labels=tuple(self.labels),
            eq_labels=tuple(self.eq_labels), ub_labels=tuple(self.ub_labels),
        )


def _base_system(model: GridModel, extra_vars=()):
    """Network, balance, headroom and ramp rows shared by all three programs."""
    bld = _Builder(model, extra_vars)
    T, N = model.horizon, model.n_gen
    gens = model.generators
    H = model.shift_factors
    gen_cols = [model.bus_index(g.bus) for g in gens]

    for t in range(T):
        d = model.loads[t]
        # line limits: -b <= H (Cg g - d) <= b, omitted for unlimited lines
        for l, ln in enumerate(model.lines):
            if ln.capacity is None:
                continue
            flow = {("g", n, t): H[l, gen_cols[n]] for n in range(N)}
            load_flow = float(H[l] @ d)
            bld.ub(("flow_max", l, t), flow, ln.capacity + load_flow)
            bld.ub(("flow_min", l, t), {k: -v for k, v in flow.items()}, ln.capacity - load_flow)
        bld.eq(("balance", t), {("g", n, t): 1.0 for n in range(N)}, float(d.sum()))

    for n, g in enumerate(gens):
        # anchor t=0 against the previous interval's output
        bld.ub(("anchor_up", n), {("g", n, 0): 1.0}, g.initial + g.ramp)
        bld.ub(("anchor_dn", n), {("g", n, 0): -1.0}, g.ramp - g.initial)
        for t in range(1, T):
            bld.ub(("head_up", n, t), {("g", n, t): 1.0, ("ru", n, t): 1.0}, g.g_max)
            bld.ub(("head_dn", n, t), {("g", n, t): -1.0, ("rd", n, t): 1.0}, -g.g_min)
        for t in range(T - 1):
            # worst-case up move: g_{t+1} - g_t + ru_{t+1} + rd_t, both signs
            up = {("g", n, t + 1): 1.0, ("g", n, t): -1.0, ("ru", n, t + 1): 1.0}
            dn = {("g", n, t + 1): 1.0, ("g", n, t): -1.0, ("rd", n, t + 1): -1.0}
            if t >= 1:
                up[("rd", n, t)] = 1.0
                dn[("ru", n, t)] = -1.0
            bld.ub(("ramp_up_max", n, t), up, g.ramp)
            bld.ub(("ramp_up_min", n, t), {k: -v for k, v in up.items()}, g.ramp)
            bld.ub(("ramp_dn_max", n, t), dn, g.ramp)
            bld.ub(("ramp_dn_min", n, t), {k: -v for k, v in dn.items()}, g.ramp)

    lower = {("g", n, t): g.g_min for n, g in enumerate(gens) for t in range(T)}
    upper = {("g", n, t): g.g_max for n, g in enumerate(gens) for t in range(T)}
    return bld, lower, upper


def up_labels(model: GridModel) -> list:
    """Equality labels of the up-ramping requirement rows."""
    return [("ramp_up", t) for t in range(1, model.horizon)]


def down_labels(model: GridModel) -> list:
    return [("ramp_down", t) for t in range(1, model.horizon)]


def _requirement_rows(bld: _Builder, model: GridModel, kind: str, rhs: float, param_var=None):
    vkey = "ru" if kind == "ramp_up" else "rd"
    for t in range(1, model.horizon):
        coeffs = {(vkey, n, t): 1.0 for n in range(model.n_gen)}
        if param_var is not None:
            coeffs[param_var] = -1.0
        bld.eq((kind, t), coeffs, rhs)


def _check_nonneg(**params):
    for name, v in params.items():
        if v is None:
            continue
        if math.isnan(v) or v < 0:
            raise NegativeParameterError(f"{name} must be >= 0, got {v}")


def build_minc_lp(model: GridModel, f_u: float, f_d: float) -> LinearProgram:
    """Minimal-cost dispatch with fixed up/down ramping requirements."""
    _check_nonneg(f_u=f_u, f_d=f_d)
    bld, lower, upper = _base_system(model)
    _requirement_rows(bld, model, "ramp_up", f_u)
    _requirement_rows(bld, model, "ramp_down", f_d)
    return bld.program(bld.cost_coeffs(), lpmod.MINIMIZE, lower, upper)


def _build_max_ramp(model, theta, fixed, maximize: str) -> LinearProgram:
    other = "ramp_down" if maximize == "ramp_up" else "ramp_up"
    var = ("f", maximize)
    bld, lower, upper = _base_system(model, extra_vars=[var])
    _requirement_rows(bld, model, maximize, 0.0, param_var=var)
    _requirement_rows(bld, model, other, fixed)
    if theta is not None and not math.isinf(theta):
        bld.ub("budget", bld.cost_coeffs(), theta)
    return bld.program({var: 1.0}, lpmod.MAXIMIZE, lower, upper)


def build_maxur_lp(model: GridModel, theta: Optional[float], f_d: float) -> LinearProgram:
    """Maximal up-ramping under a cost budget; ``theta=None`` or ``inf`` drops the budget."""
    _check_nonneg(theta=theta, f_d=f_d)
    return _build_max_ramp(model, theta, f_d, "ramp_up")


def build_maxdr_lp(model: GridModel, theta: Optional[float], f_u: float) -> LinearProgram:
    _check_nonneg(theta=theta, f_u=f_u)
    return _build_max_ramp(model, theta, f_u, "ramp_down")


# ---------------------------------------------------------------------------
# Solutions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DispatchSolution:
    status: str
    g: Optional[np.ndarray] = None        # (n_gen, T)
    r_up: Optional[np.ndarray] = None     # (n_gen, T-1), column j is period j+1
    r_down: Optional[np.ndarray] = None
    objective: Optional[float] = None
    dual_up: Optional[float] = None       # d objective / d f_u
    dual_down: Optional[float] = None

    def to_dict(self) -> dict:
        if self.status != lpmod.OPTIMAL:
            return {"status": self.status}
        return {
            "status": self.status,
            "objective": self.objective,
            "g": self.g.tolist(),
            "r_up": self.r_up.tolist(),
            "r_down": self.r_down.tolist(),
            "dual_up": self.dual_up,
            "dual_down": self.dual_down,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DispatchSolution":
        if data["status"] != lpmod.OPTIMAL:
            return cls(data["status"])
        return cls(
            data["status"], np.array(data["g"], dtype=float),
            np.array(data["r_up"], dtype=float).reshape(len(data["g"]), -1),
            np.array(data["r_down"], dtype=float).reshape(len(data["g"]), -1),
            float(data["objective"]), float(data["dual_up"]), float(data["dual_down"]),
        )


def _extract(model: GridModel, sol: lpmod.LpSolution):
    T, N = model.horizon, model.n_gen
    g = np.array([[sol.value(("g", n, t)) for t in range(T)] for n in range(N)])
    ru = np.array([[sol.value(("ru", n, t)) for t in range(1, T)] for n in range(N)])
    rd = np.array([[sol.value(("rd", n, t)) for t in range(1, T)] for n in range(N)])
    return g, ru, rd


def solve_dispatch(model: GridModel, f_u: float, f_d: float) -> DispatchSolution:
    prog = build_minc_lp(model, f_u, f_d)
    sol = lpmod.solve(prog)
    if not sol.optimal:
        return DispatchSolution(sol.status)
    g, ru, rd = _extract(model, sol)
    return DispatchSolution(
        sol.status, g, ru, rd, sol.objective,
        sum(sol.eq_dual(lab) for lab in up_labels(model)),
        sum(sol.eq_dual(lab) for lab in down_labels(model)),
    )


def check_dispatch(model: GridModel, sol: DispatchSolution, f_u: float, f_d: float,
                   tol: float = FEAS_TOL) -> list:
    """Arithmetic re-check of a dispatch against the physical constraints.

    Returns a list of human-readable violations (empty when feasible).
    """
    bad = []
    T = model.horizon
    g, ru, rd = sol.g, sol.r_up, sol.r_down
    tol = tol * max(1.0, float(np.abs(model.loads).sum(axis=1).max()))
    for t in range(T):
        if abs(g[:, t].sum() - model.loads[t].sum()) > tol:
            bad.append(f"balance t={t}")
        inj = np.zeros(len(model.buses))
        for n, gen in enumerate(model.generators):
            inj[model.bus_index(gen.bus)] += g[n, t]
        flows = model.shift_factors @ (inj - model.loads[t])
        for l, ln in enumerate(model.lines):
            if ln.capacity is not None and abs(flows[l]) > ln.capacity + tol:
                bad.append(f"flow line {l} t={t}")
    if np.any(ru < -tol) or np.any(rd < -tol):
        bad.append("negative award")
    for t in range(1, T):
        if abs(ru[:, t - 1].sum() - f_u) > tol:
            bad.append(f"up requirement t={t}")
        if abs(rd[:, t - 1].sum() - f_d) > tol:
            bad.append(f"down requirement t={t}")
    for n, gen in enumerate(model.generators):
        if abs(g[n, 0] - gen.initial) > gen.ramp + tol:
            bad.append(f"anchor {gen.id}")
        for t in range(T):
            if g[n, t] < gen.g_min - tol or g[n, t] > gen.g_max + tol:
                bad.append(f"capacity {gen.id} t={t}")
        for t in range(1, T):
            if g[n, t] + ru[n, t - 1] > gen.g_max + tol:
                bad.append(f"headroom up {gen.id} t={t}")
            if g[n, t] - rd[n, t - 1] < gen.g_min - tol:
                bad.append(f"headroom down {gen.id} t={t}")
        for t in range(T - 1):
            ru_next, rd_next = ru[n, t], rd[n, t]
            rd_now = rd[n, t - 1] if t >= 1 else 0.0
            ru_now = ru[n, t - 1] if t >= 1 else 0.0
            step = g[n, t + 1] - g[n, t]
            if abs(step + ru_next + rd_now) > gen.ramp + tol:
                bad.append(f"ramp up {gen.id} t={t}")
            if abs(step - rd_next - ru_now) > gen.ramp + tol:
                bad.append(f"ramp down {gen.id} t={t}")
    return bad


def min_cost(model: GridModel, f_u: float, f_d: float) -> float:
    """MinC value by direct LP solve; raises InfeasibleDispatchError outside the region."""
    sol = lpmod.solve(build_minc_lp(model, f_u, f_d))
    if not sol.optimal:
        raise InfeasibleDispatchError(f"MinC({f_u}, {f_d}) is {sol.status}")
    return sol.objective


def max_up_ramp(model: GridModel, theta: Optional[float], f_d: float) -> float:
    sol = lpmod.solve(build_maxur_lp(model, theta, f_d))
    if not sol.optimal:
        raise InfeasibleDispatchError(f"MaxUR({theta}, {f_d}) is {sol.status}")
    return sol.objective


def max_down_ramp(model: GridModel, theta: Optional[float], f_u: float) -> float:
    sol = lpmod.solve(build_maxdr_lp(model, theta, f_u))
    if not sol.optimal:
        raise InfeasibleDispatchError(f"MaxDR({theta}, {f_u}) is {sol.status}")
    return sol.objective
