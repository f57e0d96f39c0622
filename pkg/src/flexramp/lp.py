"""Linear-program container and solver wrapper with dual extraction.

Every parametric evaluation in this package is a single call to
:func:`solve`. Duals follow the sensitivity convention: the multiplier
reported for a constraint is the derivative of the optimal objective
(in the program's own sense) with respect to that constraint's rhs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Hashable, Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from .config import DEFAULT as _TOL

logger = logging.getLogger(__name__)

FEAS_TOL = _TOL.feas
COMP_TOL = _TOL.comp

MINIMIZE = "minimize"
MAXIMIZE = "maximize"

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class MalformedProgramError(ValueError):
    """Raised when a program's dimensions, bounds or labels are inconsistent."""


class NumericalFailureError(RuntimeError):
    """Raised when the backend cannot certify optimality, infeasibility or unboundedness."""


def _as_matrix(rows, n: int) -> np.ndarray:
    if rows is None:
        return np.zeros((0, n))
    a = np.asarray(rows, dtype=float)
    if a.size == 0:
        return np.zeros((0, n))
    if a.ndim != 2:
        raise MalformedProgramError("constraint rows must form a 2-D array")
    return a


@dataclass(frozen=True)
class LinearProgram:
    """An LP in the form ``opt c.x  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  lo <= x <= hi``.

    Labels are opaque hashable tags; callers use them to find a particular
    row (e.g. a ramping requirement) in the solution's dual vectors.
    """

    cost: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    a_ub: np.ndarray
    b_ub: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    sense: str = MINIMIZE
    var_labels: tuple = ()
    eq_labels: tuple = ()
    ub_labels: tuple = ()
    _eq_index: dict = field(default=None, init=False, repr=False, compare=False)
    _ub_index: dict = field(default=None, init=False, repr=False, compare=False)
    _var_index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        cost = np.asarray(self.cost, dtype=float).ravel()
        n = cost.size
        a_eq = _as_matrix(self.a_eq, n)
        a_ub = _as_matrix(self.a_ub, n)
        b_eq = np.asarray(self.b_eq, dtype=float).ravel()
        b_ub = np.asarray(self.b_ub, dtype=float).ravel()
        lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (n,)).copy()
        upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (n,)).copy()

        if a_eq.shape[1] != n or a_ub.shape[1] != n:
            raise MalformedProgramError(
                f"row arity mismatch: cost has {n} entries, rows have "
                f"{a_eq.shape[1]} (eq) / {a_ub.shape[1]} (ub)"
            )
        if a_eq.shape[0] != b_eq.size or a_ub.shape[0] != b_ub.size:
            raise MalformedProgramError("rhs length does not match row count")
        if np.any(np.isnan(lower)) or np.any(np.isnan(upper)):
            raise MalformedProgramError("NaN in variable bounds")
        if np.any(lower > upper):
            bad = int(np.argmax(lower > upper))
            raise MalformedProgramError(
                f"variable {bad}: lower bound {lower[bad]} exceeds upper {upper[bad]}"
            )
        if self.sense not in (MINIMIZE, MAXIMIZE):
            raise MalformedProgramError(f"unknown objective sense {self.sense!r}")

        var_labels = tuple(self.var_labels) or tuple(range(n))
        eq_labels = tuple(self.eq_labels) or tuple(("eq", i) for i in range(b_eq.size))
        ub_labels = tuple(self.ub_labels) or tuple(("ub", i) for i in range(b_ub.size))
        for name, labels, size in (
            ("variable", var_labels, n),
            ("equality", eq_labels, b_eq.size),
            ("inequality", ub_labels, b_ub.size),
        ):
            if len(labels) != size:
                raise MalformedProgramError(f"{name} label count {len(labels)} != {size}")
            if len(set(labels)) != size:
                raise MalformedProgramError(f"duplicate {name} labels")

        for arr in (cost, a_eq, b_eq, a_ub, b_ub, lower, upper):
            arr.setflags(write=False)
        set_ = object.__setattr__
        set_(self, "cost", cost)
        set_(self, "a_eq", a_eq)
        set_(self, "b_eq", b_eq)
        set_(self, "a_ub", a_ub)
        set_(self, "b_ub", b_ub)
        set_(self, "lower", lower)
        set_(self, "upper", upper)
        set_(self, "var_labels", var_labels)
        set_(self, "eq_labels", eq_labels)
        set_(self, "ub_labels", ub_labels)
        set_(self, "_var_index", {lab: i for i, lab in enumerate(var_labels)})
        set_(self, "_eq_index", {lab: i for i, lab in enumerate(eq_labels)})
        set_(self, "_ub_index", {lab: i for i, lab in enumerate(ub_labels)})

    @property
    def n_vars(self) -> int:
        return self.cost.size

    def var_index(self, label: Hashable) -> int:
        return self._var_index[label]

    def eq_index(self, label: Hashable) -> int:
        return self._eq_index[label]

    def ub_index(self, label: Hashable) -> int:
        return self._ub_index[label]

    def with_rhs(self, eq: Optional[dict] = None, ub: Optional[dict] = None) -> "LinearProgram":
        """Return a copy with selected right-hand sides replaced, keyed by label."""
        b_eq = self.b_eq.copy()
        b_ub = self.b_ub.copy()
        for lab, val in (eq or {}).items():
            b_eq[self._eq_index[lab]] = val
        for lab, val in (ub or {}).items():
            b_ub[self._ub_index[lab]] = val
        return LinearProgram(
            self.cost, self.a_eq, b_eq, self.a_ub, b_ub, self.lower, self.upper,
            sense=self.sense, var_labels=self.var_labels,
            eq_labels=self.eq_labels, ub_labels=self.ub_labels,
        )


@dataclass(frozen=True)
class LpSolution:
    status: str
    primal: Optional[np.ndarray] = None
    objective: Optional[float] = None
    eq_duals: Optional[np.ndarray] = None
    ub_duals: Optional[np.ndarray] = None
    program: Optional[LinearProgram] = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    def eq_dual(self, label: Hashable) -> float:
        return float(self.eq_duals[self.program.eq_index(label)])

    def ub_dual(self, label: Hashable) -> float:
        return float(self.ub_duals[self.program.ub_index(label)])

    def value(self, label: Hashable) -> float:
        return float(self.primal[self.program.var_index(label)])


def solve(lp: LinearProgram) -> LpSolution:
    """Solve ``lp`` with HiGHS dual simplex and return primal, objective and duals.

    Raises
    ------
    NumericalFailureError
        If the backend stops without classifying the instance.
    """
    sign = 1.0 if lp.sense == MINIMIZE else -1.0
    bounds = np.column_stack([
        np.where(np.isinf(lp.lower), None, lp.lower),
        np.where(np.isinf(lp.upper), None, lp.upper),
    ])
    res = linprog(
        sign * lp.cost,
        A_ub=lp.a_ub if lp.b_ub.size else None,
        b_ub=lp.b_ub if lp.b_ub.size else None,
        A_eq=lp.a_eq if lp.b_eq.size else None,
        b_eq=lp.b_eq if lp.b_eq.size else None,
        bounds=bounds,
        method="highs-ds",
    )
    if res.status == 2:
        return LpSolution(INFEASIBLE, program=lp)
    if res.status == 3:
        return LpSolution(UNBOUNDED, program=lp)
    if res.status != 0:
        raise NumericalFailureError(f"LP backend status {res.status}: {res.message}")

    eq_duals = np.zeros(0) if not lp.b_eq.size else sign * np.asarray(res.eqlin.marginals)
    ub_duals = np.zeros(0) if not lp.b_ub.size else sign * np.asarray(res.ineqlin.marginals)
    return LpSolution(
        OPTIMAL,
        primal=np.asarray(res.x, dtype=float),
        objective=sign * float(res.fun),
        eq_duals=eq_duals,
        ub_duals=ub_duals,
        program=lp,
    )


def max_violation(lp: LinearProgram, x: Sequence[float]) -> float:
    """Largest absolute violation of any row or bound at ``x``."""
    x = np.asarray(x, dtype=float)
    parts = [0.0]
    if lp.b_eq.size:
        parts.append(np.max(np.abs(lp.a_eq @ x - lp.b_eq)))
    if lp.b_ub.size:
        parts.append(np.max(lp.a_ub @ x - lp.b_ub))
    parts.append(np.max(lp.lower - x))
    parts.append(np.max(x - lp.upper))
    return float(max(parts))
