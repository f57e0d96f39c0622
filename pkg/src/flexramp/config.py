"""Numerical tolerances shared across modules.

Values can be overridden for a process through the ``FLEXRAMP_TOL``
environment variable, e.g. ``FLEXRAMP_TOL="val_rel=1e-5,max_depth=80"``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace

ENV_VAR = "FLEXRAMP_TOL"


@dataclass(frozen=True)
class Tolerances:
    feas: float = 1e-7          # absolute constraint violation, MW
    comp: float = 1e-6          # dual x slack
    val_rel: float = 1e-6       # value agreement, relative to max(1, |scale|)
    slope_rel: float = 1e-7     # slope equality, relative to max(1, |slope|)
    dedup_rel: float = 1e-7     # breakpoint merge distance, relative to interval width
    min_width_rel: float = 1e-9
    max_depth: int = 60
    area_rel: float = 1e-10     # triangle degeneracy, relative to region area

    def val_tol(self, scale: float) -> float:
        return self.val_rel * max(1.0, abs(scale))

    def slope_tol(self, *slopes: float) -> float:
        return self.slope_rel * max([1.0] + [abs(s) for s in slopes])


def parse_overrides(text: str, base: Tolerances = Tolerances()) -> Tolerances:
    """Parse ``key=value`` pairs separated by commas into a Tolerances."""
    known = {f.name: f.type for f in fields(Tolerances)}
    updates = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep or key not in known:
            raise ValueError(f"bad tolerance override {item!r}; known keys: {sorted(known)}")
        updates[key] = int(value) if key == "max_depth" else float(value)
    return replace(base, **updates)


def from_env() -> Tolerances:
    text = os.environ.get(ENV_VAR, "")
    return parse_overrides(text) if text else Tolerances()


DEFAULT = from_env()
