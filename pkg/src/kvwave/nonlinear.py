"""
Source terms f, their primitives F and the level-k truncations f_k, F_k.

``f_k`` freezes ``f`` outside ``[-k, k]``; ``F_k`` is its primitive, continued
linearly past the kinks. ``g_k`` is the almost-everywhere derivative of
``f_k`` (zero past the kinks), which is what the Newton solver linearizes with.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

KINDS = ("power", "cubic_like", "zero", "custom")


@dataclass(frozen=True)
class Nonlinearity:
    kind: str = "zero"
    p: float = 1.0
    k0: float | None = None
    k: float = math.inf
    gamma: float = 1.0
    # only for kind="custom"
    f_fn: Callable | None = field(default=None, repr=False, compare=False)
    F_fn: Callable | None = field(default=None, repr=False, compare=False)
    fp_fn: Callable | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}; expected one of {KINDS}")
        if not self.p >= 1:
            raise ValueError(f"exponent p must be >= 1, got {self.p}")
        if not self.k > 0:
            raise ValueError(f"truncation level k must be positive, got {self.k}")
        if self.kind == "cubic_like" and not self.gamma > 0:
            raise ValueError("cubic_like needs gamma > 0")
        if self.kind == "custom" and (self.f_fn is None or self.F_fn is None):
            raise ValueError("custom nonlinearity needs f_fn and F_fn")

    @classmethod
    def custom(cls, f, F, fprime=None, p: float = 1.0, k0: float = 1.0, k: float = math.inf):
        return cls("custom", p=p, k0=k0, k=k, f_fn=f, F_fn=F, fp_fn=fprime)

    @property
    def growth_constant(self) -> float:
        if self.k0 is not None:
            return float(self.k0)
        if self.kind == "power":
            return max(1.0, self.p, self.p * (self.p - 1.0))
        if self.kind == "cubic_like":
            return 3.0 * max(1.0, 1.0 / self.gamma) ** 2
        return 1.0

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"

    @property
    def is_odd(self) -> bool:
        return self.kind in ("power", "cubic_like", "zero")

    def truncated(self, k: float) -> "Nonlinearity":
        return Nonlinearity(self.kind, self.p, self.k0, k, self.gamma, self.f_fn, self.F_fn, self.fp_fn)

    # untruncated pieces

    def f_raw(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "power":
            return s * np.abs(s) ** (self.p - 1.0)
        if self.kind == "cubic_like":
            return s**3 / (1.0 + self.gamma * s * s)
        if self.kind == "zero":
            return np.zeros_like(s)
        return np.asarray(self.f_fn(s), dtype=float)

    def F_raw(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "power":
            return np.abs(s) ** (self.p + 1.0) / (self.p + 1.0)
        if self.kind == "cubic_like":
            g = self.gamma
            return s * s / (2.0 * g) - np.log1p(g * s * s) / (2.0 * g * g)
        if self.kind == "zero":
            return np.zeros_like(s)
        return np.asarray(self.F_fn(s), dtype=float)

    def fprime_raw(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "power":
            if self.p == 1.0:
                return np.ones_like(s)
            return self.p * np.abs(s) ** (self.p - 1.0)
        if self.kind == "cubic_like":
            g = self.gamma
            s2 = s * s
            return (3.0 * s2 + g * s2 * s2) / (1.0 + g * s2) ** 2
        if self.kind == "zero":
            return np.zeros_like(s)
        if self.fp_fn is not None:
            return np.asarray(self.fp_fn(s), dtype=float)
        d = 1e-6 * np.maximum(1.0, np.abs(s))
        return (self.f_raw(s + d) - self.f_raw(s - d)) / (2.0 * d)

    # truncated versions

    def f(self, s):
        return eval_f(self, s)

    def F(self, s):
        return eval_F(self, s)

    def fprime(self, s):
        return eval_fprime(self, s)


def eval_f(nl: Nonlinearity, s):
    s = np.asarray(s, dtype=float)
    if math.isinf(nl.k):
        return nl.f_raw(s)
    k = nl.k
    return nl.f_raw(np.clip(s, -k, k))


def eval_F(nl: Nonlinearity, s):
    s = np.asarray(s, dtype=float)
    if math.isinf(nl.k):
        return nl.F_raw(s)
    k = nl.k
    inner = nl.F_raw(np.clip(s, -k, k))
    # linear continuation with the frozen slope f(+-k)
    upper = nl.f_raw(k) * (s - k)
    lower = nl.f_raw(-k) * (s + k)
    return inner + np.where(s > k, upper, 0.0) + np.where(s < -k, lower, 0.0)


def eval_fprime(nl: Nonlinearity, s):
    s = np.asarray(s, dtype=float)
    d = nl.fprime_raw(s)
    if math.isinf(nl.k):
        return d
    return np.where(np.abs(s) <= nl.k, d, 0.0)


def lipschitz_bound(nl: Nonlinearity, samples: int = 20001) -> float:
    """sup over |s| <= k of |f'(s)|, the global Lipschitz constant of f_k."""
    if nl.kind == "zero":
        return 0.0
    if math.isinf(nl.k):
        if nl.kind == "power" and nl.p > 1:
            return math.inf
        if nl.kind == "power":
            return 1.0
    if nl.kind == "power":
        return nl.p * nl.k ** (nl.p - 1.0)
    top = nl.k if not math.isinf(nl.k) else 1e6
    s = np.linspace(-top, top, samples)
    return float(np.max(np.abs(nl.fprime_raw(s))))


def p_ranges(p: float, n_dim: int) -> dict[str, bool]:
    """Exponent windows: well-posedness (p <= (n+2)/(n-2)) and decay (p < n/(n-2))."""
    if n_dim <= 2:
        return {"wellposedness": p >= 1, "decay": p >= 1}
    return {
        "wellposedness": 1 <= p <= (n_dim + 2) / (n_dim - 2),
        "decay": 1 <= p < n_dim / (n_dim - 2),
    }


@dataclass
class Check:
    name: str
    passed: bool
    witness: float | None = None
    detail: str = ""


@dataclass
class AssumptionReport:
    n_dim: int
    checks: list[Check]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    @property
    def applies(self) -> dict[str, bool]:
        """Which results apply: existence needs everything but the decay window."""
        ok = {c.name: c.passed for c in self.checks}
        structural = all(v for name, v in ok.items() if not name.startswith("p_range"))
        return {
            "wellposedness": structural and ok["p_range_wellposedness"],
            "exponential_decay": structural and ok["p_range_wellposedness"] and ok["p_range_decay"],
        }

    def summary(self) -> str:
        lines = []
        for c in self.checks:
            if c.passed:
                lines.append(f"ok   {c.name}")
            else:
                at = "" if c.witness is None else f" at s={c.witness:g}"
                lines.append(f"FAIL {c.name}{at}: {c.detail}")
        return "\n".join(lines)


def _sample_points() -> np.ndarray:
    mags = 10.0 ** (np.arange(-60, 31) / 10.0)
    return np.concatenate([mags, -mags])


def _witness(s: np.ndarray, bad: np.ndarray) -> float | None:
    if not np.any(bad):
        return None
    cand = s[bad]
    # report the violation at the most moderate magnitude, positive side first
    key = np.abs(np.log10(np.abs(cand))) + 1e-9 * (cand < 0)
    return float(cand[np.argmin(key)])


def validate_assumptions(nl: Nonlinearity, n_dim: int) -> AssumptionReport:
    """Sample the structural hypotheses on f over s in +-[1e-6, 1e3].

    Never raises on a violated hypothesis; inspect ``report.passed`` and
    ``report.failures``.
    """
    s = _sample_points()
    f = nl.f_raw(s)
    F = nl.F_raw(s)
    fs = f * s
    scale = 1e-12 * (1.0 + np.abs(fs))
    checks = []

    f0 = float(nl.f_raw(np.array(0.0)))
    checks.append(Check("f(0)=0", f0 == 0.0, 0.0 if f0 != 0.0 else None, f"f(0)={f0:g}"))

    bad = fs < -scale
    checks.append(Check("sign_condition", not bad.any(), _witness(s, bad), "f(s)s < 0"))

    bad = (F < -scale) | (F > fs + scale)
    checks.append(Check("F_bounds", not bad.any(), _witness(s, bad), "0 <= F(s) <= f(s)s violated"))

    k0 = nl.growth_constant
    p = nl.p
    d1 = nl.fprime_raw(s)
    bad = np.abs(d1) > k0 * (1.0 + np.abs(s)) ** (p - 1.0) * (1 + 1e-9) + 1e-12
    checks.append(Check("growth_f1", not bad.any(), _witness(s, bad), f"|f'| > k0(1+|s|)^(p-1), k0={k0:g}"))

    hs = 1e-4 * np.maximum(1e-2, np.abs(s))
    d2 = (nl.f_raw(s + hs) - 2.0 * f + nl.f_raw(s - hs)) / hs**2
    bound2 = k0 * (1.0 + np.abs(s)) ** (p - 2.0)
    bad = np.abs(d2) > bound2 * (1 + 1e-3) + 1e-6
    checks.append(Check("growth_f2", not bad.any(), _witness(s, bad), f"|f''| > k0(1+|s|)^(p-2), k0={k0:g}"))

    ranges = p_ranges(p, n_dim)
    if n_dim >= 3:
        wp = f"need 1 <= p <= (n+2)/(n-2) = {(n_dim + 2) / (n_dim - 2):g} for n={n_dim}, got p={p:g}"
        dc = f"need 1 <= p < n/(n-2) = {n_dim / (n_dim - 2):g} for n={n_dim}, got p={p:g}"
    else:
        wp = dc = f"need p >= 1, got p={p:g}"
    checks.append(Check("p_range_wellposedness", ranges["wellposedness"], None, wp))
    checks.append(Check("p_range_decay", ranges["decay"], None, dc))
    return AssumptionReport(n_dim, checks)
