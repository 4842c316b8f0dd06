"""Verifiers for the sharp inequalities satisfied by the discrete calculus.

Every check returns an InequalityReport with the raw numbers, so a caller
can aggregate them into machine-readable reports.  A check passes when
lhs <= rhs up to a relative tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SupportViolation, ZeroFunction
from .grids import (
    GridFunction,
    critical_exponent,
    hardy_integral,
    lp_norm,
    tv,
    tv_cellwise,
    unit_ball_volume,
)

__all__ = [
    "InequalityReport",
    "check_mazya",
    "check_hardy",
    "check_chain_rule",
    "check_layer_bound",
]


@dataclass(frozen=True)
class InequalityReport:
    name: str
    lhs: float
    rhs: float
    constant: float
    tolerance: float
    detail: dict = field(default_factory=dict)
    slack: float = field(init=False)
    passed: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "slack", self.rhs - self.lhs)
        object.__setattr__(self, "passed", self.slack >= -self.tolerance * abs(self.rhs))

    def as_dict(self) -> dict:
        out = {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "constant": self.constant,
            "tolerance": self.tolerance,
            "slack": self.slack,
            "pass": self.passed,
        }
        if self.detail:
            out["detail"] = dict(sorted(self.detail.items()))
        return out


def _require_nonzero(u: GridFunction):
    if u.is_empty() or not np.any(u.values):
        raise ZeroFunction("check requires a nonzero function")


def check_mazya(u: GridFunction, tol: float = 1e-9) -> InequalityReport:
    """Gradient-mass embedding: N V_N**(1/N) ||u||_{N/(N-1)} <= tv(u).

    Equality is approached by mollified ball indicators as the decay band
    shrinks; the sharp constant in the plane is 2 sqrt(pi).
    """
    _require_nonzero(u)
    N = u.dim
    const = N * unit_ball_volume(N) ** (1.0 / N)
    lhs = const * lp_norm(u, critical_exponent(N))
    return InequalityReport("mazya", lhs, tv(u), const, tol)


def check_hardy(u: GridFunction, tol: float = 1e-9) -> InequalityReport:
    """(N - 1) * integral |u| / |x| <= tv(u); centered balls saturate it."""
    _require_nonzero(u)
    N = u.dim
    lhs = (N - 1) * hardy_integral(u)
    return InequalityReport("hardy", lhs, tv(u), float(N - 1), tol)


def check_chain_rule(u: GridFunction, phi, dphi=None, tol: float = 1e-9) -> InequalityReport:
    """tv(phi o u) <= Lip(phi) * tv(u) with phi(0) = 0.

    The Lipschitz constant is taken over the attained value range of u
    (including 0), sampled densely; dphi is used when provided, otherwise
    finite differences of phi.
    """
    _require_nonzero(u)
    if abs(float(phi(0.0))) > 1e-15:
        raise SupportViolation("phi(0) must vanish to preserve compact support")
    vmin = min(0.0, float(u.values.min()))
    vmax = max(0.0, float(u.values.max()))
    s = np.linspace(vmin, vmax, 4097)
    if dphi is not None:
        lip = float(np.max(np.abs(dphi(s))))
    else:
        ps = np.asarray(phi(s), dtype=float)
        lip = float(np.max(np.abs(np.diff(ps) / np.diff(s))))
    transformed = GridFunction(u.spec, np.asarray(phi(u.values), dtype=float))
    return InequalityReport("chain_rule", tv(transformed), lip * tv(u), lip, tol)


def check_layer_bound(u: GridFunction, tol: float = 1e-9) -> InequalityReport:
    """Dyadic value layers carry at most six copies of the variation.

    The bands A_j = { 2**((j-1)(N-1)) < |u| <= 2**((j+2)(N-1)) } cover every
    nonzero sample value three times, so summing the restricted variation
    over all nonempty bands stays below 6 tv(u).
    """
    _require_nonzero(u)
    N = u.dim
    contrib, _, values = tv_cellwise(u)
    absval = np.abs(values)
    pos = absval[absval > 0]
    emin = math.log2(pos.min()) / (N - 1)
    emax = math.log2(pos.max()) / (N - 1)
    lhs = 0.0
    bands = 0
    for j in range(math.floor(emin) - 2, math.ceil(emax) + 2):
        lo = 2.0 ** ((j - 1) * (N - 1))
        hi = 2.0 ** ((j + 2) * (N - 1))
        mask = (absval > lo) & (absval <= hi)
        if mask.any():
            bands += 1
            lhs += float(contrib[mask].sum())
    return InequalityReport("layer_bound", lhs, 6.0 * tv(u), 6.0, tol, {"bands": bands})
