"""Exact dilation-translation group on dyadic grids, plus the multiscale
concentration scan.

A group element (j, y) acts by u -> 2**((N-1) j) * u(2**j (. - y)).  On a
dyadic grid this is a pure relabeling: the target lives at level L + j with
the same extent, origin shifted by y / h_target, and values multiplied by
the exact power of two 2**((N-1) j).  Both the discrete variation and the
L^{N/(N-1)} norm are therefore preserved bit for bit.

The scan maximizes the renormalized cube mass

    mu(j, z) = 2**j * integral_{z + (0, 2**-j)**N} |u|

over levels j in a window and cube corners z on the dyadic lattice
2**-j Z^N, which is the quantity controlling loss of mass to infinity under
the group.  A +-1 cell refinement pass at the winning level reduces
off-lattice bias.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import EmptyWindow, IncompatibleTranslation, LevelOverflow
from .grids import GridFunction, GridSpec, as_dyadic, zero_function

__all__ = [
    "GroupElement",
    "ScanResult",
    "identity",
    "apply",
    "compose",
    "inverse",
    "separation",
    "scan",
    "level_cap",
]

_DEFAULT_LEVEL_CAP = 40


def level_cap() -> int:
    """Bound on |grid level| accepted by apply; BVDECOMP_LEVEL_CAP overrides."""
    raw = os.environ.get("BVDECOMP_LEVEL_CAP")
    return int(raw) if raw else _DEFAULT_LEVEL_CAP


@dataclass(frozen=True)
class GroupElement:
    """Dyadic dilation exponent j and dyadic translation vector."""

    j: int
    y: tuple

    def __post_init__(self):
        object.__setattr__(self, "j", int(self.j))
        object.__setattr__(self, "y", tuple(as_dyadic(c) for c in self.y))

    @property
    def dim(self) -> int:
        return len(self.y)

    def is_identity(self) -> bool:
        return self.j == 0 and all(c == 0 for c in self.y)

    def __repr__(self):
        ys = ", ".join(str(c) for c in self.y)
        return f"GroupElement(j={self.j}, y=({ys}))"


def identity(dim: int) -> GroupElement:
    return GroupElement(0, (0,) * dim)


def compose(g1: GroupElement, g2: GroupElement) -> GroupElement:
    """Element acting as g1 after g2: (j1+j2, y1 + 2**-j1 * y2)."""
    f = Fraction(2) ** (-g1.j)
    return GroupElement(g1.j + g2.j, tuple(a + f * b for a, b in zip(g1.y, g2.y)))


def inverse(g: GroupElement) -> GroupElement:
    f = Fraction(2) ** g.j
    return GroupElement(-g.j, tuple(-f * c for c in g.y))


def separation(g1: GroupElement, g2: GroupElement) -> float:
    """|j1 - j2| + |y1 - y2|_1, the divergence gauge between elements."""
    return abs(g1.j - g2.j) + float(sum(abs(a - b) for a, b in zip(g1.y, g2.y)))


def apply(g: GroupElement, u: GridFunction) -> GridFunction:
    """Exact action of g on u (relabeling plus a power-of-two amplitude)."""
    if g.dim != u.dim:
        raise ValueError("group element and function dimension differ")
    target_level = u.level + g.j
    if abs(target_level) > level_cap():
        raise LevelOverflow(f"target level {target_level} beyond cap {level_cap()}")
    h_target = Fraction(2) ** (-target_level)
    shift = []
    for c in g.y:
        m = c / h_target
        if m.denominator != 1:
            raise IncompatibleTranslation(
                f"translation {c} is not a multiple of target spacing {h_target}"
            )
        shift.append(int(m))
    amp = 2.0 ** ((u.dim - 1) * g.j)
    spec = GridSpec(
        u.dim,
        target_level,
        tuple(o + m for o, m in zip(u.spec.origin, shift)),
        u.spec.extent,
    )
    return GridFunction(spec, u.values * amp)


# ---------------------------------------------------------------------------
# concentration scan


@dataclass(frozen=True)
class ScanResult:
    best: GroupElement
    mass: float
    table: tuple
    window: tuple
    requested: tuple

    @property
    def clamped(self) -> bool:
        return self.window != self.requested


def _block_sums(A: np.ndarray, origin, s: int):
    """Sums of A over global blocks of side s aligned to s * Z^dim.

    Returns (B, lo) where B[m] sums the cells of global block lo + m.
    """
    lo = []
    pads = []
    for o, n in zip(origin, A.shape):
        base = o // s
        front = o - base * s
        blocks = -(-(front + n) // s)
        pads.append((front, blocks * s - front - n))
        lo.append(base)
    P = np.pad(A, pads)
    shape = []
    for n in P.shape:
        shape.extend((n // s, s))
    B = P.reshape(shape)
    for axis in reversed(range(1, 2 * A.ndim, 2)):
        B = B.sum(axis=axis)
    return B, tuple(lo)


def _halve_blocks(B: np.ndarray, lo, factor: int = 2):
    """Merge blocks pairwise (factor-wise) per axis, keeping global alignment."""
    new_lo = []
    for d in range(B.ndim):
        base = lo[d] // factor
        front = lo[d] - base * factor
        groups = -(-(front + B.shape[d]) // factor)
        pad = [(0, 0)] * B.ndim
        pad[d] = (front, groups * factor - front - B.shape[d])
        B = np.pad(B, pad)
        shape = list(B.shape)
        shape[d : d + 1] = [groups, factor]
        B = B.reshape(shape).sum(axis=d + 1)
        new_lo.append(base)
    return B, tuple(new_lo)


def _cell_box_sum(A: np.ndarray, origin, lo, sides) -> float:
    """Sum of A over global cell box [lo, lo + sides), clipped to the array."""
    slices = []
    for o, n, a, s in zip(origin, A.shape, lo, sides):
        start = max(a - o, 0)
        stop = min(a + s - o, n)
        if start >= stop:
            return 0.0
        slices.append(slice(start, stop))
    return float(A[tuple(slices)].sum())


def default_window(level: int):
    return (-(level - 2), level - 2)


def scan(u: GridFunction, j_window=None, refine_pass: bool = True) -> ScanResult:
    """Argmax of mu(j, z) over the window; ties go to the smallest (j, z).

    Box sums are built once at the finest level and coarsened pairwise, so
    every level reuses the previous level's partial sums.
    """
    L = u.level
    requested = tuple(j_window) if j_window is not None else default_window(L)
    j_lo, j_hi = int(requested[0]), int(requested[1])
    j_hi_eff = min(j_hi, L - 2)  # renormalized cubes keep >= 4**N cells
    if j_lo > j_hi_eff:
        raise EmptyWindow(f"window {requested} empty after clamping to j <= {L - 2}")
    window = (j_lo, j_hi_eff)

    dim = u.dim
    if u.is_empty() or not np.any(u.values):
        return ScanResult(identity(dim), 0.0, (), window, requested)

    A = np.abs(u.values)
    hN = u.spec.spacing**dim

    per_level = {}
    s = 1 << (L - j_hi_eff)
    B, lo = _block_sums(A, u.spec.origin, s)
    j = j_hi_eff
    while True:
        flat = int(np.argmax(B))
        idx = np.unravel_index(flat, B.shape)
        mass = (2.0**j) * hN * float(B[idx])
        block = tuple(lo[d] + idx[d] for d in range(dim))
        per_level[j] = (mass, block)
        if j == j_lo:
            break
        B, lo = _halve_blocks(B, lo)
        j -= 1

    best_j = None
    best_mass = -1.0
    for j in range(j_lo, j_hi_eff + 1):
        mass, _ = per_level[j]
        if mass > best_mass:
            best_mass = mass
            best_j = j

    _, block = per_level[best_j]
    s = 1 << (L - best_j)
    cell_lo = tuple(b * s for b in block)
    if refine_pass and best_mass > 0.0:
        # only a clearly larger mass may move the corner off the lattice;
        # the margin keeps summation-order noise from breaking ties
        base = _cell_box_sum(A, u.spec.origin, cell_lo, (s,) * dim)
        best_sum = base
        for delta in itertools.product((-1, 0, 1), repeat=dim):
            if all(d == 0 for d in delta):
                continue
            cand = tuple(c + d for c, d in zip(cell_lo, delta))
            val = _cell_box_sum(A, u.spec.origin, cand, (s,) * dim)
            if val > best_sum * (1.0 + 1e-9):
                best_sum = val
                cell_lo = cand
        best_mass = (2.0**best_j) * hN * best_sum

    h = Fraction(2) ** (-L)
    z = tuple(c * h for c in cell_lo)
    table = tuple(
        (j, per_level[j][0], tuple(b * (Fraction(2) ** (-j)) for b in per_level[j][1]))
        for j in range(j_lo, j_hi_eff + 1)
    )
    return ScanResult(GroupElement(best_j, z), best_mass, table, window, requested)
