"""Lattice-level state: height functions, particle configurations, scaled grids.

Height functions are integer-valued profiles on a finite window of Z with
increments +-1 between neighbouring sites.  Particle configurations are the
occupancy picture of the same data: site x carries a particle exactly when the
height rises by 1 from x to x+1.  Grid functions live on the refined grid
{eps*u/2 : u integer} used by the diffusive rescaling, and may take the value
-inf (stored as float('-inf'), never as a large negative number).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

NEG_INF = float("-inf")

WEDGE_EXTENSION = "wedge-extension"
FROZEN_SLOPE = "frozen-slope"
_BOUNDARY_POLICIES = (WEDGE_EXTENSION, FROZEN_SLOPE)


def even_round(z: float) -> int:
    """Nearest even integer to z, ties toward -infinity."""
    return 2 * math.ceil((z - 1.0) / 2.0)


@dataclass(frozen=True)
class HeightFunction:
    """Integer profile h(lo..hi) with |h(x+1) - h(x)| = 1.

    ``boundary`` names the deterministic extension used when a value outside
    the window is requested; window evolutions never move boundary sites, so
    the policy only affects :meth:`extended_value`.
    """

    lo: int
    hi: int
    values: tuple[int, ...]
    boundary: str = WEDGE_EXTENSION

    def __post_init__(self) -> None:
        if self.hi < self.lo:
            raise ValueError("empty window")
        if len(self.values) != self.hi - self.lo + 1:
            raise ValueError("values length does not match window")
        for a, b in zip(self.values, self.values[1:]):
            if abs(b - a) != 1:
                raise ValueError("height increments must be +-1")
        if self.lo <= 0 <= self.hi and self.values[-self.lo] % 2 != 0:
            raise ValueError("height at site 0 must be even")
        if self.boundary not in _BOUNDARY_POLICIES:
            raise ValueError(f"unknown boundary policy {self.boundary!r}")

    @property
    def window(self) -> tuple[int, int]:
        return (self.lo, self.hi)

    @property
    def parity(self) -> int:
        """(h(x) + x) mod 2, constant across the window."""
        return (self.values[0] + self.lo) % 2

    def value(self, x: int) -> int:
        if not self.lo <= x <= self.hi:
            raise KeyError(f"site {x} outside window [{self.lo}, {self.hi}]")
        return self.values[x - self.lo]

    def extended_value(self, x: int) -> int:
        """h(x) continued beyond the window by the boundary policy."""
        if self.lo <= x <= self.hi:
            return self.values[x - self.lo]
        if self.lo == self.hi:
            # single-site window: continue as a wedge either way
            return self.values[0] - abs(x - self.lo)
        if x < self.lo:
            edge, inner = self.values[0], self.values[1]
            steps = self.lo - x
        else:
            edge, inner = self.values[-1], self.values[-2]
            steps = x - self.hi
        if self.boundary == FROZEN_SLOPE:
            return edge + steps * (edge - inner)
        return edge - steps  # wedge-extension: fall off at slope 1

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.int64)


@dataclass(frozen=True)
class ParticleConfig:
    """Occupancy eta(lo..hi-1) in {0,1} plus the height anchor at lo."""

    lo: int
    hi: int
    occupancy: tuple[int, ...]
    anchor: int

    def __post_init__(self) -> None:
        if self.hi <= self.lo:
            raise ValueError("particle window needs at least two height sites")
        if len(self.occupancy) != self.hi - self.lo:
            raise ValueError("occupancy length does not match window")
        if any(o not in (0, 1) for o in self.occupancy):
            raise ValueError("occupancy must be 0/1")


def height_from_particles(pc: ParticleConfig, boundary: str = WEDGE_EXTENSION) -> HeightFunction:
    """h(x+1) = h(x) + (2 eta(x) - 1), anchored at h(lo) = anchor."""
    vals = [pc.anchor]
    for o in pc.occupancy:
        vals.append(vals[-1] + (2 * o - 1))
    return HeightFunction(pc.lo, pc.hi, tuple(vals), boundary)


def particles_from_height(h: HeightFunction) -> ParticleConfig:
    occ = tuple((b - a + 1) // 2 for a, b in zip(h.values, h.values[1:]))
    return ParticleConfig(h.lo, h.hi, occ, h.values[0])


def narrow_wedge(x0: int, lo: int, hi: int, boundary: str = WEDGE_EXTENSION) -> HeightFunction:
    """Delta_{x0}(y) = -|y - x0| restricted to the window [lo, hi]."""
    if not lo <= x0 <= hi:
        raise ValueError(f"apex {x0} outside window [{lo}, {hi}]")
    return HeightFunction(lo, hi, tuple(-abs(y - x0) for y in range(lo, hi + 1)), boundary)


def flat_profile(lo: int, hi: int, start: int = 0) -> HeightFunction:
    """Alternating profile (..., 0, 1, 0, 1, ...): every second site occupied."""
    vals = [start]
    for x in range(lo, hi):
        vals.append(vals[-1] + (1 if (x - lo) % 2 == 0 else -1))
    return HeightFunction(lo, hi, tuple(vals))


def shift_map(h: HeightFunction, space: int, height: int) -> HeightFunction:
    """Translate to x -> h(x - space) + height.

    The height shift must be even; if the shifted window covers site 0 with an
    odd value there, construction fails (anchor parity).
    """
    if height % 2 != 0:
        raise ValueError("height shift must be even")
    try:
        return HeightFunction(
            h.lo + space, h.hi + space, tuple(v + height for v in h.values), h.boundary
        )
    except ValueError as e:
        raise ValueError(f"parity violation at anchor: {e}") from e


# ---------------------------------------------------------------------------
# scaled grid functions


@dataclass(frozen=True)
class GridFunction:
    """Samples on the refined grid {scale*u/2}, indexed by integer u.

    ``values[i]`` is the sample at grid index ``lo_index + i`` (physical
    position ``(lo_index + i) * scale / 2``).  Entries may be -inf.
    """

    scale: float
    lo_index: int
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        if not self.values:
            raise ValueError("empty grid")

    @property
    def hi_index(self) -> int:
        return self.lo_index + len(self.values) - 1

    def index_of(self, position: float) -> int:
        u = position * 2.0 / self.scale
        ui = round(u)
        if abs(u - ui) > 1e-9:
            raise KeyError(f"position {position} is off the grid")
        return int(ui)

    def value_at_index(self, u: int) -> float:
        if not self.lo_index <= u <= self.hi_index:
            raise KeyError(f"grid index {u} out of range")
        return self.values[u - self.lo_index]

    def positions(self) -> np.ndarray:
        return (np.arange(self.lo_index, self.hi_index + 1)) * (self.scale / 2.0)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def is_walk(self, tol: float = 1e-9) -> bool:
        """Slopes +-2/sqrt(scale) between grid points and even anchor at index 0."""
        step = math.sqrt(self.scale)
        for a, b in zip(self.values, self.values[1:]):
            if not math.isfinite(a) or not math.isfinite(b):
                return False
            if abs(abs(b - a) - step) > tol:
                return False
        if self.lo_index <= 0 <= self.hi_index:
            v0 = self.value_at_index(0)
            if abs(v0 / (2.0 * step) - round(v0 / (2.0 * step))) > tol:
                return False
        return True


@dataclass(frozen=True)
class NarrowWedgeCombo:
    """Finitely many spikes: value heights[i] at grid index supports[i], -inf off support."""

    supports: tuple[int, ...]
    heights: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.supports:
            raise ValueError("combo needs at least one support point")
        if len(self.supports) != len(self.heights):
            raise ValueError("supports and heights length mismatch")
        if len(set(self.supports)) != len(self.supports):
            raise ValueError("duplicate support points")
        if any(not math.isfinite(v) for v in self.heights):
            raise ValueError("support heights must be finite")


def srw_envelope(f, eps: float, lo_index: int, hi_index: int) -> GridFunction:
    """Minimal walk-tagged GridFunction dominating f (a combo or a GridFunction).

    Works in walk units (value / sqrt(eps)), where admissible walks are integer
    +-1-step paths whose value at index u has parity u mod 2.  The pointwise
    minimum over dominating walks is the max of the cones grown from each
    support point, rounded up to the admissible parity.
    """
    if eps <= 0:
        raise ValueError("scale must be positive")
    if hi_index < lo_index:
        raise ValueError("empty grid")
    if isinstance(f, GridFunction):
        pairs = [
            (u, v)
            for u, v in zip(range(f.lo_index, f.hi_index + 1), f.values)
            if math.isfinite(v)
        ]
        if not pairs:
            raise ValueError("no finite support")
        combo = NarrowWedgeCombo(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))
    else:
        combo = f
    for u in combo.supports:
        if not lo_index <= u <= hi_index:
            raise ValueError(f"support index {u} outside grid [{lo_index}, {hi_index}]")
    root = math.sqrt(eps)
    us = np.arange(lo_index, hi_index + 1)
    best = np.full(us.shape, -(10**18), dtype=np.int64)
    for u_y, f_y in zip(combo.supports, combo.heights):
        w = f_y / root
        p = math.ceil(w)
        if abs(p - w) < 1e-12:
            p = round(w)
        if (p - u_y) % 2 != 0:
            p += 1
        np.maximum(best, p - np.abs(us - u_y), out=best)
    return GridFunction(eps, lo_index, tuple(float(v) * root for v in best))


def rescale_height(h: HeightFunction, t: float, eps: float) -> GridFunction:
    """Diffusively rescaled profile x -> eps^{1/2} h(2x/eps) + t/eps on the scaled grid.

    Sample positions are the grid points {eps*u/2}; the lattice argument
    2x/eps = u is rounded to the nearest even site, ties toward -infinity, so
    even grid indices carry exact height samples.
    """
    if eps <= 0:
        raise ValueError("scale must be positive")
    root = math.sqrt(eps)
    shift = t / eps
    lo_u, hi_u = h.lo, h.hi
    vals = []
    for u in range(lo_u, hi_u + 1):
        z = even_round(float(u))
        z = min(max(z, h.lo), h.hi)
        vals.append(root * h.value(z) + shift)
    return GridFunction(eps, lo_u, tuple(vals))


def k_epsilon_correction(t_minus_s: float, eps: float) -> float:
    """Additive drift correction 2 eps^{1/2} * floor(eps^{-3/2} (t-s) / 2)."""
    if t_minus_s < 0:
        raise ValueError("duration must be nonnegative")
    if eps <= 0:
        raise ValueError("scale must be positive")
    return 2.0 * math.sqrt(eps) * math.floor(eps ** (-1.5) * t_minus_s / 2.0)


# ---------------------------------------------------------------------------
# max-plus composition


def diamond(f, g):
    """(f <> g)(x, y) = max_z f(x, z) + g(z, y) with -inf as absorbing element.

    Accepts 1D or 2D arrays; the last axis of f and first axis of g are the
    shared middle grid.  1D inputs are treated as a single row/column and the
    result is squeezed accordingly.
    """
    fa = np.asarray(f, dtype=float)
    ga = np.asarray(g, dtype=float)
    f1 = fa.ndim == 1
    g1 = ga.ndim == 1
    if f1:
        fa = fa[None, :]
    if g1:
        ga = ga[:, None]
    if fa.ndim != 2 or ga.ndim != 2:
        raise ValueError("diamond expects 1D or 2D operands")
    if fa.shape[1] != ga.shape[0]:
        raise ValueError("middle grids do not match")
    if fa.shape[1] == 0:
        raise ValueError("empty middle grid")
    # max over z of f[x, z] + g[z, y]; -inf + -inf = -inf under IEEE rules
    with np.errstate(invalid="ignore"):
        out = np.max(fa[:, :, None] + ga[None, :, :], axis=1)
    out = np.where(np.isnan(out), NEG_INF, out)
    if f1 and g1:
        return float(out[0, 0])
    if f1:
        return out[0, :]
    if g1:
        return out[:, 0]
    return out


# ---------------------------------------------------------------------------
# serialization: (index, value) CSV with "-inf" spelled literally


def _format_value(v) -> str:
    if v == NEG_INF:
        return "-inf"
    if isinstance(v, float) and v.is_integer() and abs(v) < 2**53:
        return str(int(v))
    return repr(v)


def height_to_csv(h: HeightFunction, fp) -> None:
    w = csv.writer(fp)
    w.writerow(["index", "value"])
    for x, v in zip(range(h.lo, h.hi + 1), h.values):
        w.writerow([x, v])


def height_from_csv(fp, boundary: str = WEDGE_EXTENSION) -> HeightFunction:
    rows = list(csv.reader(fp))
    if not rows or rows[0] != ["index", "value"]:
        raise ValueError("expected header 'index,value'")
    pairs = [(int(r[0]), int(r[1])) for r in rows[1:] if r]
    pairs.sort()
    lo, hi = pairs[0][0], pairs[-1][0]
    if [p[0] for p in pairs] != list(range(lo, hi + 1)):
        raise ValueError("indices must be contiguous")
    return HeightFunction(lo, hi, tuple(p[1] for p in pairs), boundary)


def grid_to_csv(g: GridFunction, fp) -> None:
    w = csv.writer(fp)
    w.writerow(["index", "value"])
    for u, v in zip(range(g.lo_index, g.hi_index + 1), g.values):
        w.writerow([u, _format_value(v)])


def grid_from_csv(fp, scale: float) -> GridFunction:
    rows = list(csv.reader(fp))
    if not rows or rows[0] != ["index", "value"]:
        raise ValueError("expected header 'index,value'")
    pairs = []
    for r in rows[1:]:
        if not r:
            continue
        v = NEG_INF if r[1] == "-inf" else float(r[1])
        pairs.append((int(r[0]), v))
    pairs.sort()
    lo = pairs[0][0]
    if [p[0] for p in pairs] != list(range(lo, lo + len(pairs))):
        raise ValueError("indices must be contiguous")
    return GridFunction(scale, lo, tuple(p[1] for p in pairs))


def height_csv_text(h: HeightFunction) -> str:
    buf = io.StringIO()
    height_to_csv(h, buf)
    return buf.getvalue()
