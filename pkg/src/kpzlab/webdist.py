"""Coalescing random-walk web and its directed jump-count distance.

Sites of the even lattice {(i, n): i + n even} carry i.i.d. signs; from each
site the walk steps to (i + sign, n + 1).  The web distance between two
lattice points is the least number of "jumps" (steps taken against the local
sign) needed to connect them through walk segments.  A layered shortest-path
sweep computes it in one pass per source; a literal reachable-set oracle
covers small boxes for cross-checking.

The KPZ rescaling maps the distance to height-like samples via the constants
of web_constants, with the roles of source and target exchanged so that the
scaled field runs forward in time.  Soft wedge lifts and the composition
slack audit quantify how the rescaled samples approach a directed-metric
composition law as n grows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .clocks import ClockField
from .stats import load_tw_table

_SM_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_SM_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_SM_MIX2 = np.uint64(0x94D049BB133111EB)
_COORD_SALT = np.uint64(0xD1342543DE82EF95)


def _mix64(x: np.ndarray) -> np.ndarray:
    x = (x + _SM_GAMMA).astype(np.uint64)
    x = (x ^ (x >> np.uint64(30))) * _SM_MIX1
    x = (x ^ (x >> np.uint64(27))) * _SM_MIX2
    return x ^ (x >> np.uint64(31))


@dataclass(frozen=True)
class RademacherField:
    """Deterministic +-1 signs on a box of the even lattice, hashed from a seed."""

    seed: int
    box: tuple[int, int, int, int]  # i_lo, i_hi, n_lo, n_hi, all inclusive

    def __post_init__(self):
        i_lo, i_hi, n_lo, n_hi = self.box
        if i_lo > i_hi or n_lo > n_hi:
            raise ValueError("empty box")

    def _contains(self, i: int, n: int) -> bool:
        i_lo, i_hi, n_lo, n_hi = self.box
        return i_lo <= i <= i_hi and n_lo <= n <= n_hi

    def row(self, positions: np.ndarray, layer: int) -> np.ndarray:
        """Vectorized signs for many positions on one layer."""
        i_lo, i_hi, n_lo, n_hi = self.box
        if not n_lo <= layer <= n_hi:
            raise ValueError("layer outside the box")
        if positions.size and (positions.min() < i_lo or positions.max() > i_hi):
            raise ValueError("position outside the box")
        mask = (1 << 64) - 1
        salt = (layer * 0x9E3779B97F4A7C15 + self.seed) & mask
        key = positions.astype(np.int64).view(np.uint64) * _COORD_SALT
        key ^= np.uint64(salt)
        return np.where(_mix64(key) & np.uint64(1), 1, -1).astype(np.int64)

    def value(self, i: int, n: int) -> int:
        if (i + n) % 2:
            raise ValueError("not on the even lattice")
        if not self._contains(i, n):
            raise ValueError("point outside the box")
        return int(self.row(np.array([i]), n)[0])

    def covers_cone(self, start: tuple[int, int], top_layer: int) -> bool:
        i, n = start
        span = top_layer - n
        return span >= 0 and self._contains(i - span, n) and self._contains(i + span, n) and self._contains(i, top_layer)


def walk_from(field: RademacherField, start: tuple[int, int], steps: int) -> tuple[int, ...]:
    """Positions of the coalescing walk from start over the given number of steps."""
    i, n = start
    if (i + n) % 2:
        raise ValueError("start not on the even lattice")
    path = [i]
    x = i
    for t in range(n, n + steps):
        x = x + field.value(x, t)
        if not field._contains(x, t + 1):
            raise ValueError("walk leaves the box")
        path.append(x)
    return tuple(path)


def _check_even(point: tuple[int, int]) -> None:
    i, n = point
    if (i + n) % 2:
        raise ValueError(f"{point} not on the even lattice")


def drw_profiles(
    field: RademacherField,
    start: tuple[int, int],
    queries: list[tuple[int, np.ndarray]],
) -> list[np.ndarray]:
    """Jump counts from one start to positions on several layers, one sweep.

    Single-source layered sweep: following the local sign costs 0, stepping
    against it costs 1.  Each (layer, positions) query is answered from the
    cost row snapshotted as the sweep passes that layer; unreachable or
    off-parity positions come back as inf.
    """
    i, n = start
    _check_even(start)
    live = [q for q in queries if q[0] >= n]
    top = max((layer for layer, _ in live), default=n)
    if live and not field.covers_cone(start, top):
        raise ValueError("box does not cover the light cone")
    out: dict[int, np.ndarray] = {}

    def readout(layer: int, positions: np.ndarray, cost: np.ndarray) -> np.ndarray:
        span = layer - n
        res = np.full(len(positions), math.inf)
        for k, j in enumerate(np.asarray(positions, dtype=np.int64)):
            if (j + layer) % 2 == 0 and abs(j - i) <= span:
                res[k] = float(cost[(j - (i - span)) // 2])
        return res

    cost = np.zeros(1, dtype=np.int64)
    for t in range(n, top + 1):
        for idx, (layer, positions) in enumerate(queries):
            if layer == t and idx not in out:
                out[idx] = readout(layer, positions, cost)
        if t == top:
            break
        width = t - n
        pos = np.arange(i - width, i + width + 1, 2, dtype=np.int64)
        zeta = field.row(pos, t)
        to_right = np.where(zeta == 1, cost, cost + 1)
        to_left = np.where(zeta == -1, cost, cost + 1)
        nxt = np.empty(len(cost) + 1, dtype=np.int64)
        nxt[0] = to_left[0]
        nxt[-1] = to_right[-1]
        if len(cost) > 1:
            nxt[1:-1] = np.minimum(to_right[:-1], to_left[1:])
        cost = nxt
    return [
        out.get(idx, np.full(len(positions), math.inf))
        for idx, (_, positions) in enumerate(queries)
    ]


def drw_profile(
    field: RademacherField, start: tuple[int, int], layer: int, positions: np.ndarray
) -> np.ndarray:
    """Jump counts from start to each requested position on one layer."""
    return drw_profiles(field, start, [(layer, positions)])[0]


def drw(field: RademacherField, start: tuple[int, int], end: tuple[int, int]) -> float:
    """Web distance between two even-lattice points; inf outside the cone.

    End layers before the start layer return inf by convention.
    """
    _check_even(start)
    _check_even(end)
    j, m = end
    if m < start[1]:
        return math.inf
    if abs(j - start[0]) > m - start[1]:
        return math.inf
    return float(drw_profile(field, start, m, np.array([j]))[0])


def drw_bruteforce(
    field: RademacherField, start: tuple[int, int], end: tuple[int, int]
) -> float:
    """Literal reachable-set evaluation of the web distance, for small spans."""
    _check_even(start)
    _check_even(end)
    i, n = start
    j, m = end
    if m < n:
        return math.inf
    if m - n > 10 or abs(j - i) > 10:
        raise ValueError("size cap exceeded")

    signs: dict[tuple[int, int], int] = {}

    def sign(a: int, t: int) -> int:
        if (a, t) not in signs:
            signs[(a, t)] = field.value(a, t)
        return signs[(a, t)]

    walks: dict[tuple[int, int], frozenset[tuple[int, int]]] = {}

    def walk_points(a: int, t0: int) -> frozenset[tuple[int, int]]:
        if (a, t0) not in walks:
            pts = []
            x = a
            for t in range(t0, m + 1):
                pts.append((x, t))
                if t < m:
                    x = x + sign(x, t)
            walks[(a, t0)] = frozenset(pts)
        return walks[(a, t0)]

    reach = set(walk_points(i, n))
    if end in reach:
        return 0.0
    for k in range(1, m - n + 1):
        grown = set(reach)
        for a, t in reach:
            if t + 1 > m:
                continue
            grown.update(walk_points(a - sign(a, t), t + 1))
        if end in grown:
            return float(k)
        if grown == reach:
            break
        reach = grown
    return math.inf


@dataclass(frozen=True)
class WebConstants:
    """The four positive rescaling constants for a direction parameter eta."""

    eta: float
    a: float
    b: float
    c: float
    d: float


def web_constants(eta: float) -> WebConstants:
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    omega = 1 - eta * eta
    return WebConstants(
        eta=eta,
        a=omega ** (1 / 6) / (eta / 2) ** (2 / 3),
        b=(1 - math.sqrt(omega)) / 2,
        c=eta ** (1 / 3) * omega ** (1 / 6) / 2 ** (1 / 3),
        d=2 ** (2 / 3) * eta ** (1 / 3) * omega ** (2 / 3),
    )


def lattice_point(eta: float, n: int, coord: float, time: float) -> tuple[int, int]:
    """Scaled (coord, time) mapped onto the even lattice, position rounded down."""
    wc = web_constants(eta)
    layer = -int(round(n * time))
    pos = math.floor(eta * n * time + wc.d * n ** (2 / 3) * coord)
    if (pos + layer) % 2:
        pos -= 1
    return pos, layer


def rescale_m_eta(
    field: RademacherField,
    eta: float,
    n: int,
    points: list[tuple[float, float, float, float]],
) -> np.ndarray:
    """Rescaled web-distance samples M(x, s; y, t) for each requested point.

    The source of the underlying distance is built from (y, t) and the
    target from (x, s): the exchange makes the scaled field grow forward in
    time.  Distances of inf map to -inf.
    """
    wc = web_constants(eta)
    out = np.empty(len(points))
    for k, (x, s, y, t) in enumerate(points):
        src = lattice_point(eta, n, y, t)
        tgt = lattice_point(eta, n, x, s)
        dist = drw(field, src, tgt)
        if math.isinf(dist):
            out[k] = -math.inf
        else:
            out[k] = -wc.a * n ** (-1 / 3) * (
                dist - wc.b * n * (t - s) - wc.c * n ** (2 / 3) * (y - x)
            )
    return out


def soft_wedge_slope(kind: str, n: int, eta: float | None = None) -> float:
    """Slope of the soft narrow wedge of the given kind at size n."""
    if kind == "f":
        return 2 * n ** (1 / 3)
    if kind == "g":
        if eta is None:
            raise ValueError("kind 'g' needs eta")
        wc = web_constants(eta)
        return wc.c * wc.a * n ** (1 / 3)
    raise ValueError("kind must be 'f' or 'g'")


def soft_wedge_lift(
    samples: dict[float, float], x: float, n: int, kind: str, eta: float | None = None
) -> float:
    """max over sampled z of wedge(z - x) + samples[z], wedge -inf right of 0."""
    slope = soft_wedge_slope(kind, n, eta)
    best = -math.inf
    for z, v in samples.items():
        if z <= x:
            best = max(best, slope * (z - x) + v)
    return best


def _field_box(eta: float, n: int, t_max: float, pad: int) -> tuple[int, int, int, int]:
    reach = int(math.ceil((1 + eta) * n * t_max)) + pad
    return -reach, reach, -int(round(n * t_max)) - 1, 1


def one_point_samples(
    eta: float,
    n: int,
    replicas: int,
    *,
    seed: int = 0,
    point: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 1.0),
) -> np.ndarray:
    """Independent rescaled samples at one scaled point, one field per replica."""
    x, s, y, t = point
    pad = 4 * int(math.ceil(web_constants(eta).d * n ** (2 / 3))) + 8
    box = _field_box(eta, n, max(abs(t), abs(s), 1.0), pad)
    master = ClockField(seed)
    out = np.empty(replicas)
    for rep in range(replicas):
        field = RademacherField(master.child_seed(("web", rep)), box)
        out[rep] = rescale_m_eta(field, eta, n, [point])[0]
    return out


def slack_violation_rate(
    eta: float,
    n: int,
    replicas: int,
    *,
    seed: int = 0,
    delta: float = 0.2,
    midpoints: tuple[float, ...] = (-0.3, -0.15, 0.0, 0.15, 0.3),
    endpoints: tuple[float, ...] = (-0.25, 0.0, 0.25),
    mid_time: float = 0.5,
    end_time: float = 1.0,
    grid_points: int = 12,
) -> float:
    """Fraction of sampled chains whose lifted composition overshoots delta.

    Each replica draws one sign field and sweeps three-point chains o, p, q
    with o at the origin, p ranging over the midpoint coordinates at mid_time
    and q over the endpoint coordinates at end_time.  A chain violates when
    lift(o;p) + lift(p;q) > lift(o;q) + delta; the rate pools all chains of
    all replicas.  Two sweeps per source answer both legs of every chain.
    """
    wc = web_constants(eta)
    step = 0.25 * n ** (-1 / 3)
    zs_o = [-k * step for k in range(grid_points + 1)]
    zs_p = {xp: [xp - k * step for k in range(grid_points + 1)] for xp in midpoints}
    pos_o = np.array([lattice_point(eta, n, z, 0.0)[0] for z in zs_o])
    pos_p = {
        xp: np.array([lattice_point(eta, n, z, mid_time)[0] for z in zs])
        for xp, zs in zs_p.items()
    }
    mid_union = np.unique(np.concatenate(list(pos_p.values())))
    layer_o = 0
    layer_mid = -int(round(n * mid_time))
    pad = 4 * int(math.ceil(wc.d * n ** (2 / 3))) + 8
    box = _field_box(eta, n, end_time, pad)
    master = ClockField(seed)

    def scale(dist, dt, dx):
        if math.isinf(dist):
            return -math.inf
        return -wc.a * n ** (-1 / 3) * (dist - wc.b * n * dt - wc.c * n ** (2 / 3) * dx)

    violations = 0
    for rep in range(replicas):
        field = RademacherField(master.child_seed(("slack", rep)), box)
        l_op = {}
        for xp in midpoints:
            src = lattice_point(eta, n, xp, mid_time)
            dists = drw_profile(field, src, layer_o, pos_o)
            samples = {
                z: scale(d, mid_time, xp - z) for z, d in zip(zs_o, dists)
            }
            l_op[xp] = soft_wedge_lift(samples, 0.0, n, "g", eta)
        for xq in endpoints:
            src = lattice_point(eta, n, xq, end_time)
            mid_dists, o_dists = drw_profiles(
                field, src, [(layer_mid, mid_union), (layer_o, pos_o)]
            )
            by_pos = dict(zip(mid_union.tolist(), mid_dists))
            samples = {z: scale(d, end_time, xq - z) for z, d in zip(zs_o, o_dists)}
            l_oq = soft_wedge_lift(samples, 0.0, n, "g", eta)
            for xp in midpoints:
                samples = {
                    z: scale(by_pos[p], end_time - mid_time, xq - z)
                    for z, p in zip(zs_p[xp], pos_p[xp].tolist())
                }
                l_pq = soft_wedge_lift(samples, xp, n, "g", eta)
                if l_op[xp] + l_pq > l_oq + delta:
                    violations += 1
    return violations / (replicas * len(midpoints) * len(endpoints))


def tw_reference() -> tuple[float, float]:
    """Mean and variance of the tabulated limiting one-point law."""
    table = load_tw_table()
    return table.mean, table.variance
