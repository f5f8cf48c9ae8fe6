"""Coupled exclusion evolutions driven by one shared clock field.

Two engines operate on :class:`CoupledEnsemble`:

* ``evolve_asep_exotic`` — nearest-neighbor ASEP where every adjacent
  (particle, hole) pair listens to the clock of its label class modulo (a, b).
  All copies share the classes' streams, so a single ring flips every matching
  pair in every copy at once.
* ``evolve_aep_basic`` — finite-range AEP under the basic coupling: one stream
  per (site, jump) and legality decided per copy at event time.

Window boundaries are frozen (no flips at the endpoints, no jumps out of the
window); ``certified_region`` bounds how far boundary effects can travel.
"""

from __future__ import annotations

import heapq
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace

import numpy as np

from .clocks import ClockField, canonical_key_bytes, merge_events, quotient_key, sample_stream
from .lattice import HeightFunction, shift_map

DOWN = "down"
UP = "up"


@dataclass(frozen=True)
class JumpDistribution:
    """Jump law v -> p(v) of a finite-range exclusion process.

    Mean displacement sum(v * p(v)) must equal 1, the support must additively
    generate Z (gcd 1), and no single rate may exceed the range bound K.
    """

    rates: tuple[tuple[int, float], ...]

    def __post_init__(self) -> None:
        if not self.rates:
            raise ValueError("empty support")
        vs = [v for v, _ in self.rates]
        if len(set(vs)) != len(vs):
            raise ValueError("duplicate jump sizes")
        if any(v == 0 for v in vs):
            raise ValueError("jump size 0 not allowed")
        if any(p < 0 for _, p in self.rates):
            raise ValueError("negative rate")
        drift = sum(v * p for v, p in self.rates)
        if abs(drift - 1.0) > 1e-9:
            raise ValueError(f"mean displacement must be 1, got {drift}")
        if math.gcd(*(abs(v) for v in vs)) != 1:
            raise ValueError("support must additively generate Z")
        K = max(abs(v) for v in vs)
        if any(p > K for _, p in self.rates):
            raise ValueError("rate exceeds range bound")

    @classmethod
    def from_dict(cls, d: dict[int, float]) -> "JumpDistribution":
        return cls(tuple(sorted(d.items())))

    @property
    def K(self) -> int:
        return max(abs(v) for v, _ in self.rates)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(v for v, _ in self.rates)

    def rate(self, v: int) -> float:
        for w, p in self.rates:
            if w == v:
                return p
        return 0.0

    @property
    def is_nearest_neighbor(self) -> bool:
        return self.K == 1

    @classmethod
    def tasep(cls) -> "JumpDistribution":
        """The only valid nearest-neighbor law: unit drift forces p(1)=1, p(-1)=0."""
        return cls(((1, 1.0),))


@dataclass(frozen=True)
class CertifiedRegion:
    lo: int
    hi: int

    @property
    def empty(self) -> bool:
        return self.hi < self.lo

    def __contains__(self, x: int) -> bool:
        return self.lo <= x <= self.hi

    def sites(self) -> range:
        return range(self.lo, self.hi + 1)


def certified_region(window: tuple[int, int], K: int, t: float) -> CertifiedRegion:
    """Sites provably unaffected by the window boundary up to time t.

    Boundary influence travels at most 4*K^2 sites per unit time from each
    end; the returned interval may be empty.
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    m = math.ceil(4 * K * K * t)
    return CertifiedRegion(window[0] + m, window[1] - m)


@dataclass(frozen=True)
class CoupledEnsemble:
    """Several height copies sharing one window and one clock field.

    ``event_log`` holds every applied move as (time, copy, site, move): move is
    "down"/"up" for exotic flips at the site, or the displacement v for a
    basic-coupling jump from the site.  ``initial_copies`` is kept so audits
    can replay the log from scratch.
    """

    copies: tuple[HeightFunction, ...]
    clock: ClockField
    time: float = 0.0
    event_log: tuple[tuple, ...] = ()
    initial_copies: tuple[HeightFunction, ...] | None = None

    def __post_init__(self) -> None:
        if not self.copies:
            raise ValueError("ensemble needs at least one copy")
        w = self.copies[0].window
        if any(c.window != w for c in self.copies):
            raise ValueError("copies must share the window")
        if self.initial_copies is None:
            object.__setattr__(self, "initial_copies", self.copies)

    @property
    def window(self) -> tuple[int, int]:
        return self.copies[0].window


def _pair_at(h: list[int], lo: int, z: int):
    """Flippable pair at site z, as (kind, particle label, hole label)."""
    hm, h0, hp = h[z - 1 - lo], h[z - lo], h[z + 1 - lo]
    if hm == h0 - 1 and hp == h0 - 1:
        return (DOWN, -((hm + z - 1) // 2), (z - h0) // 2)
    if hm == h0 + 1 and hp == h0 + 1:
        return (UP, -((h0 + z) // 2), (z - 1 - hm) // 2)
    return None


def exotic_stream_key(a: int, b: int, rep: tuple[int, int], direction: str) -> tuple:
    return ("exo", a, b, rep, direction)


def site_flip_key(z: int) -> tuple:
    """TASEP (1,1) down-flip stream key for site z: the per-site wedge clock."""
    return exotic_stream_key(1, 1, (0, z - 1), "+")


def evolve_asep_exotic(
    ensemble: CoupledEnsemble,
    coupling: tuple[int, int],
    p1: float,
    pm1: float,
    until: float,
    orientation: str = "standard",
) -> CoupledEnsemble:
    """Run the (a, b)-exotic nearest-neighbor coupling to the given time.

    Under the standard orientation a rate-p1 ring flips matching local maxima
    down and a rate-pm1 ring flips matching local minima up; the literal
    orientation swaps which extremum each rate drives.  Class streams
    materialize lazily at first appearance of a matching pair; earlier events
    of such a stream would have found no pair and are provably no-ops.
    """
    if isinstance(p1, JumpDistribution):
        raise ValueError("use evolve_aep_basic for a general jump distribution")
    a, b = coupling
    if p1 < 0 or pm1 < 0:
        raise ValueError("rates must be nonnegative")
    if orientation not in ("standard", "literal"):
        raise ValueError(f"unknown orientation {orientation!r}")
    field_ = ensemble.clock
    if field_.horizon is None or until > field_.horizon + 1e-12:
        raise ValueError("until exceeds the clock field horizon")
    if until < ensemble.time:
        raise ValueError("cannot evolve backwards")
    for c in ensemble.copies:
        if c.parity != 0:
            raise ValueError("copies must have h(x)+x even (integer labels)")

    lo, hi = ensemble.window
    t0 = ensemble.time
    n = len(ensemble.copies)
    hs = [list(c.values) for c in ensemble.copies]

    if orientation == "standard":
        kind_of_dir = {"+": DOWN, "-": UP}
    else:
        kind_of_dir = {"+": UP, "-": DOWN}
    rate_of_dir = {"+": p1, "-": pm1}

    site_entry: list[dict[int, tuple]] = [dict() for _ in range(n)]
    class_pairs: list[defaultdict] = [defaultdict(set) for _ in range(n)]
    active: set[tuple[int, int]] = set()
    heap: list[tuple[float, bytes, tuple]] = []

    def activate(rep: tuple[int, int], now: float) -> None:
        if rep in active:
            return
        active.add(rep)
        for direction in ("+", "-"):
            rate = rate_of_dir[direction]
            if rate <= 0:
                continue
            key = exotic_stream_key(a, b, rep, direction)
            st = sample_stream(field_, key, rate)
            kb = canonical_key_bytes(key)
            for r in st.times:
                if now < r <= until:
                    heapq.heappush(heap, (r, kb, key))

    def refresh_site(c: int, z: int, now: float) -> None:
        new_entry = None
        if lo + 1 <= z <= hi - 1:
            pair = _pair_at(hs[c], lo, z)
            if pair is not None:
                kind, ell, k = pair
                new_entry = (quotient_key(ell, k, a, b), kind)
        old_entry = site_entry[c].get(z)
        if old_entry == new_entry:
            return
        if old_entry is not None:
            rep, kind = old_entry
            class_pairs[c][rep].discard((z, kind))
            if not class_pairs[c][rep]:
                del class_pairs[c][rep]
            del site_entry[c][z]
        if new_entry is not None:
            rep, kind = new_entry
            site_entry[c][z] = new_entry
            class_pairs[c][rep].add((z, kind))
            activate(rep, now)

    for c in range(n):
        for z in range(lo + 1, hi):
            refresh_site(c, z, t0)

    log = list(ensemble.event_log)
    while heap:
        t, _, key = heapq.heappop(heap)
        rep, direction = key[3], key[4]
        kind = kind_of_dir[direction]
        delta = -2 if kind == DOWN else 2
        for c in range(n):
            pairs = sorted(z for z, kd in class_pairs[c].get(rep, ()) if kd == kind)
            if not pairs:
                continue
            for z in pairs:
                hs[c][z - lo] += delta
                log.append((t, c, z, kind))
            for z in pairs:
                for z2 in (z - 1, z, z + 1):
                    refresh_site(c, z2, t)

    new_copies = tuple(
        replace(c, values=tuple(h)) for c, h in zip(ensemble.copies, hs)
    )
    return replace(
        ensemble,
        copies=new_copies,
        time=until,
        event_log=tuple(log),
        initial_copies=ensemble.initial_copies,
    )


def default_basic_key(x: int, v: int) -> tuple:
    return ("aep", x, v)


def evolve_aep_basic(
    ensemble: CoupledEnsemble,
    p: JumpDistribution,
    until: float,
    key_for=default_basic_key,
) -> CoupledEnsemble:
    """Run the basic coupling: one stream per (site, jump vector).

    At each event of stream (x, v), every copy with a particle at x and a hole
    at x+v (inside the window) moves it; other copies ignore the ring.  The
    jump passes over intermediate sites; only the landing site must be empty.
    """
    field_ = ensemble.clock
    if field_.horizon is None or until > field_.horizon + 1e-12:
        raise ValueError("until exceeds the clock field horizon")
    if until < ensemble.time:
        raise ValueError("cannot evolve backwards")

    lo, hi = ensemble.window
    t0 = ensemble.time
    n = len(ensemble.copies)
    hs = [list(c.values) for c in ensemble.copies]
    # eta(x) for x in [lo, hi-1] sits in occ[x-lo]
    occ = [[(h[i + 1] - h[i] + 1) // 2 for i in range(len(h) - 1)] for h in hs]

    streams = [
        sample_stream(field_, key_for(x, v), p.rate(v))
        for x in range(lo, hi)
        for v in p.support
        if p.rate(v) > 0
    ]
    key_site = {canonical_key_bytes(key_for(x, v)): (x, v) for x in range(lo, hi) for v in p.support}

    log = list(ensemble.event_log)
    for t, key in merge_events(streams, t0, until):
        x, v = key_site[canonical_key_bytes(key)]
        y = x + v
        if not lo <= y <= hi - 1:
            continue
        for c in range(n):
            if occ[c][x - lo] == 1 and occ[c][y - lo] == 0:
                occ[c][x - lo] = 0
                occ[c][y - lo] = 1
                if v > 0:
                    for w in range(x + 1, y + 1):
                        hs[c][w - lo] -= 2
                else:
                    for w in range(y + 1, x + 1):
                        hs[c][w - lo] += 2
                log.append((t, c, x, v))

    new_copies = tuple(
        replace(c, values=tuple(h)) for c, h in zip(ensemble.copies, hs)
    )
    return replace(
        ensemble,
        copies=new_copies,
        time=until,
        event_log=tuple(log),
        initial_copies=ensemble.initial_copies,
    )


def pointwise_le(h1: HeightFunction, h2: HeightFunction) -> bool:
    if h1.window != h2.window:
        raise ValueError("windows differ")
    return all(u <= v for u, v in zip(h1.values, h2.values))


def _apply_logged(hs: list[list[int]], lo: int, hi: int, entry: tuple) -> list[int]:
    """Apply one log entry to working state; returns the sites whose h changed."""
    _, c, site, move = entry
    if move == DOWN:
        hs[c][site - lo] -= 2
        return [site]
    if move == UP:
        hs[c][site - lo] += 2
        return [site]
    v = int(move)
    y = site + v
    if v > 0:
        sites = list(range(site + 1, y + 1))
        for w in sites:
            hs[c][w - lo] -= 2
    else:
        sites = list(range(y + 1, site + 1))
        for w in sites:
            hs[c][w - lo] += 2
    return sites


def check_monotone(ensemble: CoupledEnsemble, K: int = 1):
    """Replay the event log and verify ordered copies stayed ordered.

    Pairs (i, j) with copy i <= copy j pointwise at time 0 are tracked; after
    every logged event, the ordering is rechecked at the changed sites, but
    only inside the certified region for the event's time.  Returns
    (True, None) or (False, (time, site, (i, j))) for the first violation.
    """
    lo, hi = ensemble.window
    init = ensemble.initial_copies
    n = len(init)
    tracked = [
        (i, j)
        for i in range(n)
        for j in range(n)
        if i != j and pointwise_le(init[i], init[j])
    ]
    hs = [list(c.values) for c in init]
    for entry in ensemble.event_log:
        t = entry[0]
        changed = _apply_logged(hs, lo, hi, entry)
        region = certified_region((lo, hi), K, t)
        if region.empty:
            continue
        c0 = entry[1]
        for (i, j) in tracked:
            if c0 != i and c0 != j:
                continue
            for z in changed:
                if z in region and hs[i][z - lo] > hs[j][z - lo]:
                    return False, (t, z, (i, j))
    return True, None


def bernoulli_height(
    lo: int, hi: int, rng: np.random.Generator, density: float = 0.5
) -> HeightFunction:
    """Height profile with iid Bernoulli(density) occupancies, h(0) even."""
    steps = np.where(rng.random(hi - lo) < density, 1, -1)
    vals = np.concatenate([[0], np.cumsum(steps)])
    if lo <= 0 <= hi:
        vals -= vals[-lo] % 2
    return HeightFunction(lo, hi, tuple(int(v) for v in vals))


def shift_equivariance_check(
    coupling: tuple[int, int],
    m: int,
    seed: int,
    horizon: float,
    p1: float = 1.3,
    pm1: float = 0.3,
    window: tuple[int, int] = (-40, 40),
    orientation: str = "standard",
) -> bool:
    """Exact check that shifting commutes with the exotic evolution.

    The shift sends h to h'(x) = h(x - m(a-b)) + m(a+b); on labels this is
    (l, k) -> (l - m a, k - m b), which fixes every class of the (a, b)
    quotient, so the same clock field drives both runs.  Agreement is required
    on the overlap of the two certified regions.
    """
    a, b = coupling
    if (m * (a + b)) % 2 != 0:
        raise ValueError("parity-inadmissible m: m(a+b) must be even")
    s, d = m * (a - b), m * (a + b)

    rng = np.random.default_rng(seed)
    h0 = bernoulli_height(window[0], window[1], rng)
    clock = ClockField(seed, horizon)

    base = CoupledEnsemble((h0,), clock)
    base = evolve_asep_exotic(base, coupling, p1, pm1, horizon, orientation)
    shifted = CoupledEnsemble((shift_map(h0, s, d),), clock)
    shifted = evolve_asep_exotic(shifted, coupling, p1, pm1, horizon, orientation)

    region = certified_region(window, 1, horizon)
    if region.empty:
        raise ValueError("horizon too large for the window: empty certified region")
    hb, hsf = base.copies[0], shifted.copies[0]
    return all(
        hsf.value(x + s) == hb.value(x) + d for x in region.sites()
    )
