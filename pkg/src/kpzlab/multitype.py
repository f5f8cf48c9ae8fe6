"""Multi-type exclusion process encoding a basic-coupled pair of AEPs.

A pair of exclusion configurations evolving in basic coupling is folded into
one process with four site values: hole (neither occupied), particle (both),
type-2 (only the upper copy), type-3 (only the lower copy).  Per-site jump
attempts then act by a fixed case table: particles and type-2/3 particles
jump into holes, a particle swaps with a type-2/3 in its way, and a type-2
landing on a type-3 (or vice versa) annihilates into hole + particle.
Marginalizing back to the pair reproduces the basic coupling move for move,
which a test asserts exactly.

Type-2 and type-3 particles carry real labels, strictly increasing left to
right within each type.  Labels do not ride their particle: after every move
the surviving labels are reassigned to the type's sites in sorted order,
which is the only choice that keeps them increasing when jumps pass over
other particles.  At an annihilation triggered by a jump from x, one label
of each type is removed, chosen uniformly among the labels within distance
K of x; the choices consume a dedicated substream keyed by the running
annihilation count, so replays are deterministic.

A "takeover" of a type-2 label X is the first time a given type-3 label
passes it right to left, including the virtual pass when an annihilation
removes a type-3 label that sat to the right of X (never having been to its
left) together with a type-2 label to the left of X.  Takeover counts bound
how far the folded pair can fall out of order, so their tails are the
quantitative handle on approximate monotonicity; ``takeover_tail`` and
``y_statistic`` measure both sides of that bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .clocks import ClockField, canonical_key_bytes, merge_events, sample_stream
from .exclusion import (
    CoupledEnsemble,
    JumpDistribution,
    certified_region,
    default_basic_key,
)
from .lattice import HeightFunction

HOLE = 0
PARTICLE = 1
TYPE2 = 2
TYPE3 = 3


@dataclass(frozen=True)
class MultiTypeConfig:
    """Site types on [lo, hi) plus the sorted label lists for types 2 and 3."""

    lo: int
    hi: int
    types: tuple[int, ...]
    labels2: tuple[float, ...]
    labels3: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.types) != self.hi - self.lo:
            raise ValueError("types must cover every site of the window")
        if any(g not in (HOLE, PARTICLE, TYPE2, TYPE3) for g in self.types):
            raise ValueError("invalid site type")
        for labels, kind in ((self.labels2, TYPE2), (self.labels3, TYPE3)):
            if len(labels) != self.types.count(kind):
                raise ValueError("one label per particle of the type")
            if any(b <= a for a, b in zip(labels, labels[1:])):
                raise ValueError("labels must be strictly increasing")

    @property
    def window(self) -> tuple[int, int]:
        return (self.lo, self.hi)

    def sites_of(self, kind: int) -> list[int]:
        return [self.lo + i for i, g in enumerate(self.types) if g == kind]

    def label_positions(self, kind: int) -> dict[float, int]:
        """Label -> site, matching sorted labels to sorted sites."""
        labels = self.labels2 if kind == TYPE2 else self.labels3
        return dict(zip(labels, self.sites_of(kind)))


def encode_pair(h_minus: HeightFunction, h_plus: HeightFunction) -> MultiTypeConfig:
    """Fold a coupled pair into one multi-type configuration.

    Initial labels are the site indices; only their relative order ever
    matters.
    """
    if h_minus.window != h_plus.window:
        raise ValueError("windows differ")
    lo, hi = h_minus.window
    types = []
    for i in range(hi - lo):
        em = (h_minus.values[i + 1] - h_minus.values[i] + 1) // 2
        ep = (h_plus.values[i + 1] - h_plus.values[i] + 1) // 2
        types.append(
            PARTICLE if em and ep else HOLE if not (em or ep)
            else TYPE3 if em else TYPE2
        )
    types = tuple(types)
    cfg = MultiTypeConfig(
        lo,
        hi,
        types,
        tuple(lo + i for i, g in enumerate(types) if g == TYPE2),
        tuple(lo + i for i, g in enumerate(types) if g == TYPE3),
    )
    return cfg


def decode_config(cfg: MultiTypeConfig) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Occupancies (eta_minus, eta_plus) of the encoded pair."""
    eta_minus = tuple(1 if g in (PARTICLE, TYPE3) else 0 for g in cfg.types)
    eta_plus = tuple(1 if g in (PARTICLE, TYPE2) else 0 for g in cfg.types)
    return eta_minus, eta_plus


@dataclass
class TakeoverLedger:
    """Per-label takeover counters plus annihilation removal records.

    ``_done`` holds (type-2 label, type-3 label) pairs whose takeover already
    happened; ``_ever_left`` holds pairs where the type-3 label has at some
    point been left of the type-2 label.  Counters only ever increase, and a
    removed label keeps its final count.
    """

    counts: dict = dc_field(default_factory=dict)
    removals: list = dc_field(default_factory=list)
    removed2: set = dc_field(default_factory=set)
    removed3: set = dc_field(default_factory=set)
    anni_count: int = 0
    _done: set = dc_field(default_factory=set)
    _ever_left: set = dc_field(default_factory=set)

    @classmethod
    def for_config(cls, cfg: MultiTypeConfig) -> "TakeoverLedger":
        pos2 = cfg.label_positions(TYPE2)
        pos3 = cfg.label_positions(TYPE3)
        ever = {
            (X, z) for X, px in pos2.items() for z, pz in pos3.items() if pz < px
        }
        return cls(counts={X: 0 for X in cfg.labels2}, _ever_left=ever)

    def copy(self) -> "TakeoverLedger":
        return TakeoverLedger(
            dict(self.counts),
            list(self.removals),
            set(self.removed2),
            set(self.removed3),
            self.anni_count,
            set(self._done),
            set(self._ever_left),
        )

    def takeovers(self, label) -> int:
        return self.counts[label]


@dataclass(frozen=True)
class MoveRecord:
    time: float
    site: int
    v: int
    kind: str
    mover: int
    target: int
    takeovers: tuple[tuple[float, float], ...]
    removed: tuple[float, float] | None = None


def classify_move(cfg: MultiTypeConfig, x: int, v: int) -> tuple[str | None, str]:
    """Kind of the attempted move from x by v, or (None, reason) if inert."""
    y = x + v
    if v == 0:
        return None, "zero displacement"
    if not (cfg.lo <= x < cfg.hi and cfg.lo <= y < cfg.hi):
        return None, "outside the window"
    gx, gy = cfg.types[x - cfg.lo], cfg.types[y - cfg.lo]
    if gx == HOLE:
        return None, "no mover at the source"
    if gy == HOLE:
        return "jump", ""
    if gx == PARTICLE and gy in (TYPE2, TYPE3):
        return "swap", ""
    if (gx, gy) in ((TYPE2, TYPE3), (TYPE3, TYPE2)):
        return "annihilation", ""
    return None, "target blocked"


def _detect_takeovers(ledger, before2, before3, after2, after3):
    """Count first right-to-left crossings among pairs whose order changed."""
    moved2 = [X for X, p in after2.items() if before2[X] != p]
    moved3 = [z for z, p in after3.items() if before3[z] != p]
    pairs = {(X, z) for X in moved2 for z in after3}
    pairs |= {(X, z) for z in moved3 for X in after2}
    hits = []
    for X, z in sorted(pairs):
        b = before3[z] - before2[X]
        a = after3[z] - after2[X]
        if b > 0 and a < 0:
            if (X, z) not in ledger._done:
                ledger._done.add((X, z))
                ledger.counts[X] += 1
                hits.append((X, z))
            ledger._ever_left.add((X, z))
        elif a < 0:
            ledger._ever_left.add((X, z))
    return tuple(hits)


def _step_into(
    cfg: MultiTypeConfig,
    ledger: TakeoverLedger,
    kind: str,
    x: int,
    v: int,
    span: int,
    time: float,
    uniforms,
) -> tuple[MultiTypeConfig, MoveRecord]:
    """Apply one pre-classified move, mutating the ledger in place."""
    y = x + v
    before2 = cfg.label_positions(TYPE2)
    before3 = cfg.label_positions(TYPE3)
    types = list(cfg.types)
    labels2 = list(cfg.labels2)
    labels3 = list(cfg.labels3)
    mover, target = types[x - cfg.lo], types[y - cfg.lo]
    removed = None

    if kind == "jump":
        types[y - cfg.lo] = types[x - cfg.lo]
        types[x - cfg.lo] = HOLE
    elif kind == "swap":
        types[x - cfg.lo], types[y - cfg.lo] = types[y - cfg.lo], types[x - cfg.lo]
    else:
        cand2 = [X for X in labels2 if abs(before2[X] - x) <= span]
        cand3 = [z for z in labels3 if abs(before3[z] - x) <= span]
        u2, u3 = uniforms() if callable(uniforms) else uniforms
        rem2 = cand2[min(int(u2 * len(cand2)), len(cand2) - 1)]
        rem3 = cand3[min(int(u3 * len(cand3)), len(cand3) - 1)]
        labels2.remove(rem2)
        labels3.remove(rem3)
        types[x - cfg.lo] = HOLE
        types[y - cfg.lo] = PARTICLE
        removed = (rem2, rem3)
        ledger.anni_count += 1
        ledger.removals.append((time, rem2, rem3, y))
        ledger.removed2.add(rem2)
        ledger.removed3.add(rem3)

    out = MultiTypeConfig(cfg.lo, cfg.hi, tuple(types), tuple(labels2), tuple(labels3))
    after2 = out.label_positions(TYPE2)
    after3 = out.label_positions(TYPE3)
    hits = list(_detect_takeovers(ledger, before2, before3, after2, after3))
    if removed is not None:
        rem2, rem3 = removed
        for X in after2:
            if (
                before2[rem2] < before2[X]
                and before3[rem3] > before2[X]
                and (X, rem3) not in ledger._ever_left
            ):
                ledger._done.add((X, rem3))
                ledger.counts[X] += 1
                hits.append((X, rem3))
    return out, MoveRecord(time, x, v, kind, mover, target, tuple(hits), removed)


def step_multitype(
    cfg: MultiTypeConfig,
    ledger: TakeoverLedger,
    x: int,
    v: int,
    span: int,
    *,
    time: float = 0.0,
    removal_uniforms: tuple[float, float] | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[MultiTypeConfig, TakeoverLedger, MoveRecord]:
    """Apply one legal move and account its takeovers.

    ``span`` is the removal radius at an annihilation (the range bound of the
    jump law); the two uniform label choices come from ``removal_uniforms``
    or are drawn from ``rng``.  Illegal moves raise with the reason.  Inputs
    are not mutated.
    """
    kind, reason = classify_move(cfg, x, v)
    if kind is None:
        raise ValueError(f"illegal move: {reason}")
    if kind == "annihilation" and removal_uniforms is None and rng is None:
        raise ValueError("annihilation needs removal randomness")
    uniforms = removal_uniforms if removal_uniforms is not None else (
        lambda: tuple(rng.random(2))
    )
    ledger = ledger.copy()
    out, record = _step_into(cfg, ledger, kind, x, v, span, time, uniforms)
    return out, ledger, record


def evolve_multitype(
    cfg: MultiTypeConfig,
    ledger: TakeoverLedger,
    clock: ClockField,
    p: JumpDistribution,
    start: float,
    until: float,
) -> tuple[MultiTypeConfig, TakeoverLedger, tuple[MoveRecord, ...]]:
    """Run the multi-type dynamics on the clock field's jump-attempt streams.

    Streams are keyed identically to the basic-coupling engine, so both see
    the same attempted moves; inert attempts are skipped.  Returns the final
    configuration, the accrued ledger, and the applied-move records.
    """
    if clock.horizon is None or until > clock.horizon + 1e-12:
        raise ValueError("until exceeds the clock field horizon")
    if until < start:
        raise ValueError("cannot evolve backwards")
    lo, hi = cfg.window
    streams = [
        sample_stream(clock, default_basic_key(x, v), p.rate(v))
        for x in range(lo, hi)
        for v in p.support
        if p.rate(v) > 0
    ]
    key_site = {
        canonical_key_bytes(default_basic_key(x, v)): (x, v)
        for x in range(lo, hi)
        for v in p.support
    }
    ledger = ledger.copy()
    records = []
    for t, key in merge_events(streams, start, until):
        x, v = key_site[canonical_key_bytes(key)]
        kind = classify_move(cfg, x, v)[0]
        if kind is None:
            continue
        uniforms = lambda: tuple(
            clock.generator(("anni", ledger.anni_count)).random(2)
        )
        cfg, rec = _step_into(cfg, ledger, kind, x, v, p.K, t, uniforms)
        records.append(rec)
    return cfg, ledger, tuple(records)


def y_statistic(ensemble: CoupledEnsemble, w: int, K: int) -> int:
    """Largest height excess of the lower copy over the upper on [-w, w].

    The box must lie inside the certified region for the ensemble's elapsed
    time, so the value is free of boundary effects.
    """
    if len(ensemble.copies) != 2:
        raise ValueError("needs exactly the coupled pair")
    region = certified_region(ensemble.window, K, ensemble.time)
    if region.empty or -w < region.lo or w > region.hi:
        raise ValueError("box not inside the certified region")
    h_minus, h_plus = ensemble.copies
    return max(h_minus.value(x) - h_plus.value(x) for x in range(-w, w + 1))


def survival_curve(counts) -> np.ndarray:
    """Empirical tail P[count >= m] for m = 0 .. max+1."""
    arr = np.asarray(counts, dtype=np.int64)
    if arr.size == 0:
        raise ValueError("no counts to pool")
    mmax = int(arr.max())
    return np.array([np.mean(arr >= m) for m in range(mmax + 2)])


def fit_decay_slope(tail: np.ndarray, m_min: int = 2) -> tuple[float, float]:
    """OLS slope and standard error of log tail[m] over m >= m_min."""
    ms = np.array([m for m in range(m_min, len(tail)) if tail[m] > 0], dtype=float)
    if len(ms) < 3:
        raise ValueError("tail too short to fit")
    ys = np.log(tail[ms.astype(int)])
    slope, intercept = np.polyfit(ms, ys, 1)
    resid = ys - (slope * ms + intercept)
    dof = len(ms) - 2
    se = math.sqrt(float(np.sum(resid**2)) / dof / float(np.sum((ms - ms.mean()) ** 2)))
    return float(slope), se


def takeover_tail(
    p: JumpDistribution,
    replicas: int,
    horizon: float,
    *,
    seed: int = 0,
    window: tuple[int, int] = (-32, 32),
    box: int = 16,
    type_weights: tuple[float, float, float, float] | None = None,
) -> tuple[np.ndarray, int]:
    """Pooled takeover-count tail over type-2 labels starting in [-box, box].

    Each replica starts from an independent i.i.d. four-type configuration
    (uniform unless type_weights reweights hole/particle/type-2/type-3) and
    runs to the horizon.  Requires p(1) > 1/2.  Returns the survival curve
    and the number of labels pooled.  Discrepancy-heavy weights probe the
    deep-disorder regime where large takeover counts occur.
    """
    if p.rate(1) <= 0.5:
        raise ValueError("needs p(1) > 1/2")
    lo, hi = window
    if not (lo <= -box and box <= hi - 1):
        raise ValueError("box exceeds the window")
    master = ClockField(seed)
    pooled = []
    for rep in range(replicas):
        clock = ClockField(master.child_seed(("takeover", rep)), horizon=horizon)
        rng = clock.generator("init")
        if type_weights is None:
            types = tuple(rng.integers(0, 4, size=hi - lo))
        else:
            types = tuple(rng.choice(4, size=hi - lo, p=type_weights))
        cfg = MultiTypeConfig(
            lo,
            hi,
            types,
            tuple(lo + i for i, g in enumerate(types) if g == TYPE2),
            tuple(lo + i for i, g in enumerate(types) if g == TYPE3),
        )
        ledger = TakeoverLedger.for_config(cfg)
        _, ledger, _ = evolve_multitype(cfg, ledger, clock, p, 0.0, horizon)
        pooled.extend(
            ledger.counts[X] for X in cfg.labels2 if -box <= X <= box
        )
    return survival_curve(pooled), len(pooled)


def ordered_touching_pair(rng, lo: int, hi: int) -> tuple[HeightFunction, HeightFunction]:
    """Random ordered pair with the sitewise gap toggling between 0 and 2.

    The upper profile is a random walk; the lower one tracks it, dropping a
    level whenever the upper steps up and rejoining whenever it steps down,
    as the increment constraint permits.  The dense touching maximizes the
    opportunities for a long jump in one copy to overshoot the other.
    """
    n = hi - lo
    steps = 2 * rng.integers(0, 2, size=n) - 1
    upper = [0]
    gap = [0]
    g = 0
    for s in steps:
        if g == 0 and s == 1:
            g = 2
        elif g == 2 and s == -1:
            g = 0
        upper.append(upper[-1] + int(s))
        gap.append(g)
    lower = tuple(u - g for u, g in zip(upper, gap))
    return HeightFunction(lo, hi, lower), HeightFunction(lo, hi, tuple(upper))


def y_tail_samples(
    p: JumpDistribution,
    replicas: int,
    t: float,
    w: int,
    *,
    seed: int = 0,
    margin: int = 4,
) -> np.ndarray:
    """Y statistics of random ordered pairs under the shared-clock coupling.

    Each replica draws an ordered_touching_pair, evolves both copies with
    the same clock, and records the maximal overshoot of the lower copy
    over [-w, w] at time t.
    """
    from .exclusion import evolve_aep_basic

    half = w + math.ceil(4 * p.K * p.K * t) + margin
    half += half % 2
    lo, hi = -half, half
    master = ClockField(seed)
    out = np.empty(replicas, dtype=np.int64)
    for rep in range(replicas):
        clock = ClockField(master.child_seed(("ytail", rep)), horizon=t)
        pair = ordered_touching_pair(clock.generator("init"), lo, hi)
        ens = CoupledEnsemble(pair, clock)
        ens = evolve_aep_basic(ens, p, t)
        out[rep] = y_statistic(ens, w, p.K)
    return out
