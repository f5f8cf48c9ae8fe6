"""Seed-derived Poisson clocks and the label-quotient keying that shares them.

A :class:`ClockField` maps structured keys to independent Poisson event
streams.  The derivation key -> stream is a keyed hash of the canonical key
encoding, so any two runs with the same master seed see identical clocks for
identical keys, regardless of materialization order.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np


def quotient_key(ell: int, k: int, a: int, b: int) -> tuple[int, int]:
    """Canonical representative of (ell, k) in Z^2 / Z*(a, b).

    Two pairs share a representative iff their difference is an integer
    multiple of (a, b).  For a > 0 the first coordinate is reduced mod a;
    for a = 0 the second is reduced mod b.  (0, 0) is not a coupling.
    """
    if a < 0 or b < 0 or (a == 0 and b == 0):
        raise ValueError("coupling pair must be nonnegative and not (0, 0)")
    if a > 0:
        m = ell // a
        return (ell - m * a, k - m * b)
    return (ell, k % b)


def canonical_key_bytes(key) -> bytes:
    """Deterministic byte encoding of a nested tuple/int/str key."""

    def norm(obj):
        if isinstance(obj, (tuple, list)):
            return tuple(norm(o) for o in obj)
        if isinstance(obj, (int, np.integer)):
            return int(obj)
        if isinstance(obj, str):
            return obj
        raise TypeError(f"unsupported key component {obj!r}")

    return repr(norm(key)).encode("utf-8")


@dataclass(frozen=True)
class PoissonStream:
    """Materialized event times of one Poisson clock on (0, horizon]."""

    key: object
    rate: float
    horizon: float
    times: tuple[float, ...]

    @property
    def count(self) -> int:
        return len(self.times)


def events_in(stream: PoissonStream, s: float, t: float) -> tuple[float, ...]:
    """The stream's events in the half-open window (s, t], order preserved."""
    if s > t:
        raise ValueError("window start after end")
    return tuple(r for r in stream.times if s < r <= t)


class ClockField:
    """Family of independent Poisson clocks on (0, horizon], indexed by keys.

    Streams are materialized on first request and cached; requesting the same
    key again returns the identical stream.  A key requested with a different
    rate than its cached stream is an error: a clock's law is part of its
    identity.
    """

    def __init__(self, master_seed: int, horizon: float | None = None):
        self.master_seed = int(master_seed)
        self.horizon = horizon
        self._seed_bytes = (self.master_seed % 2**128).to_bytes(16, "little")
        self._streams: dict[bytes, PoissonStream] = {}

    def _derive_key(self, key, salt: bytes = b"") -> int:
        h = hashlib.blake2b(
            canonical_key_bytes(key) + salt, key=self._seed_bytes, digest_size=16
        )
        return int.from_bytes(h.digest(), "little")

    def generator(self, key, salt: bytes = b"") -> np.random.Generator:
        """Fresh deterministic Generator for the key (same key -> same sequence)."""
        return np.random.Generator(np.random.Philox(key=self._derive_key(key, salt)))

    def child_seed(self, key) -> int:
        """64-bit seed derived from the key, for handing to sub-components."""
        return self._derive_key(key, salt=b"child") % (2**64)


def sample_stream(field: ClockField, key, rate: float) -> PoissonStream:
    """The Poisson stream for a key, materializing it on first touch."""
    if rate < 0:
        raise ValueError("rate must be nonnegative")
    horizon = field.horizon
    if horizon is None or horizon < 0:
        raise ValueError("clock field has no horizon set")
    kb = canonical_key_bytes(key)
    cached = field._streams.get(kb)
    if cached is not None:
        if cached.rate != rate:
            raise ValueError(f"stream {key!r} already materialized at rate {cached.rate}")
        return cached
    if rate == 0 or horizon == 0:
        st = PoissonStream(key, rate, horizon, ())
    else:
        rng = field.generator(key)
        n = int(rng.poisson(rate * horizon))
        while True:
            # (1 - u) maps [0, 1) draws onto (0, horizon]
            times = np.sort((1.0 - rng.random(n)) * horizon)
            if n < 2 or np.all(np.diff(times) > 0):
                break
        st = PoissonStream(key, rate, horizon, tuple(float(r) for r in times))
    field._streams[kb] = st
    return st


def inject_stream(field: ClockField, key, rate: float, times) -> PoissonStream:
    """Register a hand-built stream for a key, for crafted deterministic runs.

    The times must be strictly increasing and lie in (0, horizon].  Injection
    must happen before the key is first sampled.
    """
    horizon = field.horizon
    if horizon is None:
        raise ValueError("clock field has no horizon set")
    times = tuple(float(r) for r in times)
    if any(not 0 < r <= horizon for r in times):
        raise ValueError("injected times must lie in (0, horizon]")
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("injected times must be strictly increasing")
    kb = canonical_key_bytes(key)
    if kb in field._streams:
        raise ValueError(f"stream {key!r} already materialized")
    st = PoissonStream(key, rate, horizon, times)
    field._streams[kb] = st
    return st


def merge_events(streams, s: float, t: float) -> list[tuple[float, object]]:
    """All events of the given streams in (s, t], sorted by time.

    Simultaneous events (a measure-zero tie, but the order must still be a
    function of the seed alone) are broken by the canonical key encoding.
    """
    events = []
    for st in streams:
        kb = canonical_key_bytes(st.key)
        for r in events_in(st, s, t):
            events.append((r, kb, st.key))
    events.sort(key=lambda e: (e[0], e[1]))
    return [(r, key) for (r, _, key) in events]
