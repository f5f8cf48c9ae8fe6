"""Batched TASEP sampling via uniformization, with a compiled inner loop.

The continuous-time dynamics ring each interior site with a rate-1 clock and
flip local maxima down.  Conditioning on the total attempt count, attempt
sites are independent uniforms, so drawing N ~ Poisson(sites * T) attempts and
applying them in order reproduces the law of the endpoint state exactly.  The
same kernel replays attempts extracted from a ClockField, which must
reproduce the event engine bit for bit; a test holds that equivalence.

Used by the statistical audits (one-point marginals, disjoint-window
increments, stationarity), where the event engine would be needlessly slow.
"""

from __future__ import annotations

import math

import numpy as np

from .clocks import ClockField, merge_events, sample_stream
from .exclusion import site_flip_key

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap if not (args and callable(args[0])) else args[0]


@njit
def _run_attempts(eta, attempts, flips):
    for i in range(attempts.shape[0]):
        j = attempts[i]
        if eta[j - 1] == 1 and eta[j] == 0:
            eta[j - 1] = 0
            eta[j] = 1
            flips[j] += 1


def run_tasep_attempts(eta: np.ndarray, attempts: np.ndarray) -> np.ndarray:
    """Apply flip attempts in order; eta is updated in place.

    eta[j] is the occupancy of the bond (lo+j, lo+j+1); attempt index j means
    a ring at height site lo+j, legal for j in [1, len(eta)-1].  Returns the
    per-site flip counts; the height change at site lo+j is -2*flips[j].
    """
    flips = np.zeros(len(eta) + 1, dtype=np.int64)
    _run_attempts(eta, np.asarray(attempts, dtype=np.int64), flips)
    return flips


def attempts_from_clock(
    field: ClockField, window: tuple[int, int], s: float, t: float
) -> np.ndarray:
    """Attempt indices (z - lo) of all site flip streams in (s, t], in ring order."""
    lo, hi = window
    streams = [sample_stream(field, site_flip_key(z), 1.0) for z in range(lo + 1, hi)]
    events = merge_events(streams, s, t)
    return np.array([key[3][1] + 1 - lo for _, key in events], dtype=np.int64)


def jump_chain_attempts(rng: np.random.Generator, n_interior: int, duration: float) -> np.ndarray:
    """Uniformized attempt sequence: Poisson count, iid uniform interior sites."""
    n = int(rng.poisson(n_interior * duration))
    return rng.integers(1, n_interior + 1, size=n, dtype=np.int64)


def step_initial(width: int) -> np.ndarray:
    """Occupancies of the narrow wedge at 0 on [-width, width]: filled left half."""
    eta = np.zeros(2 * width, dtype=np.uint8)
    eta[:width] = 1
    return eta


def _replica_rng(seed: int, tag, rep: int) -> np.random.Generator:
    return np.random.default_rng(ClockField(seed).child_seed((tag, rep)))


def wedge_endpoint_samples(
    seed: int, eps: float, n_rep: int, margin: float = 1.5
) -> np.ndarray:
    """Rescaled one-point metric samples at (0,0; 0,1), one per replica.

    Evolves the wedge for the lattice horizon 2 eps^{-3/2} on a window wide
    enough that the frozen boundary is outside the rarefaction fan, and
    returns sqrt(eps) * (h(0) + T/2).
    """
    T = 2.0 * eps ** (-1.5)
    width = 2 * math.ceil(margin * T / 2)
    out = np.empty(n_rep)
    for rep in range(n_rep):
        rng = _replica_rng(seed, ("marginal", repr(eps)), rep)
        eta = step_initial(width)
        attempts = jump_chain_attempts(rng, 2 * width - 1, T)
        flips = run_tasep_attempts(eta, attempts)
        out[rep] = math.sqrt(eps) * (-2.0 * flips[width] + T / 2.0)
    return out


def bernoulli_bonds(rng: np.random.Generator, n_bonds: int) -> np.ndarray:
    """Density-1/2 product occupancies, the stationary profile law."""
    return rng.integers(0, 2, size=n_bonds, dtype=np.uint8)


def stationary_increment_pairs(
    seed: int,
    n_rep: int,
    duration: float,
    probe_offset: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Height increments of stationary TASEP over two adjacent time windows.

    One trajectory per replica, continued through (0,T] and (T,2T]; the first
    increment is read at site -probe_offset during the first window, the
    second at +probe_offset during the second.  At density 1/2 a fixed site
    sits on the characteristic line, where the current variance grows
    sublinearly and adjacent increments are genuinely anticorrelated (about
    -0.21); the default offset separates the probes beyond both light cones,
    where the increments are functionals of disjoint randomness.  Pass
    probe_offset=0 to observe the co-located anticorrelation itself.
    """
    if probe_offset is None:
        probe_offset = 4 * math.ceil(duration) + 8
    width = probe_offset + 4 * math.ceil(duration) + 16
    d1 = np.empty(n_rep)
    d2 = np.empty(n_rep)
    for rep in range(n_rep):
        rng = _replica_rng(seed, "stat-incr", rep)
        eta = bernoulli_bonds(rng, 2 * width)
        f1 = run_tasep_attempts(eta, jump_chain_attempts(rng, 2 * width - 1, duration))
        f2 = run_tasep_attempts(eta, jump_chain_attempts(rng, 2 * width - 1, duration))
        d1[rep] = -2.0 * f1[width - probe_offset]
        d2[rep] = -2.0 * f2[width + probe_offset]
    return d1, d2


def stationary_profile_samples(
    seed: int, n_rep: int, duration: float, span: int, width: int
) -> np.ndarray:
    """h_T(span) - h_T(0) for stationary-start TASEP, one value per replica."""
    out = np.empty(n_rep)
    for rep in range(n_rep):
        rng = _replica_rng(seed, "stat-prof", rep)
        eta = bernoulli_bonds(rng, 2 * width)
        attempts = jump_chain_attempts(rng, 2 * width - 1, duration)
        run_tasep_attempts(eta, attempts)
        seg = eta[width : width + span].astype(np.int64)
        out[rep] = float(np.sum(2 * seg - 1))
    return out


def disjoint_window_metric_pairs(
    seed: int, n_rep: int, duration: float, margin: float = 1.5
) -> tuple[np.ndarray, np.ndarray]:
    """d(0,0;0,T) and d(0,T;0,2T) per replica, from disjoint clock windows."""
    width = 2 * math.ceil(margin * duration / 2)
    d1 = np.empty(n_rep)
    d2 = np.empty(n_rep)
    for rep in range(n_rep):
        rng = _replica_rng(seed, "metric-incr", rep)
        for out in (d1, d2):
            eta = step_initial(width)
            attempts = jump_chain_attempts(rng, 2 * width - 1, duration)
            flips = run_tasep_attempts(eta, attempts)
            out[rep] = -2.0 * flips[width]
    return d1, d2
