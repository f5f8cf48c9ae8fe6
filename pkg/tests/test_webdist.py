import math

import numpy as np
import pytest

from kpzlab.stats import SampleSet, ks_two_sample
from kpzlab.webdist import (
    RademacherField,
    drw,
    drw_bruteforce,
    drw_profile,
    drw_profiles,
    lattice_point,
    one_point_samples,
    rescale_m_eta,
    slack_violation_rate,
    soft_wedge_lift,
    soft_wedge_slope,
    tw_reference,
    walk_from,
    web_constants,
)

BOX = (-12, 12, -1, 12)

# Seeds found by scanning small fields for the hand-checked configurations.
LINE_SEED = 17  # signs along the diagonal from (0, 0) all +1 for four steps
COAL_SEED = 1  # sign +1 at (0, 0) and -1 at (2, 0)


def even_points(i_lo, i_hi, n_lo, n_hi):
    return [
        (i, n)
        for n in range(n_lo, n_hi + 1)
        for i in range(i_lo, i_hi + 1)
        if (i + n) % 2 == 0
    ]


def test_field_values_deterministic():
    field = RademacherField(3, BOX)
    vals = [field.value(i, n) for i, n in even_points(-4, 4, 0, 4)]
    assert set(vals) <= {-1, 1}
    again = RademacherField(3, BOX)
    assert vals == [again.value(i, n) for i, n in even_points(-4, 4, 0, 4)]
    other = RademacherField(4, BOX)
    assert vals != [other.value(i, n) for i, n in even_points(-4, 4, 0, 4)]


def test_field_domain_errors():
    field = RademacherField(0, BOX)
    with pytest.raises(ValueError, match="even lattice"):
        field.value(1, 0)
    with pytest.raises(ValueError, match="outside the box"):
        field.value(40, 0)
    with pytest.raises(ValueError, match="empty box"):
        RademacherField(0, (3, 1, 0, 4))


def test_walk_follows_local_signs():
    for seed in range(10):
        field = RademacherField(seed, BOX)
        path = walk_from(field, (0, 0), 6)
        for j, (x, nxt) in enumerate(zip(path, path[1:])):
            assert nxt == x + field.value(x, j)


def test_walk_straight_line():
    field = RademacherField(LINE_SEED, BOX)
    assert walk_from(field, (0, 0), 4) == (0, 1, 2, 3, 4)


def test_walks_coalesce_and_stay_merged():
    field = RademacherField(COAL_SEED, BOX)
    assert field.value(0, 0) == 1 and field.value(2, 0) == -1
    left = walk_from(field, (0, 0), 6)
    right = walk_from(field, (2, 0), 6)
    assert left[1] == right[1] == 1
    assert left[1:] == right[1:]


def test_coalescence_absorbing():
    for seed in range(100):
        field = RademacherField(seed, (-20, 20, 0, 10))
        a = walk_from(field, (-2, 0), 10)
        b = walk_from(field, (2, 0), 10)
        merged = False
        for x, y in zip(a, b):
            if merged:
                assert x == y
            elif x == y:
                merged = True


def test_walk_leaves_box():
    field = RademacherField(0, (-1, 1, 0, 8))
    with pytest.raises(ValueError, match="leaves the box"):
        walk_from(field, (0, 0), 8)


def test_distance_one_step_examples():
    for seed in range(20):
        field = RademacherField(seed, BOX)
        z = field.value(0, 0)
        assert drw(field, (0, 0), (z, 1)) == 0.0
        assert drw(field, (0, 0), (-z, 1)) == 1.0


def test_distance_conventions():
    field = RademacherField(0, BOX)
    assert drw(field, (0, 0), (0, 0)) == 0.0
    assert drw(field, (0, 2), (0, 0)) == math.inf
    assert drw(field, (0, 0), (8, 2)) == math.inf
    with pytest.raises(ValueError, match="even lattice"):
        drw(field, (1, 0), (0, 1))


def test_distance_matches_bruteforce():
    pts = even_points(0, 7, 0, 7)
    for seed in range(12):
        field = RademacherField(seed, (-8, 15, 0, 7))
        for s in pts:
            for e in pts:
                if e[1] < s[1]:
                    continue
                assert drw(field, s, e) == drw_bruteforce(field, s, e)


def test_bruteforce_size_cap():
    field = RademacherField(0, (-30, 30, 0, 20))
    with pytest.raises(ValueError, match="size cap"):
        drw_bruteforce(field, (0, 0), (0, 16))


def test_zero_jump_reachable_is_the_walk():
    for seed in range(20):
        field = RademacherField(seed, (-10, 20, 0, 8))
        path = walk_from(field, (0, 0), 8)
        for m in range(9):
            for j in range(-8, 17):
                if (j + m) % 2:
                    continue
                zero_cost = drw(field, (0, 0), (j, m)) == 0.0
                assert zero_cost == (path[m] == j)


def test_lightcone_classification():
    pts = even_points(-6, 6, 0, 6)
    for seed in range(20):
        field = RademacherField(seed, (-14, 14, 0, 6))
        for s in pts:
            for e in pts:
                d = drw(field, s, e)
                in_cone = e[1] >= s[1] and abs(e[0] - s[0]) <= e[1] - s[1]
                assert math.isinf(d) != in_cone
                if in_cone:
                    assert 0 <= d <= e[1] - s[1]


def test_concatenation_needs_at_most_one_extra_jump():
    for seed in range(20):
        field = RademacherField(seed, (-16, 16, 0, 12))
        o = (0, 0)
        for q in even_points(-4, 4, 12, 12):
            direct = drw(field, o, q)
            for p in even_points(-6, 6, 6, 6):
                legs = drw(field, o, p) + drw(field, p, q)
                if math.isfinite(legs):
                    assert direct <= legs + 1


def test_profile_multilayer_matches_pointwise():
    field = RademacherField(7, (-16, 16, 0, 10))
    pos5 = np.arange(-5, 7, 2)
    pos10 = np.arange(-6, 8, 2)
    rows = drw_profiles(field, (0, 0), [(5, pos5), (10, pos10)])
    for j, v in zip(pos5, rows[0]):
        assert v == drw(field, (0, 0), (int(j), 5))
    for j, v in zip(pos10, rows[1]):
        assert v == drw(field, (0, 0), (int(j), 10))
    below = drw_profiles(field, (0, 4), [(2, pos5)])[0]
    assert np.all(np.isinf(below))


def test_profile_cone_coverage_error():
    field = RademacherField(0, (-2, 2, 0, 8))
    with pytest.raises(ValueError, match="light cone"):
        drw_profile(field, (0, 0), 8, np.array([0]))


def test_translation_invariance_in_law():
    def sample(shift, seeds):
        out = []
        for seed in seeds:
            field = RademacherField(seed, (-16, 22, 0, 12))
            out.append(drw(field, (shift, 0), (shift + 4, 12)))
        return SampleSet("web distance", tuple(out))

    base = sample(0, range(1000))
    shifted = sample(2, range(1000, 2000))
    res = ks_two_sample(base, shifted, alpha=0.01)
    assert res.passed


def test_web_constants_frozen_values():
    wc = web_constants(0.6)
    assert wc.b == pytest.approx(0.1, abs=1e-12)
    assert wc.a == pytest.approx(2.0716, abs=1e-3)
    assert wc.c == pytest.approx(0.6214, abs=1e-3)
    assert wc.d == pytest.approx(0.9944, abs=1e-3)
    for eta in (0.2, 0.5, 0.9):
        w = web_constants(eta)
        assert min(w.a, w.b, w.c, w.d) > 0
    for bad in (0.0, 1.0, -0.3, 1.7):
        with pytest.raises(ValueError, match="eta"):
            web_constants(bad)


def test_lattice_point_parity_and_floor():
    for coord in (-1.2, -0.3, 0.0, 0.4, 1.7):
        for time in (0.0, 0.25, 0.5, 1.0):
            pos, layer = lattice_point(0.6, 200, coord, time)
            assert (pos + layer) % 2 == 0
            assert layer == -round(200 * time)
            exact = 0.6 * 200 * time + web_constants(0.6).d * 200 ** (2 / 3) * coord
            assert exact - 2 < pos <= exact


def test_rescale_diagonal_and_formula():
    n = 60
    wc = web_constants(0.6)
    field = RademacherField(
        3, (-int(2 * n), int(2 * n), -n - 1, 1)
    )
    assert rescale_m_eta(field, 0.6, n, [(0.3, 0.5, 0.3, 0.5)])[0] == 0.0
    point = (0.0, 0.0, 0.1, 1.0)
    val = rescale_m_eta(field, 0.6, n, [point])[0]
    x, s, y, t = point
    src = lattice_point(0.6, n, y, t)
    tgt = lattice_point(0.6, n, x, s)
    dist = drw(field, src, tgt)
    expect = -wc.a * n ** (-1 / 3) * (
        dist - wc.b * n * (t - s) - wc.c * n ** (2 / 3) * (y - x)
    )
    assert val == pytest.approx(expect)
    far = rescale_m_eta(field, 0.6, n, [(3.0, 0.0, 0.0, 0.05)])[0]
    assert far == -math.inf


def test_soft_wedge_slopes():
    assert soft_wedge_slope("f", 8) == pytest.approx(4.0)
    wc = web_constants(0.6)
    assert soft_wedge_slope("g", 8, 0.6) == pytest.approx(wc.c * wc.a * 2.0)
    with pytest.raises(ValueError, match="eta"):
        soft_wedge_slope("g", 8)
    with pytest.raises(ValueError, match="kind"):
        soft_wedge_slope("h", 8)


def test_soft_wedge_lift_excludes_right_of_anchor():
    samples = {0.5: 1e9, 0.0: 0.25, -1.0: 100.0}
    n = 1000
    lifted = soft_wedge_lift(samples, 0.0, n, "f")
    slope = soft_wedge_slope("f", n)
    assert lifted == pytest.approx(max(0.25, 100.0 - slope))
    assert soft_wedge_lift({1.0: 5.0}, 0.0, n, "f") == -math.inf


def test_soft_wedge_hard_limit_recovers_sample():
    samples = {0.0: 0.7, -0.5: 3.0, -1.0: 9.0}
    assert soft_wedge_lift(samples, 0.0, 10**9, "f") == pytest.approx(0.7)


def test_one_point_samples_reproducible():
    a = one_point_samples(0.6, 40, 6, seed=5)
    b = one_point_samples(0.6, 40, 6, seed=5)
    assert np.array_equal(a, b)
    assert np.all(np.isfinite(a))
    assert len(set(np.round(a, 12))) > 1
    c = one_point_samples(0.6, 40, 6, seed=6)
    assert not np.array_equal(a, c)


def test_slack_rate_small_geometry():
    rate = slack_violation_rate(0.6, 60, 4, seed=2)
    assert 0.0 <= rate <= 1.0
    assert rate == slack_violation_rate(0.6, 60, 4, seed=2)


def test_tw_reference_matches_table():
    mean, var = tw_reference()
    assert mean == pytest.approx(-1.7710868074, abs=1e-6)
    assert var == pytest.approx(0.8131947926, abs=1e-6)
