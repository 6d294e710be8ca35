import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.spatial.distance import jensenshannon

from goalforge.errors import EmptyCounts, InsufficientGroups, NoCollisionDetected, NoValidTrials, SupportMismatch
from goalforge.evaluation import (
    SpeedTrial,
    TrialLog,
    accuracy_report,
    detect_collision_and_speed,
    diversity_report,
    diversity_score,
    format_table,
    jsd,
    planning_accuracy,
    speed_ordering_check,
    tally,
)

# reference rows: uniform over the first k of 5 items
REFERENCE = {5: 1.0000, 4: 0.8920, 3: 0.7635, 2: 0.6042, 1: 0.3900}


def test_jsd_identity_and_dirac():
    p = np.array([0.1, 0.2, 0.3, 0.4])
    assert jsd(p, p) == 0.0
    assert jsd([1, 0, 0, 0, 0], np.full(5, 0.2)) == pytest.approx(0.6100, abs=5e-5)


def test_jsd_support_mismatch():
    with pytest.raises(SupportMismatch):
        jsd([0.5, 0.5], [1 / 3] * 3)
    with pytest.raises(ValueError):
        jsd([0.5, 0.6], [0.5, 0.5])


pmf = st.lists(st.floats(0, 10), min_size=2, max_size=8).filter(lambda x: sum(x) > 1e-3)


@given(pmf, st.data())
def test_jsd_matches_scipy_and_is_symmetric(a, data):
    b = data.draw(st.lists(st.floats(0, 10), min_size=len(a), max_size=len(a)).filter(lambda x: sum(x) > 1e-3))
    p, q = np.array(a) / sum(a), np.array(b) / sum(b)
    ours = jsd(p, q)
    assert ours == pytest.approx(jsd(q, p), abs=1e-12)
    assert ours == pytest.approx(jensenshannon(p, q, base=2) ** 2, abs=1e-9)
    assert 0.0 <= ours <= 1.0


@pytest.mark.parametrize("k", [5, 4, 3, 2, 1])
def test_reference_rows(k):
    counts = [7] * k + [0] * (5 - k)
    assert diversity_score(counts) == pytest.approx(REFERENCE[k], abs=5e-4)


@given(st.integers(0, 4), st.integers(1, 10 ** 6))
def test_any_dirac_on_five(i, n):
    counts = [0] * 5
    counts[i] = n
    assert diversity_score(counts) == pytest.approx(0.39, abs=5e-5)


@given(st.lists(st.integers(0, 50), min_size=1, max_size=9).filter(lambda c: sum(c) > 0), st.randoms())
def test_diversity_permutation_invariant(counts, rnd):
    shuffled = list(counts)
    rnd.shuffle(shuffled)
    assert diversity_score(shuffled) == pytest.approx(diversity_score(counts), abs=1e-12)
    assert 0.0 <= diversity_score(counts) <= 1.0


def test_diversity_uniform_is_exactly_one():
    assert diversity_score([3, 3, 3, 3, 3]) == 1.0


def test_diversity_errors():
    with pytest.raises(EmptyCounts):
        diversity_score([])
    with pytest.raises(EmptyCounts):
        diversity_score([0, 0, 0])


def test_tally_and_report():
    counts = tally(["a", "b", "a"], ["a", "b", "c"])
    assert counts == [2, 1, 0]
    with pytest.raises(SupportMismatch):
        tally(["z"], ["a"])
    rep = diversity_report([1, 1, 1, 1, 1], list("abcde"))
    assert rep["score"] == 1.0
    assert "diversity score: 1.0000" in format_table(rep)


def test_accuracy_examples():
    logs = [TrialLog("pool", "white", "white")] * 48 + [TrialLog("pool", "white", "orange")]
    v, s, a = planning_accuracy(logs)
    assert (v, s) == (49, 48)
    assert a == pytest.approx(97.96, abs=5e-3)
    assert planning_accuracy([TrialLog("x", "a", "a")] * 3)[2] == 100.0
    mixed = logs + [TrialLog("pool", "white", None, valid=False)] * 10
    assert planning_accuracy(mixed) == planning_accuracy(logs)
    with pytest.raises(NoValidTrials):
        planning_accuracy([TrialLog("x", "a", None, valid=False)])


@given(st.lists(st.tuples(st.sampled_from("ab"), st.sampled_from("ab"), st.booleans()), min_size=1), st.randoms())
def test_accuracy_order_invariant(rows, rnd):
    logs = [TrialLog("s", t, o if v else None, v) for t, o, v in rows]
    if not any(v for _, _, v in rows):
        return
    shuffled = list(logs)
    rnd.shuffle(shuffled)
    assert planning_accuracy(shuffled) == planning_accuracy(logs)


def test_accuracy_report_rows():
    logs = [TrialLog("a", "x", "x"), TrialLog("b", "x", "y"), TrialLog("b", "x", "x")]
    rep = accuracy_report(logs)
    assert [r["scene"] for r in rep["rows"]] == ["a", "b"]
    assert rep["total"]["accuracy"] == pytest.approx(200 / 3)
    assert "all" in format_table(rep)


def _trajectories(speed=1.0, hit=48, n=81, fps=16):
    t = np.arange(n) / fps
    proj = np.stack([t * speed, np.zeros(n)], axis=1)
    target = np.zeros((n, 2))
    target[hit:, 0] = (np.arange(n - hit) + 1) * 0.05
    return proj, target


def test_constant_speed_detection():
    proj, target = _trajectories()
    speed, frame = detect_collision_and_speed(proj, target, 16)
    assert frame == 48
    assert speed == pytest.approx(1.0, abs=1e-6)


def test_speed_ignores_post_collision_frames():
    proj, target = _trajectories()
    proj2 = proj.copy()
    proj2[48:] = proj2[48:] * 0.1 + 5.0
    assert detect_collision_and_speed(proj2, target, 16) == detect_collision_and_speed(proj, target, 16)


def test_pixel_mode_and_errors():
    proj, target = _trajectories()
    speed, frame = detect_collision_and_speed(proj * 40, target * 40, 16, mode="pixel")
    assert frame == 48
    assert speed == pytest.approx(40.0, abs=1e-6)
    with pytest.raises(NoCollisionDetected):
        detect_collision_and_speed(proj, np.zeros_like(proj), 16)
    with pytest.raises(ValueError):
        detect_collision_and_speed(proj, target[:10], 16)


def _trials(speeds):
    return [SpeedTrial(mp, mt, s, 40) for (mp, mt), s in speeds.items()]


def test_speed_orderings():
    from goalforge.planner import required_projectile_speed as rps
    speeds = {(mp, mt): rps(mp, mt, 1.6) for mp in (1.0, 3.0) for mt in (1.0, 3.0)}
    rep = speed_ordering_check(_trials(speeds))
    assert len(rep["relationships"]) == 4
    assert rep["all_satisfied"]
    four = {(mp, 2.0): rps(mp, 2.0, 1.0) for mp in (1.0, 4.0)}
    rep = speed_ordering_check(_trials(four))
    assert rep["relationships"][0]["lhs"] == "m_p=4,m_t=2"
    assert rep["all_satisfied"]


def test_equal_speeds_violate():
    rep = speed_ordering_check(_trials({(1.0, 1.0): 2.0, (1.0, 3.0): 2.0}))
    assert not rep["all_satisfied"]
    assert "VIOLATED" in format_table(rep)


def test_speed_groups_need_a_shared_mass():
    with pytest.raises(InsufficientGroups):
        speed_ordering_check(_trials({(1.0, 1.0): 1.0, (3.0, 3.0): 1.0}))
