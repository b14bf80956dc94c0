import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import brute_eer, brute_min_dcf
from wpebench.errors import ConfigError, DegenerateInputError, FormatError
from wpebench.features import EmbeddingVector
from wpebench.scoring import (
    DcfParams,
    Trial,
    TrialList,
    TrialScoreSet,
    det_points,
    eer,
    min_dcf,
    read_scores,
    read_trials,
    score_trials,
    scores_for_trials,
    trial_scores,
    write_det,
    write_scores,
    write_trials,
)


score_lists = st.lists(st.floats(-3, 3, allow_nan=False).map(lambda v: round(v, 2)), min_size=1, max_size=100)


def test_separable_scores():
    s = TrialScoreSet([0.9, 0.8], [0.1, 0.2])
    assert eer(s)[0] == 0.0
    assert min_dcf(s)[0] == 0.0
    assert (0.0, 0.0) in det_points(s)


def test_crossing_example():
    s = TrialScoreSet([0.8, 0.2], [0.7, 0.1])
    rate, thr = eer(s)
    assert rate == 0.5 == brute_eer([0.8, 0.2], [0.7, 0.1])
    assert thr == 0.7


def test_interpolated_eer():
    # pm-pf goes from -1/2 at 0.3 to +1/2 at 0.5, crossing halfway
    s = TrialScoreSet([0.5, 0.9], [0.3, 0.7])
    rate, thr = eer(s)
    assert rate == pytest.approx(brute_eer([0.5, 0.9], [0.3, 0.7]))
    assert 0.0 <= rate <= 1.0


def test_swapped_labels_example():
    s = TrialScoreSet([0.9, 0.8], [0.1, 0.2])
    assert eer(s.swapped())[0] == 1.0


def test_det_enumeration():
    pts = det_points(TrialScoreSet([0.9, 0.8], [0.1, 0.2]))
    assert pts == [(1.0, 0.0), (0.5, 0.0), (0.0, 0.0), (0.0, 0.5), (0.0, 1.0)]


def test_min_dcf_sentinels_bound():
    # accept-all costs 0.99 / 0.01 = 99; reject-all costs exactly 1
    s = TrialScoreSet([0.1], [0.9])
    value, thr = min_dcf(s)
    assert value == 1.0 and thr == float("inf")


def test_min_dcf_ties_go_to_lower_threshold():
    # with equal priors and costs, thresholds 0.5 and 2.0 both cost 0.5
    s = TrialScoreSet([0.5, 2.0], [0.4, 1.0])
    params = DcfParams(0.5, 1.0, 1.0)
    assert min_dcf(s, params) == (0.5, 0.5)
    assert brute_min_dcf([0.5, 2.0], [0.4, 1.0], params) == (0.5, 0.5)


def test_degenerate_sets():
    with pytest.raises(DegenerateInputError):
        TrialScoreSet([], [0.1])
    with pytest.raises(ConfigError):
        TrialScoreSet([np.inf], [0.1])
    for bad in ({"p_tar": 0.0}, {"p_tar": 1.0}, {"c_miss": 0.0}):
        with pytest.raises(ConfigError):
            DcfParams(**bad)


@given(score_lists, score_lists)
def test_oracle_parity(tar, non):
    s = TrialScoreSet(tar, non)
    assert eer(s)[0] == pytest.approx(brute_eer(tar, non), abs=1e-12)
    assert min_dcf(s) == brute_min_dcf(tar, non)


@given(score_lists, score_lists)
def test_ranges_and_tanh_invariance(tar, non):
    s = TrialScoreSet(tar, non)
    e, d = eer(s)[0], min_dcf(s)[0]
    assert 0.0 <= e <= 1.0 and 0.0 <= d <= 1.0
    w = s.mapped(np.tanh)
    assert eer(w)[0] == e
    assert min_dcf(w)[0] == d


@given(score_lists, score_lists)
def test_swap_complements_eer(tar, non):
    s = TrialScoreSet(tar, non)
    assert eer(s)[0] + eer(s.swapped())[0] == pytest.approx(1.0, abs=1e-12)


@given(score_lists, score_lists)
def test_det_is_a_staircase(tar, non):
    pts = det_points(TrialScoreSet(tar, non))
    pf = [p for p, _ in pts]
    pm = [m for _, m in pts]
    assert pf[0] == 1.0 and pm[-1] == 1.0
    assert all(a >= b for a, b in zip(pf, pf[1:]))
    assert all(a <= b for a, b in zip(pm, pm[1:]))


def test_trial_scoring():
    emb = {
        "a": EmbeddingVector([1.0, 0.0, 0.0]),
        "b": EmbeddingVector([0.0, 1.0, 0.0]),
        "c": EmbeddingVector([1.0, 1.0, 0.0]),
    }
    trials = TrialList((Trial("a", "a", "target"), Trial("a", "b", "nontarget"), Trial("a", "c", "target")))
    rows = trial_scores(trials, emb)
    assert [r[2] for r in rows] == pytest.approx([1.0, 0.0, 1 / np.sqrt(2)], abs=1e-12)
    s = score_trials(trials, emb)
    assert s.target_scores.tolist() == pytest.approx([1.0, 1 / np.sqrt(2)], abs=1e-12)
    with pytest.raises(KeyError, match="zz"):
        trial_scores(TrialList((Trial("a", "zz", "target"),)), emb)


def test_trial_validation():
    with pytest.raises(ConfigError):
        Trial("", "b", "target")
    with pytest.raises(ConfigError):
        Trial("a", "b", "maybe")


def test_file_round_trips(tmp_path):
    trials = TrialList((Trial("a", "b", "target"), Trial("a", "c", "nontarget")))
    write_trials(trials, tmp_path / "t.txt")
    assert read_trials(tmp_path / "t.txt") == trials
    write_scores([("a", "b", 0.25), ("a", "c", -0.125)], tmp_path / "s.txt")
    table = read_scores(tmp_path / "s.txt")
    assert table == {("a", "b"): 0.25, ("a", "c"): -0.125}
    s = scores_for_trials(trials, table)
    assert s.target_scores.tolist() == [0.25] and s.nontarget_scores.tolist() == [-0.125]
    write_det([(1.0, 0.0), (0.5, 0.25)], tmp_path / "det.txt")
    assert (tmp_path / "det.txt").read_text().split() == ["1.0", "0.0", "0.5", "0.25"]


def test_malformed_files(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("a b\n")
    with pytest.raises(FormatError, match=":1:"):
        read_trials(bad)
    bad.write_text("a b target\na b maybe\n")
    with pytest.raises(FormatError, match=":2:"):
        read_trials(bad)
    bad.write_text("a b notanumber\n")
    with pytest.raises(FormatError):
        read_scores(bad)
    with pytest.raises(KeyError):
        scores_for_trials(TrialList((Trial("x", "y", "target"),)), {})
