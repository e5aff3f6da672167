import numpy as np
import pytest

from ecgbo import metrics as M
from ecgbo.errors import DataError


def test_hand_tally():
    cm = M.confusion([0, 0, 1], [0, 1, 1], 2)
    np.testing.assert_array_equal(cm.counts, [[1, 1], [0, 1]])
    with pytest.raises(DataError):
        M.confusion([0, 2], [0, 1], 2)


def test_perfect_and_row_sums():
    y = np.array([0, 1, 2, 2, 4, 3])
    cm = M.confusion(y, y, 5)
    np.testing.assert_array_equal(cm.counts, np.diag(np.bincount(y, minlength=5)))
    s = M.precision_recall_f1(cm, 2)
    assert (s.precision, s.recall, s.f1) == (100.0, 100.0, 100.0)
    np.testing.assert_array_equal(M.normalized_confusion(cm), np.eye(5))


def test_tp3_fp1_fn1():
    # class 0: three hits, one miss (FN), one false alarm (FP)
    cm = M.ConfusionMatrix(np.array([[3, 1], [1, 0]]), ("a", "b"))
    s = M.precision_recall_f1(cm, 0)
    assert (s.precision, s.recall, s.f1) == (75.0, 75.0, 75.0)


def test_zero_denominator_flag():
    cm = M.ConfusionMatrix(np.array([[2, 0], [0, 0]]), ("a", "b"))
    s = M.precision_recall_f1(cm, 1)
    assert s == (0.0, 0.0, 0.0, True)
    assert not M.precision_recall_f1(cm, 0).undefined


def test_normalized_rows():
    cm = M.ConfusionMatrix(np.array([[8, 2], [0, 0]]), ("a", "b"))
    np.testing.assert_allclose(M.normalized_confusion(cm), [[0.8, 0.2], [0.0, 0.0]])


def test_f1_identity_and_accuracy_random():
    rng = np.random.default_rng(0)
    for _ in range(200):
        k = int(rng.integers(2, 6))
        yt, yp = rng.integers(0, k, 60), rng.integers(0, k, 60)
        cm = M.confusion(yt, yp, k)
        assert cm.accuracy() == pytest.approx(np.mean(yt == yp), abs=1e-15)
        for c in range(k):
            s = M.precision_recall_f1(cm, c)
            assert all(0 <= v <= 100 for v in s[:3])
            if s.precision + s.recall > 0:
                assert s.f1 == pytest.approx(M.f1_from_pr(s.precision, s.recall), abs=1e-9)


def test_paper_table_triple():
    assert M.f1_from_pr(99.95, 99.23) == pytest.approx(99.58, abs=0.01)


def test_csv_outputs():
    cm = M.confusion([0, 1, 2, 3, 4], [0, 1, 2, 3, 3], 5, "NLRAV")
    text = M.metrics_csv(cm).splitlines()
    assert text[0] == "class,precision,recall,f1"
    assert [line.split(",")[0] for line in text[1:6]] == list("NLRAV")
    assert M.read_matrix_csv(M.matrix_csv(cm)).counts.tolist() == cm.counts.tolist()
