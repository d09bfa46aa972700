import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groundcut.errors import UsageError
from groundcut.labels import LabelState, TruthClass
from groundcut.metrics import aggregate, score_scan, write_report

G, O = LabelState.GROUND, LabelState.OBSTACLE
TG, TO, TK = TruthClass.GROUND, TruthClass.ORDINARY, TruthClass.KEY


def test_perfect_prediction():
    truth = np.array([TG, TG, TO, TK])
    m = score_scan([G, G, O, O], truth)
    assert (m.iou_g, m.recall_o) == (1.0, 1.0)


def test_everything_obstacle():
    m = score_scan([O, O, O], [TG, TK, TO])
    assert m.iou_g == 0.0
    assert m.recall_o == 1.0


def test_counts_from_the_worked_example():
    # 50 true ground hits, 25 obstacles called ground, 25 ground called obstacle
    pred = np.array([G] * 50 + [G] * 25 + [O] * 25)
    truth = np.array([TG] * 50 + [TK] * 25 + [TG] * 25)
    m = score_scan(pred, truth)
    assert (m.tp_g, m.fp_g, m.fn_g) == (50, 25, 25)
    assert m.iou_g == 0.5
    assert m.recall_o == 0.0


def test_ordinary_obstacle_called_ground_is_a_false_positive_but_not_a_miss():
    m = score_scan([G, G], [TG, TO])
    assert m.fp_g == 1 and m.iou_g == 0.5
    assert m.recall_o is None


def test_high_confidence_states_count_as_their_class():
    m = score_scan([LabelState.HC_GROUND, LabelState.HC_OBSTACLE], [TG, TK])
    assert (m.iou_g, m.recall_o) == (1.0, 1.0)


def test_undefined_metrics_are_none():
    m = score_scan([O, O], [TO, TO])
    assert m.iou_g is None and m.recall_o is None
    m = score_scan([], [])
    assert m.iou_g is None


def test_shape_mismatch():
    with pytest.raises(UsageError):
        score_scan([G], [TG, TG])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.sampled_from([G, O]), st.sampled_from([TG, TO, TK])), min_size=1, max_size=60), st.randoms())
def test_permutation_invariance(pairs, random):
    pred, truth = map(np.array, zip(*pairs))
    order = list(range(len(pairs)))
    random.shuffle(order)
    assert score_scan(pred, truth) == score_scan(pred[order], truth[order])


def test_aggregate():
    single = score_scan([G, O], [TG, TK], runtime_ms=12.0)
    s = aggregate([single])
    assert s.iou_g.mean == s.iou_g.min == s.iou_g.max == 1.0
    assert s.runtime_ms.mean == 12.0
    a = score_scan([G] * 9 + [O], [TG] * 10)
    b = score_scan([G] * 7 + [O] * 3, [TG] * 10)
    s = aggregate([a, b])
    assert s.iou_g.mean == pytest.approx(0.8)
    assert (s.iou_g.min, s.iou_g.max) == (0.7, 0.9)
    assert s.recall_o.count == 0 and s.recall_o.mean is None
    with pytest.raises(UsageError):
        aggregate([])


def test_report_layout(tmp_path):
    path = tmp_path / "r.csv"
    rows = [("a", score_scan([G, O], [TG, TK], 5.0)), ("b", score_scan([O], [TO], 7.0))]
    write_report(path, rows, header_comment="reference line")
    text = path.read_text().splitlines()
    assert text[0] == "# reference line"
    table = list(csv.reader(text[1:]))
    assert table[0] == ["scan_id", "iou_g", "recall_o", "runtime_ms"]
    assert table[1] == ["a", "1.000000", "1.000000", "5.000"]
    assert table[2] == ["b", "", "", "7.000"]
    assert [r[0] for r in table[3:]] == ["mean", "min", "max"]
    assert table[3][3] == "6.000"
