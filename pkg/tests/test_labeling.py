import pytest
from hypothesis import given, strategies as st

from convoarg.features import FEATURE_NAMES, MINIMAL, UserFeatureVector
from convoarg.labeling import (Dataset, EmptyCorpus, InsufficientClass, LabeledExample,
                               UserApproval, balance_dataset, cumulative_approval,
                               flag_top_users, label_examples, max_balanced_size,
                               read_labeled_csv)
from convoarg.pipeline import labeled_csv
from helpers import make_conversation


def vec(user, conv="c", en=0):
    values = dict.fromkeys(FEATURE_NAMES, 0) | {"PC": 1, "En": en}
    return UserFeatureVector(conv, user, **values)


def examples(n_pos, n_neg):
    out = [LabeledExample("c", f"p{i}", vec(f"p{i}", en=i), True) for i in range(n_pos)]
    out += [LabeledExample("c", f"n{i}", vec(f"n{i}", en=100 + i), False) for i in range(n_neg)]
    return out


def test_cumulative_approval():
    c = make_conversation([("u", None, "", 5), ("v", None, "", 1), ("u", None, "", -2),
                           ("u", None, "", 10), ("w", None, "", 0)])
    a = cumulative_approval(c.posts)
    assert a["u"] == UserApproval("u", 13)
    assert a["v"].cumulative_approval == 1 and a["w"].cumulative_approval == 0


def approvals(values):
    return {u: UserApproval(u, s) for u, s in values.items()}


def test_flag_counts():
    assert len(flag_top_users(approvals({f"u{i:03d}": i for i in range(100)}), 0.05)) == 5
    assert flag_top_users(approvals({f"u{i:02d}": 0 for i in range(10)}), 0.05) == set()
    tied = approvals({f"u{i:02d}": 7 for i in reversed(range(40))})
    assert flag_top_users(tied, 0.05) == {"u00", "u01"}
    with pytest.raises(EmptyCorpus):
        flag_top_users({}, 0.05)
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            flag_top_users(tied, bad)


@given(st.dictionaries(st.text("abcdef", min_size=1, max_size=4), st.integers(-20, 20),
                       min_size=1, max_size=60),
       st.floats(0.01, 0.99), st.randoms(use_true_random=False))
def test_flag_properties(values, fraction, rnd):
    a = approvals(values)
    top = flag_top_users(a, fraction)
    n = len(a)
    assert len(top) / n <= fraction < (len(top) + 1) / n
    items = list(a.items())
    rnd.shuffle(items)
    assert flag_top_users(dict(items), fraction) == top
    assert flag_top_users({u: a[u] for u in a}, fraction) == top
    if top:
        worst_top = min(a[u].cumulative_approval for u in top)
        assert all(a[u].cumulative_approval <= worst_top for u in a if u not in top)


def test_label_examples():
    labeled = label_examples([vec("x"), vec("y")], {"y"})
    assert [e.is_top for e in labeled] == [False, True]


def test_balance():
    ex = examples(2, 2)
    assert sorted(e.user_id for e in balance_dataset(ex, 4, 0).examples) == ["n0", "n1", "p0", "p1"]
    with pytest.raises(InsufficientClass):
        balance_dataset(examples(3, 20), 10, 0)
    with pytest.raises(ValueError):
        balance_dataset(ex, 3, 0)
    big = examples(40, 300)
    d = balance_dataset(big, 60, 42, MINIMAL)
    assert d.class_counts() == (30, 30)
    again = balance_dataset(big, 60, 42, MINIMAL)
    assert [e.user_id for e in d.examples] == [e.user_id for e in again.examples]
    assert d.X.shape == (60, 4)
    assert max_balanced_size(big) == 80


def test_dataset_selectors_share_matrix():
    d = Dataset(examples(3, 3))
    assert d.X.shape == (6, 19)
    m = d.with_selector("minimal")
    assert m.X.shape == (6, 4) and list(m.y) == list(d.y)
    assert Dataset([]).X.shape == (0, 19)


def test_labeled_csv_roundtrip(tmp_path):
    ex = examples(3, 4)
    path = tmp_path / "l.csv"
    path.write_text(labeled_csv(ex))
    back = read_labeled_csv(path)
    assert [(e.user_id, e.is_top, e.features) for e in back.examples] == \
        [(e.user_id, e.is_top, e.features) for e in ex]
