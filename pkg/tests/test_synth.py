import numpy as np
import pytest

from convoarg.ingest import dump_corpus, validate_thread
from convoarg.labeling import cumulative_approval
from convoarg.synth import InvalidConfig, SynthConfig, generate

SMALL = dict(n_conversations=6, posts_per_conversation=(40, 80), n_users=300)


def test_same_seed_same_bytes():
    a = generate(SynthConfig(**SMALL, seed=3))
    b = generate(SynthConfig(**SMALL, seed=3))
    assert dump_corpus(a.conversations) == dump_corpus(b.conversations)
    assert a.truth_json() == b.truth_json()
    c = generate(SynthConfig(**SMALL, seed=4))
    assert dump_corpus(c.conversations) != dump_corpus(a.conversations)


def test_ground_truth_size():
    corpus = generate(SynthConfig(n_conversations=1, n_users=2000, top_fraction=0.05))
    assert len(corpus.ground_truth_top) == 100


def test_conversations_are_valid():
    corpus = generate(SynthConfig(**SMALL, seed=9))
    for c in corpus.conversations:
        assert validate_thread(c) == []
        assert all(p.score >= SynthConfig().score_min for p in c.posts)
        lo, hi = SMALL["posts_per_conversation"]
        assert lo <= len(c) <= hi


def test_bad_configs():
    for bad in (dict(top_fraction=0.0), dict(top_fraction=1.0), dict(reply_probability=1.5),
                dict(posts_per_conversation=(10, 5)), dict(n_conversations=0)):
        with pytest.raises(InvalidConfig):
            SynthConfig(**bad)
    with pytest.raises(InvalidConfig):
        SynthConfig.from_dict({"not_a_field": 1})
    cfg = SynthConfig(**SMALL)
    assert SynthConfig.from_dict(cfg.to_dict()) == cfg


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(1, 11))
def test_approval_shape(seed):
    corpus = generate(SynthConfig(seed=seed))
    approval = {u: a.cumulative_approval for u, a in cumulative_approval(corpus.posts()).items()}
    top = [v for u, v in approval.items() if u in corpus.ground_truth_top]
    rest = [v for u, v in approval.items() if u not in corpus.ground_truth_top]
    assert np.mean(top) > np.mean(rest)
    assert np.mean(np.array(list(approval.values())) < 0) < 0.25
