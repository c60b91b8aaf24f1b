import numpy as np
import pytest
from hypothesis import given, strategies as st

from simtkit import (
    ConfigError,
    CorpusError,
    Decision,
    Distribution,
    PolicyConfig,
    READ,
    SentencePair,
    StreamState,
    Vocabulary,
    WRITE,
    build_vocabulary,
    load_parallel_corpus,
    validate_pair,
    write_parallel_corpus,
)

from conftest import make_vocab


# -- vocabulary -------------------------------------------------------------

def test_build_vocabulary_counts_and_specials():
    vocab = build_vocabulary([["a", "b"], ["a"]])
    assert len(vocab) == 5
    assert vocab.tokens[:3] == ("<bos>", "<eos>", "<unk>")
    assert vocab.freq_rank["a"] == 1
    assert vocab.id_of[vocab.tokens[3]] == 3


def test_build_vocabulary_empty_corpus_rejected():
    with pytest.raises(ConfigError):
        build_vocabulary([])


def test_build_vocabulary_duplicate_specials_rejected():
    with pytest.raises(ConfigError):
        build_vocabulary([["a"]], specials=("<s>", "<s>", "<unk>"))


def test_freq_rank_tie_broken_by_first_occurrence():
    corpus = [["a", "b"] * 10]  # a and b both occur 10 times, a seen first
    vocab = build_vocabulary(corpus)
    # independent recount
    counts = {}
    for sent in corpus:
        for tok in sent:
            counts[tok] = counts.get(tok, 0) + 1
    assert counts["a"] == counts["b"] == 10
    assert vocab.freq_rank["a"] == 1
    assert vocab.freq_rank["b"] == 2


def test_top_ranked_ids_ordering_and_bounds():
    vocab = build_vocabulary([["x"] * 3 + ["y"] * 2 + ["z"]])
    ids = vocab.top_ranked_ids(2)
    assert [vocab.token(i) for i in ids] == ["x", "y"]
    with pytest.raises(ConfigError):
        vocab.top_ranked_ids(99)


def test_vocab_invariants_enforced():
    with pytest.raises(ConfigError):
        Vocabulary(tokens=("a", "b", "c"), bos=0, eos=0, unk=2)
    with pytest.raises(ConfigError):
        Vocabulary(tokens=("a", "b", "c"), bos=0, eos=1, unk=5)
    with pytest.raises(ConfigError):
        Vocabulary(tokens=("a", "b", "c", "d"), bos=0, eos=1, unk=2,
                   freq_rank={"d": 2})  # ranks must start at 1


# -- distributions ----------------------------------------------------------

def test_distribution_accepts_valid_rejects_invalid():
    Distribution([0.5, 0.5])
    Distribution([1.0, 0.0])
    with pytest.raises(ValueError):
        Distribution([0.6, 0.6])
    with pytest.raises(ValueError):
        Distribution([-0.1, 1.1])
    with pytest.raises(ValueError):
        Distribution([0.5, 0.5 - 1e-6])


@given(st.lists(st.floats(min_value=0.001, max_value=10.0), min_size=2, max_size=30))
def test_distribution_normalized_vectors_accepted(raw):
    vec = np.asarray(raw)
    dist = Distribution(vec / vec.sum())
    assert abs(float(dist.probs.sum()) - 1.0) <= 1e-9
    assert not dist.probs.flags.writeable


# -- sentence pairs ---------------------------------------------------------

def test_validate_pair_happy_and_errors():
    vocab = make_vocab()
    validate_pair(SentencePair(source=(5, 1), target=(7, 1)), vocab)
    with pytest.raises(CorpusError):
        validate_pair(SentencePair(source=(5,), target=(7, 1)), vocab)  # no EOS
    with pytest.raises(CorpusError):
        validate_pair(SentencePair(source=(99, 1), target=(7, 1)), vocab)
    with pytest.raises(CorpusError):
        validate_pair(SentencePair(source=(5, 1), target=(7, 1),
                                   alignment=frozenset({(3, 1)})), vocab)
    with pytest.raises(CorpusError):
        validate_pair(SentencePair(source=(1, 5, 1), target=(7, 1)), vocab)


# -- policy config / decisions ----------------------------------------------

def test_policy_config_validation():
    PolicyConfig(lam=-0.5)  # negative lambda is a legal degenerate probe
    with pytest.raises(ConfigError):
        PolicyConfig(initial_prefix=0)
    with pytest.raises(ConfigError):
        PolicyConfig(max_target_len=0)
    with pytest.raises(ConfigError):
        PolicyConfig(r_max=0)


def test_decision_invariants():
    Decision(kind=WRITE, token=4)
    Decision(kind=READ)
    with pytest.raises(ConfigError):
        Decision(kind=WRITE)
    with pytest.raises(ConfigError):
        Decision(kind=READ, token=4)


# -- stream state -----------------------------------------------------------

def test_stream_state_basic_session():
    st_ = StreamState(n_source=4, initial_prefix=2, bos=0)
    assert st_.j == 2 and st_.r_c == 1 and st_.emitted == [0]
    st_.read()
    st_.write(7)
    assert st_.g_record == [3] and st_.r_c == 0
    st_.read()
    with pytest.raises(ConfigError):
        st_.read()  # j already at N


def test_stream_state_clamps_initial_prefix():
    st_ = StreamState(n_source=1, initial_prefix=5, bos=0)
    assert st_.j == 1


@given(st.lists(st.sampled_from(["R", "W"]), max_size=40))
def test_stream_state_monotonicity_under_random_decisions(kinds):
    state = StreamState(n_source=6, initial_prefix=2, bos=0)
    seen_j = [state.j]
    writes = 0
    for kind in kinds:
        if kind == "R":
            if state.j >= state.n_source:
                with pytest.raises(ConfigError):
                    state.read()
                continue
            state.apply(Decision(kind=READ))
        else:
            state.apply(Decision(kind=WRITE, token=3))
            writes += 1
        seen_j.append(state.j)
    assert seen_j == sorted(seen_j)
    assert list(state.g_record) == sorted(state.g_record)
    assert len(state.g_record) == writes
    assert 1 <= state.j <= state.n_source


# -- corpus file I/O ----------------------------------------------------------

def test_corpus_round_trip(tmp_path):
    vocab = make_vocab()
    pairs = [
        SentencePair(source=(3, 4, 1), target=(4, 3, 1),
                     alignment=frozenset({(1, 2), (2, 1), (3, 3)})),
        SentencePair(source=(5, 1), target=(5, 1),
                     alignment=frozenset({(1, 1), (2, 2)})),
    ]
    src, tgt, aln = tmp_path / "s.txt", tmp_path / "t.txt", tmp_path / "a.txt"
    write_parallel_corpus(pairs, vocab, src, tgt, align_path=aln)
    vocab2, loaded = load_parallel_corpus(src, tgt, vocab=vocab, align_path=aln)
    assert loaded == pairs
    # EOS never appears in the files themselves
    assert "<eos>" not in src.read_text() + tgt.read_text()


def test_corpus_load_errors(tmp_path):
    (tmp_path / "s.txt").write_text("a b\nc\n")
    (tmp_path / "t.txt").write_text("a b\n")
    with pytest.raises(CorpusError):
        load_parallel_corpus(tmp_path / "s.txt", tmp_path / "t.txt")


def test_corpus_oov_maps_to_unk(tmp_path):
    vocab = make_vocab()
    (tmp_path / "s.txt").write_text("w0 mystery\n")
    (tmp_path / "t.txt").write_text("w0 w1\n")
    _, pairs = load_parallel_corpus(tmp_path / "s.txt", tmp_path / "t.txt", vocab=vocab)
    assert pairs[0].source == (3, vocab.unk, 1)
