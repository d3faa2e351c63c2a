import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptc.entropy import (BYPASS, FLUSH_BYTES, NUM_CONTEXTS, PROB_INIT, PROB_MAX, PROB_MIN,
                         RangeDecoder, RangeEncoder, TruncatedStream, encode_records,
                         init_contexts, update_prob)


def random_records(n, seed=0, bypass_frac=0.3):
    rng = np.random.default_rng(seed)
    ctx = rng.integers(0, NUM_CONTEXTS, n)
    ctx[rng.random(n) < bypass_frac] = BYPASS
    # skewed bins so the contexts actually adapt
    bins = (rng.random(n) < np.where(ctx % 2 == 0, 0.85, 0.2)).astype(int)
    return list(zip(bins.tolist(), ctx.tolist()))


def decode_all(payload, ctxs):
    dec = RangeDecoder(payload)
    return [dec.decode_bin(c) for c in ctxs], dec


def test_initial_table():
    assert init_contexts() == [32768] * 15


def test_single_update_values():
    assert update_prob(PROB_INIT, 1) == 33792
    assert update_prob(PROB_INIT, 0) == 31744


def test_update_stays_clamped():
    p = PROB_INIT
    for _ in range(500):
        p = update_prob(p, 1)
        assert PROB_MIN <= p <= PROB_MAX
    assert p == PROB_MAX
    for _ in range(1000):
        p = update_prob(p, 0)
    assert p == PROB_MIN


def test_encoder_context_after_one_bin():
    enc = RangeEncoder()
    enc.encode_bin(1, 0)
    assert enc.contexts[0] == 33792
    enc = RangeEncoder()
    enc.encode_bin(0, 0)
    assert enc.contexts[0] == 31744


def test_small_round_trip():
    recs = [(1, 0), (0, 0), (1, BYPASS)]
    out, _ = decode_all(encode_records(recs), [c for _, c in recs])
    assert out == [1, 0, 1]


def test_empty_stream():
    payload = encode_records([])
    assert len(payload) == FLUSH_BYTES
    dec = RangeDecoder(payload)
    assert dec.exhausted


def test_bypass_cost():
    enc = RangeEncoder()
    for b in [1, 0, 1, 1, 0, 0, 1, 0]:
        enc.encode_bin(b, BYPASS)
    assert len(enc.flush()) <= FLUSH_BYTES + 1


def test_bypass_leaves_contexts_alone():
    enc = RangeEncoder()
    for b in [1, 1, 0, 1]:
        enc.encode_bin(b, BYPASS)
    assert enc.contexts == init_contexts()


def test_deterministic():
    recs = random_records(5000, seed=3)
    assert encode_records(recs) == encode_records(recs)


def test_adaptivity_changes_length():
    skewed = [(1, 2)] * 4000
    mixed = random_records(4000, seed=9, bypass_frac=0.0)
    assert len(encode_records(skewed)) < len(encode_records(mixed))


def test_truncation_raises():
    recs = random_records(2000, seed=1)
    payload = encode_records(recs)
    with pytest.raises(TruncatedStream):
        decode_all(payload[:-1], [c for _, c in recs])


def test_whole_payload_consumed():
    recs = random_records(3000, seed=2)
    payload = encode_records(recs)
    out, dec = decode_all(payload, [c for _, c in recs])
    assert out == [b for b, _ in recs]
    assert dec.exhausted


def test_tables_match():
    recs = random_records(20000, seed=4)
    enc = RangeEncoder()
    enc.encode_bins(recs)
    payload = enc.flush()
    _, dec = decode_all(payload, [c for _, c in recs])
    assert dec.contexts == enc.contexts


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(-1, NUM_CONTEXTS - 1)), max_size=400))
def test_round_trip_property(recs):
    payload = encode_records(recs)
    out, dec = decode_all(payload, [c for _, c in recs])
    assert out == [b for b, _ in recs]
    assert dec.exhausted
