import pytest

from gv95sim.rng import stream_id, substream


def test_streams_are_reproducible_and_independent():
    a = substream(7, "drift").random(5)
    assert (a == substream(7, "drift").random(5)).all()
    assert not (a == substream(7, "pd-noise").random(5)).any()
    assert not (a == substream(8, "drift").random(5)).any()


def test_stream_id_is_stable():
    assert stream_id("drift") == stream_id("drift")
    assert 0 <= stream_id("x") < 2**64


def test_seed_must_be_u64():
    with pytest.raises(ValueError):
        substream(-1, "a")
    with pytest.raises(ValueError):
        substream(2**64, "a")
