import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from evrep import (
    Event,
    EventStream,
    IllegalPolarityError,
    OutOfBoundsError,
    SensorGeometry,
    normalize_stream,
    validate_event,
    validate_stream,
)

G64 = SensorGeometry(64, 64)


class TestSensorGeometry:
    def test_valid(self):
        g = SensorGeometry(1280, 720)
        assert g.num_pixels == 921_600
        assert g.shape == (720, 1280)

    @pytest.mark.parametrize("w,h", [(0, 64), (64, 0), (-1, 64)])
    def test_rejects_degenerate(self, w, h):
        with pytest.raises(ValueError):
            SensorGeometry(w, h)


class TestValidateEvent:
    def test_corner_in_bounds(self):
        e = Event(t=5, x=0, y=0, p=1)
        assert validate_event(e, G64) is e

    def test_width_is_exclusive(self):
        with pytest.raises(OutOfBoundsError):
            validate_event(Event(t=5, x=64, y=0, p=1), G64)

    def test_height_is_exclusive(self):
        with pytest.raises(OutOfBoundsError):
            validate_event(Event(t=5, x=0, y=64, p=1), G64)

    def test_zero_polarity_forbidden(self):
        with pytest.raises(IllegalPolarityError):
            validate_event(Event(t=5, x=1, y=1, p=0), G64)

    def test_negative_coordinate(self):
        with pytest.raises(OutOfBoundsError):
            validate_event(Event(t=5, x=-1, y=0, p=1), G64)

    @pytest.mark.parametrize("p", [2, -2, 3])
    def test_other_polarities_forbidden(self, p):
        with pytest.raises(IllegalPolarityError):
            validate_event(Event(t=5, x=1, y=1, p=p), G64)


class TestEventStream:
    def test_basics(self):
        s = EventStream([1, 2], [3, 4], [5, 6], [1, -1], G64)
        assert len(s) == 2
        assert s[0] == Event(1, 3, 5, 1)
        assert s.events() == [Event(1, 3, 5, 1), Event(2, 4, 6, -1)]
        assert s[0:1] == EventStream([1], [3], [5], [1], G64)

    def test_arrays_read_only(self):
        s = EventStream([1], [2], [3], [1], G64)
        with pytest.raises(ValueError):
            s.t[0] = 7

    def test_column_length_mismatch(self):
        with pytest.raises(ValueError):
            EventStream([1, 2], [3], [5], [1], G64)

    def test_no_silent_wrap(self):
        # values that would alias into range after a uint16/int8 cast
        with pytest.raises(ValueError):
            EventStream([1], [70000], [0], [1], G64)
        with pytest.raises(ValueError):
            EventStream([1], [0], [0], [255], G64)
        with pytest.raises(ValueError):
            EventStream([-1], [0], [0], [1], G64)

    def test_from_events_round_trip(self):
        events = [Event(1, 2, 3, 1), Event(4, 5, 6, -1)]
        s = EventStream.from_events(events, G64)
        assert s.events() == events


class TestValidateStream:
    def test_accepts_valid(self):
        s = EventStream([1, 2], [0, 63], [0, 63], [1, -1], G64)
        assert validate_stream(s) is s

    def test_rejects_out_of_bounds(self):
        s = EventStream([1], [64], [0], [1], G64)
        with pytest.raises(OutOfBoundsError):
            validate_stream(s)

    def test_rejects_zero_polarity(self):
        s = EventStream([1], [0], [0], [0], G64)
        with pytest.raises(IllegalPolarityError):
            validate_stream(s)


class TestNormalizeStream:
    def test_sorts_and_counts(self):
        s = EventStream([3, 1, 2], [0, 1, 2], [0, 0, 0], [1, 1, 1], G64)
        out, reordered = normalize_stream(s)
        assert out.t.tolist() == [1, 2, 3]
        assert out.x.tolist() == [1, 2, 0]
        assert reordered == 2

    def test_sorted_input_is_identity(self):
        s = EventStream([1, 2, 3], [0, 1, 2], [0, 0, 0], [1, -1, 1], G64)
        out, reordered = normalize_stream(s)
        assert reordered == 0
        assert out == s

    def test_equal_timestamps_keep_order(self):
        s = EventStream([5, 5, 5], [2, 0, 1], [0, 0, 0], [1, -1, 1], G64)
        out, reordered = normalize_stream(s)
        assert reordered == 0
        assert out.x.tolist() == [2, 0, 1]

    def test_equal_timestamps_stable_after_sort(self):
        s = EventStream([9, 5, 5], [7, 2, 3], [0, 0, 0], [1, 1, 1], G64)
        out, reordered = normalize_stream(s)
        assert out.t.tolist() == [5, 5, 9]
        assert out.x.tolist() == [2, 3, 7]
        assert reordered == 2

    def test_empty(self):
        out, reordered = normalize_stream(EventStream.empty(G64))
        assert len(out) == 0 and reordered == 0


events_lists = st.lists(
    st.tuples(st.integers(0, 1000), st.integers(0, 63), st.integers(0, 63),
              st.sampled_from([-1, 1])),
    max_size=200,
)


@given(events_lists)
def test_normalize_idempotent(rows):
    s = EventStream([r[0] for r in rows], [r[1] for r in rows],
                    [r[2] for r in rows], [r[3] for r in rows], G64)
    once, _ = normalize_stream(s)
    twice, reordered = normalize_stream(once)
    assert reordered == 0
    assert twice == once


@given(events_lists)
def test_normalize_is_permutation(rows):
    s = EventStream([r[0] for r in rows], [r[1] for r in rows],
                    [r[2] for r in rows], [r[3] for r in rows], G64)
    out, _ = normalize_stream(s)
    before = sorted((e.t, e.x, e.y, e.p) for e in s)
    after = sorted((e.t, e.x, e.y, e.p) for e in out)
    assert before == after
    assert np.all(np.diff(out.t) >= 0)
