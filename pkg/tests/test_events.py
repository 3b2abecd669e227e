"""Event stream IO and refractory filtering."""

import numpy as np
import pytest

from evflow.events import (
    EVENT_DTYPE,
    EventFormatError,
    RefractoryFilter,
    TimestampOrderError,
    make_stream,
    read_events,
    read_events_csv,
    read_events_evb,
    write_events_csv,
    write_events_evb,
)


def _random_stream(rng, n=500, t_max=5_000_000):
    t = np.sort(rng.integers(0, t_max, n))
    return make_stream(t, rng.integers(0, 128, n), rng.integers(0, 128, n),
                       rng.choice([-1, 1], n))


def test_csv_roundtrip_exact(tmp_path):
    rng = np.random.default_rng(7)
    ev = _random_stream(rng)
    path = tmp_path / "ev.csv"
    write_events_csv(path, ev)
    back = read_events_csv(path, width=128, height=128)
    assert back.dtype == EVENT_DTYPE
    assert np.array_equal(back, ev)


def test_evb_roundtrip_bitwise(tmp_path):
    rng = np.random.default_rng(11)
    ev = _random_stream(rng, t_max=10**12)  # large timestamps survive
    path = tmp_path / "ev.evb"
    write_events_evb(path, ev)
    assert path.stat().st_size == 13 * ev.shape[0]
    back = read_events_evb(path, width=128, height=128)
    assert np.array_equal(back, ev)
    # second write is byte-identical
    path2 = tmp_path / "ev2.evb"
    write_events_evb(path2, back)
    assert path.read_bytes() == path2.read_bytes()


def test_read_events_dispatches_on_extension(tmp_path):
    ev = make_stream([10, 20], [1, 2], [3, 4], [1, -1])
    write_events_evb(tmp_path / "a.evb", ev)
    write_events_csv(tmp_path / "a.csv", ev)
    assert np.array_equal(read_events(tmp_path / "a.evb"), ev)
    assert np.array_equal(read_events(tmp_path / "a.csv"), ev)


def test_empty_and_header_only_csv(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("")
    assert read_events_csv(p).shape[0] == 0
    p.write_text("t_us,x,y,p\n")
    assert read_events_csv(p).shape[0] == 0


def test_csv_bad_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("time,x,y,pol\n1,2,3,1\n")
    with pytest.raises(EventFormatError, match="line 1"):
        read_events_csv(p)


def test_csv_bad_field_count_reports_line(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("t_us,x,y,p\n1,2,3,1\n4,5,6\n")
    with pytest.raises(EventFormatError, match="line 3"):
        read_events_csv(p)


def test_csv_non_integer_field(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("t_us,x,y,p\n1,2,x,1\n")
    with pytest.raises(EventFormatError, match="line 2"):
        read_events_csv(p)


def test_timestamp_regression_rejected(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("t_us,x,y,p\n100,1,1,1\n50,1,1,1\n")
    with pytest.raises(TimestampOrderError):
        read_events_csv(p)


def test_bad_polarity_rejected(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("t_us,x,y,p\n100,1,1,0\n")
    with pytest.raises(EventFormatError, match="polarity"):
        read_events_csv(p)


def test_out_of_range_coordinate_rejected(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("t_us,x,y,p\n100,128,1,1\n")
    with pytest.raises(EventFormatError, match="width"):
        read_events_csv(p, width=128, height=128)
    p.write_text("t_us,x,y,p\n100,1,200,1\n")
    with pytest.raises(EventFormatError, match="height"):
        read_events_csv(p, width=128, height=128)


def test_truncated_evb_rejected(tmp_path):
    ev = make_stream([10, 20], [1, 2], [3, 4], [1, -1])
    p = tmp_path / "a.evb"
    write_events_evb(p, ev)
    p.write_bytes(p.read_bytes()[:-1])
    with pytest.raises(EventFormatError, match="truncated"):
        read_events_evb(p)


def test_refractory_boundary_is_strict():
    # accepted iff t - last > dt_r: a gap of exactly dt_r is suppressed
    f = RefractoryFilter(dt_r_us=100_000)
    assert f.accept(0, 5, 5)
    assert not f.accept(100_000, 5, 5)
    assert f.accept(100_001, 5, 5)
    assert f.accept(200_002, 5, 5)


def test_refractory_suppressed_events_do_not_extend_dead_time():
    f = RefractoryFilter(dt_r_us=100_000)
    assert f.accept(0, 3, 3)
    assert not f.accept(50_000, 3, 3)
    # recovery counts from the last ACCEPTED event (t=0), not t=50000
    assert f.accept(100_001, 3, 3)


def test_refractory_pixels_independent():
    f = RefractoryFilter(dt_r_us=100_000)
    assert f.accept(0, 1, 1)
    assert f.accept(1, 2, 1)
    assert f.accept(2, 1, 2)


def test_filter_stream_matches_scalar_path():
    rng = np.random.default_rng(3)
    n = 2000
    t = np.sort(rng.integers(0, 400_000, n))
    ev = make_stream(t, rng.integers(0, 8, n), rng.integers(0, 8, n),
                     rng.choice([-1, 1], n))
    kept = RefractoryFilter(width=8, height=8).filter_stream(ev)
    ref = RefractoryFilter(width=8, height=8)
    expect = np.array([ref.accept(int(e["t"]), int(e["x"]), int(e["y"]))
                       for e in ev])
    assert np.array_equal(kept, ev[expect])
