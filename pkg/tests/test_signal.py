import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from abductive_ecg.signal import (Annotation, SignalFormatError, SignalRecord, canonical,
                                  read_annotations, read_signal_csv, slice_ms,
                                  write_annotations, write_signal_csv)


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestReadSignal:
    def test_one_second(self, tmp_path):
        p = write(tmp_path, "s.csv", "fs=250\n" + "0\n" * 250)
        rec = read_signal_csv(p)
        assert rec.fs == 250 and len(rec) == 250 and rec.duration_ms == 1000.0
        assert rec.gain == 200.0

    def test_bad_row_cites_line(self, tmp_path):
        p = write(tmp_path, "s.csv", "fs=250\n1\n2\n3\n4\n5\nabc\n7\n")
        with pytest.raises(SignalFormatError, match=":7:"):
            read_signal_csv(p)

    def test_missing_header(self, tmp_path):
        with pytest.raises(SignalFormatError, match="fs="):
            read_signal_csv(write(tmp_path, "s.csv", "1\n2\n"))

    def test_empty(self, tmp_path):
        with pytest.raises(SignalFormatError):
            read_signal_csv(write(tmp_path, "s.csv", ""))

    def test_no_samples(self, tmp_path):
        with pytest.raises(SignalFormatError):
            read_signal_csv(write(tmp_path, "s.csv", "fs=250\n"))

    def test_gain_and_channel(self, tmp_path):
        p = write(tmp_path, "s.csv", "fs=360\ngain=100\n1,10\n2,20\n")
        rec = read_signal_csv(p, channel=1)
        assert rec.gain == 100 and list(rec.samples) == [10, 20]
        with pytest.raises(SignalFormatError, match="channel"):
            read_signal_csv(p, channel=2)

    def test_mitbih_geometry(self, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("fs=360\n" + "0\n" * 650000)
        assert read_signal_csv(p).duration_ms / 1000 == pytest.approx(1805.6, abs=0.05)

    def test_round_trip(self, tmp_path):
        rec = SignalRecord(250, np.array([1, -2, 3]), 150)
        write_signal_csv(rec, tmp_path / "s.csv")
        back = read_signal_csv(tmp_path / "s.csv")
        assert back.fs == 250 and back.gain == 150 and list(back.samples) == [1, -2, 3]

    def test_samples_read_only(self):
        rec = SignalRecord(250, np.zeros(3, dtype=np.int64))
        with pytest.raises(ValueError):
            rec.samples[0] = 1

    def test_bad_rate(self):
        with pytest.raises(ValueError):
            SignalRecord(0, np.zeros(3))


class TestSlice:
    rec250 = SignalRecord(250, np.arange(1000))
    rec360 = SignalRecord(360, np.arange(1000))

    def test_second(self):
        assert len(slice_ms(self.rec250, 0, 1000)) == 250
        assert len(slice_ms(self.rec360, 0, 1000)) == 360

    def test_empty(self):
        assert len(slice_ms(self.rec250, 500, 500)) == 0

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            slice_ms(self.rec250, 0, 5000)
        with pytest.raises(ValueError):
            slice_ms(self.rec250, 10, 5)


@settings(max_examples=200)
@given(st.sampled_from([128, 250, 360, 500, 1000]), st.integers(0, 10**8))
def test_time_index_round_trip(fs, t):
    rec = SignalRecord(fs, np.zeros(1))
    assert abs(rec.time(rec.index(t)) - t) < 1000 / fs


class TestAnnotations:
    def test_two(self, tmp_path):
        anns = read_annotations(write(tmp_path, "a.csv", "0,N\n800,N"))
        assert anns == [Annotation(0, "N"), Annotation(800, "N")]

    def test_header_and_default_label(self, tmp_path):
        anns = read_annotations(write(tmp_path, "a.csv", "time_ms,label\n5\n7,V\n"))
        assert anns == [Annotation(5, "N"), Annotation(7, "V")]

    def test_negative(self, tmp_path):
        with pytest.raises(SignalFormatError, match="negative"):
            read_annotations(write(tmp_path, "a.csv", "time_ms,label\n-5,N\n"))

    def test_bad_time_line_number(self, tmp_path):
        with pytest.raises(SignalFormatError, match=":2:"):
            read_annotations(write(tmp_path, "a.csv", "1,N\nx,N\n"))

    def test_unsorted_warns(self, tmp_path, caplog):
        with caplog.at_level(logging.WARNING):
            anns = read_annotations(write(tmp_path, "a.csv", "800,N\n0,N\n"))
        assert [a.time for a in anns] == [0, 800]
        assert "not sorted" in caplog.text

    def test_dedup_on_write(self, tmp_path):
        write_annotations([Annotation(800, "N"), Annotation(800, "N")], tmp_path / "a.csv")
        assert (tmp_path / "a.csv").read_text() == "time_ms,label\n800,N\n"


@settings(max_examples=100)
@given(st.lists(st.tuples(st.integers(0, 10**7), st.sampled_from("NVA"))))
def test_annotation_round_trip(tmp_path_factory, rows):
    d = tmp_path_factory.mktemp("ann")
    write_annotations(rows, d / "a.csv")
    first = (d / "a.csv").read_bytes()
    back = read_annotations(d / "a.csv")
    assert back == canonical(rows)
    write_annotations(back, d / "b.csv")
    assert (d / "b.csv").read_bytes() == first
