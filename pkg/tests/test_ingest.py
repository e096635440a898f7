import datetime
import io

import numpy as np
import pytest

from gloss.ingest import ZoneIndex, dataset_stats, ingest

EPOCH = datetime.date(2018, 1, 1)


def csv_stream(rows, header="timestamp,zone_id"):
    return io.StringIO(header + "\n" + "\n".join(rows) + ("\n" if rows else ""))


def test_empty_stream_gives_zero_tensor():
    zones = ZoneIndex(["a", "b"])
    result = ingest(csv_stream([]), zones, EPOCH, weeks=4)
    assert result.tensor.shape == (24, 7, 4, 2)
    assert not result.tensor.any()
    assert result.omega.all()
    assert result.report.accepted == 0


def test_single_record_at_epoch():
    zones = ZoneIndex(["z9"])
    result = ingest(csv_stream(["2018-01-01 00:30:00,z9"]), zones, EPOCH, weeks=4)
    assert result.tensor[0, 0, 0, 0] == 1.0
    assert result.tensor.sum() == 1.0


def test_hand_counted_fixture():
    rows = [
        "2018-01-01 08:15:00,a",   # week 0, day 0 (Mon), hour 8
        "2018-01-01 08:45:00,a",   # same cell
        "2018-01-01 09:05:00,a",
        "2018-01-02 08:10:00,b",   # day 1
        "2018-01-08 08:59:00,a",   # week 1, day 0
        "2018-01-14 23:00:00,b",   # week 1, day 6
        "2018-02-01 12:00:00,a",   # week 4, day 3
        "2018-01-03 00:00:00,b",
        "2018-01-03 00:59:59,b",
        "2018-01-05 17:30:00,a",
    ]
    zones = ZoneIndex(["a", "b"])
    result = ingest(csv_stream(rows), zones, EPOCH, weeks=6)
    t = result.tensor
    assert t.sum() == 10 == result.report.accepted
    assert t[8, 0, 0, 0] == 2.0
    assert t[9, 0, 0, 0] == 1.0
    assert t[8, 1, 0, 1] == 1.0
    assert t[8, 0, 1, 0] == 1.0
    assert t[23, 6, 1, 1] == 1.0
    assert t[12, 3, 4, 0] == 1.0
    assert t[0, 2, 0, 1] == 2.0
    assert t[17, 4, 0, 0] == 1.0
    # per-zone marginals
    assert t[..., 0].sum() == 6.0 and t[..., 1].sum() == 4.0


def test_out_of_range_and_unknown_zone_counted():
    rows = [
        "2017-12-31 10:00:00,a",  # before epoch
        "2018-02-10 10:00:00,a",  # week 5 >= weeks=4
        "2018-01-01 10:00:00,mystery",
        "2018-01-01 10:00:00,a",
    ]
    result = ingest(csv_stream(rows), ZoneIndex(["a"]), EPOCH, weeks=4)
    assert result.report.accepted == 1
    assert result.report.skipped_out_of_range == 2
    assert result.report.skipped_unknown_zone == 1


def test_bad_row_error_reports_line_number():
    rows = ["2018-01-01 10:00:00,a", "not-a-timestamp,a"]
    with pytest.raises(ValueError, match="line 3"):
        ingest(csv_stream(rows), ZoneIndex(["a"]), EPOCH)


def test_bad_row_skip_policy():
    rows = ["not-a-timestamp,a", "2018-01-01 10:00:00,a"]
    result = ingest(csv_stream(rows), ZoneIndex(["a"]), EPOCH, on_bad_row="skip")
    assert result.report.accepted == 1
    assert result.report.bad_rows == 1
    assert result.report.bad_row_lines == [2]


def test_missing_column_rejected():
    stream = io.StringIO("when,zone_id\n2018-01-01 10:00:00,a\n")
    with pytest.raises(ValueError, match="missing required column"):
        ingest(stream, ZoneIndex(["a"]), EPOCH)


def test_custom_timestamp_format():
    stream = csv_stream(["01/02/2018 05,a"])
    result = ingest(stream, ZoneIndex(["a"]), EPOCH, timestamp_format="%d/%m/%Y %H")
    # Feb 1 is 31 days past the epoch: week 4, day 3
    assert result.tensor[5, 3, 4, 0] == 1.0


def test_reingest_is_idempotent():
    rows = ["2018-01-01 08:15:00,a", "2018-01-02 09:00:00,b"]
    zones = ZoneIndex(["a", "b"])
    first = ingest(csv_stream(rows), zones, EPOCH, weeks=4)
    second = ingest(csv_stream(rows), zones, EPOCH, weeks=4)
    np.testing.assert_array_equal(first.tensor, second.tensor)


def test_zone_index_invariants():
    zones = ZoneIndex(["z1", "z2"])
    assert zones.index_of("z2") == 1
    assert "z1" in zones and "zz" not in zones
    assert len(zones) == 2
    with pytest.raises(ValueError, match="unique"):
        ZoneIndex(["a", "a"])
    with pytest.raises(ValueError, match="empty"):
        ZoneIndex([])


def test_zone_index_from_file(tmp_path):
    p = tmp_path / "zones.txt"
    p.write_text("a\n\nb\nc\n")
    zones = ZoneIndex.from_file(str(p))
    assert zones.ids == ("a", "b", "c")


def test_dataset_stats_constant_tensor():
    stats = dataset_stats(np.full((2, 3, 4), 5.0))
    assert stats.mean_std_per_mode == (0.0, 0.0, 0.0)
    assert stats.sparsity == 0.0
    assert stats.max_value == 5.0 and stats.mean_value == 5.0


def test_dataset_stats_zero_tensor():
    assert dataset_stats(np.zeros((2, 2))).sparsity == 1.0


def test_dataset_stats_hand_fixture():
    t = np.zeros((2, 2, 2, 2))
    t[0, 0, 0, 0] = 4.0
    t[1, 1, 1, 1] = 2.0
    stats = dataset_stats(t)
    # every mode unfolding is 2x8 with rows {4,0x7} and {2,0x7}
    row_a = np.std([4, 0, 0, 0, 0, 0, 0, 0])
    row_b = np.std([2, 0, 0, 0, 0, 0, 0, 0])
    expected = (row_a + row_b) / 2
    for v in stats.mean_std_per_mode:
        assert np.isclose(v, expected)
    assert stats.sparsity == 14 / 16
    assert stats.max_value == 4.0
    assert np.isclose(stats.mean_value, 6 / 16)
