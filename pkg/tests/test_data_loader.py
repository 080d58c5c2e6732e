"""Tests for dataset files and the vintage store."""

import logging

import numpy as np
import pytest

from regimecast.config import Settings
from regimecast.data_loader import (
    VintageStore,
    load_dataset,
    quarter_index,
    quarter_label,
    quarterly_dates,
    write_dataset,
    write_states,
)
from regimecast.errors import DimensionError, ParseError
from regimecast.model import Dataset


def write_text(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def quarterly(levels, start="1999-Q1", names=("a", "b")):
    levels = np.asarray(levels, dtype=float)
    return Dataset(levels, names, quarterly_dates(levels.shape[0], start))


class TestDates:
    def test_quarter_arithmetic(self):
        assert quarter_index("2000-Q1") == quarter_index("2000Q1") == 8000
        assert quarter_label(quarter_index("1999-Q4") + 1) == "2000-Q1"
        assert quarterly_dates(3, "2001-Q3") == ("2001-Q3", "2001-Q4", "2002-Q1")
        assert quarter_index("2000-03-31") is None

    def test_compact_labels_are_normalized(self, tmp_path):
        path = write_text(tmp_path / "d.csv", "date,a\n2000Q1,1\n2000Q2,2\n")
        assert load_dataset(path).dates == ("2000-Q1", "2000-Q2")

    def test_calendar_dates_are_accepted(self, tmp_path):
        path = write_text(tmp_path / "d.csv", "date,a\n2000-03-31,1\n2000-06-30,2\n")
        assert load_dataset(path).dates == ("2000-03-31", "2000-06-30")


class TestLoadDataset:
    def test_round_trip_is_exact(self, tmp_path, rng):
        data = quarterly(rng.normal(size=(12, 2)) * 1e3)
        write_dataset(data, tmp_path / "d.csv")
        loaded = load_dataset(tmp_path / "d.csv")
        assert np.array_equal(loaded.levels, data.levels)
        assert loaded.names == data.names
        assert loaded.dates == data.dates

    def test_columns_follow_the_variable_order(self, tmp_path):
        names = list(Settings.DEFAULT_VARIABLES)
        shuffled = names[::-1] + ["EXTRA"]
        rows = ["date," + ",".join(shuffled)]
        for t in range(3):
            rows.append(f"2000-Q{t + 1}," + ",".join(str(10 * t + shuffled.index(n) + 1) for n in shuffled))
        path = write_text(tmp_path / "d.csv", "\n".join(rows) + "\n")
        data = load_dataset(path, variables=names)
        assert data.names == tuple(names)
        assert data.levels[0, 0] == shuffled.index(names[0]) + 1

    def test_empty_file(self, tmp_path):
        path = write_text(tmp_path / "d.csv", "")
        with pytest.raises(ParseError) as info:
            load_dataset(path)
        assert info.value.row == 1

    def test_header_only(self, tmp_path):
        with pytest.raises(ParseError) as info:
            load_dataset(write_text(tmp_path / "d.csv", "date,a,b\n"))
        assert info.value.row == 1

    def test_non_numeric_cell_reports_its_line(self, tmp_path):
        path = write_text(tmp_path / "d.csv", "date,a,b\n2000-Q1,1,2\n2000-Q2,1,x\n2000-Q3,3,4\n")
        with pytest.raises(ParseError) as info:
            load_dataset(path)
        assert info.value.row == 3
        assert "row 3" in str(info.value)

    def test_missing_value(self, tmp_path):
        path = write_text(tmp_path / "d.csv", "date,a\n2000-Q1,1\n2000-Q2,\n")
        with pytest.raises(ParseError) as info:
            load_dataset(path)
        assert info.value.row == 3

    def test_unordered_dates(self, tmp_path):
        path = write_text(tmp_path / "d.csv", "date,a\n2000-Q2,1\n2000-Q1,2\n")
        with pytest.raises(ParseError) as info:
            load_dataset(path)
        assert info.value.row == 3

    def test_missing_column(self, tmp_path):
        path = write_text(tmp_path / "d.csv", "date,a\n2000-Q1,1\n")
        with pytest.raises(ParseError) as info:
            load_dataset(path, variables=["a", "b"])
        assert info.value.row == 1

    def test_log_transform(self, tmp_path):
        path = write_text(tmp_path / "d.csv", "date,a,b\n2000-Q1,1,2.5\n2000-Q2,3,4\n")
        data = load_dataset(path, transforms={"b": "log"})
        assert np.allclose(data.levels[:, 1], np.log([2.5, 4.0]))
        assert np.array_equal(data.levels[:, 0], [1.0, 3.0])

    def test_log_of_non_positive_value(self, tmp_path):
        path = write_text(tmp_path / "d.csv", "date,a\n2000-Q1,1\n2000-Q2,0\n")
        with pytest.raises(ParseError) as info:
            load_dataset(path, transforms={"a": "log"})
        assert info.value.row == 3

    def test_bad_transforms(self, tmp_path):
        path = write_text(tmp_path / "d.csv", "date,a\n2000-Q1,1\n")
        with pytest.raises(ParseError):
            load_dataset(path, transforms={"zz": "log"})
        with pytest.raises(ParseError):
            load_dataset(path, transforms={"a": "sqrt"})

    def test_write_states(self, tmp_path):
        write_states(tmp_path / "s.csv", ["2000-Q1", "2000-Q2"], np.array([0, 1]))
        assert (tmp_path / "s.csv").read_text() == "date,s_true\n2000-Q1,0\n2000-Q2,1\n"
        with pytest.raises(DimensionError):
            write_states(tmp_path / "s.csv", ["2000-Q1"], np.array([0, 1]))


class TestVintageStore:
    @pytest.fixture
    def store_dir(self, tmp_path):
        release = np.arange(16, dtype=float).reshape(8, 2)
        write_dataset(quarterly(release[:4]), tmp_path / "2000Q1.csv")
        revised = release[:5].copy()
        revised[3] += 0.5
        write_dataset(quarterly(revised), tmp_path / "2000Q2.csv")
        write_dataset(quarterly(release), tmp_path / "final.csv")
        write_text(tmp_path / "notes.csv", "date,a\n")
        return tmp_path

    def test_load(self, store_dir, caplog):
        with caplog.at_level(logging.WARNING, logger="regimecast"):
            store = VintageStore.load(store_dir)
        assert store.labels() == ("2000Q1", "2000Q2")
        assert store.final.T == 8
        assert "notes.csv" in caplog.text

    def test_realized_from_next_vintage_then_final(self, store_dir):
        store = VintageStore.load(store_dir)
        assert np.array_equal(store.realized("2000Q1"), [8.0, 9.0])
        assert np.array_equal(store.realized("2000Q2"), [10.0, 11.0])
        assert np.array_equal(store.realized("2000Q1", "final"), [8.0, 9.0])

    def test_realized_without_a_source(self, store_dir):
        store = VintageStore.load(store_dir)
        store.final = None
        assert store.realized("2000Q2") is None

    def test_gaps_are_logged(self, tmp_path, caplog):
        write_dataset(quarterly(np.zeros((3, 2))), tmp_path / "2000Q1.csv")
        write_dataset(quarterly(np.zeros((5, 2))), tmp_path / "2000Q3.csv")
        with caplog.at_level(logging.WARNING, logger="regimecast"):
            VintageStore.load(tmp_path)
        assert "gap" in caplog.text.lower()

    def test_empty_directory(self, tmp_path):
        with pytest.raises(ParseError):
            VintageStore.load(tmp_path)

    def test_bad_label(self):
        with pytest.raises(ParseError):
            VintageStore({"2000-Q1": quarterly(np.zeros((3, 2)))})

    def test_from_dataset(self, rng):
        data = quarterly(rng.normal(size=(10, 2)), start="2000-Q1")
        store = VintageStore.from_dataset(data, first_origin=8)
        assert store.labels() == ("2002Q1", "2002Q2", "2002Q3")
        assert store.vintages["2002Q1"].T == 8
        assert np.array_equal(store.realized("2002Q1"), data.levels[8])
        assert store.realized("2002Q3") is None

    def test_revision_noise_touches_the_last_row_only(self, rng):
        data = quarterly(rng.normal(size=(10, 2)), start="2000-Q1")
        store = VintageStore.from_dataset(data, first_origin=9, revision_sd=0.1, rng=np.random.default_rng(1))
        vintage = store.vintages["2002Q2"]
        assert np.array_equal(vintage.levels[:-1], data.levels[:8])
        assert not np.array_equal(vintage.levels[-1], data.levels[8])

    def test_save_and_load(self, rng, tmp_path):
        data = quarterly(rng.normal(size=(6, 2)), start="2000-Q1")
        VintageStore.from_dataset(data, first_origin=5).save(tmp_path)
        loaded = VintageStore.load(tmp_path)
        assert loaded.labels() == ("2001Q2", "2001Q3")
        assert np.array_equal(loaded.final.levels, data.levels)
