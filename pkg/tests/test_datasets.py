import json
import shutil

import numpy as np
import pytest

from rbcmech.datasets import (
    BUNDLED_FILES,
    Dataset,
    bundled_dataset_paths,
    bundled_datasets,
    load_dataset,
    save_dataset,
)
from rbcmech.errors import DataError


class TestBundled:
    def test_seven_datasets_partitioned(self):
        ds = bundled_datasets()
        assert len(ds) == 7
        conditions = [d.condition for d in ds]
        assert conditions.count("equilibrium") == 1
        assert conditions.count("stretching") == 2
        assert conditions.count("relaxation") == 4

    def test_provenance_metadata_present(self):
        for d in bundled_datasets():
            assert d.citation
            assert d.provenance.get("digitized_from")
            assert d.provenance.get("digitization_date")

    def test_equilibrium_schema(self):
        d = bundled_datasets()[0]
        assert d.condition == "equilibrium"
        assert list(d.values["quantity"]) == ["D", "h_min", "h_max"]
        assert d.values["value_um"].shape == (3,)
        assert d.values["std_um"].shape == (3,)
        # resting-cell dimensions: diameter ~7.8, dimple ~0.8, rim ~2.6
        assert d.values["value_um"][0] > d.values["value_um"][2] > d.values["value_um"][1]

    def test_stretching_sorted_with_stds(self):
        for d in bundled_datasets():
            if d.condition != "stretching":
                continue
            f = d.values["F_ext_pN"]
            assert np.all(np.diff(f) > 0)
            assert "std_ax_um" in d.values

    def test_relaxation_times_in_ms(self):
        for d in bundled_datasets():
            if d.condition != "relaxation":
                continue
            t = d.values["t_ms"]
            assert np.all(np.diff(t) > 0)
            assert t[-1] > 100.0  # converted from seconds
            assert np.all(d.values["z"] >= 1.0)


class TestLoader:
    def test_roundtrip_checksum(self, tmp_path):
        src = bundled_datasets()[1]
        p1 = tmp_path / "copy1.csv"
        save_dataset(src, p1)
        back = load_dataset(p1)
        p2 = tmp_path / "copy2.csv"
        save_dataset(back, p2)
        assert p1.read_bytes() == p2.read_bytes()
        again = load_dataset(p2)
        for key in back.values:
            np.testing.assert_array_equal(back.values[key], again.values[key])

    def test_negative_thickness_names_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("quantity,value_um,std_um\nD,7.8,0.6\nh_min,-0.8,0.3\nh_max,2.6,0.3\n")
        (tmp_path / "bad.csv.json").write_text(json.dumps(
            {"schema_version": 1, "condition": "equilibrium", "citation": "x",
             "units": {}}))
        with pytest.raises(DataError, match="row 3"):
            load_dataset(path)

    def test_unsorted_stretching_grid(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("F_ext_pN,D_ax_um,D_tr_um\n0,7.8,7.8\n50,10,7\n30,9,7.2\n")
        (tmp_path / "bad.csv.json").write_text(json.dumps(
            {"schema_version": 1, "condition": "stretching", "citation": "x",
             "units": {}}))
        with pytest.raises(DataError, match="not strictly increasing"):
            load_dataset(path)

    def test_header_mismatch(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("time,ratio\n0,1.5\n")
        (tmp_path / "bad.csv.json").write_text(json.dumps(
            {"schema_version": 1, "condition": "relaxation", "citation": "x",
             "units": {}}))
        with pytest.raises(DataError, match="header"):
            load_dataset(path)

    def test_unsupported_schema_version(self, tmp_path):
        src_path = bundled_dataset_paths()[0]
        path = tmp_path / "old.csv"
        shutil.copy(src_path, path)
        meta = json.loads(open(str(src_path) + ".json").read())
        meta["schema_version"] = 99
        (tmp_path / "old.csv.json").write_text(json.dumps(meta))
        with pytest.raises(DataError, match="schema version"):
            load_dataset(path)

    def test_missing_sidecar(self, tmp_path):
        path = tmp_path / "orphan.csv"
        path.write_text("t_s,z\n0,1.5\n")
        with pytest.raises(DataError, match="sidecar"):
            load_dataset(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            load_dataset(tmp_path / "nope.csv")

    def test_checksum_distinguishes_files(self):
        ds = bundled_datasets()
        sums = {d.checksum for d in ds}
        assert len(sums) == len(ds)
