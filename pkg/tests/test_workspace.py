import json

import numpy as np
import pytest

from sbsskit import (
    DataError,
    KernelConfig,
    ParameterSetting,
    Region,
    Regionalization,
    SpatialDataset,
    Workspace,
    export_result,
    ingest_csv,
    project_lonlat,
    run_sbss,
    setting_to_json,
)
from sbsskit.workspace import read_dataset_csv, write_dataset_csv


def write_csv(path, text):
    path.write_text(text, encoding="utf-8")
    return path


PLANAR_CSV = "x,y,zn,cu\n0,0,1.5,2.5\n10,0,2.5,3.5\n0,10,3.5,4.5\n"


class TestIngest:
    def test_planar_three_points(self, tmp_path):
        path = write_csv(tmp_path / "pts.csv", PLANAR_CSV)
        ds = ingest_csv(path, "x", "y")
        assert ds.n == 3
        assert ds.p == 2
        assert ds.variable_names == ("zn", "cu")

    def test_lonlat_projection_distance(self, tmp_path):
        path = write_csv(tmp_path / "ll.csv", "lon,lat,v\n0,0,1\n1,0,2\n")
        ds = ingest_csv(path, "lon", "lat", "lonlat")
        dist = np.linalg.norm(ds.locations[0] - ds.locations[1])
        assert dist == pytest.approx(6371000.0 * np.pi / 180.0, rel=1e-12)

    def test_missing_cell_lists_row(self, tmp_path):
        path = write_csv(tmp_path / "bad.csv", "x,y,v\n0,0,1\n1,1,\n2,2,3\n")
        with pytest.raises(DataError, match="rows with missing.*2"):
            ingest_csv(path, "x", "y")

    def test_duplicate_coordinates(self, tmp_path):
        path = write_csv(tmp_path / "dup.csv", "x,y,v\n0,0,1\n0,0,2\n1,1,3\n")
        with pytest.raises(DataError, match="duplicate"):
            ingest_csv(path, "x", "y")

    def test_missing_column(self, tmp_path):
        path = write_csv(tmp_path / "cols.csv", PLANAR_CSV)
        with pytest.raises(DataError, match="missing column 'lat'"):
            ingest_csv(path, "x", "lat")

    def test_no_variables(self, tmp_path):
        path = write_csv(tmp_path / "xy.csv", "x,y\n0,0\n1,1\n")
        with pytest.raises(DataError, match="no variable columns"):
            ingest_csv(path, "x", "y")

    def test_non_numeric_variable(self, tmp_path):
        path = write_csv(tmp_path / "txt.csv", "x,y,v\n0,0,a\n1,1,2\n")
        with pytest.raises(DataError, match="rows with missing"):
            ingest_csv(path, "x", "y")


class TestProjection:
    def test_centered_at_centroid(self):
        coords, note = project_lonlat(np.array([10.0, 12.0]), np.array([50.0, 50.0]))
        assert coords.mean(axis=0) == pytest.approx([0.0, 0.0], abs=1e-9)
        assert "equirectangular" in note

    def test_latitude_scaling(self):
        coords, _ = project_lonlat(np.array([0.0, 1.0]), np.array([60.0, 60.0]))
        dist = abs(coords[1, 0] - coords[0, 0])
        expected = 6371000.0 * np.pi / 180.0 * np.cos(np.radians(60.0))
        assert dist == pytest.approx(expected, rel=1e-12)


@pytest.fixture
def workspace(tmp_path):
    rng = np.random.default_rng(5)
    coords = rng.uniform(0, 100, (30, 2))
    values = rng.normal(size=(30, 2))
    ds = SpatialDataset(coords, values, ["a", "b"])
    return Workspace.create(tmp_path / "ws", ds)


def whole_domain_setting(label="s"):
    region = Region([(-1, -1), (101, -1), (101, 101), (-1, 101)], "all")
    return ParameterSetting(
        regionalization=Regionalization([region]),
        kernel=KernelConfig([(0.0, 30.0), (40.0, 60.0)]),
        label=label,
    )


class TestWorkspacePersistence:
    def test_create_and_open_round_trip(self, workspace):
        reopened = Workspace.open(workspace.root)
        np.testing.assert_array_equal(reopened.dataset.locations, workspace.dataset.locations)
        np.testing.assert_array_equal(reopened.dataset.values, workspace.dataset.values)
        assert reopened.dataset.variable_names == workspace.dataset.variable_names

    def test_existing_dir_needs_force(self, workspace):
        with pytest.raises(DataError, match="already exists"):
            Workspace.create(workspace.root, workspace.dataset)
        Workspace.create(workspace.root, workspace.dataset, force=True)

    def test_dataset_csv_bit_exact(self, tmp_path, rng):
        coords = rng.uniform(-1e7, 1e7, (10, 2))
        values = rng.normal(size=(10, 3)) * 1e-8
        ds = SpatialDataset(coords, values)
        write_dataset_csv(tmp_path / "d.csv", ds)
        back = read_dataset_csv(tmp_path / "d.csv", list(ds.variable_names))
        np.testing.assert_array_equal(back.locations, coords)
        np.testing.assert_array_equal(back.values, values)


class TestHistory:
    def test_save_load_round_trip(self, workspace):
        setting = whole_domain_setting("split-square")
        entry_id = workspace.save_setting(setting)
        loaded = workspace.load_setting(entry_id)
        assert loaded.label == "split-square"
        assert [(r.inner, r.outer) for r in loaded.kernel.rings] == [
            (0.0, 30.0),
            (40.0, 60.0),
        ]
        np.testing.assert_allclose(
            loaded.regionalization.regions[0].vertices,
            setting.regionalization.regions[0].vertices,
            atol=1e-9,
        )

    def test_append_only_ordering(self, workspace):
        first = workspace.save_setting(whole_domain_setting("one"))
        second = workspace.save_setting(whole_domain_setting("two"))
        assert first < second
        labels = [e.setting.label for e in workspace.history()]
        assert labels == ["one", "two"]

    def test_overlapping_rings_file_rejected(self, workspace):
        doc = setting_to_json(whole_domain_setting())
        doc["kernel"] = [{"inner": 0, "outer": 50}, {"inner": 40, "outer": 80}]
        path = workspace.root / "history" / "001.json"
        path.write_text(json.dumps({"schema_version": 1, "setting": doc}))
        with pytest.raises(DataError, match="overlap"):
            workspace.load_setting("001")

    def test_extra_fields_survive(self, workspace):
        setting = whole_domain_setting()
        setting.extra["note"] = "hand drawn"
        entry_id = workspace.save_setting(setting)
        loaded = workspace.load_setting(entry_id)
        assert loaded.extra["note"] == "hand drawn"

    def test_setting_not_covering_rejected(self, workspace):
        region = Region([(0, 0), (1, 0), (1, 1), (0, 1)], "tiny")
        setting = ParameterSetting(
            regionalization=Regionalization([region]),
            kernel=KernelConfig([(0.0, 10.0)]),
        )
        with pytest.raises(DataError, match="invalid regionalization"):
            workspace.save_setting(setting)


class TestAnnotations:
    GEOJSON = json.dumps(
        {
            "type": "FeatureCollection",
            "features": [
                {
                    "type": "Feature",
                    "properties": {"soil": "podzol"},
                    "geometry": {
                        "type": "Polygon",
                        "coordinates": [[[0, 0], [10, 0], [10, 10], [0, 0]]],
                    },
                }
            ],
        }
    ).encode()

    def test_stored_verbatim(self, workspace):
        raw = b'{"type": "FeatureCollection",  "features": []}\n'
        annotation_id = workspace.store_annotation(raw)
        assert workspace.annotation_bytes(annotation_id) == raw

    def test_boundaries_exposed(self, workspace):
        annotation_id = workspace.store_annotation(self.GEOJSON)
        boundaries = workspace.annotation_boundaries(annotation_id)
        assert boundaries == [[[0, 0], [10, 0], [10, 10], [0, 0]]]

    def test_malformed_geometry_names_feature(self, workspace):
        doc = {
            "type": "FeatureCollection",
            "features": [
                {"type": "Feature", "geometry": {"type": "Polygon", "coordinates": [[[0, 0]]]}},
                {"type": "Feature", "geometry": {"type": "Banana"}},
            ],
        }
        with pytest.raises(DataError, match="feature 1"):
            workspace.store_annotation(json.dumps(doc).encode())

    def test_not_a_collection(self, workspace):
        with pytest.raises(DataError, match="FeatureCollection"):
            workspace.store_annotation(b'{"type": "Feature"}')


class TestExportResult:
    def run_result(self, workspace):
        return run_sbss(workspace.dataset, whole_domain_setting())

    def test_score_columns(self, workspace, tmp_path):
        result = self.run_result(workspace)
        paths = export_result(result, tmp_path / "out", workspace.dataset)
        header = paths["scores"].read_text().splitlines()[0]
        assert header.split(",") == ["x", "y", "comp_1", "comp_2"]
        assert len(paths["scores"].read_text().splitlines()) == 31

    def test_reexport_byte_identical(self, workspace, tmp_path):
        result = self.run_result(workspace)
        paths1 = export_result(result, tmp_path / "o1", workspace.dataset)
        paths2 = export_result(result, tmp_path / "o2", workspace.dataset)
        for key in paths1:
            assert paths1[key].read_bytes() == paths2[key].read_bytes()

    def test_unmixing_round_trips_via_json(self, workspace, tmp_path):
        result = self.run_result(workspace)
        paths = export_result(result, tmp_path / "out", workspace.dataset)
        doc = json.loads(paths["diagnostics"].read_text())
        np.testing.assert_allclose(
            np.asarray(doc["unmixing"]), result.unmixing, rtol=1e-15, atol=0
        )

    def test_store_result_appends_history(self, workspace):
        result = self.run_result(workspace)
        result_id = workspace.store_result(result, whole_domain_setting("ran"))
        entries = workspace.history()
        assert entries[-1].result_id == result_id
        assert (workspace.result_dir(result_id) / "W.csv").exists()
