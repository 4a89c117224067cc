import numpy as np
import pytest

from isogauss import datafiles
from isogauss.admissibility import run_pipeline
from isogauss.errors import DatasetFormatError
from isogauss.surfaces import CliffordTorus, Ellipsoid, generate


@pytest.fixture(scope="module")
def ellipsoid_file(tmp_path_factory):
    surf = Ellipsoid((1.0, 1.5, 2.0))
    data = generate(surf, surf.default_chart(17))
    ds = datafiles.gauss_dataset(data.chart, data.n, data.g, frame=data.frame)
    path = tmp_path_factory.mktemp("ds") / "ellipsoid.txt"
    datafiles.write_dataset(path, ds)
    return path, data


class TestRoundTrip:
    def test_write_read_write_byte_identical(self, ellipsoid_file, tmp_path):
        path, _ = ellipsoid_file
        ds = datafiles.read_dataset(path)
        second = tmp_path / "again.txt"
        datafiles.write_dataset(second, ds)
        assert path.read_bytes() == second.read_bytes()

    def test_numeric_payload_exact(self, ellipsoid_file):
        path, data = ellipsoid_file
        ds = datafiles.read_dataset(path)
        g = datafiles.dataset_metric(ds)
        nu = datafiles.dataset_normals(ds)
        assert np.array_equal(g, 0.5 * (data.g + np.swapaxes(data.g, -1, -2)))
        assert np.array_equal(nu[..., 0], data.frame[..., 0])

    def test_codim_frame_block(self, tmp_path):
        surf = CliffordTorus(1.0, 1.3)
        data = generate(surf, surf.default_chart(9))
        ds = datafiles.gauss_dataset(data.chart, data.n, data.g, frame=data.frame)
        path = tmp_path / "torus.txt"
        datafiles.write_dataset(path, ds)
        back = datafiles.read_dataset(path)
        assert back.codim == 2
        assert np.array_equal(datafiles.dataset_normals(back), data.frame)

    def test_oracle_blocks(self, tmp_path):
        surf = Ellipsoid((1.0, 1.5, 2.0))
        data = generate(surf, surf.default_chart(9))
        ds = datafiles.oracle_dataset(data.chart, data.n, data.u, data.h_alpha,
                                      data.k, data.H_alpha)
        path = tmp_path / "oracle.txt"
        datafiles.write_dataset(path, ds)
        back = datafiles.read_dataset(path)
        assert np.array_equal(back.blocks["u"], data.u)
        assert np.array_equal(datafiles.oracle_h_alpha(back), data.h_alpha)
        assert np.array_equal(back.blocks["H"][..., 0], data.H_alpha[..., 0])


class TestMalformed:
    def test_missing_header_key(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("format_version = 1\nkind = immersion\n")
        with pytest.raises(DatasetFormatError):
            datafiles.read_dataset(path)

    def test_unknown_kind(self, ellipsoid_file, tmp_path):
        text = ellipsoid_file[0].read_text().replace("metric+gauss", "wibble")
        path = tmp_path / "bad.txt"
        path.write_text(text)
        with pytest.raises(DatasetFormatError):
            datafiles.read_dataset(path)

    def test_row_count_mismatch(self, ellipsoid_file, tmp_path):
        lines = ellipsoid_file[0].read_text().splitlines()
        start = lines.index("begin g")
        del lines[start + 1]
        path = tmp_path / "bad.txt"
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(DatasetFormatError):
            datafiles.read_dataset(path)

    def test_non_numeric_payload(self, ellipsoid_file, tmp_path):
        lines = ellipsoid_file[0].read_text().splitlines()
        start = lines.index("begin nu")
        lines[start + 1] = "0.1 bad 0.3"
        path = tmp_path / "bad.txt"
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(DatasetFormatError):
            datafiles.read_dataset(path)

    def test_unterminated_block(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("format_version = 1\nkind = immersion\nm = 2\nn = 3\n"
                        "grid_shape = 5 5\nspacing = 0.1 0.1\norigin = 0 0\n"
                        "begin u\n0 0 0\n")
        with pytest.raises(DatasetFormatError):
            datafiles.read_dataset(path)


class TestReports:
    def test_format_contains_every_contract_key(self, sphere):
        from isogauss.admissibility import RESIDUAL_KEYS
        report = run_pipeline(sphere.metric, sphere.gauss)
        text = datafiles.format_report(report)
        for key in RESIDUAL_KEYS:
            assert f"residual.{key} = " in text
            assert f"threshold.{key} = " in text
        parsed = datafiles.parse_report(text)
        assert parsed["verdict"] == "admissible"
        assert parsed["failed_step"] is None
        assert set(RESIDUAL_KEYS) <= set(parsed["residuals"])

    def test_parse_roundtrip_values(self, sphere):
        report = run_pipeline(sphere.metric, sphere.gauss)
        parsed = datafiles.parse_report(datafiles.format_report(report))
        for key, val in report.residuals.items():
            back = parsed["residuals"][key]
            assert (np.isnan(val) and np.isnan(back)) or back == val
