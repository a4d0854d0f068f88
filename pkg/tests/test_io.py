import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from onmf import io
from onmf.types import UNASSIGNED, OrthogonalH, SparseMatrix


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestMatrixMarket:
    def test_hand_written_diagonal(self, tmp_path):
        p = write(tmp_path / "a.mtx",
                  "%%MatrixMarket matrix coordinate real general\n% note\n2 2 2\n1 1 3.0\n2 2 4.0\n")
        np.testing.assert_array_equal(io.read_matrix_market(p).toarray(), [[3, 0], [0, 4]])

    def test_pattern(self, tmp_path):
        p = write(tmp_path / "p.mtx",
                  "%%MatrixMarket matrix coordinate pattern general\n3 3 3\n1 1\n2 3\n3 2\n")
        x = io.read_matrix_market(p)
        assert x.nnz == 3 and np.all(x.data == 1.0)

    def test_duplicates_summed(self, tmp_path):
        p = write(tmp_path / "d.mtx",
                  "%%MatrixMarket matrix coordinate real general\n2 1 2\n1 1 1.5\n1 1 2.0\n")
        assert io.read_matrix_market(p).toarray()[0, 0] == 3.5

    def test_array_layout(self, tmp_path):
        p = write(tmp_path / "arr.mtx", "%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n")
        np.testing.assert_array_equal(io.read_dense_matrix_market(p), [[1, 3], [2, 4]])

    @pytest.mark.parametrize("text", [
        "%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n",
        "%%MatrixMarket matrix coordinate real symmetric\n1 1 1\n1 1 1\n",
        "%%MatrixMarket vector coordinate real general\n1 1 1\n1 1 1\n",
        "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n",
        "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n",
        "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 1.0\n2 2 1.0\n",
        "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 abc\n",
        "not a header\n",
    ])
    def test_malformed_rejected(self, tmp_path, text):
        with pytest.raises(io.FormatError):
            io.read_matrix_market(write(tmp_path / "bad.mtx", text))

    def test_write_empty(self, tmp_path):
        p = tmp_path / "e.mtx"
        io.write_matrix_market(p, SparseMatrix((3, 4), np.zeros(5, int), [], []))
        assert p.read_text().splitlines()[1] == "3 4 0"
        assert io.read_matrix_market(p).shape == (3, 4)

    def test_write_single_entry(self, tmp_path):
        p = tmp_path / "s.mtx"
        io.write_matrix_market(p, SparseMatrix.from_dense([[2.5]]))
        assert p.read_text().splitlines()[2] == "1 1 2.5"

    def test_round_trip_50x80(self, tmp_path):
        x = SparseMatrix.from_scipy(sp.random(50, 80, density=0.1, random_state=0, format="csc"))
        io.write_matrix_market(tmp_path / "r.mtx", x)
        assert io.read_matrix_market(tmp_path / "r.mtx") == x

    def test_dense_writer_keeps_shape(self, tmp_path):
        w = np.array([[0.0, 1.0], [0.0, 2.0], [0.0, 1 / 3]])
        io.write_dense_matrix_market(tmp_path / "w.mtx", w)
        np.testing.assert_array_equal(io.read_dense_matrix_market(tmp_path / "w.mtx"), w)


def test_labels_round_trip(tmp_path):
    y = np.array([0, 3, 1, 1, 2])
    io.write_labels(tmp_path / "y.txt", y)
    np.testing.assert_array_equal(io.read_labels(tmp_path / "y.txt"), y)


def test_labels_reject_garbage(tmp_path):
    with pytest.raises(io.FormatError):
        io.read_labels(write(tmp_path / "y.txt", "0\n1.5\n"))
    with pytest.raises(io.FormatError):
        io.read_labels(write(tmp_path / "z.txt", "0\n-1\n"))


class TestHsi:
    def test_hand_built_cube(self, tmp_path):
        (tmp_path / "c.raw").write_bytes(np.array([1, 2, 3, 4], dtype="<f4").tobytes())
        write(tmp_path / "c.hdr", "bands: 2\nwidth: 2\nheight: 1\ndtype: f32\nbyteorder: le\ndata: c.raw\n")
        cube = io.read_hsi_cube(tmp_path / "c.hdr")
        np.testing.assert_array_equal(cube.matrix().toarray(), [[1, 2], [3, 4]])

    def test_pixel_order_is_row_major(self, tmp_path):
        vals = np.arange(6, dtype=float).reshape(1, 6)  # 1 band, 3 wide, 2 high
        io.write_hsi_cube(tmp_path / "c.hdr", io.HsiCube(1, 3, 2, vals))
        cube = io.read_hsi_cube(tmp_path / "c.hdr")
        img = cube.values.reshape(cube.height, cube.width)
        assert img[1, 0] == 3.0  # pixel (row 1, col 0) -> column 1*3 + 0

    def test_size_mismatch(self, tmp_path):
        (tmp_path / "c.raw").write_bytes(np.zeros(4, dtype="<f8").tobytes())
        write(tmp_path / "c.hdr", "bands: 3\nwidth: 2\nheight: 1\ndtype: f64\nbyteorder: le\ndata: c.raw\n")
        with pytest.raises(io.FormatError):
            io.read_hsi_cube(tmp_path / "c.hdr")

    def test_big_endian_and_wavelengths(self, tmp_path):
        vals = np.array([[0.5, 1.5], [2.0, 3.25]])
        cube = io.HsiCube(2, 1, 2, vals, wavelengths=[400.0, 410.5])
        io.write_hsi_cube(tmp_path / "c.hdr", cube, dtype="f32", byteorder="be")
        back = io.read_hsi_cube(tmp_path / "c.hdr")
        np.testing.assert_array_equal(back.values, vals)
        np.testing.assert_array_equal(back.wavelengths, [400.0, 410.5])

    def test_missing_key(self, tmp_path):
        with pytest.raises(io.FormatError):
            io.read_hsi_cube(write(tmp_path / "c.hdr", "bands: 2\nwidth: 1\n"))


class TestClusterMap:
    def test_two_pixels(self, tmp_path):
        io.write_cluster_map(tmp_path / "m.ppm", OrthogonalH(2, [0, 1], [1.0, 1.0]), 2, 1)
        img = io.read_ppm(tmp_path / "m.ppm")
        assert img.shape == (1, 2, 3)
        np.testing.assert_array_equal(img[0, 0], io.PALETTE[0])
        np.testing.assert_array_equal(img[0, 1], io.PALETTE[1])

    def test_uniform_image(self, tmp_path):
        io.write_cluster_map(tmp_path / "m.ppm", np.zeros(12, int), 4, 3)
        img = io.read_ppm(tmp_path / "m.ppm")
        assert np.all(img == io.PALETTE[0])

    def test_header_bytes(self, tmp_path):
        io.write_cluster_map(tmp_path / "m.ppm", [0, 1, 2], 3, 1)
        assert (tmp_path / "m.ppm").read_bytes().startswith(b"P6\n3 1\n255\n")

    def test_unassigned_is_black(self, tmp_path):
        io.write_cluster_map(tmp_path / "m.ppm", OrthogonalH(2, [UNASSIGNED, 1], [0.0, 1.0]), 2, 1)
        np.testing.assert_array_equal(io.decode_cluster_map(tmp_path / "m.ppm"), [UNASSIGNED, 1])

    def test_errors(self, tmp_path):
        with pytest.raises(ValueError):
            io.write_cluster_map(tmp_path / "m.ppm", OrthogonalH(17, [0], [1.0]), 1, 1)
        with pytest.raises(ValueError):
            io.write_cluster_map(tmp_path / "m.ppm", [0, 1], 3, 1)

    @settings(max_examples=30, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
    @given(st.integers(1, 20), st.integers(1, 20), st.integers(1, 16), st.integers(0, 2**31 - 1))
    def test_decode_round_trip(self, tmp_path, w, h, r, seed):
        labels = np.random.default_rng(seed).integers(0, r, w * h)
        io.write_cluster_map(tmp_path / "m.ppm", OrthogonalH(r, labels, np.ones(w * h)), w, h)
        np.testing.assert_array_equal(io.decode_cluster_map(tmp_path / "m.ppm"), labels)


class TestReports:
    def make(self, seed, t=0.5):
        return io.RunReport("toy", "kl", 2, seed, iterations=3, time_s=t, metric_name="accuracy",
                            metric_value=0.75, objective=[3.0, 2.0, 2.0], h_change=[np.inf, 0.1, 0.0])

    def test_empty_list_header_only(self, tmp_path):
        io.write_report_csv(tmp_path / "r.csv", [])
        assert (tmp_path / "r.csv").read_text() == ",".join(io.REPORT_HEADER) + "\n"

    def test_one_run_two_files(self, tmp_path):
        written = io.write_report_csv(tmp_path / "r.csv", [self.make(0)])
        assert sorted(p.name for p in written) == ["r.csv", "toy_kl_0.trace.csv"]
        assert (tmp_path / "toy_kl_0.trace.csv").read_text().splitlines()[0] == "iter,objective,h_change"

    def test_twenty_runs_mean_time(self, tmp_path):
        times = np.random.default_rng(0).random(20)
        io.write_report_csv(tmp_path / "r.csv", [self.make(s, t) for s, t in enumerate(times)])
        back = io.read_report_csv(tmp_path / "r.csv")
        assert len(back) == 20
        assert np.mean([r.time_s for r in back]) == pytest.approx(times.mean(), rel=1e-15)
        assert back[3].objective == [3.0, 2.0, 2.0]

    def test_failed_run_recorded(self, tmp_path):
        bad = io.RunReport("toy", "fro", 2, 0, error="boom")
        io.write_report_csv(tmp_path / "r.csv", [bad])
        back = io.read_report_csv(tmp_path / "r.csv")
        assert back[0].failed and back[0].metric_name == "failed"
