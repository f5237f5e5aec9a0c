"""
Tests for artifact output.
"""

import json
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pytest

from nls_lab.core import file_manager as fm_module
from nls_lab.core.error_handling import ArtifactError, LabError
from nls_lab.core.file_manager import FAILURE_MARKER, FileManager, read_snapshots


class TestFileManager:
    """Test cases for FileManager."""

    def test_init(self, temp_dir):
        """Test file manager initialization."""
        fm = FileManager(temp_dir)
        assert fm.out_dir == Path(temp_dir)
        assert fm.written == []

    def test_ensure_directory_creates_nested(self, temp_dir):
        """Test that missing parents are created."""
        target = Path(temp_dir) / "a" / "b"
        FileManager(target).ensure_directory()
        assert target.is_dir()

    def test_ensure_directory_failure(self, temp_dir):
        """Test that a file in the way raises ArtifactError."""
        blocker = Path(temp_dir) / "blocker"
        blocker.write_text("x")
        with pytest.raises(ArtifactError, match="Failed to create output directory"):
            FileManager(blocker / "out").ensure_directory()

    def test_write_csv(self, temp_dir):
        """Test header and full precision of CSV tables."""
        fm = FileManager(temp_dir)
        path = fm.write_csv("table.csv", ["t", "value"], np.array([[1.0, 1.0 / 3.0], [2.0, 2.0]]))
        lines = path.read_text().splitlines()
        assert lines[0] == "t,value"
        assert float(lines[1].split(",")[1]) == 1.0 / 3.0
        assert path in fm.written

    def test_write_csv_column_mismatch(self, temp_dir):
        """Test that header and columns must agree."""
        with pytest.raises(ArtifactError, match="header fields"):
            FileManager(temp_dir).write_csv("bad.csv", ["t"], np.ones((2, 2)))

    def test_write_matrix(self, temp_dir):
        """Test that the header row carries the column coordinates."""
        path = FileManager(temp_dir).write_matrix("m.csv", np.zeros((2, 3)), [0.5, 1.5])
        assert path.read_text().splitlines()[0] == "t,0.5,1.5"

    def test_write_json_handles_numpy_and_complex(self, temp_dir):
        """Test JSON encoding of numpy scalars, arrays and complex values."""
        path = FileManager(temp_dir).write_json("s.json", {
            "n": np.int64(3), "x": np.float64(0.5), "z": 1 + 2j, "a": np.arange(2),
        })
        data = json.loads(path.read_text())
        assert data == {"n": 3, "x": 0.5, "z": {"re": 1.0, "im": 2.0}, "a": [0, 1]}

    def test_write_columns(self, temp_dir):
        """Test the gnuplot two-column format."""
        path = FileManager(temp_dir).write_columns("g.dat", [1.0, 2.0], [3.0, 4.0], ("t", "gap"))
        lines = path.read_text().splitlines()
        assert lines[0] == "# t gap"
        assert len(lines) == 3

    def test_failure_marker(self, temp_dir):
        """Test the FAILED marker content."""
        path = FileManager(temp_dir).write_failure_marker(LabError("boom"))
        assert path.name == FAILURE_MARKER
        assert path.read_text() == "LabError: boom\n"

    def test_context_manager_writes_marker_on_error(self, temp_dir):
        """Test that an exception inside the context leaves a FAILED marker."""
        with pytest.raises(RuntimeError):
            with FileManager(temp_dir):
                raise RuntimeError("stage failed")
        assert (Path(temp_dir) / FAILURE_MARKER).exists()

    def test_context_manager_clean_exit(self, temp_dir):
        """Test that a clean exit leaves no marker."""
        with FileManager(temp_dir) as fm:
            fm.write_json("ok.json", {})
        assert not (Path(temp_dir) / FAILURE_MARKER).exists()


class TestSnapshots:
    """Test cases for the snapshot container."""

    def test_round_trip(self, temp_dir):
        """Test that fields and header survive a write/read cycle."""
        fields = (np.arange(12) + 1j * np.arange(12)).reshape(3, 4)
        fm = FileManager(temp_dir)
        path = fm.write_snapshots("snap.nls", np.array([0.0, 1.0, 2.0]), fields, {"experiment": "demo"})
        header, back = read_snapshots(path)
        assert header["experiment"] == "demo"
        assert header["times"] == [0.0, 1.0, 2.0]
        assert header["shape"] == [3, 4]
        np.testing.assert_allclose(back, fields)

    def test_compressed_round_trip(self, temp_dir):
        """Test the zstandard-compressed container."""
        pytest.importorskip("zstandard")
        fields = np.ones((2, 8), dtype=complex)
        path = FileManager(temp_dir).write_snapshots("snap.nls", np.array([0.0, 1.0]), fields, {},
                                                     compress=True)
        assert path.suffix == ".zst"
        _, back = read_snapshots(path)
        np.testing.assert_allclose(back, fields)

    def test_compress_without_zstandard(self, temp_dir):
        """Test the error when zstandard is unavailable."""
        with patch.object(fm_module, "zstd", None):
            with pytest.raises(ArtifactError, match="zstandard"):
                FileManager(temp_dir).write_snapshots("s.nls", np.zeros(1), np.zeros((1, 2)), {}, compress=True)

    def test_bad_magic(self, temp_dir):
        """Test that foreign files are rejected."""
        path = Path(temp_dir) / "junk.nls"
        path.write_bytes(b"not a snapshot file")
        with pytest.raises(ArtifactError, match="not a snapshot container"):
            read_snapshots(path)

    def test_truncated_payload(self, temp_dir):
        """Test that a truncated payload is detected."""
        path = FileManager(temp_dir).write_snapshots("s.nls", np.zeros(2), np.zeros((2, 4)), {})
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(ArtifactError, match="expected"):
            read_snapshots(path)
