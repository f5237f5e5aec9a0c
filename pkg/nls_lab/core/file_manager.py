"""
Artifact output for experiment runs: CSV tables, JSON summaries, gnuplot columns and the
binary snapshot container.

Snapshot layout (little-endian):

    8 bytes   magic b"NLSSNAP1"
    4 bytes   uint32 header length N
    N bytes   UTF-8 JSON header (grid, times, shape, dtype, config)
    rest      row-major complex64 payload, one row per snapshot

A ``.zst`` suffix means the whole container is zstandard-compressed.
"""

import json
import logging
import os
import struct
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .error_handling import ArtifactError

try:
    import zstandard as zstd
except ImportError:
    zstd = None

logger = logging.getLogger(__name__)

SNAPSHOT_MAGIC = b"NLSSNAP1"
CSV_FORMAT = "%.16e"
FAILURE_MARKER = "FAILED"

PathLike = Union[str, Path]


def _json_default(value: Any) -> Any:
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": float(value.real), "im": float(value.imag)}
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


class FileManager:
    """Writes the artifacts of one run into an output directory."""

    def __init__(self, out_dir: PathLike):
        self.out_dir = Path(out_dir).expanduser()
        self.written: List[Path] = []

    def __enter__(self) -> "FileManager":
        self.ensure_directory()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> None:
        if exc_type is not None:
            self.write_failure_marker(exc_val)

    def ensure_directory(self) -> Path:
        """
        Create the output directory if needed.

        Raises:
            ArtifactError: the directory cannot be created or is not writable
        """
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ArtifactError(f"Failed to create output directory '{self.out_dir}': {e}") from e
        if not os.access(self.out_dir, os.W_OK):
            raise ArtifactError(f"Output directory '{self.out_dir}' is not writable")
        return self.out_dir

    def _target(self, name: str) -> Path:
        path = self.out_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        self.written.append(path)
        return path

    def write_csv(self, name: str, header: Sequence[str], rows: np.ndarray) -> Path:
        """Comma-separated table with 17 significant digits per entry."""
        data = np.atleast_2d(np.asarray(rows, dtype=float))
        if data.shape[1] != len(header):
            raise ArtifactError(f"{name}: {len(header)} header fields for {data.shape[1]} columns")
        path = self._target(name)
        try:
            np.savetxt(path, data, fmt=CSV_FORMAT, delimiter=",", header=",".join(header), comments="")
        except OSError as e:
            raise ArtifactError(f"Failed to write {path}: {e}") from e
        logger.debug(f"Wrote {path} ({data.shape[0]} rows)")
        return path

    def write_matrix(self, name: str, matrix: np.ndarray, columns: Sequence[float]) -> Path:
        """t x k matrix; the header row carries 't' and then the column coordinates."""
        header = ["t"] + [repr(float(c)) for c in columns]
        return self.write_csv(name, header, matrix)

    def write_json(self, name: str, payload: Dict[str, Any]) -> Path:
        path = self._target(name)
        try:
            path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")
        except OSError as e:
            raise ArtifactError(f"Failed to write {path}: {e}") from e
        return path

    def write_columns(self, name: str, x: Sequence[float], y: Sequence[float],
                      labels: Tuple[str, str] = ("t", "value")) -> Path:
        """Whitespace-separated two-column file for gnuplot."""
        data = np.column_stack([np.asarray(x, dtype=float), np.asarray(y, dtype=float)])
        path = self._target(name)
        try:
            np.savetxt(path, data, fmt=CSV_FORMAT, delimiter=" ", header=f"{labels[0]} {labels[1]}")
        except OSError as e:
            raise ArtifactError(f"Failed to write {path}: {e}") from e
        return path

    def write_snapshots(self, name: str, times: np.ndarray, fields: np.ndarray,
                        header: Dict[str, Any], compress: bool = False) -> Path:
        """
        Binary snapshot container; ``compress`` appends ``.zst`` and needs zstandard.
        """
        if compress and zstd is None:
            raise ArtifactError("zstandard library is required to compress snapshots. Please install 'zstandard'.")
        fields = np.asarray(fields)
        meta = dict(header)
        meta.update({
            "times": [float(t) for t in times],
            "shape": list(fields.shape),
            "dtype": "complex64",
            "order": "C",
        })
        blob = encode_snapshots(fields, meta)
        if compress:
            blob = zstd.ZstdCompressor(level=10).compress(blob)
            name = f"{name}.zst"
        path = self._target(name)
        try:
            path.write_bytes(blob)
        except OSError as e:
            raise ArtifactError(f"Failed to write {path}: {e}") from e
        return path

    def write_failure_marker(self, error: Optional[BaseException]) -> Path:
        """Flush a FAILED marker describing why the run aborted."""
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / FAILURE_MARKER
        message = f"{type(error).__name__}: {error}\n" if error is not None else "aborted\n"
        path.write_text(message)
        logger.warning(f"Run aborted; wrote failure marker {path}")
        return path


def encode_snapshots(fields: np.ndarray, header: Dict[str, Any]) -> bytes:
    text = json.dumps(header, sort_keys=True, default=_json_default).encode("utf-8")
    payload = np.ascontiguousarray(fields, dtype="<c8").tobytes()
    return SNAPSHOT_MAGIC + struct.pack("<I", len(text)) + text + payload


def read_snapshots(path: PathLike) -> Tuple[Dict[str, Any], np.ndarray]:
    """
    Read a snapshot container written by ``FileManager.write_snapshots``.

    Returns:
        (header, fields) with fields of shape header["shape"] and dtype complex64

    Raises:
        ArtifactError: bad magic, truncated payload, or a compressed file without zstandard
    """
    path = Path(path)
    blob = path.read_bytes()
    if path.suffix == ".zst":
        if zstd is None:
            raise ArtifactError("zstandard library is required to decompress .zst files. Please install 'zstandard'.")
        blob = zstd.ZstdDecompressor().decompress(blob)
    if blob[:8] != SNAPSHOT_MAGIC:
        raise ArtifactError(f"{path} is not a snapshot container")
    (length,) = struct.unpack("<I", blob[8:12])
    header = json.loads(blob[12:12 + length].decode("utf-8"))
    shape = tuple(header["shape"])
    payload = blob[12 + length:]
    expected = int(np.prod(shape)) * 8
    if len(payload) != expected:
        raise ArtifactError(f"{path}: payload has {len(payload)} bytes, expected {expected}")
    fields = np.frombuffer(payload, dtype="<c8").reshape(shape)
    return header, fields
