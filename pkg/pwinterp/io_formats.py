"""
Readers and writers for every file the toolkit consumes or produces.

Numbers are always written with 17 significant digits so that a value read
back is bit-identical to the value written.
"""
import csv
import hashlib
import io
import logging
import os
import tempfile
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from pwinterp.errors import ConfigError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = ".17g"


def fmt(value: float) -> str:
    """Format a float for output."""
    return format(float(value), FLOAT_FORMAT)


def _data_lines(path: Path) -> Iterable[Tuple[int, str]]:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"Cannot read {path}: {e}")
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped and not stripped.startswith("#"):
            yield lineno, stripped


def _comment_metadata(path: Path) -> Dict[str, str]:
    """Collect `# key = value` comment lines."""
    meta: Dict[str, str] = {}
    for line in Path(path).read_text().splitlines():
        stripped = line.strip()
        if stripped.startswith("#") and "=" in stripped:
            for part in stripped.lstrip("#").split(","):
                if "=" in part:
                    key, value = part.split("=", 1)
                    meta[key.strip()] = value.strip()
    return meta


def read_table(path: Path, ncols: int) -> np.ndarray:
    """Read a numeric CSV (or whitespace separated) table.

    Comment lines and a non-numeric header row are skipped.

    Raises:
        ConfigError: if a row has the wrong number of numeric fields
    """
    rows: List[List[float]] = []
    for lineno, line in _data_lines(path):
        fields = [f for f in line.replace(",", " ").split() if f]
        try:
            values = [float(f) for f in fields]
        except ValueError:
            if not rows:
                continue  # header row
            raise ConfigError(f"{path}:{lineno}: non-numeric field in '{line}'")
        if len(values) != ncols:
            raise ConfigError(f"{path}:{lineno}: expected {ncols} fields, found {len(values)}")
        rows.append(values)
    return np.asarray(rows, dtype=float).reshape(-1, ncols)


def csv_text(header: Sequence[str], rows: Iterable[Sequence[object]], comments: Sequence[str] = ()) -> str:
    """Render rows as CSV text; floats use the reproducible format."""
    buffer = io.StringIO()
    for comment in comments:
        buffer.write(f"# {comment}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(
            [fmt(v) if isinstance(v, (float, np.floating)) else v for v in row]
        )
    return buffer.getvalue()


# Sequence files


def read_sequence_file(path: Path) -> Tuple[np.ndarray, Dict[str, str]]:
    """Read "re im" lines; `# strip_bound = M` and `# generator = tag` comments become metadata."""
    table = read_table(path, 2)
    points = table[:, 0] + 1j * table[:, 1]
    meta = _comment_metadata(path)
    logger.debug(f"Read {len(points)} points from {path}")
    return points, meta


def sequence_text(points: Sequence[complex], strip_bound: Optional[float] = None,
                  generator: Optional[str] = None) -> str:
    lines = []
    if generator:
        lines.append(f"# generator = {generator}")
    if strip_bound is not None:
        lines.append(f"# strip_bound = {fmt(strip_bound)}")
    lines.extend(f"{fmt(z.real)} {fmt(z.imag)}" for z in np.asarray(points, dtype=complex))
    return "\n".join(lines) + "\n"


# Spectrum files


def spectrum_text(bandwidth: float, support: Tuple[float, float], panels: int, order: int,
                  graded: bool, nodes: np.ndarray, values: np.ndarray) -> str:
    header = (
        f"tau={fmt(bandwidth)}, lo={fmt(support[0])}, hi={fmt(support[1])}, "
        f"panels={panels}, order={order}, graded={int(graded)}"
    )
    rows = ((t, v.real, v.imag) for t, v in zip(nodes, np.asarray(values, dtype=complex)))
    return csv_text(["t", "re", "im"], rows, comments=[header])


def read_spectrum_file(path: Path) -> Dict[str, object]:
    """Read a spectrum CSV; returns the header fields plus `nodes` and `values` arrays."""
    meta = _comment_metadata(path)
    try:
        header = {
            "bandwidth": float(meta["tau"]),
            "support": (float(meta["lo"]), float(meta["hi"])),
            "panels": int(meta["panels"]),
            "order": int(meta["order"]),
            "graded": bool(int(meta.get("graded", "0"))),
        }
    except (KeyError, ValueError) as e:
        raise ConfigError(f"{path}: malformed spectrum header ({e})")
    table = read_table(path, 3)
    expected = header["panels"] * header["order"]
    if len(table) != expected:
        raise ConfigError(f"{path}: expected {expected} spectrum samples, found {len(table)}")
    header["nodes"] = table[:, 0]
    header["values"] = table[:, 1] + 1j * table[:, 2]
    return header


def read_family_manifest(path: Path) -> Dict[int, Path]:
    """Read `index = spectrum.csv` lines; paths are relative to the manifest."""
    entries: Dict[int, Path] = {}
    for lineno, line in _data_lines(path):
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'index = file'")
        key, value = line.split("=", 1)
        try:
            index = int(key.strip())
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: index '{key.strip()}' is not an integer")
        file_path = Path(value.strip())
        entries[index] = file_path if file_path.is_absolute() else Path(path).parent / file_path
    return entries


# Indexed CSVs


def read_indexed_complex(path: Path) -> Dict[int, complex]:
    """Read (index, re, im) rows, used for data vectors and modal vectors."""
    table = read_table(path, 3)
    return {int(row[0]): complex(row[1], row[2]) for row in table}


def read_weights(path: Path) -> Dict[int, float]:
    table = read_table(path, 2)
    return {int(row[0]): float(row[1]) for row in table}


def dense_vector(entries: Mapping[int, complex], length: int, what: str) -> np.ndarray:
    """Expand {index: value} into a dense vector, rejecting out-of-range indices."""
    vector = np.zeros(length, dtype=complex)
    for index, value in entries.items():
        if not 0 <= index < length:
            raise ConfigError(f"{what} index {index} outside 0..{length - 1}")
        vector[index] = value
    return vector


def read_system_file(path: Path) -> Tuple[np.ndarray, np.ndarray]:
    """Read (n, Re lambda, Im lambda, Re b, Im b) rows ordered by n."""
    table = read_table(path, 5)
    order = np.argsort(table[:, 0], kind="stable")
    table = table[order]
    return table[:, 1] + 1j * table[:, 2], table[:, 3] + 1j * table[:, 4]


def system_text(eigenvalues: np.ndarray, b: np.ndarray) -> str:
    rows = (
        (n, lam.real, lam.imag, bn.real, bn.imag)
        for n, (lam, bn) in enumerate(zip(eigenvalues, b))
    )
    return csv_text(["n", "re_lambda", "im_lambda", "re_b", "im_b"], rows)


def read_signal_file(path: Path) -> Tuple[np.ndarray, np.ndarray]:
    table = read_table(path, 3)
    return table[:, 0], table[:, 1] + 1j * table[:, 2]


def signal_text(times: np.ndarray, values: np.ndarray) -> str:
    rows = ((t, u.real, u.imag) for t, u in zip(times, np.asarray(values, dtype=complex)))
    return csv_text(["t", "re_u", "im_u"], rows)


# Artifacts


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def write_artifacts(out_dir: Path, artifacts: Mapping[str, str]) -> List[Path]:
    """
    Write all artifacts or none.

    Every artifact goes to a temporary file in `out_dir` first; the renames
    happen only after all temporary files were written successfully.

    Returns:
        List of final artifact paths
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    staged: List[Tuple[str, Path]] = []
    try:
        for name, text in artifacts.items():
            fd, tmp_name = tempfile.mkstemp(prefix=f".{name}.", dir=out_dir)
            staged.append((name, Path(tmp_name)))
            with os.fdopen(fd, "w", newline="") as f:
                f.write(text)
    except Exception:
        for _, tmp_path in staged:
            tmp_path.unlink(missing_ok=True)
        raise

    written = []
    for name, tmp_path in staged:
        final = out_dir / name
        os.replace(tmp_path, final)
        written.append(final)
    logger.info(f"Wrote {len(written)} artifacts to {out_dir}")
    return written
