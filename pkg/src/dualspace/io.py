"""Readers and writers for images, plans, traces, edge maps and batches.

Floats are written with ``repr`` so every file round-trips bit-exactly, and
JSON keys are sorted so identical data gives identical bytes.
"""

from __future__ import annotations

import csv
import io as _io
import json
import struct
from pathlib import Path
from typing import Iterable

import numpy as np

from .edges import EdgeMap
from .errors import InvalidSpecError
from .signals import Image
from .transforms import SamplingPlan

MAGIC = b"DCSI"
FORMAT_VERSION = 1


def _fmt(v: float) -> str:
    return repr(float(v))


def image_to_csv(img: Image) -> str:
    rows = img.array if img.rank == 2 else img.array[None, :]
    return "".join(",".join(_fmt(v) for v in row) + "\n" for row in rows)


def image_from_csv(text: str, rank: int | None = None) -> Image:
    """Parse CSV rows; a single row is a 1-D signal unless ``rank=2``."""
    rows = [r for r in csv.reader(_io.StringIO(text)) if r]
    if not rows or len({len(r) for r in rows}) != 1:
        raise InvalidSpecError("image CSV must have equal-length, non-empty rows")
    arr = np.array([[float(v) for v in r] for r in rows])
    if rank == 1 or (rank is None and arr.shape[0] == 1):
        arr = arr[0]
    return Image.from_array(arr)


def image_to_bytes(img: Image) -> bytes:
    head = MAGIC + struct.pack("<HB", FORMAT_VERSION, img.rank)
    head += struct.pack(f"<{img.rank}I", *img.shape)
    return head + np.asarray(img.data, dtype="<f8").tobytes()


def image_from_bytes(blob: bytes) -> Image:
    if len(blob) < 7 or blob[:4] != MAGIC:
        raise InvalidSpecError("not a DCSI container")
    version, rank = struct.unpack_from("<HB", blob, 4)
    if version != FORMAT_VERSION or rank not in (1, 2):
        raise InvalidSpecError(f"unsupported DCSI version {version} or rank {rank}")
    shape = struct.unpack_from(f"<{rank}I", blob, 7)
    off = 7 + 4 * rank
    count = int(np.prod(shape))
    if len(blob) != off + 8 * count:
        raise InvalidSpecError("DCSI payload length does not match its header")
    data = np.frombuffer(blob, dtype="<f8", count=count, offset=off).astype(float)
    return Image.from_array(data.reshape(shape))


def save_image(img: Image, path) -> None:
    path = Path(path)
    if path.suffix == ".csv":
        path.write_text(image_to_csv(img))
    else:
        path.write_bytes(image_to_bytes(img))


def load_image(path) -> Image:
    path = Path(path)
    if path.suffix == ".csv":
        return image_from_csv(path.read_text())
    return image_from_bytes(path.read_bytes())


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, no NaN literals."""
    return json.dumps(_clean(obj), sort_keys=True, allow_nan=False)


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if np.isfinite(f) else None
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def plan_to_json(plan: SamplingPlan) -> str:
    return dumps(plan.to_dict())


def plan_from_json(text: str) -> SamplingPlan:
    return SamplingPlan.from_dict(json.loads(text))


def edges_to_csv(edges: EdgeMap) -> dict[str, str]:
    """One 0/1 CSV per axis, keyed ``vertical`` and ``horizontal``."""
    out = {}
    for name, grid in (("vertical", edges.vertical), ("horizontal", edges.horizontal)):
        if grid is None:
            continue
        rows = grid if grid.ndim == 2 else grid[None, :]
        out[name] = "".join(",".join("1" if v else "0" for v in r) + "\n" for r in rows)
    return out


def edges_from_csv(grids: dict[str, str], G0: float) -> EdgeMap:
    def parse(text):
        arr = np.array([[int(v) for v in r] for r in csv.reader(_io.StringIO(text)) if r], bool)
        return arr[0] if arr.shape[0] == 1 and "vertical" not in grids else arr

    h = parse(grids["horizontal"])
    v = parse(grids["vertical"]) if "vertical" in grids else None
    return EdgeMap(h, v, G0)


def write_jsonl(records: Iterable[dict], path) -> None:
    with open(path, "w", newline="\n") as fh:
        for r in records:
            fh.write(dumps(r) + "\n")


def read_jsonl(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_csv(rows: list[dict], path, columns: list[str] | None = None) -> None:
    """Rows as CSV with a header; floats in ``repr`` form, missing values empty."""
    if columns is None:
        columns = []
        for r in rows:
            columns.extend(k for k in r if k not in columns)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r.get(c)) for c in columns])


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return _fmt(v) if np.isfinite(v) else ""
    return str(v)


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n")
