"""LGRT binary tensor blobs.

Layout: magic ``LGRT``, version byte, dtype byte (1=f32, 2=f64, 3=u8), rank
byte, one reserved byte, ``rank`` little-endian u32 extents, then the
row-major little-endian payload.
"""

import logging
import struct
from pathlib import Path
from typing import Dict, Union

import numpy as np

from lgrln.errors import DatasetLoadError
from lgrln.utils.files import atomic_write

logger = logging.getLogger(__name__)

MAGIC = b"LGRT"
VERSION = 1
_HEADER = struct.Struct("<4sBBBB")

DTYPE_CODES: Dict[int, np.dtype] = {
    1: np.dtype("<f4"),
    2: np.dtype("<f8"),
    3: np.dtype("u1"),
}
_CODE_BY_KIND = {"f4": 1, "f8": 2, "u1": 3}


def encode_blob(array: np.ndarray, dtype: str = "f8") -> bytes:
    """Serialize an array to LGRT bytes.

    Args:
        array: Array of any rank below 256
        dtype: One of ``"f4"``, ``"f8"``, ``"u1"``

    Returns:
        Encoded blob
    """
    if dtype not in _CODE_BY_KIND:
        raise ValueError(f"Unsupported blob dtype {dtype!r}; expected f4, f8 or u1")
    code = _CODE_BY_KIND[dtype]
    array = np.asarray(array, dtype=DTYPE_CODES[code], order="C")
    if array.ndim > 255:
        raise ValueError(f"Rank {array.ndim} does not fit in one byte")
    header = _HEADER.pack(MAGIC, VERSION, code, array.ndim, 0)
    extents = struct.pack(f"<{array.ndim}I", *array.shape)
    return header + extents + array.tobytes(order="C")


def decode_blob(payload: bytes, source: str = "<bytes>") -> np.ndarray:
    """Parse LGRT bytes back into an array.

    Raises:
        DatasetLoadError: If the header or payload length is inconsistent
    """
    if len(payload) < _HEADER.size:
        raise DatasetLoadError("Blob shorter than its header", path=source)
    magic, version, code, rank, _reserved = _HEADER.unpack_from(payload, 0)
    if magic != MAGIC:
        raise DatasetLoadError(f"Bad magic {magic!r}", path=source)
    if version != VERSION:
        raise DatasetLoadError(f"Unsupported blob version {version}", path=source)
    if code not in DTYPE_CODES:
        raise DatasetLoadError(f"Unknown dtype code {code}", path=source)
    offset = _HEADER.size + 4 * rank
    if len(payload) < offset:
        raise DatasetLoadError("Blob truncated inside its extents", path=source)
    shape = struct.unpack_from(f"<{rank}I", payload, _HEADER.size)
    dtype = DTYPE_CODES[code]
    expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    if len(payload) - offset != expected:
        raise DatasetLoadError(
            f"Payload holds {len(payload) - offset} bytes, shape {shape} needs {expected}",
            path=source,
        )
    if expected == 0:
        return np.zeros(shape, dtype=dtype)
    return np.frombuffer(payload, dtype=dtype, offset=offset).reshape(shape).copy()


def write_blob(path: Union[str, Path], array: np.ndarray, dtype: str = "f8") -> None:
    """Write a blob atomically (temporary file, then rename)."""
    atomic_write(path, encode_blob(array, dtype))


def read_blob(path: Union[str, Path]) -> np.ndarray:
    """Read a blob from disk.

    Raises:
        DatasetLoadError: If the file is missing or malformed
    """
    path = Path(path)
    try:
        payload = path.read_bytes()
    except FileNotFoundError as e:
        raise DatasetLoadError("Blob not found", path=str(path)) from e
    return decode_blob(payload, source=str(path))
