"""Bit-exact array encoding for snapshot records."""
import base64

import numpy as np

from .errors import FormatError


def encode_array(arr: np.ndarray) -> dict:
    arr = np.ascontiguousarray(arr, dtype="<f8")
    return {
        "dtype": "<f8",
        "shape": list(arr.shape),
        "data": base64.b64encode(arr.tobytes()).decode("ascii"),
    }


def decode_array(rec: dict) -> np.ndarray:
    try:
        if rec["dtype"] != "<f8":
            raise FormatError(f"unsupported array dtype {rec['dtype']!r}")
        raw = base64.b64decode(rec["data"].encode("ascii"), validate=True)
        shape = tuple(int(s) for s in rec["shape"])
        return np.frombuffer(raw, dtype="<f8").reshape(shape).astype(float)
    except FormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed array record: {exc}") from exc
