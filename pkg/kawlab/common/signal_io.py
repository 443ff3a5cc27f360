"""
Signal and sampling-scheme file formats.

Text signals:   ``CVEC <length>`` then one ``re im`` pair per line.
Binary signals: magic ``KAWCVEC1``, u64 length, interleaved little-endian f64.
"""

import os
import struct
from pathlib import Path
from typing import List, Union

import numpy as np

from .constants import CVEC_MAGIC
from .errors import ConfigError, SizeError

PathLike = Union[str, os.PathLike]


def format_cvec_text(x) -> str:
    arr = np.asarray(x, dtype=complex).ravel()
    lines = [f"CVEC {arr.size}"]
    lines.extend(f"{v.real:.17g} {v.imag:.17g}" for v in arr)
    return "\n".join(lines) + "\n"


def parse_cvec_text(text: str) -> np.ndarray:
    rows = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise ConfigError("empty signal file", line=1)
    head = rows[0].split()
    if len(head) != 2 or head[0] != "CVEC":
        raise ConfigError(f"expected 'CVEC <length>' header, got {rows[0]!r}", line=1)
    length = int(head[1])
    body = rows[1:]
    if len(body) != length:
        raise SizeError(f"header declares {length} entries, found {len(body)}")
    values = np.empty(length, dtype=complex)
    for i, row in enumerate(body):
        parts = row.split()
        if len(parts) != 2:
            raise ConfigError(f"expected 're im', got {row!r}", line=i + 2)
        values[i] = complex(float(parts[0]), float(parts[1]))
    return values


def encode_cvec_binary(x) -> bytes:
    arr = np.asarray(x, dtype=complex).ravel()
    interleaved = np.empty(2 * arr.size, dtype="<f8")
    interleaved[0::2] = arr.real
    interleaved[1::2] = arr.imag
    return CVEC_MAGIC + struct.pack("<Q", arr.size) + interleaved.tobytes()


def decode_cvec_binary(blob: bytes) -> np.ndarray:
    if blob[:8] != CVEC_MAGIC:
        raise ConfigError("missing KAWCVEC1 magic")
    (length,) = struct.unpack("<Q", blob[8:16])
    payload = blob[16:]
    if len(payload) != 16 * length:
        raise SizeError(f"binary signal declares {length} entries, payload holds {len(payload) // 16}")
    flat = np.frombuffer(payload, dtype="<f8")
    return flat[0::2] + 1j * flat[1::2]


def read_signal(path: PathLike) -> np.ndarray:
    """Load a signal, detecting text vs binary by the magic bytes."""
    blob = Path(path).read_bytes()
    if blob.startswith(CVEC_MAGIC):
        return decode_cvec_binary(blob)
    return parse_cvec_text(blob.decode("utf-8"))


def signal_bytes(x, binary: bool = False) -> bytes:
    return encode_cvec_binary(x) if binary else format_cvec_text(x).encode("utf-8")


def format_signal_set(signals) -> str:
    """Several text signals back to back; used for finite domains."""
    return "".join(format_cvec_text(x) for x in signals)


def parse_signal_set(text: str) -> List[np.ndarray]:
    blocks: List[List[str]] = []
    for line in text.splitlines():
        if line.strip().startswith("CVEC"):
            blocks.append([])
        if not blocks:
            if line.strip() and not line.lstrip().startswith("#"):
                raise ConfigError(f"expected a 'CVEC' header, got {line.strip()!r}", line=1)
            continue
        blocks[-1].append(line)
    if not blocks:
        raise ConfigError("signal set holds no signals", line=1)
    return [parse_cvec_text("\n".join(block)) for block in blocks]


def read_signal_set(path: PathLike) -> List[np.ndarray]:
    return parse_signal_set(Path(path).read_text(encoding="utf-8"))
