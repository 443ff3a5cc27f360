"""
Versioned binary network format and a text summary.

Layout (little-endian)::

    magic "KAWNET1\\0" | u32 n_in | u32 layer count
    per layer: u8 tag | u32 config count | f64 config... |
               per tensor: u32 ndim | u32 dims... | f64 data (C order)
"""

import io
import struct
from pathlib import Path
from typing import Union

import numpy as np

from kawlab.common.constants import NETWORK_MAGIC
from kawlab.common.errors import ConfigError

from .layers import build_layer, layer_kind, param_names
from .network import Network

PathLike = Union[str, Path]


def encode_network(net: Network) -> bytes:
    buf = io.BytesIO()
    buf.write(NETWORK_MAGIC)
    buf.write(struct.pack("<II", net.n_in, len(net.layers)))
    for layer in net.layers:
        config = layer.config()
        buf.write(struct.pack("<BI", layer.tag, len(config)))
        buf.write(np.asarray(config, dtype="<f8").tobytes())
        for name in param_names(layer.tag):
            arr = np.ascontiguousarray(layer.params[name], dtype="<f8")
            buf.write(struct.pack("<I", arr.ndim))
            buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            buf.write(arr.tobytes())
    return buf.getvalue()


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.blob):
            raise ConfigError(f"network file truncated at byte {self.pos}")
        values = struct.unpack_from(fmt, self.blob, self.pos)
        self.pos += size
        return values

    def floats(self, count: int) -> np.ndarray:
        size = 8 * count
        if self.pos + size > len(self.blob):
            raise ConfigError(f"network file truncated at byte {self.pos}")
        arr = np.frombuffer(self.blob, dtype="<f8", count=count, offset=self.pos).astype(float)
        self.pos += size
        return arr


def decode_network(blob: bytes) -> Network:
    if not blob.startswith(NETWORK_MAGIC):
        raise ConfigError("not a kawlab network file (bad magic)")
    reader = _Reader(blob)
    reader.pos = len(NETWORK_MAGIC)
    n_in, count = reader.take("<II")
    layers = []
    for _ in range(count):
        tag, n_config = reader.take("<BI")
        config = reader.floats(n_config).tolist()
        params = {}
        for name in param_names(tag):
            (ndim,) = reader.take("<I")
            shape = reader.take(f"<{ndim}I")
            params[name] = reader.floats(int(np.prod(shape))).reshape(shape)
        layers.append(build_layer(tag, config, params))
    if reader.pos != len(blob):
        raise ConfigError(f"{len(blob) - reader.pos} trailing bytes after the last layer")
    return Network(layers, n_in)


def save_network(net: Network, path: PathLike) -> None:
    Path(path).write_bytes(encode_network(net))


def load_network(path: PathLike) -> Network:
    return decode_network(Path(path).read_bytes())


def summary(net: Network) -> str:
    """One line per layer: index, kind, output shape and parameter count."""
    lines = [f"Network: input {net.n_in}, output {net.n_out}, {net.n_params} trainable parameters"]
    for i, (layer, shape) in enumerate(zip(net.layers, net.shapes[1:])):
        count = sum(p.size for p in layer.params.values())
        frozen = " (frozen)" if layer.params and not layer.trainable else ""
        extra = f" from {layer.source}" if hasattr(layer, "source") else ""
        lines.append(f"  [{i:>2}] {layer_kind(layer):<17} out={shape} params={count}{frozen}{extra}")
    return "\n".join(lines) + "\n"
