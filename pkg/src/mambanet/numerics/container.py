"""Binary weights container.

Layout (all integers little-endian)::

    b"FINC1"
    u32 layer_count
    per layer:
        u16 len, utf-8 kind tag ("dense:relu", "conv1d:linear", "lstm:linear", ...)
        u16 len, utf-8 layer name
        u32 param_count
        per parameter:
            u16 len, utf-8 parameter name
            u8 ndim, ndim x u32 dims
            u8 frozen flag
            prod(dims) x f64 values, row-major

Writing the same layers twice produces identical bytes.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import ParseError
from .layers import Layer
from .tensor import Parameter

MAGIC = b"FINC1"


def _str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


def dumps(layers: list[tuple[str, Layer]]) -> bytes:
    out = [MAGIC, struct.pack("<I", len(layers))]
    for name, layer in layers:
        out.append(_str(f"{layer.kind}:{layer.activation}"))
        out.append(_str(name))
        out.append(struct.pack("<I", len(layer.params)))
        for pname, p in layer.params.items():
            out.append(_str(pname))
            out.append(struct.pack("<B", p.data.ndim))
            out.append(struct.pack(f"<{p.data.ndim}I", *p.data.shape))
            out.append(struct.pack("<B", 0 if p.trainable else 1))
            out.append(np.ascontiguousarray(p.data, dtype="<f8").tobytes())
    return b"".join(out)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise ParseError("weights container truncated")
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def string(self) -> str:
        (n,) = self.unpack("<H")
        return self.take(n).decode("utf-8")


def loads(buf: bytes) -> list[tuple[str, Layer]]:
    r = _Reader(buf)
    if r.take(len(MAGIC)) != MAGIC:
        raise ParseError("not a FINC1 weights container")
    (n_layers,) = r.unpack("<I")
    layers = []
    for _ in range(n_layers):
        kind, activation = r.string().split(":")
        name = r.string()
        (n_params,) = r.unpack("<I")
        params = {}
        for _ in range(n_params):
            pname = r.string()
            (ndim,) = r.unpack("<B")
            shape = r.unpack(f"<{ndim}I") if ndim else ()
            (frozen,) = r.unpack("<B")
            count = int(np.prod(shape)) if shape else 1
            values = np.frombuffer(r.take(8 * count), dtype="<f8").astype(np.float64).reshape(shape)
            params[pname] = Parameter(values, f"{name}.{pname}", trainable=not frozen)
        layers.append((name, Layer(kind, params, activation)))
    if r.pos != len(buf):
        raise ParseError("trailing bytes after weights container")
    return layers


def save(path, layers: list[tuple[str, Layer]]):
    Path(path).write_bytes(dumps(layers))


def load(path) -> list[tuple[str, Layer]]:
    return loads(Path(path).read_bytes())
