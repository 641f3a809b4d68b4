"""Model container serialization.

Layout: 8-byte magic ``INKREC01``, a little-endian uint32 header length, a
UTF-8 JSON header, then each tensor's raw data in header order as
little-endian float32, row-major. The header carries the architecture, the
tensor directory (name and shape), and the character table as Unicode
codepoints; class index i maps to codepoint i of the table and the blank
class is the final index, equal to the table length.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .net import NetworkSpec

MAGIC = b"INKREC01"


class ModelFormatError(ValueError):
    """The file is not a valid model container."""


@dataclass(frozen=True)
class ModelBundle:
    spec: NetworkSpec
    params: dict
    chars: tuple

    @property
    def blank(self) -> int:
        return self.spec.blank

    def text_to_labels(self, text: str) -> list:
        index = {c: i for i, c in enumerate(self.chars)}
        try:
            return [index[c] for c in text]
        except KeyError as exc:
            raise ValueError(f"character {exc.args[0]!r} not in model charset")

    def labels_to_text(self, labels) -> str:
        return "".join(self.chars[i] for i in labels)


def save_model(path, spec: NetworkSpec, params: dict, chars) -> None:
    chars = tuple(chars)
    if len(chars) != spec.num_classes:
        raise ValueError(
            f"charset has {len(chars)} entries for {spec.num_classes} classes"
        )
    names = sorted(params)
    header = {
        "spec": {
            "input_dim": spec.input_dim,
            "layers": spec.layers,
            "nodes_per_layer": spec.nodes_per_layer,
            "num_classes": spec.num_classes,
        },
        "charset": [ord(c) for c in chars],
        "tensors": [
            {"name": n, "shape": list(params[n].shape)} for n in names
        ],
    }
    blob = json.dumps(header, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for n in names:
            fh.write(
                np.ascontiguousarray(params[n], dtype="<f4").tobytes()
            )


def load_model(path) -> ModelBundle:
    with open(path, "rb") as fh:
        if fh.read(8) != MAGIC:
            raise ModelFormatError("bad magic")
        raw_len = fh.read(4)
        if len(raw_len) != 4:
            raise ModelFormatError("truncated header length")
        (hlen,) = struct.unpack("<I", raw_len)
        blob = fh.read(hlen)
        if len(blob) != hlen:
            raise ModelFormatError("truncated header")
        try:
            header = json.loads(blob.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ModelFormatError(f"unreadable header: {exc}")
        try:
            spec = NetworkSpec(**header["spec"])
            chars = tuple(chr(cp) for cp in header["charset"])
            directory = header["tensors"]
        except (KeyError, TypeError) as exc:
            raise ModelFormatError(f"incomplete header: {exc}")
        if len(chars) != spec.num_classes:
            raise ModelFormatError("charset length disagrees with spec")
        params = {}
        for entry in directory:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            data = fh.read(4 * count)
            if len(data) != 4 * count:
                raise ModelFormatError(f"truncated tensor {entry['name']}")
            # float64 internally so inference matches across backends
            params[entry["name"]] = (
                np.frombuffer(data, dtype="<f4").astype(np.float64).reshape(shape)
            )
        if fh.read(1):
            raise ModelFormatError("trailing bytes after last tensor")
    return ModelBundle(spec=spec, params=params, chars=chars)
