"""On-disk formats for dictionaries and problem instances.

Matrix container (binary, little-endian)::

    bytes 0..7    magic b"BLKDICT1"
    bytes 8..15   m  (uint64)
    bytes 16..23  p  (uint64)
    payload       p blocks, each m*m float64 in row-major order

Instance container (JSON)::

    {"format": "splitsparse-instance", "version": 1,
     "spec": {"seed", "m", "p", "K", "noise_level"} or null,
     "matrix": <base64 of the matrix container>,
     "x_star": [...], "y": [...]}
"""
import base64
import json
import struct

import numpy as np

from .core import BlockDictionary
from .synthetic import Instance, InstanceSpec

MAGIC = b"BLKDICT1"
_HEADER = struct.Struct("<8sQQ")
INSTANCE_FORMAT = "splitsparse-instance"


def dictionary_to_bytes(A):
    header = _HEADER.pack(MAGIC, A.m, A.p)
    return header + A.blocks.astype("<f8").tobytes(order="C")


def dictionary_from_bytes(data):
    if len(data) < _HEADER.size:
        raise ValueError("matrix container too short")
    magic, m, p = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"bad matrix container magic {magic!r}")
    expected = _HEADER.size + 8 * p * m * m
    if len(data) != expected:
        raise ValueError(f"matrix container has {len(data)} bytes, expected {expected}")
    blocks = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(p, m, m)
    return BlockDictionary(blocks.astype(np.float64))


def save_dictionary(path, A):
    with open(path, "wb") as fh:
        fh.write(dictionary_to_bytes(A))


def load_dictionary(path):
    with open(path, "rb") as fh:
        return dictionary_from_bytes(fh.read())


def instance_to_json(inst):
    spec = inst.spec
    return json.dumps({
        "format": INSTANCE_FORMAT,
        "version": 1,
        "spec": None if spec is None else {
            "seed": spec.seed, "m": spec.m, "p": spec.p, "K": spec.K,
            "noise_level": spec.noise_level,
        },
        "matrix": base64.b64encode(dictionary_to_bytes(inst.A)).decode("ascii"),
        "x_star": inst.x_star.tolist(),
        "y": inst.y.tolist(),
    })


def instance_from_json(text):
    doc = json.loads(text)
    if doc.get("format") != INSTANCE_FORMAT:
        raise ValueError("not an instance container")
    A = dictionary_from_bytes(base64.b64decode(doc["matrix"]))
    spec = InstanceSpec(**doc["spec"]) if doc.get("spec") else None
    x_star = np.asarray(doc["x_star"], dtype=np.float64)
    y = np.asarray(doc["y"], dtype=np.float64)
    if x_star.shape != (A.n,) or y.shape != (A.m,):
        raise ValueError("instance vectors do not match the matrix size")
    return Instance(A=A, x_star=x_star, y=y, spec=spec)
