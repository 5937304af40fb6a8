"""Seed splitting.

Sub-seeds are the first 8 bytes (little-endian) of ``blake2b(f"{seed}/{tag}")``.
Each consumer draws from its own tagged stream, so adding a stream never
shifts the values drawn by another.
"""
import hashlib


def sub_seed(seed, tag):
    digest = hashlib.blake2b(f"{int(seed)}/{tag}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")
