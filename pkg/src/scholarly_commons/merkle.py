"""Binary SHA-256 Merkle tree over a fixed leaf list.

Leaves are raw 32-byte digests. The layer above pads by duplicating the
last leaf up to the next power of two, then hashes pairs left-to-right.
Inclusion paths carry the sibling digest plus which side it sits on.
"""

from __future__ import annotations

import hashlib


def _hash_pair(left: bytes, right: bytes) -> bytes:
    return hashlib.sha256(left + right).digest()


def _padded(leaves: list[bytes]) -> list[bytes]:
    nodes = list(leaves)
    while len(nodes) & (len(nodes) - 1):
        nodes.append(nodes[-1])
    return nodes


def merkle_root(leaves: list[bytes]) -> bytes:
    """Root digest; a single leaf is its own root."""
    if not leaves:
        raise ValueError("merkle_root needs at least one leaf")
    level = _padded(leaves)
    while len(level) > 1:
        level = [_hash_pair(level[i], level[i + 1]) for i in range(0, len(level), 2)]
    return level[0]


def merkle_path(leaves: list[bytes], index: int) -> list[tuple[str, bytes]]:
    """Path from leaves[index] to the root as (sibling side, sibling digest)."""
    if not 0 <= index < len(leaves):
        raise IndexError("leaf index out of range")
    level = _padded(leaves)
    path = []
    pos = index
    while len(level) > 1:
        if pos % 2 == 0:
            path.append(("right", level[pos + 1]))
        else:
            path.append(("left", level[pos - 1]))
        level = [_hash_pair(level[i], level[i + 1]) for i in range(0, len(level), 2)]
        pos //= 2
    return path


def verify_path(leaf: bytes, path: list[tuple[str, bytes]], root: bytes) -> bool:
    """Recompute the root from a leaf and its sibling path."""
    node = leaf
    for side, sibling in path:
        if side == "left":
            node = _hash_pair(sibling, node)
        elif side == "right":
            node = _hash_pair(node, sibling)
        else:
            return False
    return node == root
