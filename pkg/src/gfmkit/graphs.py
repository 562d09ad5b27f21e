"""Small graph helpers shared by the automata, game and MDP code."""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components


def bits(mask: int):
    """Yield the indices of the set bits of ``mask``."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def scc_labels(n: int, src: Sequence[int], dst: Sequence[int]) -> np.ndarray:
    """Strongly connected component label per node."""
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    graph = csr_matrix((np.ones(len(src), dtype=np.int8), (src, dst)), shape=(n, n))
    _, labels = connected_components(graph, directed=True, connection="strong")
    return labels


def backward_reach(n: int, src: Sequence[int], dst: Sequence[int], targets: Iterable[int]) -> np.ndarray:
    """Boolean mask of nodes that can reach ``targets`` (inclusive)."""
    preds: list[list[int]] = [[] for _ in range(n)]
    for s, d in zip(src, dst):
        preds[d].append(s)
    mark = np.zeros(n, dtype=bool)
    stack = []
    for t in targets:
        if not mark[t]:
            mark[t] = True
            stack.append(t)
    while stack:
        v = stack.pop()
        for u in preds[v]:
            if not mark[u]:
                mark[u] = True
                stack.append(u)
    return mark
