"""Pure-Python twin of the compiled kernels (same signatures, same results)."""

import heapq
import math

import numpy as np


def distances(indptr, nbr, eid, length, removed, source, stop=-1):
    if isinstance(indptr, np.ndarray):
        indptr, nbr, eid = indptr.tolist(), nbr.tolist(), eid.tolist()
        length, removed = length.tolist(), removed.tolist()
    n = len(indptr) - 1
    dist = [math.inf] * n
    done = [False] * n
    dist[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        d_u, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        if u == stop:
            break
        for k in range(indptr[u], indptr[u + 1]):
            e = eid[k]
            if removed[e]:
                continue
            w = nbr[k]
            if done[w]:
                continue
            d = d_u + length[e]
            if d < dist[w]:
                dist[w] = d
                heapq.heappush(heap, (d, w))
    return np.asarray(dist, dtype=np.float64)


def shortest_path(indptr, nbr, eid, length, removed, start, goal, tol):
    indptr = indptr.tolist()
    nbr = nbr.tolist()
    eid = eid.tolist()
    length = length.tolist()
    removed = removed.tolist()
    dist = distances(indptr, nbr, eid, length, removed, goal, start).tolist()
    if dist[start] == math.inf:
        return None
    n = len(indptr) - 1
    verts, edges = [start], []
    u = start
    while u != goal:
        for k in range(indptr[u], indptr[u + 1]):
            e = eid[k]
            w = nbr[k]
            if removed[e] or dist[w] == math.inf:
                continue
            if abs(length[e] + dist[w] - dist[u]) <= tol:
                break
        else:
            raise RuntimeError("shortest-path walk lost the tight edge")
        verts.append(w)
        edges.append(e)
        u = w
        if len(edges) > n:
            raise RuntimeError("shortest-path walk lost the tight edge")
    return verts, edges
