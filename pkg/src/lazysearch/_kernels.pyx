# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled shortest-path kernels.

Mirrors ``_kernels_py`` function for function; ``lazysearch.kernels`` picks
whichever is importable. Graphs arrive in CSR form with neighbours sorted by
(vertex index, edge id), which is what makes the forward walk lexicographic.
"""

from libc.math cimport INFINITY, fabs
from libc.stdlib cimport free, malloc

import numpy as np


cdef struct HeapItem:
    double key
    int vertex


cdef inline void _push(HeapItem* heap, int* size, double key, int vertex) noexcept nogil:
    cdef int i = size[0]
    cdef int parent
    size[0] += 1
    while i > 0:
        parent = (i - 1) >> 1
        if heap[parent].key <= key:
            break
        heap[i] = heap[parent]
        i = parent
    heap[i].key = key
    heap[i].vertex = vertex


cdef inline HeapItem _pop(HeapItem* heap, int* size) noexcept nogil:
    cdef HeapItem top = heap[0]
    cdef HeapItem last
    cdef int i = 0
    cdef int child
    size[0] -= 1
    if size[0] == 0:
        return top
    last = heap[size[0]]
    while True:
        child = 2 * i + 1
        if child >= size[0]:
            break
        if child + 1 < size[0] and heap[child + 1].key < heap[child].key:
            child += 1
        if heap[child].key >= last.key:
            break
        heap[i] = heap[child]
        i = child
    heap[i] = last
    return top


cdef int _dijkstra(
    const int[::1] indptr,
    const int[::1] nbr,
    const int[::1] eid,
    const double[::1] length,
    const unsigned char[::1] removed,
    int source,
    int stop,
    double[::1] dist,
) except -1 nogil:
    cdef int n = indptr.shape[0] - 1
    cdef int cap = nbr.shape[0] + 1
    cdef int size = 0
    cdef int k, u, w, e
    cdef double d
    cdef HeapItem item
    cdef HeapItem* heap = <HeapItem*> malloc(cap * sizeof(HeapItem))
    cdef unsigned char* done = <unsigned char*> malloc(n * sizeof(unsigned char))
    if heap == NULL or done == NULL:
        free(heap)
        free(done)
        with gil:
            raise MemoryError()
    for k in range(n):
        dist[k] = INFINITY
        done[k] = 0
    dist[source] = 0.0
    _push(heap, &size, 0.0, source)
    while size > 0:
        item = _pop(heap, &size)
        u = item.vertex
        if done[u]:
            continue
        done[u] = 1
        if u == stop:
            break
        for k in range(indptr[u], indptr[u + 1]):
            e = eid[k]
            if removed[e]:
                continue
            w = nbr[k]
            if done[w]:
                continue
            d = item.key + length[e]
            if d < dist[w]:
                dist[w] = d
                _push(heap, &size, d, w)
    free(heap)
    free(done)
    return 0


def distances(indptr, nbr, eid, length, removed, int source, int stop=-1):
    """Single-source distances over edges not flagged in ``removed``."""
    cdef int n = indptr.shape[0] - 1
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] dist = out
    _dijkstra(indptr, nbr, eid, length, removed, source, stop, dist)
    return out


def shortest_path(indptr, nbr, eid, length, removed, int start, int goal, double tol):
    """Lexicographically smallest shortest start-goal path.

    Returns ``(vertex_indices, edge_ids)`` or ``None`` when the goal is cut
    off. Distances are taken towards the goal so the forward walk can pick the
    smallest tight neighbour at every step.
    """
    cdef const int[::1] ip = indptr
    cdef const int[::1] nb = nbr
    cdef const int[::1] ed = eid
    cdef const double[::1] ln = length
    cdef const unsigned char[::1] rm = removed
    cdef int n = ip.shape[0] - 1
    cdef double[::1] dist = np.empty(n, dtype=np.float64)
    cdef int u, w, k, e, chosen_w, chosen_e, steps
    _dijkstra(ip, nb, ed, ln, rm, goal, start, dist)
    if dist[start] == INFINITY:
        return None
    verts = [start]
    edges = []
    u = start
    steps = 0
    while u != goal:
        chosen_w = -1
        chosen_e = -1
        for k in range(ip[u], ip[u + 1]):
            e = ed[k]
            if rm[e]:
                continue
            w = nb[k]
            if dist[w] == INFINITY:
                continue
            if fabs(ln[e] + dist[w] - dist[u]) <= tol:
                chosen_w = w
                chosen_e = e
                break
        steps += 1
        if chosen_w < 0 or steps > n:
            raise RuntimeError("shortest-path walk lost the tight edge")
        verts.append(chosen_w)
        edges.append(chosen_e)
        u = chosen_w
    return verts, edges
