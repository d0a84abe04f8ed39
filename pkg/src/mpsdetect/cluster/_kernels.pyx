# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled search kernels; behavioural twin of _kernels_py.

Keep the arithmetic (expressions and accumulation order) identical to
the pure-Python module so both backends return bit-identical results.
"""

from libc.math cimport exp, INFINITY
from libc.stdlib cimport free, malloc


cdef int _extend(const double* times, Py_ssize_t n, Py_ssize_t last, double prev_gap,
                 Py_ssize_t depth, Py_ssize_t* stack, Py_ssize_t min_size,
                 Py_ssize_t max_size, double ici_min, double ici_max,
                 double ratio_hi, double ratio_lo, list out) except -1:
    cdef Py_ssize_t j, i
    cdef double gap, t_last
    if depth >= max_size:
        return 0
    t_last = times[last]
    for j in range(last + 1, n):
        gap = times[j] - t_last
        if gap <= ici_min:
            continue
        if gap >= ici_max:
            break
        if prev_gap > 0.0:
            if gap >= prev_gap * ratio_hi:
                break
            if gap <= prev_gap * ratio_lo:
                continue
        stack[depth] = j
        if depth + 1 >= min_size:
            out.append(tuple([stack[i] for i in range(depth + 1)]))
        _extend(times, n, j, gap, depth + 1, stack, min_size, max_size,
                ici_min, ici_max, ratio_hi, ratio_lo, out)
    return 0


def enumerate_feasible(double[::1] times, double ici_min, double ici_max,
                       double consistency_max, Py_ssize_t min_size, Py_ssize_t max_size):
    """See _kernels_py.enumerate_feasible."""
    cdef Py_ssize_t n = times.shape[0]
    cdef list out = []
    if n == 0 or min_size > n:
        return out
    cdef double ratio_hi = exp(consistency_max)
    cdef double ratio_lo = exp(-consistency_max)
    cdef Py_ssize_t* stack = <Py_ssize_t*> malloc(max_size * sizeof(Py_ssize_t))
    if stack == NULL:
        raise MemoryError()
    cdef Py_ssize_t i
    try:
        for i in range(n):
            stack[0] = i
            _extend(&times[0], n, i, 0.0, 1, stack, min_size, max_size,
                    ici_min, ici_max, ratio_hi, ratio_lo, out)
    finally:
        free(stack)
    return out


cdef struct _BnBState:
    double best_u
    Py_ssize_t best_len
    Py_ssize_t* best_sel
    Py_ssize_t* sel


cdef void _descend(const unsigned long long* masks, const double* costs, Py_ssize_t n,
                   Py_ssize_t start, unsigned long long used, double total,
                   Py_ssize_t k, _BnBState* st) noexcept:
    cdef Py_ssize_t idx, i
    cdef double u, extended
    if k:
        u = 1.0 / k + total
        if u < st.best_u:
            st.best_u = u
            st.best_len = k
            for i in range(k):
                st.best_sel[i] = st.sel[i]
    for idx in range(start, n):
        if masks[idx] & used:
            continue
        extended = total + costs[idx]
        if extended >= st.best_u:
            break
        st.sel[k] = idx
        _descend(masks, costs, n, idx + 1, used | masks[idx], extended, k + 1, st)


def solve_disjoint(unsigned long long[::1] masks, double[::1] costs):
    """See _kernels_py.solve_disjoint."""
    cdef Py_ssize_t n = masks.shape[0]
    if n == 0:
        return (), INFINITY
    cdef _BnBState st
    st.best_u = INFINITY
    st.best_len = 0
    st.best_sel = <Py_ssize_t*> malloc(n * sizeof(Py_ssize_t))
    st.sel = <Py_ssize_t*> malloc(n * sizeof(Py_ssize_t))
    if st.best_sel == NULL or st.sel == NULL:
        free(st.best_sel)
        free(st.sel)
        raise MemoryError()
    cdef Py_ssize_t i
    try:
        _descend(&masks[0], &costs[0], n, 0, 0, 0.0, 0, &st)
        return tuple([st.best_sel[i] for i in range(st.best_len)]), st.best_u
    finally:
        free(st.best_sel)
        free(st.sel)
