# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-sample recursion over a flattened block graph."""
from libc.math cimport fabs

cdef enum:
    INPUT = 0
    SUM = 1
    NONLINEAR = 2
    LINEAR = 3
    OUTPUT = 4


cdef inline double _gather(Py_ssize_t n, const int[:] in_ptr, const int[:] in_src,
                           const double[:] in_gain, double[:] vals) noexcept nogil:
    cdef double s = 0.0
    cdef Py_ssize_t e
    for e in range(in_ptr[n], in_ptr[n + 1]):
        s += in_gain[e] * vals[in_src[e]]
    return s


def run(prog, const double[:] u, double[:] y, double[:] xs, double[:] ys, double guard):
    """Advance the compiled graph over ``u``, writing ``y``.

    Returns -1 on success, or the sample index at which a node value left
    ``[-guard, guard]`` (or became NaN).
    """
    cdef const int[:] order = prog.order
    cdef const int[:] kind = prog.kind
    cdef const int[:] in_ptr = prog.in_ptr
    cdef const int[:] in_src = prog.in_src
    cdef const double[:] in_gain = prog.in_gain
    cdef const int[:] direct = prog.lin_direct
    cdef const int[:] b_ptr = prog.b_ptr
    cdef const int[:] nbc = prog.nbc
    cdef const double[:] b_all = prog.b_all
    cdef const int[:] a_ptr = prog.a_ptr
    cdef const int[:] nac = prog.nac
    cdef const double[:] a_all = prog.a_all
    cdef const int[:] xs_ptr = prog.xs_ptr
    cdef const int[:] ys_ptr = prog.ys_ptr
    cdef const int[:] bp_ptr = prog.bp_ptr
    cdef const int[:] nbp = prog.nbp
    cdef const double[:] bp_all = prog.bp_all
    cdef const int[:] c_ptr = prog.coef_ptr
    cdef const int[:] ncoef = prog.ncoef
    cdef const double[:] c_all = prog.coef_all
    cdef const int[:] lin_nodes = prog.lin_nodes
    cdef int out_node = prog.output
    cdef double[:] vals = prog.scratch()

    cdef Py_ssize_t T = u.shape[0]
    cdef Py_ssize_t n_order = order.shape[0]
    cdef Py_ssize_t n_lin = lin_nodes.shape[0]
    cdef Py_ssize_t t, oi, li, i, j, p, q, bo, ao, co, seg, nb, m
    cdef int n, k
    cdef double v, s
    cdef Py_ssize_t failed = -1

    with nogil:
        for t in range(T):
            for li in range(n_lin):
                n = lin_nodes[li]
                p = xs_ptr[n]
                for i in range(nbc[n] - 1, 0, -1):
                    xs[p + i] = xs[p + i - 1]
            for oi in range(n_order):
                n = order[oi]
                k = kind[n]
                if k == INPUT:
                    v = u[t]
                elif k == LINEAR:
                    p = xs_ptr[n]
                    q = ys_ptr[n]
                    if direct[n]:
                        xs[p] = _gather(n, in_ptr, in_src, in_gain, vals)
                    v = 0.0
                    bo = b_ptr[n]
                    for i in range(nbc[n]):
                        v += b_all[bo + i] * xs[p + i]
                    ao = a_ptr[n]
                    for j in range(nac[n]):
                        v -= a_all[ao + j] * ys[q + j]
                    for j in range(nac[n] - 1, 0, -1):
                        ys[q + j] = ys[q + j - 1]
                    if nac[n] > 0:
                        ys[q] = v
                else:
                    s = _gather(n, in_ptr, in_src, in_gain, vals)
                    if k == NONLINEAR:
                        bo = bp_ptr[n]
                        nb = nbp[n]
                        seg = 0
                        while seg < nb and s >= bp_all[bo + seg]:
                            seg += 1
                        m = ncoef[n]
                        co = c_ptr[n] + seg * m
                        v = 0.0
                        for i in range(m - 1, -1, -1):
                            v = v * s + c_all[co + i]
                    else:
                        v = s
                if not (fabs(v) <= guard):
                    failed = t
                    break
                vals[n] = v
            if failed >= 0:
                break
            for li in range(n_lin):
                n = lin_nodes[li]
                if not direct[n]:
                    xs[xs_ptr[n]] = _gather(n, in_ptr, in_src, in_gain, vals)
            y[t] = vals[out_node]
    return failed
