"""Pure-Python simulation kernel; mirrors ``_kernel.pyx`` line for line."""
import math

INPUT, SUM, NONLINEAR, LINEAR, OUTPUT = 0, 1, 2, 3, 4


def run(prog, u, y, xstate, ystate, guard):
    """Advance the compiled graph over ``u``, writing ``y``.

    Returns -1 on success, or the sample index at which a node value left
    ``[-guard, guard]`` (or became NaN).
    """
    order = prog.order.tolist()
    kind = prog.kind.tolist()
    in_ptr = prog.in_ptr.tolist()
    in_src = prog.in_src.tolist()
    in_gain = prog.in_gain.tolist()
    direct = prog.lin_direct.tolist()
    b_ptr, nbc, b_all = prog.b_ptr.tolist(), prog.nbc.tolist(), prog.b_all.tolist()
    a_ptr, nac, a_all = prog.a_ptr.tolist(), prog.nac.tolist(), prog.a_all.tolist()
    xs_ptr, ys_ptr = prog.xs_ptr.tolist(), prog.ys_ptr.tolist()
    bp_ptr, nbp, bp_all = prog.bp_ptr.tolist(), prog.nbp.tolist(), prog.bp_all.tolist()
    c_ptr, ncoef, c_all = prog.coef_ptr.tolist(), prog.ncoef.tolist(), prog.coef_all.tolist()
    lin_nodes = prog.lin_nodes.tolist()
    delayed = [n for n in lin_nodes if not direct[n]]
    out_node = prog.output
    xs = xstate.tolist()
    ys = ystate.tolist()
    vals = [0.0] * len(kind)

    def gather(n):
        s = 0.0
        for e in range(in_ptr[n], in_ptr[n + 1]):
            s += in_gain[e] * vals[in_src[e]]
        return s

    for t in range(len(u)):
        for n in lin_nodes:
            p = xs_ptr[n]
            for i in range(nbc[n] - 1, 0, -1):
                xs[p + i] = xs[p + i - 1]
        for n in order:
            k = kind[n]
            if k == INPUT:
                v = u[t]
            elif k == LINEAR:
                p, q = xs_ptr[n], ys_ptr[n]
                if direct[n]:
                    xs[p] = gather(n)
                v = 0.0
                bo = b_ptr[n]
                for i in range(nbc[n]):
                    v += b_all[bo + i] * xs[p + i]
                ao = a_ptr[n]
                for j in range(nac[n]):
                    v -= a_all[ao + j] * ys[q + j]
                for j in range(nac[n] - 1, 0, -1):
                    ys[q + j] = ys[q + j - 1]
                if nac[n]:
                    ys[q] = v
            else:
                s = gather(n)
                if k == NONLINEAR:
                    bo, nb = bp_ptr[n], nbp[n]
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
            if not (abs(v) <= guard):
                xstate[:] = xs
                ystate[:] = ys
                return t
            vals[n] = v
        for n in delayed:
            xs[xs_ptr[n]] = gather(n)
        y[t] = vals[out_node]
    xstate[:] = xs
    ystate[:] = ys
    return -1
