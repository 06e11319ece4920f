# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled numeric kernels.

Same interface and per-element semantics as ``ccdim._pykernels``.  All loops
run without the GIL, so callers may fan blocks out over threads.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, sqrt, pow, fabs, floor, isfinite

from ._table import (
    BISECT_MAX_ITER, BISECT_WIDTH, ERR_DOMAIN, ERR_ZERO_DERIV, FORWARD,
    NEWTON_STEPS, raise_kernel_error,
)

cnp.import_array()

NAME = "cython"

DEF STACK = 64

cdef enum:
    OP_CONST = 0
    OP_X = 1
    OP_ADD = 2
    OP_SUB = 3
    OP_MUL = 4
    OP_DIV = 5
    OP_POW = 6
    OP_NEG = 7
    OP_SQRT = 8
    OP_EXP = 9
    OP_LOG = 10

cdef double c_bisect_width = BISECT_WIDTH
cdef int c_bisect_max = BISECT_MAX_ITER
cdef int c_newton = NEWTON_STEPS
cdef int ERR_DOMAIN_C = ERR_DOMAIN
cdef int ERR_ZERO_C = ERR_ZERO_DERIV
cdef int FORWARD_C = FORWARD


cdef struct Err:
    int code
    int bid
    int which
    int op
    double x


cdef struct Table:
    const int* ops
    const double* args
    const int* kind
    const int* p_off
    const int* p_len
    const int* d_off
    const int* d_len
    const double* dom_lo
    const double* dom_hi
    const int* inc
    const int* stage_branch
    int n_letters


cdef inline void goto_fault(Err* err, int bid, int which, int op, double x) noexcept nogil:
    if err.code == 0:
        err.code = ERR_DOMAIN_C
        err.bid = bid
        err.which = which
        err.op = op
        err.x = x


cdef inline double run(Table* t, int bid, int which, double x, Err* err) noexcept nogil:
    cdef double st[STACK]
    cdef int sp = 0
    cdef int i, op, off, n
    cdef double a, b, p, r
    if which == 0:
        off = t.p_off[bid]
        n = t.p_len[bid]
    else:
        off = t.d_off[bid]
        n = t.d_len[bid]
    for i in range(n):
        op = t.ops[off + i]
        if op == OP_CONST:
            st[sp] = t.args[off + i]
            sp += 1
            continue
        if op == OP_X:
            st[sp] = x
            sp += 1
            continue
        if op >= OP_ADD and op <= OP_DIV:
            sp -= 1
            b = st[sp]
            a = st[sp - 1]
            if op == OP_ADD:
                r = a + b
            elif op == OP_SUB:
                r = a - b
            elif op == OP_MUL:
                r = a * b
            else:
                if b == 0:
                    goto_fault(err, bid, which, i, x)
                    return 0.0
                r = a / b
        else:
            a = st[sp - 1]
            if op == OP_NEG:
                r = -a
            elif op == OP_POW:
                p = t.args[off + i]
                if (a == 0 and p < 0) or (a < 0 and p != floor(p)):
                    goto_fault(err, bid, which, i, x)
                    return 0.0
                r = pow(a, p)
            elif op == OP_SQRT:
                if a < 0:
                    goto_fault(err, bid, which, i, x)
                    return 0.0
                r = sqrt(a)
            elif op == OP_EXP:
                r = exp(a)
            else:
                if a <= 0:
                    goto_fault(err, bid, which, i, x)
                    return 0.0
                r = log(a)
        if not isfinite(r):
            goto_fault(err, bid, which, i, x)
            return 0.0
        st[sp - 1] = r
    return st[0]


cdef inline double invert(Table* t, int bid, double x, Err* err) noexcept nogil:
    cdef double u = t.dom_lo[bid]
    cdef double v = t.dom_hi[bid]
    cdef double lo = u, hi = v, mid, fm, g, y, fy, dy
    cdef int up = t.inc[bid]
    cdef int it = 0, k
    while hi - lo > c_bisect_width and it < c_bisect_max:
        mid = 0.5 * (lo + hi)
        fm = run(t, bid, 0, mid, err)
        if err.code:
            return 0.0
        if up:
            g = fm - x
        else:
            g = x - fm
        if g < 0:
            lo = mid
        else:
            hi = mid
        it += 1
    y = 0.5 * (lo + hi)
    for k in range(c_newton):
        fy = run(t, bid, 0, y, err)
        dy = run(t, bid, 1, y, err)
        if err.code:
            return 0.0
        if dy == 0:
            if err.code == 0:
                err.code = ERR_ZERO_C
                err.bid = bid
                err.which = 1
                err.op = 0
                err.x = x
            return 0.0
        y = y - (fy - x) / dy
        if y < u:
            y = u
        if y > v:
            y = v
    return y


cdef inline double apply_one(Table* t, int bid, double x, double* deriv, bint want, Err* err) noexcept nogil:
    cdef double y, df
    if t.kind[bid] == FORWARD_C:
        y = invert(t, bid, x, err)
        if want and err.code == 0:
            df = run(t, bid, 1, y, err)
            if err.code:
                return 0.0
            if df == 0 or not isfinite(1.0 / df):
                err.code = ERR_ZERO_C
                err.bid = bid
                err.which = 1
                err.op = 0
                err.x = x
                return 0.0
            deriv[0] = 1.0 / df
        return y
    y = run(t, bid, 0, x, err)
    if want:
        deriv[0] = run(t, bid, 1, x, err)
    return y


cdef class _Handle:
    """Keeps the table arrays alive while their raw pointers are in use."""
    cdef Table t
    cdef object keep

    def __cinit__(self, table):
        cdef const int[::1] ops = table.ops
        cdef const double[::1] args = table.args
        cdef const int[::1] kind = table.kind
        cdef const int[::1] p_off = table.p_off
        cdef const int[::1] p_len = table.p_len
        cdef const int[::1] d_off = table.d_off
        cdef const int[::1] d_len = table.d_len
        cdef const double[::1] lo = table.dom_lo
        cdef const double[::1] hi = table.dom_hi
        cdef const int[::1] inc = table.increasing
        sb = np.ascontiguousarray(table.stage_branch, dtype=np.int32).ravel()
        cdef const int[::1] stage_branch = sb
        self.keep = (table, sb)
        self.t.ops = &ops[0]
        self.t.args = &args[0]
        self.t.kind = &kind[0]
        self.t.p_off = &p_off[0]
        self.t.p_len = &p_len[0]
        self.t.d_off = &d_off[0]
        self.t.d_len = &d_len[0]
        self.t.dom_lo = &lo[0]
        self.t.dom_hi = &hi[0]
        self.t.inc = &inc[0]
        self.t.stage_branch = &stage_branch[0]
        self.t.n_letters = table.stage_branch.shape[1]


cdef _Handle _handle(table):
    h = table.__dict__.get("_chandle")
    if h is None:
        h = _Handle(table)
        object.__setattr__(table, "_chandle", h)
    return <_Handle>h


cdef _check(table, Err* err):
    if err.code:
        raise_kernel_error(table, err.code, err.bid, err.which, err.op, err.x)


def apply(table, int bid, xs):
    """phi_bid evaluated at every point of ``xs``."""
    cdef _Handle h = _handle(table)
    cdef const double[::1] x = np.ascontiguousarray(xs, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], i
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef Err err
    cdef double dummy
    err.code = 0
    with nogil:
        for i in range(n):
            o[i] = apply_one(&h.t, bid, x[i], &dummy, False, &err)
            if err.code:
                break
    _check(table, &err)
    return out


def apply_with_deriv(table, int bid, xs):
    """Return ``(phi(xs), phi'(xs))``."""
    cdef _Handle h = _handle(table)
    cdef const double[::1] x = np.ascontiguousarray(xs, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], i
    out = np.empty(n, dtype=np.float64)
    dout = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef double[::1] d = dout
    cdef Err err
    err.code = 0
    with nogil:
        for i in range(n):
            o[i] = apply_one(&h.t, bid, x[i], &d[i], True, &err)
            if err.code:
                break
    _check(table, &err)
    return out, dout


def fold(table, stages, words, xs, bint want_deriv=False):
    """Compose branch inverses right to left along each row of ``words``."""
    cdef _Handle h = _handle(table)
    cdef const int[::1] st = np.ascontiguousarray(stages, dtype=np.int32)
    cdef const int[:, ::1] w = np.ascontiguousarray(words, dtype=np.int32)
    cdef const double[::1] x0 = np.ascontiguousarray(xs, dtype=np.float64)
    cdef Py_ssize_t m = w.shape[0], length = w.shape[1], r
    cdef int i, bid, nl = h.t.n_letters
    vals = np.empty(m, dtype=np.float64)
    logd = np.zeros(m, dtype=np.float64)
    cdef double[::1] o = vals
    cdef double[::1] ld = logd
    cdef double x, d = 0.0
    cdef Err err
    err.code = 0
    with nogil:
        for r in range(m):
            x = x0[r]
            for i in range(length - 1, -1, -1):
                bid = h.t.stage_branch[st[i] * nl + w[r, i]]
                x = apply_one(&h.t, bid, x, &d, want_deriv, &err)
                if err.code:
                    break
                if want_deriv:
                    ld[r] += log(fabs(d))
            if err.code:
                break
            o[r] = x
    _check(table, &err)
    return vals, (logd if want_deriv else None)


def log_power_sum(logd, double t):
    """Return ``(shift, s)`` with ``sum(exp(t * logd)) == exp(shift) * s``.

    ``s`` is accumulated with Neumaier compensation in index order.
    """
    cdef const double[::1] a = np.ascontiguousarray(logd, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0], i
    cdef double mx, shift, s = 0.0, c = 0.0, term, tmp
    if n == 0:
        return 0.0, 0.0
    with nogil:
        mx = a[0]
        for i in range(1, n):
            if a[i] > mx:
                mx = a[i]
        shift = t * mx
        for i in range(n):
            term = exp(t * a[i] - shift)
            tmp = s + term
            if fabs(s) >= fabs(term):
                c += (s - tmp) + term
            else:
                c += (term - tmp) + s
            s = tmp
    return shift, s + c


def evaluate(table, int bid, int which, xs):
    """Raw program ``which`` (0 main, 1 derivative) of branch ``bid`` at ``xs``."""
    cdef _Handle h = _handle(table)
    cdef const double[::1] x = np.ascontiguousarray(xs, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], i
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef Err err
    err.code = 0
    with nogil:
        for i in range(n):
            o[i] = run(&h.t, bid, which, x[i], &err)
            if err.code:
                break
    _check(table, &err)
    return out
