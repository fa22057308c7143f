# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled conv/pool kernels. Mirrors ``_pykernels`` exactly in signature.

Matrix products go through BLAS dgemm on per-sample im2col buffers; the
row-major operands are handed to the column-major BLAS as their transposes.
"""

import numpy as np
cimport numpy as cnp
from libc.string cimport memcpy, memset
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()


def same_padding(Py_ssize_t taps):
    cdef Py_ssize_t left = (taps - 1) // 2
    return left, taps - 1 - left


cdef void _im2col(const double* xs, double* cols, double* xpad,
                  int length, int taps, int cin, int left) noexcept nogil:
    # xpad holds the zero-padded sample; row l of cols is xpad[l : l + taps]
    cdef int kc = taps * cin
    cdef int l
    memset(xpad, 0, (length + taps - 1) * cin * sizeof(double))
    memcpy(xpad + left * cin, xs, length * cin * sizeof(double))
    for l in range(length):
        memcpy(cols + l * kc, xpad + l * cin, kc * sizeof(double))


def conv1d_forward(const double[:, :, ::1] x, const double[:, :, ::1] w,
                   const double[::1] b):
    cdef int batch = x.shape[0], length = x.shape[1], cin = x.shape[2]
    cdef int filters = w.shape[0], taps = w.shape[1]
    cdef int kc = taps * cin
    cdef int left = (taps - 1) // 2
    out_arr = np.empty((batch, length, filters))
    cdef double[:, :, ::1] out = out_arr
    cdef double[:, ::1] cols = np.empty((length, kc))
    cdef double[::1] xpad = np.empty((length + taps - 1) * cin)
    cdef double one = 1.0, zero = 0.0
    cdef char tr = b'T', nt = b'N'
    cdef int i, l, f
    if batch == 0:
        return out_arr
    with nogil:
        for i in range(batch):
            _im2col(&x[i, 0, 0], &cols[0, 0], &xpad[0], length, taps, cin, left)
            # out_i^T (F x L) = Wmat (F x KC) @ cols^T (KC x L)
            dgemm(&tr, &nt, &filters, &length, &kc, &one,
                  <double*>&w[0, 0, 0], &kc, &cols[0, 0], &kc,
                  &zero, &out[i, 0, 0], &filters)
            for l in range(length):
                for f in range(filters):
                    out[i, l, f] += b[f]
    return out_arr


def conv1d_backward(const double[:, :, ::1] x, const double[:, :, ::1] w,
                    const double[:, :, ::1] dy, bint need_dw=True,
                    bint need_dx=True):
    cdef int batch = x.shape[0], length = x.shape[1], cin = x.shape[2]
    cdef int filters = w.shape[0], taps = w.shape[1]
    cdef int kc = taps * cin
    cdef int left = (taps - 1) // 2
    cdef double one = 1.0, zero = 0.0
    cdef char tr = b'T', nt = b'N'
    cdef int i, l, j, f
    cdef double[:, ::1] cols = np.empty((length, kc))
    cdef double[::1] xpad = np.empty((length + taps - 1) * cin)
    cdef double[:, ::1] dwm
    cdef double[::1] dbv
    cdef double[:, ::1] dcols
    cdef double[:, :, ::1] dxv
    cdef double* acc
    cdef const double* src
    dw_arr = db_arr = dx_arr = None

    if need_dw:
        dw_arr = np.zeros((filters, taps, cin))
        db_arr = np.zeros(filters)
        dwm = dw_arr.reshape(filters, kc)
        dbv = db_arr
        with nogil:
            for i in range(batch):
                _im2col(&x[i, 0, 0], &cols[0, 0], &xpad[0], length, taps, cin, left)
                # dWmat^T (KC x F) += cols^T (KC x L) @ dy_i (L x F)
                dgemm(&nt, &tr, &kc, &filters, &length, &one,
                      &cols[0, 0], &kc, <double*>&dy[i, 0, 0], &filters,
                      &one, &dwm[0, 0], &kc)
                for l in range(length):
                    for f in range(filters):
                        dbv[f] += dy[i, l, f]

    if need_dx:
        dx_arr = np.zeros((batch, length, cin))
        dxv = dx_arr
        dcols = np.empty((length, kc))
        acc = &xpad[0]
        with nogil:
            for i in range(batch):
                # dcols^T (KC x L) = Wmat^T (KC x F) @ dy_i^T (F x L)
                dgemm(&nt, &nt, &kc, &length, &filters, &one,
                      <double*>&w[0, 0, 0], &kc, <double*>&dy[i, 0, 0], &filters,
                      &zero, &dcols[0, 0], &kc)
                memset(acc, 0, (length + taps - 1) * cin * sizeof(double))
                for l in range(length):
                    src = &dcols[l, 0]
                    for j in range(kc):
                        acc[l * cin + j] += src[j]
                memcpy(&dxv[i, 0, 0], acc + left * cin, length * cin * sizeof(double))

    return dw_arr, db_arr, dx_arr


def maxpool_forward(const double[:, :, ::1] x, Py_ssize_t size):
    cdef Py_ssize_t batch = x.shape[0], length = x.shape[1], ch = x.shape[2]
    cdef Py_ssize_t out_len = length // size
    out_arr = np.empty((batch, out_len, ch))
    arg_arr = np.empty((batch, out_len, ch), dtype=np.intp)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t[:, :, ::1] arg = arg_arr
    cdef Py_ssize_t i, o, c, s, best
    cdef double v, m
    with nogil:
        for i in range(batch):
            for o in range(out_len):
                for c in range(ch):
                    m = x[i, o * size, c]
                    best = 0
                    for s in range(1, size):
                        v = x[i, o * size + s, c]
                        if v > m:
                            m = v
                            best = s
                    out[i, o, c] = m
                    arg[i, o, c] = best
    return out_arr, arg_arr


def maxpool_backward(const double[:, :, ::1] dy, const Py_ssize_t[:, :, ::1] arg,
                     Py_ssize_t size, Py_ssize_t length):
    cdef Py_ssize_t batch = dy.shape[0], out_len = dy.shape[1], ch = dy.shape[2]
    dx_arr = np.zeros((batch, length, ch))
    cdef double[:, :, ::1] dx = dx_arr
    cdef Py_ssize_t i, o, c
    with nogil:
        for i in range(batch):
            for o in range(out_len):
                for c in range(ch):
                    dx[i, o * size + arg[i, o, c], c] = dy[i, o, c]
    return dx_arr
