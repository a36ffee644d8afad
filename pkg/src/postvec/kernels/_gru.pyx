# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled GRU sequence kernels.

Same contract as ``postvec.kernels.numpy_backend`` (see that module for
the recurrence and the gate slice order). Per-step matrix products go
through BLAS dgemm via SciPy's Cython bindings; the elementwise gate
math is fused into plain C loops, which removes the per-step Python and
allocation overhead that dominates the NumPy backend on short
sequences.
"""

import numpy as np

from libc.math cimport exp, tanh
from scipy.linalg.cython_blas cimport dgemm


cdef inline double _sigmoid(double x) noexcept nogil:
    cdef double e
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


cdef inline void _gemm_rm(bint ta, bint tb, int m, int n, int k, double alpha,
                          double *a, int lda, double *b, int ldb,
                          double beta, double *c, int ldc) noexcept nogil:
    # Row-major C(m,n) = alpha*op(A)(m,k) @ op(B)(k,n) + beta*C, expressed
    # as the transposed problem for Fortran dgemm. lda/ldb/ldc are the
    # stored row strides in elements.
    cdef char cta = b'T'[0] if ta else b'N'[0]
    cdef char ctb = b'T'[0] if tb else b'N'[0]
    dgemm(&ctb, &cta, &n, &m, &k, &alpha, b, &ldb, a, &lda, &beta, c, &ldc)


def gru_forward(double[:, :, ::1] xp, double[:, ::1] u_r, double[:, ::1] u_z,
                double[:, ::1] u_h, double[:, ::1] mask):
    cdef int batch = xp.shape[0]
    cdef int steps = xp.shape[1]
    cdef int hidden = xp.shape[2] // 3

    h_arr = np.empty((batch, steps, hidden))
    r_arr = np.empty((batch, steps, hidden))
    z_arr = np.empty((batch, steps, hidden))
    c_arr = np.empty((batch, steps, hidden))
    cdef double[:, :, ::1] h = h_arr
    cdef double[:, :, ::1] r_all = r_arr
    cdef double[:, :, ::1] z_all = z_arr
    cdef double[:, :, ::1] c_all = c_arr

    # hp holds h_{t-1} contiguously; s_* hold gate pre-activations.
    cdef double[:, ::1] hp = np.zeros((batch, hidden))
    cdef double[:, ::1] s_r = np.empty((batch, hidden))
    cdef double[:, ::1] s_z = np.empty((batch, hidden))
    cdef double[:, ::1] s_c = np.empty((batch, hidden))
    cdef double[:, ::1] rhp = np.empty((batch, hidden))

    cdef int t, b, j
    cdef double rv, zv, cv, prev, hv

    with nogil:
        for t in range(steps):
            for b in range(batch):
                for j in range(hidden):
                    s_r[b, j] = xp[b, t, j]
                    s_z[b, j] = xp[b, t, hidden + j]
                    s_c[b, j] = xp[b, t, 2 * hidden + j]
            _gemm_rm(0, 1, batch, hidden, hidden, 1.0, &hp[0, 0], hidden,
                     &u_r[0, 0], hidden, 1.0, &s_r[0, 0], hidden)
            _gemm_rm(0, 1, batch, hidden, hidden, 1.0, &hp[0, 0], hidden,
                     &u_z[0, 0], hidden, 1.0, &s_z[0, 0], hidden)
            # reset gate first: the candidate sees r * h_prev
            for b in range(batch):
                for j in range(hidden):
                    rv = _sigmoid(s_r[b, j])
                    s_r[b, j] = rv
                    rhp[b, j] = rv * hp[b, j]
            _gemm_rm(0, 1, batch, hidden, hidden, 1.0, &rhp[0, 0], hidden,
                     &u_h[0, 0], hidden, 1.0, &s_c[0, 0], hidden)
            for b in range(batch):
                for j in range(hidden):
                    rv = s_r[b, j]
                    zv = _sigmoid(s_z[b, j])
                    cv = tanh(s_c[b, j])
                    prev = hp[b, j]
                    if mask[b, t] > 0.5:
                        hv = (1.0 - zv) * prev + zv * cv
                    else:
                        hv = prev
                    hp[b, j] = hv
                    h[b, t, j] = hv
                    r_all[b, t, j] = rv
                    z_all[b, t, j] = zv
                    c_all[b, t, j] = cv
    return h_arr, r_arr, z_arr, c_arr


def gru_backward(double[:, ::1] d_final, double[:, :, ::1] h,
                 double[:, :, ::1] r, double[:, :, ::1] z,
                 double[:, :, ::1] c, double[:, ::1] u_r,
                 double[:, ::1] u_z, double[:, ::1] u_h,
                 double[:, ::1] mask):
    cdef int batch = h.shape[0]
    cdef int steps = h.shape[1]
    cdef int hidden = h.shape[2]

    dxp_arr = np.zeros((batch, steps, 3 * hidden))
    du_r_arr = np.zeros((hidden, hidden))
    du_z_arr = np.zeros((hidden, hidden))
    du_h_arr = np.zeros((hidden, hidden))
    dh0_arr = np.empty((batch, hidden))
    cdef double[:, :, ::1] dxp = dxp_arr
    cdef double[:, ::1] du_r = du_r_arr
    cdef double[:, ::1] du_z = du_z_arr
    cdef double[:, ::1] du_h = du_h_arr
    cdef double[:, ::1] dh0 = dh0_arr

    cdef double[:, ::1] dh = np.array(d_final, copy=True)
    cdef double[:, ::1] dhp = np.empty((batch, hidden))
    cdef double[:, ::1] hp = np.empty((batch, hidden))
    cdef double[:, ::1] da_r = np.empty((batch, hidden))
    cdef double[:, ::1] da_z = np.empty((batch, hidden))
    cdef double[:, ::1] da_c = np.empty((batch, hidden))
    cdef double[:, ::1] drhp = np.empty((batch, hidden))
    cdef double[:, ::1] rhp = np.empty((batch, hidden))

    cdef int t, b, j
    cdef double rv, zv, cv, hpv, dhv, active
    cdef double[:, ::1] swap

    with nogil:
        for t in range(steps - 1, -1, -1):
            if t > 0:
                for b in range(batch):
                    for j in range(hidden):
                        hp[b, j] = h[b, t - 1, j]
            else:
                for b in range(batch):
                    for j in range(hidden):
                        hp[b, j] = 0.0

            for b in range(batch):
                active = 1.0 if mask[b, t] > 0.5 else 0.0
                for j in range(hidden):
                    rv = r[b, t, j]
                    zv = z[b, t, j]
                    cv = c[b, t, j]
                    hpv = hp[b, j]
                    dhv = dh[b, j]
                    da_c[b, j] = active * (dhv * zv * (1.0 - cv * cv))
                    da_z[b, j] = active * (dhv * (cv - hpv) * zv * (1.0 - zv))
                    # masked steps pass the state gradient straight through
                    dhp[b, j] = active * (dhv * (1.0 - zv)) + (1.0 - active) * dhv
                    rhp[b, j] = rv * hpv

            _gemm_rm(0, 0, batch, hidden, hidden, 1.0, &da_c[0, 0], hidden,
                     &u_h[0, 0], hidden, 0.0, &drhp[0, 0], hidden)
            for b in range(batch):
                for j in range(hidden):
                    rv = r[b, t, j]
                    da_r[b, j] = drhp[b, j] * hp[b, j] * rv * (1.0 - rv)
                    dhp[b, j] += drhp[b, j] * rv

            _gemm_rm(0, 0, batch, hidden, hidden, 1.0, &da_r[0, 0], hidden,
                     &u_r[0, 0], hidden, 1.0, &dhp[0, 0], hidden)
            _gemm_rm(0, 0, batch, hidden, hidden, 1.0, &da_z[0, 0], hidden,
                     &u_z[0, 0], hidden, 1.0, &dhp[0, 0], hidden)

            _gemm_rm(1, 0, hidden, hidden, batch, 1.0, &da_r[0, 0], hidden,
                     &hp[0, 0], hidden, 1.0, &du_r[0, 0], hidden)
            _gemm_rm(1, 0, hidden, hidden, batch, 1.0, &da_z[0, 0], hidden,
                     &hp[0, 0], hidden, 1.0, &du_z[0, 0], hidden)
            _gemm_rm(1, 0, hidden, hidden, batch, 1.0, &da_c[0, 0], hidden,
                     &rhp[0, 0], hidden, 1.0, &du_h[0, 0], hidden)

            for b in range(batch):
                for j in range(hidden):
                    dxp[b, t, j] = da_r[b, j]
                    dxp[b, t, hidden + j] = da_z[b, j]
                    dxp[b, t, 2 * hidden + j] = da_c[b, j]

            swap = dh
            dh = dhp
            dhp = swap

        for b in range(batch):
            for j in range(hidden):
                dh0[b, j] = dh[b, j]
    return dxp_arr, du_r_arr, du_z_arr, du_h_arr, dh0_arr
