# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``_kernels_py`` for the reference versions."""
import numpy as np

from libc.math cimport sqrt, sin, cos, fabs, INFINITY, M_PI


def max_phase_errors(const double[::1] y, const double[::1] z, double wavelength,
                     R, theta, phi):
    cdef const double[::1] Rv = np.ascontiguousarray(R, dtype=np.float64)
    cdef const double[::1] tv = np.ascontiguousarray(theta, dtype=np.float64)
    cdef const double[::1] pv = np.ascontiguousarray(phi, dtype=np.float64)
    cdef Py_ssize_t P = Rv.shape[0], N = y.shape[0], p, n
    out = np.empty(P)
    cdef double[::1] ov = out
    cdef double r, st, ux, uy, uz, a, d, lin, e, best, dy, dz
    cdef double k0 = 2.0 * M_PI / wavelength
    with nogil:
        for p in range(P):
            r = Rv[p]
            st = sin(tv[p])
            ux = r * st * cos(pv[p])
            uy = r * st * sin(pv[p])
            uz = r * cos(tv[p])
            best = -INFINITY
            for n in range(N):
                a = (y[n] * uy + z[n] * uz) / r
                dy = uy - y[n]
                dz = uz - z[n]
                d = sqrt(ux * ux + dy * dy + dz * dz)
                lin = r - a
                if lin > 0:
                    e = (y[n] * y[n] + z[n] * z[n] - a * a) / (d + lin)
                else:
                    e = d - lin
                if e > best:
                    best = e
            ov[p] = k0 * best
    return out


def column_losses(AT, g, Py_ssize_t n_near):
    cdef const double complex[:, ::1] A = np.ascontiguousarray(AT, dtype=np.complex128)
    cdef const double complex[::1] gv = np.ascontiguousarray(g, dtype=np.complex128)
    cdef Py_ssize_t C = A.shape[0], k = A.shape[1], i, q
    out = np.empty(C)
    cdef double[::1] ov = out
    cdef double acc, nrm, ar, ai, gr, gi, dr, di, pr, pi, rr, ri
    with nogil:
        for i in range(C):
            acc = 0.0
            if i < n_near:
                for q in range(k):
                    rr = gv[q].real - A[i, q].real
                    ri = gv[q].imag - A[i, q].imag
                    acc = acc + rr * rr + ri * ri
                ov[i] = sqrt(acc)
                continue
            nrm = 0.0
            dr = 0.0
            di = 0.0
            for q in range(k):
                ar = A[i, q].real
                ai = A[i, q].imag
                gr = gv[q].real
                gi = gv[q].imag
                nrm = nrm + ar * ar + ai * ai
                dr = dr + ar * gr + ai * gi
                di = di + ar * gi - ai * gr
            if nrm == 0.0:
                ov[i] = INFINITY
                continue
            pr = dr / nrm
            pi = di / nrm
            for q in range(k):
                ar = A[i, q].real
                ai = A[i, q].imag
                rr = gv[q].real - (pr * ar - pi * ai)
                ri = gv[q].imag - (pr * ai + pi * ar)
                acc = acc + rr * rr + ri * ri
            ov[i] = sqrt(acc)
    return out


cdef int _ridged_inverse(const double complex[:, ::1] ds, const double[:, ::1] Jh,
                         const double complex[::1] beta, double ridge, double scale,
                         double complex* m, double* Jinv, double* cond) noexcept nogil:
    cdef Py_ssize_t P = ds.shape[0], N = ds.shape[1], i, j, n
    cdef double J[9]
    cdef double det, a1, a2, c
    cdef double complex acc
    for i in range(P):
        acc = 0.0
        for n in range(N):
            acc = acc + ds[i, n] * beta[n]
        m[i] = acc
    for i in range(P):
        for j in range(P):
            J[i * P + j] = 0.5 * (Jh[i, j] + Jh[j, i]) + scale * (
                m[i].real * m[j].real + m[i].imag * m[j].imag)
        J[i * P + i] += ridge
    if P == 2:
        det = J[0] * J[3] - J[1] * J[2]
        if det == 0.0:
            return -1
        Jinv[0] = J[3] / det
        Jinv[1] = -J[1] / det
        Jinv[2] = -J[2] / det
        Jinv[3] = J[0] / det
    elif P == 3:
        Jinv[0] = J[4] * J[8] - J[5] * J[7]
        Jinv[1] = J[2] * J[7] - J[1] * J[8]
        Jinv[2] = J[1] * J[5] - J[2] * J[4]
        Jinv[3] = J[5] * J[6] - J[3] * J[8]
        Jinv[4] = J[0] * J[8] - J[2] * J[6]
        Jinv[5] = J[2] * J[3] - J[0] * J[5]
        Jinv[6] = J[3] * J[7] - J[4] * J[6]
        Jinv[7] = J[1] * J[6] - J[0] * J[7]
        Jinv[8] = J[0] * J[4] - J[1] * J[3]
        det = J[0] * Jinv[0] + J[1] * Jinv[3] + J[2] * Jinv[6]
        if det == 0.0:
            return -1
        for i in range(9):
            Jinv[i] /= det
    else:
        return -2
    # 1-norm condition number
    a1 = 0.0
    a2 = 0.0
    for j in range(P):
        c = 0.0
        for i in range(P):
            c += fabs(J[i * P + j])
        if c > a1:
            a1 = c
        c = 0.0
        for i in range(P):
            c += fabs(Jinv[i * P + j])
        if c > a2:
            a2 = c
    cond[0] = a1 * a2
    return 0


cdef int _objective(const double complex[:, ::1] ds, const double[:, ::1] Jh,
                    const double complex[::1] beta, const double[::1] w, double ridge,
                    double scale, double* val, double* cond) noexcept nogil:
    cdef double complex m[3]
    cdef double Jinv[9]
    cdef Py_ssize_t P = ds.shape[0], i
    cdef int status = _ridged_inverse(ds, Jh, beta, ridge, scale, m, Jinv, cond)
    if status < 0:
        val[0] = INFINITY
        cond[0] = INFINITY
        return status
    val[0] = 0.0
    for i in range(P):
        val[0] += w[i] * Jinv[i * P + i]
    return 0


cdef int _gradient(const double complex[:, ::1] ds, const double[:, ::1] Jh,
                   const double complex[::1] beta, const double[::1] w, double ridge,
                   double scale, double complex[::1] out, double* cond) noexcept nogil:
    cdef double complex m[3]
    cdef double complex v[3]
    cdef double Jinv[9]
    cdef double M[9]
    cdef double acc
    cdef Py_ssize_t P = ds.shape[0], N = ds.shape[1], i, j, l, n
    cdef int status = _ridged_inverse(ds, Jh, beta, ridge, scale, m, Jinv, cond)
    if status < 0:
        cond[0] = INFINITY
        return status
    for i in range(P):
        for j in range(P):
            acc = 0.0
            for l in range(P):
                acc += Jinv[i * P + l] * w[l] * Jinv[l * P + j]
            M[i * P + j] = acc
    for i in range(P):
        v[i] = 0.0
        for j in range(P):
            v[i] = v[i] + M[i * P + j] * m[j]
    for n in range(N):
        out[n] = 0.0
        for i in range(P):
            out[n] = out[n] + (ds[i, n].real - 1j * ds[i, n].imag) * v[i]
        out[n] = -2.0 * scale * out[n]
    return 0


def crb_objective(const double complex[:, ::1] ds, const double[:, ::1] J_hist,
                  const double complex[::1] beta, weights, double ridge, double scale):
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef double cond = INFINITY, val = INFINITY
    cdef int status
    with nogil:
        status = _objective(ds, J_hist, beta, w, ridge, scale, &val, &cond)
    if status == -2:
        raise ValueError("only 2 or 3 parameters are supported")
    return val, cond


def crb_gradient(const double complex[:, ::1] ds, const double[:, ::1] J_hist,
                 const double complex[::1] beta, weights, double ridge, double scale):
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef double cond = INFINITY
    cdef int status
    out = np.empty(ds.shape[1], dtype=np.complex128)
    cdef double complex[::1] ov = out
    with nogil:
        status = _gradient(ds, J_hist, beta, w, ridge, scale, ov, &cond)
    if status == -2:
        raise ValueError("only 2 or 3 parameters are supported")
    if status < 0:
        out[:] = np.nan
    return out, cond


def riemannian_descent(const double complex[:, ::1] ds, const double[:, ::1] J_hist, beta0,
                       weights, double ridge, double scale, double cond_cap, double f0,
                       double tol, Py_ssize_t max_iterations, double initial_step,
                       double backtrack, double armijo, Py_ssize_t max_backtracks):
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    if ds.shape[0] not in (2, 3):
        raise ValueError("only 2 or 3 parameters are supported")
    cdef Py_ssize_t N = ds.shape[1], n, it, b, iterations = 0
    beta_arr = np.array(beta0, dtype=np.complex128)
    trial_arr = np.empty(N, dtype=np.complex128)
    grad_arr = np.empty(N, dtype=np.complex128)
    objectives = np.empty(max_iterations + 1)
    cdef double complex[::1] beta = beta_arr
    cdef double complex[::1] trial = trial_arr
    cdef double complex[::1] grad = grad_arr
    cdef double[::1] objv = objectives
    cdef double f = f0, f_trial, cond = 0.0, peak, slope, step, re, mag
    cdef double complex r, t
    cdef int status = 1, accepted
    cdef Py_ssize_t count = 1
    objv[0] = f0
    with nogil:
        for it in range(1, max_iterations + 1):
            iterations = it
            if _gradient(ds, J_hist, beta, w, ridge, scale, grad, &cond) < 0 or not cond <= cond_cap:
                status = 4
                break
            peak = 0.0
            slope = 0.0
            for n in range(N):
                re = grad[n].real * beta[n].real + grad[n].imag * beta[n].imag
                r = grad[n] - re * beta[n]
                grad[n] = r
                mag = sqrt(r.real * r.real + r.imag * r.imag)
                if not mag <= peak:
                    peak = mag
                slope -= r.real * r.real + r.imag * r.imag
            if peak == 0.0:
                status = 3
                break
            if not peak < INFINITY:
                status = 5
                break
            step = initial_step / peak
            accepted = 0
            for b in range(max_backtracks):
                for n in range(N):
                    t = beta[n] - step * grad[n]
                    mag = sqrt(t.real * t.real + t.imag * t.imag)
                    trial[n] = t / mag
                _objective(ds, J_hist, trial, w, ridge, scale, &f_trial, &cond)
                if not cond <= cond_cap:
                    f_trial = INFINITY
                if f_trial < INFINITY and f_trial <= f + armijo * step * slope:
                    accepted = 1
                    break
                step *= backtrack
            if not accepted:
                status = 2
                break
            for n in range(N):
                beta[n] = trial[n]
            objv[count] = f_trial
            count += 1
            if f - f_trial < tol:
                f = f_trial
                status = 0
                break
            f = f_trial
    return beta_arr, f, objectives[:count].copy(), iterations, status, cond
