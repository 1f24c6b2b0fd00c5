# Compiled versions of the per-step hot loops. Every routine mirrors the
# numpy implementation in _pykernels.py operation for operation, so both
# backends round identically.
#
# Arrays are 2D (rows, cells) with the sweep axis last and C-contiguous.
# A ghost-extended row holds n+4 values (two ghosts per side); interface j
# (0 <= j <= n) sits between extended cells j+1 and j+2.

from libc.math cimport fabs, fmax

cdef double THETA_EPS = 1e-14


cdef inline double _half_slope(double l, double m, double r) noexcept nogil:
    cdef double den = r - m
    cdef double num = m - l
    cdef double scale = fmax(fmax(fabs(l), fabs(m)), fmax(fabs(r), 1.0))
    cdef double theta, a, phi
    if fabs(den) >= THETA_EPS * scale:
        theta = num / den
        a = fabs(theta)
        phi = (theta + a) / (1.0 + a)
        return 0.5 * phi * den
    return 0.0


def muscl_traces(const double[:, ::1] ue, double[:, ::1] um, double[:, ::1] up):
    """Van Leer limited traces on both sides of every interface."""
    cdef Py_ssize_t rows = ue.shape[0]
    cdef Py_ssize_t nf = um.shape[1]
    cdef Py_ssize_t r, j
    cdef double sl, sr
    with nogil:
        for r in range(rows):
            sl = _half_slope(ue[r, 0], ue[r, 1], ue[r, 2])
            for j in range(nf):
                # each cell slope is computed once and reused by both faces
                sr = _half_slope(ue[r, j + 1], ue[r, j + 2], ue[r, j + 3])
                um[r, j] = ue[r, j + 1] + sl
                up[r, j] = ue[r, j + 2] - sr
                sl = sr


def fu_linear(const double[:, ::1] ue, const double[:, ::1] he, const double[:, ::1] dV,
              const double[::1] dist, bint second_order,
              double[:, ::1] F, double[:, ::1] A, double[:, ::1] um, double[:, ::1] up):
    """Fully upwind flux for linear convection: ``F = A+ u- - A- u+``.

    ``he`` holds h(U) on extended cells 1..n+2, ``dV`` the potential jump
    quotient per interface, ``dist`` the centre distances.
    """
    cdef Py_ssize_t rows = ue.shape[0]
    cdef Py_ssize_t nf = F.shape[1]
    cdef Py_ssize_t r, j
    cdef double a, lo, hi, sl = 0.0, sr
    with nogil:
        for r in range(rows):
            if second_order:
                sl = _half_slope(ue[r, 0], ue[r, 1], ue[r, 2])
            for j in range(nf):
                a = -dV[r, j] - (he[r, j + 1] - he[r, j]) / dist[j]
                A[r, j] = a
                if second_order:
                    sr = _half_slope(ue[r, j + 1], ue[r, j + 2], ue[r, j + 3])
                    lo = ue[r, j + 1] + sl
                    hi = ue[r, j + 2] - sr
                    sl = sr
                else:
                    lo = ue[r, j + 1]
                    hi = ue[r, j + 2]
                um[r, j] = lo
                up[r, j] = hi
                F[r, j] = fmax(a, 0.0) * lo - fmax(-a, 0.0) * hi


def divergence(const double[:, ::1] F, const double[::1] width, double[:, ::1] out):
    """``out[:, i] += -(F[:, i+1] - F[:, i]) / width[i]``."""
    cdef Py_ssize_t rows = out.shape[0]
    cdef Py_ssize_t n = out.shape[1]
    cdef Py_ssize_t r, i
    with nogil:
        for r in range(rows):
            for i in range(n):
                out[r, i] += -(F[r, i + 1] - F[r, i]) / width[i]
