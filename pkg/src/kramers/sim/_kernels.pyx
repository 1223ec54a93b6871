# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Euler-Maruyama loop for polynomial drifts.

Arithmetic order matches the numpy fallback term by term, so both backends
produce the same floating-point trajectories from the same stream.
"""
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport isfinite
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport random_standard_normal

cdef enum:
    MAXD = 8
    MAXP = 33

cdef const char *CAPSULE_NAME = "BitGenerator"

STATUS_HORIZON = 0
STATUS_TARGET = 1
STATUS_LEFT_BALL = 2
STATUS_NONFINITE = 3
STATUS_BUFFER_FULL = 4
MAX_DIM = MAXD
MAX_POWER = MAXP - 1


cdef inline void _powers(const double *x, int d, int maxp, double pw[MAXD][MAXP]) noexcept nogil:
    cdef int k, j
    for k in range(d):
        pw[k][0] = 1.0
        for j in range(1, maxp + 1):
            pw[k][j] = pw[k][j - 1] * x[k]


cdef inline double _term(double c, const int *e, int d, double pw[MAXD][MAXP]) noexcept nogil:
    cdef int k
    cdef double t = c
    for k in range(d):
        t = t * pw[k][e[k]]
    return t


cdef inline int _label(const double *x, int d, double pw[MAXD][MAXP],
                       const double[::1] ucoef, const int[:, ::1] uexps,
                       const double[:, ::1] centers, const double[::1] rho2,
                       const double[::1] uthr) noexcept nogil:
    cdef int nw = centers.shape[0]
    cdef int w, k, i
    cdef double u, r2, dx
    if nw == 0:
        return -1
    u = 0.0
    for i in range(ucoef.shape[0]):
        u = u + _term(ucoef[i], &uexps[i, 0], d, pw)
    for w in range(nw):
        if u <= uthr[w]:
            r2 = 0.0
            for k in range(d):
                dx = x[k] - centers[w, k]
                r2 = r2 + dx * dx
            if r2 <= rho2[w]:
                return w
    return -1


def run_path(object bit_generator, double[::1] x, long long n_steps, double dt, double noise,
             const double[::1] coef, const int[:, ::1] exps, const int[::1] comp, int maxp,
             const double[::1] ucoef, const int[:, ::1] uexps,
             const double[:, ::1] centers, const double[::1] rho2, const double[::1] uthr,
             const unsigned char[::1] stop_mask, const double[::1] ball_c, double ball_r2,
             long long[::1] ev_step, int[::1] ev_label, int label, long long step0):
    """Advance one path in place.

    Returns (status, steps_taken, n_events, label).  ``x`` holds the final
    state; events (absolute step, new label) are written to the buffers.
    """
    cdef int d = x.shape[0]
    cdef int nt = coef.shape[0]
    cdef int cap = ev_step.shape[0]
    cdef int nev = 0
    cdef int status = 0
    cdef long long s = 0
    cdef int i, k, lab
    cdef double r2, dx
    cdef double pw[MAXD][MAXP]
    cdef double b[MAXD]
    cdef double eta[MAXD]
    cdef double *xp = &x[0]
    cdef bint use_ball = ball_r2 >= 0.0
    cdef bint use_u = centers.shape[0] > 0
    cdef object capsule = bit_generator.capsule
    cdef bitgen_t *rng

    if d > MAXD or maxp > MAXP - 1:
        raise ValueError("dimension or degree too large for the compiled kernel")
    if not PyCapsule_IsValid(capsule, CAPSULE_NAME):
        raise ValueError("invalid bit generator capsule")
    rng = <bitgen_t *> PyCapsule_GetPointer(capsule, CAPSULE_NAME)

    with bit_generator.lock, nogil:
        while s < n_steps:
            if nev == cap:
                status = 4
                break
            for k in range(d):
                eta[k] = random_standard_normal(rng)
            _powers(xp, d, maxp, pw)
            for k in range(d):
                b[k] = 0.0
            for i in range(nt):
                b[comp[i]] = b[comp[i]] + _term(coef[i], &exps[i, 0], d, pw)
            for k in range(d):
                xp[k] = (xp[k] + b[k] * dt) + noise * eta[k]
            s += 1
            for k in range(d):
                if not isfinite(xp[k]):
                    status = 3
            if status == 3:
                break
            if use_u:
                _powers(xp, d, maxp, pw)
                lab = _label(xp, d, pw, ucoef, uexps, centers, rho2, uthr)
                if lab != label:
                    ev_step[nev] = step0 + s
                    ev_label[nev] = lab
                    nev += 1
                    label = lab
                if lab >= 0 and stop_mask[lab]:
                    status = 1
                    break
            if use_ball:
                r2 = 0.0
                for k in range(d):
                    dx = xp[k] - ball_c[k]
                    r2 = r2 + dx * dx
                if r2 > ball_r2:
                    status = 2
                    break
    return status, s, nev, label
