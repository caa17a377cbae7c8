# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Gibbs-sweep kernels for the binary alphabet (-1, +1).

Scan order is fixed ascending; site i of sweep t consumes uniforms[t, i].
The pure-Python twin in _kernels_py.py implements the same arithmetic in the
same order, so both backends emit bit-identical chains.
"""

from libc.math cimport exp


cdef inline double _p_minus(double b) noexcept:
    # P(x_i = -1 | neighbors), evaluated stably for any field magnitude.
    cdef double z = 2.0 * b
    cdef double e
    if z > 0.0:
        e = exp(-z)
        return e / (1.0 + e)
    e = exp(z)
    return 1.0 / (1.0 + e)


cdef inline void _sweep(double[::1] state,
                        const double[::1] h,
                        const Py_ssize_t[::1] indptr,
                        const Py_ssize_t[::1] targets,
                        const double[::1] weights,
                        const double[:] u) noexcept:
    cdef Py_ssize_t n = state.shape[0]
    cdef Py_ssize_t i, a
    cdef double b
    for i in range(n):
        b = h[i]
        for a in range(indptr[i], indptr[i + 1]):
            b += weights[a] * state[targets[a]]
        state[i] = -1.0 if u[i] < _p_minus(b) else 1.0


def run_sweeps_binary(double[::1] state,
                      const double[::1] h,
                      const Py_ssize_t[::1] indptr,
                      const Py_ssize_t[::1] targets,
                      const double[::1] weights,
                      const double[:, ::1] uniforms):
    """Run uniforms.shape[0] full sweeps, mutating state in place."""
    cdef Py_ssize_t t
    for t in range(uniforms.shape[0]):
        _sweep(state, h, indptr, targets, weights, uniforms[t])


def run_sweeps_binary_ordered(double[::1] state,
                              const double[::1] h,
                              const Py_ssize_t[::1] indptr,
                              const Py_ssize_t[::1] targets,
                              const double[::1] weights,
                              const double[:, ::1] uniforms,
                              const Py_ssize_t[:, ::1] orders):
    """Sweeps with an explicit site-visit order per sweep (random-scan support)."""
    cdef Py_ssize_t t, k, i, a
    cdef Py_ssize_t n = state.shape[0]
    cdef double b
    for t in range(uniforms.shape[0]):
        for k in range(n):
            i = orders[t, k]
            b = h[i]
            for a in range(indptr[i], indptr[i + 1]):
                b += weights[a] * state[targets[a]]
            state[i] = -1.0 if uniforms[t, k] < _p_minus(b) else 1.0


def run_chain_binary(double[::1] state,
                     const double[::1] h,
                     const Py_ssize_t[::1] indptr,
                     const Py_ssize_t[::1] targets,
                     const double[::1] weights,
                     const double[:, ::1] uniforms,
                     double[:, ::1] out,
                     Py_ssize_t interval):
    """Sweep and record: out[k] is the state after (k+1)*interval sweeps."""
    cdef Py_ssize_t n = state.shape[0]
    cdef Py_ssize_t k, t, i
    for k in range(out.shape[0]):
        for t in range(interval):
            _sweep(state, h, indptr, targets, weights, uniforms[k * interval + t])
        for i in range(n):
            out[k, i] = state[i]


def advance_bank_binary(double[:, ::1] states,
                        const double[::1] h,
                        const Py_ssize_t[::1] indptr,
                        const Py_ssize_t[::1] targets,
                        const double[::1] weights,
                        const double[:, :, ::1] uniforms):
    """Advance every chain by uniforms.shape[1] sweeps (chain c uses uniforms[c])."""
    cdef Py_ssize_t c, t
    for c in range(states.shape[0]):
        for t in range(uniforms.shape[1]):
            _sweep(states[c], h, indptr, targets, weights, uniforms[c, t])
