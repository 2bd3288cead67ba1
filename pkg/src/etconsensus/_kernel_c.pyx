# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled integration kernel; same contract as ``_kernel_py.Kernel``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sin, cos, fabs, isfinite

cnp.import_array()

DEF STATUS_DONE = 0
DEF STATUS_EVENT = 1
DEF STATUS_NONFINITE = 2


cdef class Kernel:
    cdef double[:, ::1] Acl, Bh, Pr, Es, Eh
    cdef Py_ssize_t[::1] edge_i, edge_j, ref_agent, ref_kind
    cdef double[::1] edge_w, ref_amp, ref_freq, ref_phase, ref_decay
    cdef public double alpha, mu, nu, theta, limit
    cdef public bint dac, triggers_enabled, has_refs
    cdef public Py_ssize_t n_agents, n_states
    # work buffers
    cdef double[::1] _h, _g, _g1, _g2, _g4, _rd, _k1, _k2, _k3, _k4, _tmp, _s1, _err, _dis, _f

    def __init__(self, Acl, Bh, Pr, Es, Eh, edge_i, edge_j, edge_w,
                 alpha, mu, nu, theta, dac,
                 ref_agent, ref_amp, ref_kind, ref_freq, ref_phase, ref_decay,
                 triggers_enabled=True, limit=1e9):
        f = lambda a: np.ascontiguousarray(a, dtype=float)
        self.Acl = f(Acl)
        self.Bh = f(Bh)
        self.Pr = f(Pr)
        self.Es = f(Es)
        self.Eh = f(Eh)
        self.edge_i = np.ascontiguousarray(edge_i, dtype=np.intp)
        self.edge_j = np.ascontiguousarray(edge_j, dtype=np.intp)
        self.edge_w = f(edge_w)
        self.alpha, self.mu, self.nu, self.theta = alpha, mu, nu, theta
        self.dac = dac
        self.ref_agent = np.ascontiguousarray(ref_agent, dtype=np.intp)
        self.ref_kind = np.ascontiguousarray(ref_kind, dtype=np.intp)
        self.ref_amp = f(ref_amp)
        self.ref_freq = f(ref_freq)
        self.ref_phase = f(ref_phase)
        self.ref_decay = f(ref_decay)
        self.triggers_enabled = triggers_enabled
        self.limit = limit
        self.n_agents = self.Eh.shape[0]
        self.n_states = self.Acl.shape[0]
        self.has_refs = self.ref_agent.shape[0] > 0
        n, N = self.n_states, self.n_agents
        self._h = np.zeros(N)
        self._rd = np.zeros(N)
        self._err = np.zeros(N)
        self._dis = np.zeros(N)
        self._f = np.zeros(N)
        self._g = np.zeros(n)
        self._g1 = np.zeros(n)
        self._g2 = np.zeros(n)
        self._g4 = np.zeros(n)
        self._k1 = np.zeros(n)
        self._k2 = np.zeros(n)
        self._k3 = np.zeros(n)
        self._k4 = np.zeros(n)
        self._tmp = np.zeros(n)
        self._s1 = np.zeros(n)

    # ---- internal C routines -------------------------------------------

    cdef void _held(self, double t, double[::1] hv, double[::1] hy, double[::1] ht, double[::1] out) noexcept nogil:
        cdef Py_ssize_t i
        cdef double d
        if not self.dac:
            for i in range(self.n_agents):
                out[i] = hv[i]
        else:
            for i in range(self.n_agents):
                d = exp(-self.theta * (t - ht[i]))
                out[i] = d * hv[i] + (1.0 - d) * hy[i]

    cdef void _rdot(self, double t, double[::1] out) noexcept nogil:
        cdef Py_ssize_t k
        cdef double env, ph, s, c, w, a
        for k in range(self.n_agents):
            out[k] = 0.0
        for k in range(self.ref_agent.shape[0]):
            a = self.ref_decay[k]
            w = self.ref_freq[k]
            env = self.ref_amp[k] * exp(-a * t)
            ph = w * t + self.ref_phase[k]
            s = sin(ph)
            c = cos(ph)
            if self.ref_kind[k] == 0:
                out[self.ref_agent[k]] += env * (w * c - a * s)
            else:
                out[self.ref_agent[k]] += env * (-w * s - a * c)

    cdef void _forcing(self, double t, double[::1] hv, double[::1] hy, double[::1] ht, double[::1] out) noexcept nogil:
        cdef Py_ssize_t r, c
        cdef double acc
        self._held(t, hv, hy, ht, self._h)
        if self.has_refs:
            self._rdot(t, self._rd)
        for r in range(self.n_states):
            acc = 0.0
            for c in range(self.n_agents):
                acc = acc + self.Bh[r, c] * self._h[c]
            if self.has_refs:
                for c in range(self.n_agents):
                    acc = acc + self.Pr[r, c] * self._rd[c]
            out[r] = acc

    cdef void _axpy_deriv(self, double[::1] s, double[::1] k_prev, double a, double[::1] g, double[::1] out) noexcept nogil:
        # out = Acl (s + a*k_prev) + g
        cdef Py_ssize_t r, c, n = self.n_states
        cdef double acc
        for c in range(n):
            self._tmp[c] = s[c] + a * k_prev[c]
        for r in range(n):
            acc = g[r]
            for c in range(n):
                acc = acc + self.Acl[r, c] * self._tmp[c]
            out[r] = acc

    cdef void _substep(self, double[::1] s, double t, double dt, double[::1] hv, double[::1] hy,
                       double[::1] ht, double[::1] out) noexcept nogil:
        cdef Py_ssize_t r, n = self.n_states
        if not self.dac and not self.has_refs:
            self._forcing(t, hv, hy, ht, self._g1)
            self._axpy_deriv(s, self._g1, 0.0, self._g1, self._k1)
            self._axpy_deriv(s, self._k1, 0.5 * dt, self._g1, self._k2)
            self._axpy_deriv(s, self._k2, 0.5 * dt, self._g1, self._k3)
            self._axpy_deriv(s, self._k3, dt, self._g1, self._k4)
        else:
            self._forcing(t, hv, hy, ht, self._g1)
            self._forcing(t + 0.5 * dt, hv, hy, ht, self._g2)
            self._forcing(t + dt, hv, hy, ht, self._g4)
            self._axpy_deriv(s, self._g1, 0.0, self._g1, self._k1)
            self._axpy_deriv(s, self._k1, 0.5 * dt, self._g2, self._k2)
            self._axpy_deriv(s, self._k2, 0.5 * dt, self._g2, self._k3)
            self._axpy_deriv(s, self._k3, dt, self._g4, self._k4)
        for r in range(n):
            out[r] = s[r] + (dt / 6.0) * (self._k1[r] + 2.0 * self._k2[r] + 2.0 * self._k3[r] + self._k4[r])

    cdef double _max_trigger(self, double[::1] s, double t, double[::1] hv, double[::1] hy,
                             double[::1] ht, double[::1] f) noexcept nogil:
        cdef Py_ssize_t i, j, k, N = self.n_agents
        cdef double acc, d, off, best
        self._held(t, hv, hy, ht, self._h)
        for i in range(N):
            acc = 0.0
            for j in range(N):
                acc = acc + self.Eh[i, j] * self._h[j]
            for j in range(self.n_states):
                acc = acc + self.Es[i, j] * s[j]
            self._err[i] = acc
            self._dis[i] = 0.0
        for k in range(self.edge_i.shape[0]):
            d = self._h[self.edge_i[k]] - self._h[self.edge_j[k]]
            d = self.edge_w[k] * d * d
            self._dis[self.edge_i[k]] += d
            self._dis[self.edge_j[k]] += d
        off = self.mu * exp(-self.nu * t)
        best = -1e300
        for i in range(N):
            f[i] = self._err[i] * self._err[i] - self.alpha * self._dis[i] - off
            if f[i] > best:
                best = f[i]
        return best

    # ---- Python-visible API ---------------------------------------------

    def held(self, double t, hv, hy, ht):
        out = np.zeros(self.n_agents)
        cdef double[::1] o = out
        self._held(t, _vec(hv), _vec(hy), _vec(ht), o)
        return out

    def rdot(self, double t):
        out = np.zeros(self.n_agents)
        cdef double[::1] o = out
        self._rdot(t, o)
        return out

    def deriv(self, double t, s, hv, hy, ht):
        out = np.zeros(self.n_states)
        cdef double[::1] o = out
        cdef double[::1] sv = _vec(s)
        self._forcing(t, _vec(hv), _vec(hy), _vec(ht), self._g)
        self._axpy_deriv(sv, sv, 0.0, self._g, o)
        return out

    def substep(self, s, double t, double dt, hv, hy, ht):
        out = np.zeros(self.n_states)
        cdef double[::1] o = out
        self._substep(_vec(s), t, dt, _vec(hv), _vec(hy), _vec(ht), o)
        return out

    def errors(self, s, double t, hv, hy, ht):
        self._max_trigger(_vec(s), t, _vec(hv), _vec(hy), _vec(ht), self._f)
        return np.array(self._err)

    def triggers(self, s, double t, hv, hy, ht):
        out = np.zeros(self.n_agents)
        cdef double[::1] o = out
        self._max_trigger(_vec(s), t, _vec(hv), _vec(hy), _vec(ht), o)
        return out

    def advance(self, double[::1] s, Py_ssize_t k0, Py_ssize_t k_end, double h,
                hv, hy, ht, Py_ssize_t dec,
                double[::1] out_t, double[:, ::1] out_s, double[:, ::1] out_h, double[:, ::1] out_hy):
        cdef double[::1] hvv = _vec(hv)
        cdef double[::1] hyv = _vec(hy)
        cdef double[::1] htv = _vec(ht)
        cdef Py_ssize_t k = k0, r, i
        cdef double t, t1
        cdef int status = STATUS_DONE
        cdef bint bad
        with nogil:
            while k < k_end:
                t = k * h
                t1 = (k + 1) * h
                self._substep(s, t, t1 - t, hvv, hyv, htv, self._s1)
                bad = False
                for r in range(self.n_states):
                    if not (fabs(self._s1[r]) <= self.limit):
                        bad = True
                        break
                if bad:
                    status = STATUS_NONFINITE
                    break
                if self.triggers_enabled:
                    if self._max_trigger(self._s1, t1, hvv, hyv, htv, self._f) >= 0.0:
                        status = STATUS_EVENT
                        break
                for r in range(self.n_states):
                    s[r] = self._s1[r]
                k = k + 1
                if k % dec == 0:
                    i = k // dec
                    out_t[i] = t1
                    for r in range(self.n_states):
                        out_s[i, r] = s[r]
                    self._held(t1, hvv, hyv, htv, self._h)
                    for r in range(self.n_agents):
                        out_h[i, r] = self._h[r]
                        out_hy[i, r] = hyv[r]
        return k, status


cdef double[::1] _vec(a):
    return np.ascontiguousarray(a, dtype=float)
