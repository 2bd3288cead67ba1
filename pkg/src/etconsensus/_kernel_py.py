"""Pure-Python/NumPy integration kernel (fallback for ``_kernel_c``).

The closed loop of every protocol variant is affine between events::

    s' = Acl s + Bh h(t) + Pr r'(t)
    err = Eh h(t) + Es s

where ``s`` collects all continuous states and ``h`` the broadcast
estimates. ``h`` is either held constant (``dac=False``) or follows the
filtered hold ``h_i(t) = e^{-theta (t - tk_i)} hv_i + (1 - e^{...}) hy_i``.
"""
import math

import numpy as np

STATUS_DONE = 0
STATUS_EVENT = 1
STATUS_NONFINITE = 2


class Kernel:
    def __init__(self, Acl, Bh, Pr, Es, Eh, edge_i, edge_j, edge_w,
                 alpha, mu, nu, theta, dac,
                 ref_agent, ref_amp, ref_kind, ref_freq, ref_phase, ref_decay,
                 triggers_enabled=True, limit=1e9):
        f = lambda a: np.ascontiguousarray(a, dtype=float)
        self.Acl, self.Bh, self.Pr, self.Es, self.Eh = map(f, (Acl, Bh, Pr, Es, Eh))
        self.edge_i = np.ascontiguousarray(edge_i, dtype=np.intp)
        self.edge_j = np.ascontiguousarray(edge_j, dtype=np.intp)
        self.edge_w = f(edge_w)
        self.alpha, self.mu, self.nu, self.theta = float(alpha), float(mu), float(nu), float(theta)
        self.dac = bool(dac)
        self.ref_agent = np.ascontiguousarray(ref_agent, dtype=np.intp)
        self.ref_amp, self.ref_freq, self.ref_phase, self.ref_decay = map(
            f, (ref_amp, ref_freq, ref_phase, ref_decay))
        self.ref_kind = np.ascontiguousarray(ref_kind, dtype=np.intp)
        self.triggers_enabled = bool(triggers_enabled)
        self.limit = float(limit)
        self.n_agents = self.Eh.shape[0]
        self.has_refs = self.ref_agent.size > 0

    def held(self, t, hv, hy, ht):
        if not self.dac:
            return np.array(hv, dtype=float)
        decay = np.exp(-self.theta * (t - ht))
        return decay * hv + (1.0 - decay) * hy

    def rdot(self, t):
        out = np.zeros(self.n_agents)
        if not self.has_refs:
            return out
        env = self.ref_amp * np.exp(-self.ref_decay * t)
        ph = self.ref_freq * t + self.ref_phase
        s, c = np.sin(ph), np.cos(ph)
        val = np.where(
            self.ref_kind == 0,
            env * (self.ref_freq * c - self.ref_decay * s),
            env * (-self.ref_freq * s - self.ref_decay * c),
        )
        np.add.at(out, self.ref_agent, val)
        return out

    def _forcing(self, t, hv, hy, ht):
        g = self.Bh @ self.held(t, hv, hy, ht)
        if self.has_refs:
            g = g + self.Pr @ self.rdot(t)
        return g

    def deriv(self, t, s, hv, hy, ht):
        return self.Acl @ s + self._forcing(t, hv, hy, ht)

    def substep(self, s, t, dt, hv, hy, ht):
        """One classical RK4 step of length `dt` from ``(t, s)``; returns the new state."""
        s = np.asarray(s, dtype=float)
        A = self.Acl
        if not self.dac and not self.has_refs:
            g = self.Bh @ np.asarray(hv, dtype=float)
            g1 = g2 = g4 = g
        else:
            g1 = self._forcing(t, hv, hy, ht)
            g2 = self._forcing(t + 0.5 * dt, hv, hy, ht)
            g4 = self._forcing(t + dt, hv, hy, ht)
        k1 = A @ s + g1
        k2 = A @ (s + 0.5 * dt * k1) + g2
        k3 = A @ (s + 0.5 * dt * k2) + g2
        k4 = A @ (s + dt * k3) + g4
        return s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def errors(self, s, t, hv, hy, ht):
        return self.Eh @ self.held(t, hv, hy, ht) + self.Es @ s

    def triggers(self, s, t, hv, hy, ht):
        h = self.held(t, hv, hy, ht)
        err = self.Eh @ h + self.Es @ s
        dis = np.zeros(self.n_agents)
        d = self.edge_w * (h[self.edge_i] - h[self.edge_j]) ** 2
        np.add.at(dis, self.edge_i, d)
        np.add.at(dis, self.edge_j, d)
        return err * err - self.alpha * dis - self.mu * math.exp(-self.nu * t)

    def advance(self, s, k0, k_end, h, hv, hy, ht, dec, out_t, out_s, out_h, out_hy):
        """Take grid steps ``k0 -> k_end`` in place on `s`.

        Stops before committing a step whose end point has any trigger
        value ``>= 0`` (STATUS_EVENT) or whose result exceeds the
        divergence limit (STATUS_NONFINITE). Samples every `dec` grid
        steps into the ``out_*`` buffers. Returns ``(k, status)`` where
        ``k`` is the grid index ``s`` now sits at.
        """
        k = k0
        while k < k_end:
            t = k * h
            t1 = (k + 1) * h
            s1 = self.substep(s, t, t1 - t, hv, hy, ht)
            if not np.all(np.abs(s1) <= self.limit):
                return k, STATUS_NONFINITE
            if self.triggers_enabled and np.max(self.triggers(s1, t1, hv, hy, ht)) >= 0.0:
                return k, STATUS_EVENT
            s[:] = s1
            k += 1
            if k % dec == 0:
                i = k // dec
                out_t[i] = t1
                out_s[i] = s
                out_h[i] = self.held(t1, hv, hy, ht)
                out_hy[i] = hy
        return k, STATUS_DONE
