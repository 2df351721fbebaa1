"""Compiled inner loops for the plant: forward dynamics and fused RK4 substeps.

The Coriolis vector uses the point-velocity form ``sum_p m_p J_p^T (dJ_p/dt v)``,
which equals ``C(chi, chi_dot) chi_dot`` from the Christoffel construction in
``plant.py`` (planar rotational inertias are configuration independent).
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def accel(x, v, tau, eta, L, D, rot, masses, m_tot, grav, drag):
    n = x.size
    n_ang = n - 2
    n_seg = L.shape[1]
    n_pts = L.shape[0]
    phi = np.empty(n_seg)
    om = np.empty(n_seg)
    phi[0] = x[2]
    for s in range(1, n_seg):
        phi[s] = phi[s - 1] + x[2 + s]
    for s in range(n_seg):
        acc = 0.0
        for k in range(n_ang):
            acc += D[s, k] * v[2 + k]
        om[s] = acc
    sa = np.sin(phi)
    ca = np.cos(phi)

    M = np.zeros((n, n))
    rhs = np.empty(n)
    M[0, 0] = m_tot
    M[1, 1] = m_tot
    for i in range(n_ang):
        for j in range(n_ang):
            M[2 + i, 2 + j] = rot[i, j]
    for i in range(n):
        rhs[i] = tau[i] - drag[i] * v[i] - eta[i]
    rhs[1] -= grav * m_tot

    J = np.zeros((2, n_ang))
    for p in range(n_pts):
        mp = masses[p]
        if mp == 0.0:
            continue
        # J[c,k] = sum_s L b_c(phi_s) D[s,k];  Jdot v = -sum_s L a(phi_s) om_s^2
        for k in range(n_ang):
            J[0, k] = 0.0
            J[1, k] = 0.0
        cx = 0.0
        cz = 0.0
        for s in range(n_seg):
            l = L[p, s]
            if l == 0.0:
                continue
            for k in range(n_ang):
                if D[s, k] != 0.0:
                    J[0, k] += l * ca[s] * D[s, k]
                    J[1, k] += l * sa[s] * D[s, k]
            w2 = om[s] * om[s]
            cx -= l * sa[s] * w2
            cz += l * ca[s] * w2
        for k in range(n_ang):
            M[0, 2 + k] += mp * J[0, k]
            M[1, 2 + k] += mp * J[1, k]
            M[2 + k, 0] += mp * J[0, k]
            M[2 + k, 1] += mp * J[1, k]
            for l2 in range(n_ang):
                M[2 + k, 2 + l2] += mp * (J[0, k] * J[0, l2] + J[1, k] * J[1, l2])
            rhs[2 + k] -= mp * (J[0, k] * cx + J[1, k] * cz) + grav * mp * J[1, k]
        rhs[0] -= mp * cx
        rhs[1] -= mp * cz
    return np.linalg.solve(M, rhs)


@njit(cache=True)
def rk4_run(X, V, tau, eta, white, rho, amp, payload, dt, L, D, rot, fixed_masses,
            fixed_mass_total, grav, drag):
    """Advance a batch ``(B, n)`` through ``white.shape[1]`` RK4 steps.

    ``payload[i]`` is the payload mass in force during substep ``i``;
    ``payload[-1]`` applies to the returned acceleration.  Noise advances
    after every substep with the pre-drawn ``white`` samples.
    """
    B, n = X.shape
    nsub = white.shape[1]
    n_pts = fixed_masses.size + 1
    masses = np.empty(n_pts)
    for i in range(fixed_masses.size):
        masses[i] = fixed_masses[i]
    Xo = X.copy()
    Vo = V.copy()
    Eo = eta.copy()
    Ao = np.empty((B, n))
    gain = np.sqrt(1.0 - rho * rho)
    for b in range(B):
        x = Xo[b].copy()
        v = Vo[b].copy()
        e = Eo[b].copy()
        t_b = tau[b]
        for i in range(nsub):
            masses[n_pts - 1] = payload[i]
            mt = fixed_mass_total + payload[i]
            a1 = accel(x, v, t_b, e, L, D, rot, masses, mt, grav, drag)
            v2 = v + 0.5 * dt * a1
            a2 = accel(x + 0.5 * dt * v, v2, t_b, e, L, D, rot, masses, mt, grav, drag)
            v3 = v + 0.5 * dt * a2
            a3 = accel(x + 0.5 * dt * v2, v3, t_b, e, L, D, rot, masses, mt, grav, drag)
            v4 = v + dt * a3
            a4 = accel(x + dt * v3, v4, t_b, e, L, D, rot, masses, mt, grav, drag)
            x = x + dt / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4)
            v = v + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
            for j in range(n):
                e[j] = rho * e[j] + gain * amp[j] * white[b, i, j]
        masses[n_pts - 1] = payload[nsub]
        Ao[b] = accel(x, v, t_b, e, L, D, rot, masses, fixed_mass_total + payload[nsub], grav, drag)
        Xo[b] = x
        Vo[b] = v
        Eo[b] = e
    return Xo, Vo, Eo, Ao
