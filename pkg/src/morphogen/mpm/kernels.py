"""Numba kernels for the 2D MLS-MPM rollout and its hand-written adjoint.

Layout conventions shared by both kernels:

* state arrays are indexed ``[t, p, ...]`` with ``t = 0 .. T`` inclusive,
* the grid is square (``n_grid`` nodes per axis) over the unit domain,
* quadratic B-spline transfers with a 3x3 stencil per particle,
* all accumulation loops are sequential, so a rollout is bitwise
  reproducible regardless of the host machine's thread count.

The adjoint recomputes each step's grid quantities from the stored particle
states instead of checkpointing grids; forward evaluation is deterministic,
so the recomputed values match the original rollout exactly.
"""

import math

import numpy as np
from numba import njit

# Flags kept conservative: no reassociation so that summation order (and
# therefore bitwise reproducibility of a given build) is never in question.
_JIT = dict(cache=True, fastmath=False, boundscheck=False)


@njit(**_JIT)
def forward_rollout(xs, vs, Cs, Fs, mass, youngs, amp_sin, amp_cos,
                    n_grid, bound, dt, gravity, friction, damp,
                    c_int, k_act, omega, mu_f, la_f, k_s):
    """Roll the state forward in place for ``T = xs.shape[0] - 1`` steps.

    ``xs, vs`` have shape (T+1, N, 2); ``Cs, Fs`` have shape (T+1, N, 2, 2)
    with index 0 already holding the initial state.  ``k_s`` is the combined
    stress-to-momentum coefficient dt * V_p * 4 / dx^2, ``damp`` the per-step
    velocity retention factor exp(-global_damping * dt), ``c_int`` the
    internal (strain-rate) damping, ``k_act``/``omega`` the actuation
    strength and angular frequency, ``mu_f``/``la_f`` the Lame factors per
    unit Young's modulus.
    """
    T = xs.shape[0] - 1
    N = xs.shape[1]
    dx = 1.0 / n_grid
    inv_dx = float(n_grid)
    d_inv = 4.0 * inv_dx * inv_dx

    grid_m = np.zeros((n_grid, n_grid))
    grid_v = np.zeros((n_grid, n_grid, 2))

    for t in range(T):
        theta = t * dt * omega
        sth = math.sin(theta)
        cth = math.cos(theta)

        # Stencil bounding box for this step (computed first so only the
        # touched grid region is cleared and swept).
        blo_x, blo_y = n_grid, n_grid
        bhi_x, bhi_y = 0, 0
        for p in range(N):
            bi = int(xs[t, p, 0] * inv_dx - 0.5)
            bj = int(xs[t, p, 1] * inv_dx - 0.5)
            if bi < blo_x:
                blo_x = bi
            if bj < blo_y:
                blo_y = bj
            if bi > bhi_x:
                bhi_x = bi
            if bj > bhi_y:
                bhi_y = bj
        bhi_x += 3
        bhi_y += 3
        if blo_x < 0 or blo_y < 0 or bhi_x > n_grid or bhi_y > n_grid:
            return t  # particle left the domain; caller raises

        for gi in range(blo_x, bhi_x):
            for gj in range(blo_y, bhi_y):
                grid_m[gi, gj] = 0.0
                grid_v[gi, gj, 0] = 0.0
                grid_v[gi, gj, 1] = 0.0

        # --- particle to grid -------------------------------------------
        for p in range(N):
            m = mass[p]
            vdx = vs[t, p, 0] * damp
            vdy = vs[t, p, 1] * damp
            C00 = Cs[t, p, 0, 0]
            C01 = Cs[t, p, 0, 1]
            C10 = Cs[t, p, 1, 0]
            C11 = Cs[t, p, 1, 1]
            a = Fs[t, p, 0, 0]
            b = Fs[t, p, 0, 1]
            c = Fs[t, p, 1, 0]
            d = Fs[t, p, 1, 1]

            # fixed corotated Kirchhoff stress, rotation via 2D polar decomp
            J = a * d - b * c
            tu = a + d
            tw = c - b
            h = math.sqrt(tu * tu + tw * tw)
            if h > 1e-12:
                cph = tu / h
                sph = tw / h
            else:
                cph = 1.0
                sph = 0.0
            mu = mu_f * youngs[p]
            la = la_f * youngs[p]
            e00 = a - cph
            e01 = b + sph
            e10 = c - sph
            e11 = d - cph
            vol_term = la * J * (J - 1.0)
            t00 = 2.0 * mu * (e00 * a + e01 * b) + vol_term
            t01 = 2.0 * mu * (e00 * c + e01 * d)
            t10 = 2.0 * mu * (e10 * a + e11 * b)
            t11 = 2.0 * mu * (e10 * c + e11 * d) + vol_term

            # strain-rate (internal) damping on the symmetrized velocity field
            sym01 = 0.5 * (C01 + C10)
            t00 += c_int * m * C00
            t01 += c_int * m * sym01
            t10 += c_int * m * sym01
            t11 += c_int * m * C11

            # muscle actuation enters the vertical stress diagonal
            arg = amp_sin[p] * sth + amp_cos[p] * cth
            t11 += k_act * m * math.tanh(arg)

            A00 = -k_s * t00 + m * C00
            A01 = -k_s * t01 + m * C01
            A10 = -k_s * t10 + m * C10
            A11 = -k_s * t11 + m * C11

            Xx = xs[t, p, 0] * inv_dx
            Xy = xs[t, p, 1] * inv_dx
            bi = int(Xx - 0.5)
            bj = int(Xy - 0.5)
            fx = Xx - bi
            fy = Xy - bj
            wx0 = 0.5 * (1.5 - fx) ** 2
            wx1 = 0.75 - (fx - 1.0) ** 2
            wx2 = 0.5 * (fx - 0.5) ** 2
            wy0 = 0.5 * (1.5 - fy) ** 2
            wy1 = 0.75 - (fy - 1.0) ** 2
            wy2 = 0.5 * (fy - 0.5) ** 2

            for i in range(3):
                if i == 0:
                    wxi = wx0
                elif i == 1:
                    wxi = wx1
                else:
                    wxi = wx2
                dpx = (i - fx) * dx
                for j in range(3):
                    if j == 0:
                        w = wxi * wy0
                    elif j == 1:
                        w = wxi * wy1
                    else:
                        w = wxi * wy2
                    dpy = (j - fy) * dx
                    grid_v[bi + i, bj + j, 0] += w * (m * vdx + A00 * dpx + A01 * dpy)
                    grid_v[bi + i, bj + j, 1] += w * (m * vdy + A10 * dpx + A11 * dpy)
                    grid_m[bi + i, bj + j] += w * m

        # --- grid update -------------------------------------------------
        for gi in range(blo_x, bhi_x):
            for gj in range(blo_y, bhi_y):
                gm = grid_m[gi, gj]
                if gm > 0.0:
                    ux = grid_v[gi, gj, 0] / gm
                    uy = grid_v[gi, gj, 1] / gm - dt * gravity
                    if gi < bound and ux < 0.0:
                        ux = 0.0
                    if gi >= n_grid - bound and ux > 0.0:
                        ux = 0.0
                    if gj >= n_grid - bound and uy > 0.0:
                        uy = 0.0
                    if gj < bound and uy < 0.0:
                        # Coulomb floor: kill inward normal velocity, shrink
                        # the tangential component by friction * |v_n|.
                        if ux != 0.0:
                            s = 1.0 + friction * uy / abs(ux)
                            if s > 0.0:
                                ux = ux * s
                            else:
                                ux = 0.0
                        uy = 0.0
                    grid_v[gi, gj, 0] = ux
                    grid_v[gi, gj, 1] = uy

        # --- grid to particle --------------------------------------------
        for p in range(N):
            Xx = xs[t, p, 0] * inv_dx
            Xy = xs[t, p, 1] * inv_dx
            bi = int(Xx - 0.5)
            bj = int(Xy - 0.5)
            fx = Xx - bi
            fy = Xy - bj
            wx0 = 0.5 * (1.5 - fx) ** 2
            wx1 = 0.75 - (fx - 1.0) ** 2
            wx2 = 0.5 * (fx - 0.5) ** 2
            wy0 = 0.5 * (1.5 - fy) ** 2
            wy1 = 0.75 - (fy - 1.0) ** 2
            wy2 = 0.5 * (fy - 0.5) ** 2

            nvx = 0.0
            nvy = 0.0
            B00 = 0.0
            B01 = 0.0
            B10 = 0.0
            B11 = 0.0
            for i in range(3):
                if i == 0:
                    wxi = wx0
                elif i == 1:
                    wxi = wx1
                else:
                    wxi = wx2
                dpx = (i - fx) * dx
                for j in range(3):
                    if j == 0:
                        w = wxi * wy0
                    elif j == 1:
                        w = wxi * wy1
                    else:
                        w = wxi * wy2
                    dpy = (j - fy) * dx
                    gvx = grid_v[bi + i, bj + j, 0]
                    gvy = grid_v[bi + i, bj + j, 1]
                    nvx += w * gvx
                    nvy += w * gvy
                    B00 += w * gvx * dpx
                    B01 += w * gvx * dpy
                    B10 += w * gvy * dpx
                    B11 += w * gvy * dpy

            nC00 = d_inv * B00
            nC01 = d_inv * B01
            nC10 = d_inv * B10
            nC11 = d_inv * B11
            vs[t + 1, p, 0] = nvx
            vs[t + 1, p, 1] = nvy
            Cs[t + 1, p, 0, 0] = nC00
            Cs[t + 1, p, 0, 1] = nC01
            Cs[t + 1, p, 1, 0] = nC10
            Cs[t + 1, p, 1, 1] = nC11

            a = Fs[t, p, 0, 0]
            b = Fs[t, p, 0, 1]
            c = Fs[t, p, 1, 0]
            d = Fs[t, p, 1, 1]
            Fs[t + 1, p, 0, 0] = (1.0 + dt * nC00) * a + dt * nC01 * c
            Fs[t + 1, p, 0, 1] = (1.0 + dt * nC00) * b + dt * nC01 * d
            Fs[t + 1, p, 1, 0] = dt * nC10 * a + (1.0 + dt * nC11) * c
            Fs[t + 1, p, 1, 1] = dt * nC10 * b + (1.0 + dt * nC11) * d

            xs[t + 1, p, 0] = xs[t, p, 0] + dt * nvx
            xs[t + 1, p, 1] = xs[t, p, 1] + dt * nvy

    return -1


@njit(**_JIT)
def adjoint_rollout(xs, vs, Cs, Fs, mass, youngs, amp_sin, amp_cos, grad_x,
                    n_grid, bound, dt, gravity, friction, damp,
                    c_int, k_act, omega, mu_f, la_f, k_s,
                    g_mass, g_youngs, g_amp_sin, g_amp_cos):
    """Exact reverse-mode transpose of :func:`forward_rollout`.

    ``grad_x`` has shape (T+1, N, 2): the loss gradient attached to each
    stored position state.  Parameter gradients are accumulated into the
    ``g_*`` output arrays (shape (N,), zeroed by the caller).  Every forward
    branch (boundary clamps, friction saturation, degenerate polar
    decomposition) is re-resolved from the recomputed forward values so the
    reverse sweep follows the identical code path.
    """
    T = xs.shape[0] - 1
    N = xs.shape[1]
    dx = 1.0 / n_grid
    inv_dx = float(n_grid)
    d_inv = 4.0 * inv_dx * inv_dx

    grid_m = np.zeros((n_grid, n_grid))
    grid_mom = np.zeros((n_grid, n_grid, 2))
    grid_u0 = np.zeros((n_grid, n_grid, 2))
    grid_u = np.zeros((n_grid, n_grid, 2))
    g_u = np.zeros((n_grid, n_grid, 2))
    g_mom = np.zeros((n_grid, n_grid, 2))
    g_M = np.zeros((n_grid, n_grid))

    # adjoint state at step t+1 (gx for t+1 lives in gx_next, etc.)
    gx_next = grad_x[T].copy()
    gv_next = np.zeros((N, 2))
    gC_next = np.zeros((N, 2, 2))
    gF_next = np.zeros((N, 2, 2))
    gx_cur = np.zeros((N, 2))
    gv_cur = np.zeros((N, 2))
    gC_cur = np.zeros((N, 2, 2))
    gF_cur = np.zeros((N, 2, 2))

    for t in range(T - 1, -1, -1):
        theta = t * dt * omega
        sth = math.sin(theta)
        cth = math.cos(theta)

        # ---- recompute forward grid state for step t --------------------
        blo_x, blo_y = n_grid, n_grid
        bhi_x, bhi_y = 0, 0
        for p in range(N):
            bi = int(xs[t, p, 0] * inv_dx - 0.5)
            bj = int(xs[t, p, 1] * inv_dx - 0.5)
            if bi < blo_x:
                blo_x = bi
            if bj < blo_y:
                blo_y = bj
            if bi > bhi_x:
                bhi_x = bi
            if bj > bhi_y:
                bhi_y = bj
        bhi_x += 3
        bhi_y += 3

        for gi in range(blo_x, bhi_x):
            for gj in range(blo_y, bhi_y):
                grid_m[gi, gj] = 0.0
                grid_mom[gi, gj, 0] = 0.0
                grid_mom[gi, gj, 1] = 0.0
                g_u[gi, gj, 0] = 0.0
                g_u[gi, gj, 1] = 0.0
                g_mom[gi, gj, 0] = 0.0
                g_mom[gi, gj, 1] = 0.0
                g_M[gi, gj] = 0.0

        for p in range(N):
            m = mass[p]
            vdx = vs[t, p, 0] * damp
            vdy = vs[t, p, 1] * damp
            C00 = Cs[t, p, 0, 0]
            C01 = Cs[t, p, 0, 1]
            C10 = Cs[t, p, 1, 0]
            C11 = Cs[t, p, 1, 1]
            a = Fs[t, p, 0, 0]
            b = Fs[t, p, 0, 1]
            c = Fs[t, p, 1, 0]
            d = Fs[t, p, 1, 1]
            J = a * d - b * c
            tu = a + d
            tw = c - b
            h = math.sqrt(tu * tu + tw * tw)
            if h > 1e-12:
                cph = tu / h
                sph = tw / h
            else:
                cph = 1.0
                sph = 0.0
            mu = mu_f * youngs[p]
            la = la_f * youngs[p]
            e00 = a - cph
            e01 = b + sph
            e10 = c - sph
            e11 = d - cph
            vol_term = la * J * (J - 1.0)
            t00 = 2.0 * mu * (e00 * a + e01 * b) + vol_term
            t01 = 2.0 * mu * (e00 * c + e01 * d)
            t10 = 2.0 * mu * (e10 * a + e11 * b)
            t11 = 2.0 * mu * (e10 * c + e11 * d) + vol_term
            sym01 = 0.5 * (C01 + C10)
            t00 += c_int * m * C00
            t01 += c_int * m * sym01
            t10 += c_int * m * sym01
            t11 += c_int * m * C11
            arg = amp_sin[p] * sth + amp_cos[p] * cth
            t11 += k_act * m * math.tanh(arg)

            A00 = -k_s * t00 + m * C00
            A01 = -k_s * t01 + m * C01
            A10 = -k_s * t10 + m * C10
            A11 = -k_s * t11 + m * C11

            Xx = xs[t, p, 0] * inv_dx
            Xy = xs[t, p, 1] * inv_dx
            bi = int(Xx - 0.5)
            bj = int(Xy - 0.5)
            fx = Xx - bi
            fy = Xy - bj
            wx0 = 0.5 * (1.5 - fx) ** 2
            wx1 = 0.75 - (fx - 1.0) ** 2
            wx2 = 0.5 * (fx - 0.5) ** 2
            wy0 = 0.5 * (1.5 - fy) ** 2
            wy1 = 0.75 - (fy - 1.0) ** 2
            wy2 = 0.5 * (fy - 0.5) ** 2
            for i in range(3):
                if i == 0:
                    wxi = wx0
                elif i == 1:
                    wxi = wx1
                else:
                    wxi = wx2
                dpx = (i - fx) * dx
                for j in range(3):
                    if j == 0:
                        w = wxi * wy0
                    elif j == 1:
                        w = wxi * wy1
                    else:
                        w = wxi * wy2
                    dpy = (j - fy) * dx
                    grid_mom[bi + i, bj + j, 0] += w * (m * vdx + A00 * dpx + A01 * dpy)
                    grid_mom[bi + i, bj + j, 1] += w * (m * vdy + A10 * dpx + A11 * dpy)
                    grid_m[bi + i, bj + j] += w * m

        for gi in range(blo_x, bhi_x):
            for gj in range(blo_y, bhi_y):
                gm = grid_m[gi, gj]
                if gm > 0.0:
                    u0x = grid_mom[gi, gj, 0] / gm
                    u0y = grid_mom[gi, gj, 1] / gm
                    grid_u0[gi, gj, 0] = u0x
                    grid_u0[gi, gj, 1] = u0y
                    ux = u0x
                    uy = u0y - dt * gravity
                    if gi < bound and ux < 0.0:
                        ux = 0.0
                    if gi >= n_grid - bound and ux > 0.0:
                        ux = 0.0
                    if gj >= n_grid - bound and uy > 0.0:
                        uy = 0.0
                    if gj < bound and uy < 0.0:
                        if ux != 0.0:
                            s = 1.0 + friction * uy / abs(ux)
                            if s > 0.0:
                                ux = ux * s
                            else:
                                ux = 0.0
                        uy = 0.0
                    grid_u[gi, gj, 0] = ux
                    grid_u[gi, gj, 1] = uy

        # ---- adjoint of the state update (F then x) ---------------------
        for p in range(N):
            a = Fs[t, p, 0, 0]
            b = Fs[t, p, 0, 1]
            c = Fs[t, p, 1, 0]
            d = Fs[t, p, 1, 1]
            gF00 = gF_next[p, 0, 0]
            gF01 = gF_next[p, 0, 1]
            gF10 = gF_next[p, 1, 0]
            gF11 = gF_next[p, 1, 1]
            # F_{t+1} = (I + dt C_{t+1}) F_t
            gC_next[p, 0, 0] += dt * (gF00 * a + gF01 * b)
            gC_next[p, 0, 1] += dt * (gF00 * c + gF01 * d)
            gC_next[p, 1, 0] += dt * (gF10 * a + gF11 * b)
            gC_next[p, 1, 1] += dt * (gF10 * c + gF11 * d)
            nC00 = Cs[t + 1, p, 0, 0]
            nC01 = Cs[t + 1, p, 0, 1]
            nC10 = Cs[t + 1, p, 1, 0]
            nC11 = Cs[t + 1, p, 1, 1]
            gF_cur[p, 0, 0] = (1.0 + dt * nC00) * gF00 + dt * nC10 * gF10
            gF_cur[p, 0, 1] = (1.0 + dt * nC00) * gF01 + dt * nC10 * gF11
            gF_cur[p, 1, 0] = dt * nC01 * gF00 + (1.0 + dt * nC11) * gF10
            gF_cur[p, 1, 1] = dt * nC01 * gF01 + (1.0 + dt * nC11) * gF11
            # x_{t+1} = x_t + dt v_{t+1}
            gv_next[p, 0] += dt * gx_next[p, 0]
            gv_next[p, 1] += dt * gx_next[p, 1]
            gx_cur[p, 0] = gx_next[p, 0]
            gx_cur[p, 1] = gx_next[p, 1]

        # ---- adjoint of grid-to-particle --------------------------------
        for p in range(N):
            Xx = xs[t, p, 0] * inv_dx
            Xy = xs[t, p, 1] * inv_dx
            bi = int(Xx - 0.5)
            bj = int(Xy - 0.5)
            fx = Xx - bi
            fy = Xy - bj
            wx0 = 0.5 * (1.5 - fx) ** 2
            wx1 = 0.75 - (fx - 1.0) ** 2
            wx2 = 0.5 * (fx - 0.5) ** 2
            wy0 = 0.5 * (1.5 - fy) ** 2
            wy1 = 0.75 - (fy - 1.0) ** 2
            wy2 = 0.5 * (fy - 0.5) ** 2
            dwx0 = -(1.5 - fx)
            dwx1 = -2.0 * (fx - 1.0)
            dwx2 = fx - 0.5
            dwy0 = -(1.5 - fy)
            dwy1 = -2.0 * (fy - 1.0)
            dwy2 = fy - 0.5

            gvhx = gv_next[p, 0]
            gvhy = gv_next[p, 1]
            gC00 = gC_next[p, 0, 0]
            gC01 = gC_next[p, 0, 1]
            gC10 = gC_next[p, 1, 0]
            gC11 = gC_next[p, 1, 1]

            gxx = 0.0
            gxy = 0.0
            for i in range(3):
                if i == 0:
                    wxi = wx0
                    dwxi = dwx0
                elif i == 1:
                    wxi = wx1
                    dwxi = dwx1
                else:
                    wxi = wx2
                    dwxi = dwx2
                dpx = (i - fx) * dx
                for j in range(3):
                    if j == 0:
                        wyj = wy0
                        dwyj = dwy0
                    elif j == 1:
                        wyj = wy1
                        dwyj = dwy1
                    else:
                        wyj = wy2
                        dwyj = dwy2
                    w = wxi * wyj
                    dpy = (j - fy) * dx
                    uxn = grid_u[bi + i, bj + j, 0]
                    uyn = grid_u[bi + i, bj + j, 1]
                    cxp = gC00 * dpx + gC01 * dpy
                    cyp = gC10 * dpx + gC11 * dpy
                    g_u[bi + i, bj + j, 0] += w * gvhx + d_inv * w * cxp
                    g_u[bi + i, bj + j, 1] += w * gvhy + d_inv * w * cyp
                    scal = uxn * gvhx + uyn * gvhy + d_inv * (uxn * cxp + uyn * cyp)
                    gxx += dwxi * inv_dx * wyj * scal
                    gxy += wxi * dwyj * inv_dx * scal
                    # dpos depends on x with d(dpos)/dx = -I
                    gxx -= d_inv * w * (gC00 * uxn + gC10 * uyn)
                    gxy -= d_inv * w * (gC01 * uxn + gC11 * uyn)
            gx_cur[p, 0] += gxx
            gx_cur[p, 1] += gxy

        # ---- adjoint of the grid update ----------------------------------
        for gi in range(blo_x, bhi_x):
            for gj in range(blo_y, bhi_y):
                gm = grid_m[gi, gj]
                if gm > 0.0:
                    gux = g_u[gi, gj, 0]
                    guy = g_u[gi, gj, 1]
                    u0x = grid_u0[gi, gj, 0]
                    u0y = grid_u0[gi, gj, 1]
                    # replay forward branch decisions
                    ux_w = u0x
                    uy_c = u0y - dt * gravity
                    if gi < bound and ux_w < 0.0:
                        wall_x = True
                        ux_w = 0.0
                    else:
                        wall_x = False
                    if gi >= n_grid - bound and ux_w > 0.0:
                        wall_x2 = True
                        ux_w = 0.0
                    else:
                        wall_x2 = False
                    if gj >= n_grid - bound and uy_c > 0.0:
                        ceil_y = True
                        uy_c = 0.0
                    else:
                        ceil_y = False
                    # reverse floor friction (y output clamps to zero there,
                    # so guy only survives through the tangential coupling)
                    if gj < bound and uy_c < 0.0:
                        if ux_w != 0.0:
                            s = 1.0 + friction * uy_c / abs(ux_w)
                            if s > 0.0:
                                sgn = 1.0 if ux_w > 0.0 else -1.0
                                guy_c = friction * sgn * gux
                                gux_w = gux
                            else:
                                gux_w = 0.0
                                guy_c = 0.0
                        else:
                            gux_w = 0.0
                            guy_c = 0.0
                    else:
                        gux_w = gux
                        guy_c = guy
                    if ceil_y:
                        guy_c = 0.0
                    if wall_x2 or wall_x:
                        gux_w = 0.0
                    # gravity shift is additive; normalization u0 = mom / m
                    g_mom[gi, gj, 0] = gux_w / gm
                    g_mom[gi, gj, 1] = guy_c / gm
                    g_M[gi, gj] = -(gux_w * u0x + guy_c * u0y) / gm

        # ---- adjoint of particle-to-grid ---------------------------------
        for p in range(N):
            m = mass[p]
            vdx = vs[t, p, 0] * damp
            vdy = vs[t, p, 1] * damp
            C00 = Cs[t, p, 0, 0]
            C01 = Cs[t, p, 0, 1]
            C10 = Cs[t, p, 1, 0]
            C11 = Cs[t, p, 1, 1]
            a = Fs[t, p, 0, 0]
            b = Fs[t, p, 0, 1]
            c = Fs[t, p, 1, 0]
            d = Fs[t, p, 1, 1]
            J = a * d - b * c
            tu = a + d
            tw = c - b
            h = math.sqrt(tu * tu + tw * tw)
            if h > 1e-12:
                cph = tu / h
                sph = tw / h
            else:
                cph = 1.0
                sph = 0.0
            mu = mu_f * youngs[p]
            la = la_f * youngs[p]
            e00 = a - cph
            e01 = b + sph
            e10 = c - sph
            e11 = d - cph
            vol_term = la * J * (J - 1.0)
            te00 = 2.0 * mu * (e00 * a + e01 * b)
            te01 = 2.0 * mu * (e00 * c + e01 * d)
            te10 = 2.0 * mu * (e10 * a + e11 * b)
            te11 = 2.0 * mu * (e10 * c + e11 * d)
            sym01 = 0.5 * (C01 + C10)
            arg = amp_sin[p] * sth + amp_cos[p] * cth
            th = math.tanh(arg)
            t00 = te00 + vol_term + c_int * m * C00
            t01 = te01 + c_int * m * sym01
            t10 = te10 + c_int * m * sym01
            t11 = te11 + vol_term + c_int * m * C11 + k_act * m * th

            A00 = -k_s * t00 + m * C00
            A01 = -k_s * t01 + m * C01
            A10 = -k_s * t10 + m * C10
            A11 = -k_s * t11 + m * C11

            Xx = xs[t, p, 0] * inv_dx
            Xy = xs[t, p, 1] * inv_dx
            bi = int(Xx - 0.5)
            bj = int(Xy - 0.5)
            fx = Xx - bi
            fy = Xy - bj
            wx0 = 0.5 * (1.5 - fx) ** 2
            wx1 = 0.75 - (fx - 1.0) ** 2
            wx2 = 0.5 * (fx - 0.5) ** 2
            wy0 = 0.5 * (1.5 - fy) ** 2
            wy1 = 0.75 - (fy - 1.0) ** 2
            wy2 = 0.5 * (fy - 0.5) ** 2
            dwx0 = -(1.5 - fx)
            dwx1 = -2.0 * (fx - 1.0)
            dwx2 = fx - 0.5
            dwy0 = -(1.5 - fy)
            dwy1 = -2.0 * (fy - 1.0)
            dwy2 = fy - 0.5

            gA00 = 0.0
            gA01 = 0.0
            gA10 = 0.0
            gA11 = 0.0
            gvdx = 0.0
            gvdy = 0.0
            gm_loc = 0.0
            gxx = 0.0
            gxy = 0.0
            for i in range(3):
                if i == 0:
                    wxi = wx0
                    dwxi = dwx0
                elif i == 1:
                    wxi = wx1
                    dwxi = dwx1
                else:
                    wxi = wx2
                    dwxi = dwx2
                dpx = (i - fx) * dx
                for j in range(3):
                    if j == 0:
                        wyj = wy0
                        dwyj = dwy0
                    elif j == 1:
                        wyj = wy1
                        dwyj = dwy1
                    else:
                        wyj = wy2
                        dwyj = dwy2
                    w = wxi * wyj
                    dpy = (j - fy) * dx
                    gmx = g_mom[bi + i, bj + j, 0]
                    gmy = g_mom[bi + i, bj + j, 1]
                    gMn = g_M[bi + i, bj + j]
                    momx = m * vdx + A00 * dpx + A01 * dpy
                    momy = m * vdy + A10 * dpx + A11 * dpy
                    scal = momx * gmx + momy * gmy + m * gMn
                    gxx += dwxi * inv_dx * wyj * scal
                    gxy += wxi * dwyj * inv_dx * scal
                    gxx -= w * (A00 * gmx + A10 * gmy)
                    gxy -= w * (A01 * gmx + A11 * gmy)
                    gvdx += w * m * gmx
                    gvdy += w * m * gmy
                    gm_loc += w * (vdx * gmx + vdy * gmy) + w * gMn
                    gA00 += w * gmx * dpx
                    gA01 += w * gmx * dpy
                    gA10 += w * gmy * dpx
                    gA11 += w * gmy * dpy

            gx_cur[p, 0] += gxx
            gx_cur[p, 1] += gxy
            gv_cur[p, 0] = damp * gvdx
            gv_cur[p, 1] = damp * gvdy

            # affine A = -k_s tau + m C
            gt00 = -k_s * gA00
            gt01 = -k_s * gA01
            gt10 = -k_s * gA10
            gt11 = -k_s * gA11
            gm_loc += gA00 * C00 + gA01 * C01 + gA10 * C10 + gA11 * C11

            # actuation tau_11 += k_act m tanh(arg)
            gm_loc += k_act * th * gt11
            common = k_act * m * (1.0 - th * th) * gt11
            g_amp_sin[p] += common * sth
            g_amp_cos[p] += common * cth

            # internal damping tau += c_int m sym(C)
            gm_loc += c_int * (gt00 * C00 + (gt01 + gt10) * sym01 + gt11 * C11)
            gC_cur[p, 0, 0] = m * gA00 + c_int * m * gt00
            gC_cur[p, 0, 1] = m * gA01 + c_int * m * 0.5 * (gt01 + gt10)
            gC_cur[p, 1, 0] = m * gA10 + c_int * m * 0.5 * (gt01 + gt10)
            gC_cur[p, 1, 1] = m * gA11 + c_int * m * gt11

            # volumetric term la J (J-1) I
            trG = gt00 + gt11
            gJ = la * (2.0 * J - 1.0) * trG
            gF00 = gJ * d
            gF01 = -gJ * c
            gF10 = -gJ * b
            gF11 = gJ * a
            g_youngs[p] += la_f * J * (J - 1.0) * trG

            # elastic term 2 mu (F - R) F^T
            # d tau_e = 2 mu (dF F^T + F dF^T - dR F^T - R dF^T)
            GF00 = gt00 * a + gt01 * c
            GF01 = gt00 * b + gt01 * d
            GF10 = gt10 * a + gt11 * c
            GF11 = gt10 * b + gt11 * d
            GtF00 = gt00 * a + gt10 * c
            GtF01 = gt00 * b + gt10 * d
            GtF10 = gt01 * a + gt11 * c
            GtF11 = gt01 * b + gt11 * d
            GtR00 = gt00 * cph + gt10 * sph
            GtR01 = -gt00 * sph + gt10 * cph
            GtR10 = gt01 * cph + gt11 * sph
            GtR11 = -gt01 * sph + gt11 * cph
            gF00 += 2.0 * mu * (GF00 + GtF00 - GtR00)
            gF01 += 2.0 * mu * (GF01 + GtF01 - GtR01)
            gF10 += 2.0 * mu * (GF10 + GtF10 - GtR10)
            gF11 += 2.0 * mu * (GF11 + GtF11 - GtR11)
            if h > 1e-12:
                # rotation path: R = rot(phi), phi = atan2(c - b, a + d)
                k_rot = -sph * GF00 - cph * GF01 + cph * GF10 - sph * GF11
                coef = 2.0 * mu * k_rot / (h * h)
                gF00 += coef * tw
                gF11 += coef * tw
                gF10 -= coef * tu
                gF01 += coef * tu
            g_youngs[p] += mu_f * 2.0 * (
                gt00 * (e00 * a + e01 * b) + gt01 * (e00 * c + e01 * d)
                + gt10 * (e10 * a + e11 * b) + gt11 * (e10 * c + e11 * d))

            gF_cur[p, 0, 0] += gF00
            gF_cur[p, 0, 1] += gF01
            gF_cur[p, 1, 0] += gF10
            gF_cur[p, 1, 1] += gF11

            g_mass[p] += gm_loc

        # ---- external loss gradient attached at state t ------------------
        for p in range(N):
            gx_cur[p, 0] += grad_x[t, p, 0]
            gx_cur[p, 1] += grad_x[t, p, 1]

        # rotate buffers (copy, keep allocations stable)
        for p in range(N):
            gx_next[p, 0] = gx_cur[p, 0]
            gx_next[p, 1] = gx_cur[p, 1]
            gv_next[p, 0] = gv_cur[p, 0]
            gv_next[p, 1] = gv_cur[p, 1]
            for i in range(2):
                for j in range(2):
                    gC_next[p, i, j] = gC_cur[p, i, j]
                    gF_next[p, i, j] = gF_cur[p, i, j]
