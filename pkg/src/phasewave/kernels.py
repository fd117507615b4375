"""Fused element-parallel kernels for the semi-discrete right-hand side.

Four passes per evaluation, each a global sweep with a barrier between
(auxiliary fields must be complete before their facet averages are read):

  A. g = DG gradient of the concentration (facet value = mean).
  B. mu = df0/dc - (3/2) sigma eps div(g); also refreshes the gradient
     variables w = (mu, u, v, w, p).
  C. G = DG gradient of w (facet values per boundary condition).
  D. primary residual: weak volume terms, non-conservative volume terms,
     conservative + diamond + viscous surface fluxes, forcing.

Element arrays are (K, ..., n1, n2, n3); an axis with a single node is a
collapsed direction whose faces carry exactly cancelling fluxes and are
skipped.  All loops write only to their own element, so `prange` scheduling
cannot change results.

Boundary codes: 0 interior, 1 no-slip wall, 2 slip wall, 3 symmetry,
4 collapsed (skip).  Flux types: 0 central diamond, 1 exact Riemann solver.
"""
import numpy as np
from numba import get_thread_id, njit, prange

BC_INTERIOR = 0
BC_NO_SLIP = 1
BC_SLIP = 2
BC_SYMMETRY = 3
BC_COLLAPSED = 4

FLUX_CENTRAL = 0
FLUX_ERS = 1

_JIT = dict(parallel=True, fastmath=True, cache=True)


@njit(inline="always")
def _mix(c, a, b):
    return a * c + b * (1.0 - c)


@njit(inline="always")
def _face_node(d, side, a, b, n1, n2, n3):
    """Map transverse indices (a, b) on face (d, side) to (i, j, k)."""
    if d == 0:
        i = 0 if side == 0 else n1 - 1
        return i, a, b
    elif d == 1:
        j = 0 if side == 0 else n2 - 1
        return a, j, b
    else:
        k = 0 if side == 0 else n3 - 1
        return a, b, k


@njit(inline="always")
def _opposite_index(d, side, n1, n2, n3):
    """First/last node index along axis d on the neighbour's matching face."""
    if d == 0:
        return n1 - 1 if side == 0 else 0
    elif d == 1:
        return n2 - 1 if side == 0 else 0
    else:
        return n3 - 1 if side == 0 else 0


@njit(**_JIT)
def gradient_c_pass(q, g, ja, jac, nbr, bc, qtw0, qtw1, qtw2, w0, w1, w2):
    k_total, _, n1, n2, n3 = q.shape
    for e in prange(k_total):
        # volume: metric at the node times the weak derivative of c
        for i in range(n1):
            for j in range(n2):
                for k in range(n3):
                    t0 = 0.0
                    t1 = 0.0
                    t2 = 0.0
                    if n1 > 1:
                        for a in range(n1):
                            t0 += qtw0[i, a] * q[e, 0, a, j, k]
                    if n2 > 1:
                        for a in range(n2):
                            t1 += qtw1[j, a] * q[e, 0, i, a, k]
                    if n3 > 1:
                        for a in range(n3):
                            t2 += qtw2[k, a] * q[e, 0, i, j, a]
                    inv_j = 1.0 / jac[e, i, j, k]
                    for n in range(3):
                        g[e, n, i, j, k] = -(ja[e, 0, n, i, j, k] * t0
                                             + ja[e, 1, n, i, j, k] * t1
                                             + ja[e, 2, n, i, j, k] * t2) * inv_j
        # faces: facet value c* (mean inside, interior value at boundaries)
        for f in range(6):
            code = bc[e, f]
            if code == BC_COLLAPSED:
                continue
            d, side = f // 2, f % 2
            sign = -1.0 if side == 0 else 1.0
            if d == 0:
                na, nb, wend = n2, n3, (w0[0] if side == 0 else w0[n1 - 1])
            elif d == 1:
                na, nb, wend = n1, n3, (w1[0] if side == 0 else w1[n2 - 1])
            else:
                na, nb, wend = n1, n2, (w2[0] if side == 0 else w2[n3 - 1])
            ne = nbr[e, f]
            for a in range(na):
                for b in range(nb):
                    i, j, k = _face_node(d, side, a, b, n1, n2, n3)
                    c_in = q[e, 0, i, j, k]
                    if code == BC_INTERIOR:
                        io = _opposite_index(d, side, n1, n2, n3)
                        if d == 0:
                            c_nb = q[ne, 0, io, a, b]
                        elif d == 1:
                            c_nb = q[ne, 0, a, io, b]
                        else:
                            c_nb = q[ne, 0, a, b, io]
                        c_star = 0.5 * (c_in + c_nb)
                    else:
                        c_star = c_in
                    scale = sign * c_star / (wend * jac[e, i, j, k])
                    for n in range(3):
                        g[e, n, i, j, k] += scale * ja[e, d, n, i, j, k]


@njit(**_JIT)
def chem_potential_pass(q, g, mu, wvars, ja, jac, nbr, bc,
                        qtw0, qtw1, qtw2, w0, w1, w2,
                        sigma, eps, rho1, rho2):
    k_total, _, n1, n2, n3 = q.shape
    well = 12.0 * sigma / eps
    cap = 1.5 * sigma * eps
    for e in prange(k_total):
        for i in range(n1):
            for j in range(n2):
                for k in range(n3):
                    # weak divergence of g with the metric inside the product
                    div = 0.0
                    if n1 > 1:
                        for a in range(n1):
                            gt = (ja[e, 0, 0, a, j, k] * g[e, 0, a, j, k]
                                  + ja[e, 0, 1, a, j, k] * g[e, 1, a, j, k]
                                  + ja[e, 0, 2, a, j, k] * g[e, 2, a, j, k])
                            div += qtw0[i, a] * gt
                    if n2 > 1:
                        for a in range(n2):
                            gt = (ja[e, 1, 0, i, a, k] * g[e, 0, i, a, k]
                                  + ja[e, 1, 1, i, a, k] * g[e, 1, i, a, k]
                                  + ja[e, 1, 2, i, a, k] * g[e, 2, i, a, k])
                            div += qtw1[j, a] * gt
                    if n3 > 1:
                        for a in range(n3):
                            gt = (ja[e, 2, 0, i, j, a] * g[e, 0, i, j, a]
                                  + ja[e, 2, 1, i, j, a] * g[e, 1, i, j, a]
                                  + ja[e, 2, 2, i, j, a] * g[e, 2, i, j, a])
                            div += qtw2[k, a] * gt
                    c = q[e, 0, i, j, k]
                    df0 = well * (2.0 * c - 6.0 * c * c + 4.0 * c * c * c)
                    mu[e, i, j, k] = df0 + cap * div / jac[e, i, j, k]
        for f in range(6):
            code = bc[e, f]
            if code == BC_COLLAPSED:
                continue
            d, side = f // 2, f % 2
            sign = -1.0 if side == 0 else 1.0
            if d == 0:
                na, nb, wend = n2, n3, (w0[0] if side == 0 else w0[n1 - 1])
            elif d == 1:
                na, nb, wend = n1, n3, (w1[0] if side == 0 else w1[n2 - 1])
            else:
                na, nb, wend = n1, n2, (w2[0] if side == 0 else w2[n3 - 1])
            ne = nbr[e, f]
            for a in range(na):
                for b in range(nb):
                    i, j, k = _face_node(d, side, a, b, n1, n2, n3)
                    gn = 0.0
                    for n in range(3):
                        if code == BC_INTERIOR:
                            io = _opposite_index(d, side, n1, n2, n3)
                            if d == 0:
                                g_nb = g[ne, n, io, a, b]
                            elif d == 1:
                                g_nb = g[ne, n, a, io, b]
                            else:
                                g_nb = g[ne, n, a, b, io]
                            g_star = 0.5 * (g[e, n, i, j, k] + g_nb)
                        else:
                            g_star = g[e, n, i, j, k]  # no-flux: interior g
                        gn += g_star * ja[e, d, n, i, j, k]
                    mu[e, i, j, k] -= cap * sign * gn / (wend * jac[e, i, j, k])

    # refresh the gradient variables w = (mu, u, v, w, p)
    for e in prange(k_total):
        for i in range(n1):
            for j in range(n2):
                for k in range(n3):
                    c = q[e, 0, i, j, k]
                    inv_srho = 1.0 / np.sqrt(_mix(c, rho1, rho2))
                    wvars[e, 0, i, j, k] = mu[e, i, j, k]
                    wvars[e, 1, i, j, k] = q[e, 1, i, j, k] * inv_srho
                    wvars[e, 2, i, j, k] = q[e, 2, i, j, k] * inv_srho
                    wvars[e, 3, i, j, k] = q[e, 3, i, j, k] * inv_srho
                    wvars[e, 4, i, j, k] = q[e, 4, i, j, k]


@njit(inline="always")
def _ghost_w(code, m, wm, un, nx, ny, nz, wv1, wv2, wv3):
    """Ghost value of gradient variable m for a wall boundary."""
    if m == 0 or m == 4:
        return wm
    if code == BC_NO_SLIP:
        return -wm
    # slip / symmetry: reflect the normal velocity component
    if m == 1:
        return wv1 - 2.0 * un * nx
    elif m == 2:
        return wv2 - 2.0 * un * ny
    else:
        return wv3 - 2.0 * un * nz


@njit(**_JIT)
def gradient_w_pass(wvars, big_g, ja, jac, nbr, bc,
                    qtw0, qtw1, qtw2, w0, w1, w2):
    k_total, _, n1, n2, n3 = wvars.shape
    for e in prange(k_total):
        for m in range(5):
            for i in range(n1):
                for j in range(n2):
                    for k in range(n3):
                        inv_j = 1.0 / jac[e, i, j, k]
                        for n in range(3):
                            acc = 0.0
                            if n1 > 1:
                                for a in range(n1):
                                    acc += qtw0[i, a] * ja[e, 0, n, a, j, k] \
                                        * wvars[e, m, a, j, k]
                            if n2 > 1:
                                for a in range(n2):
                                    acc += qtw1[j, a] * ja[e, 1, n, i, a, k] \
                                        * wvars[e, m, i, a, k]
                            if n3 > 1:
                                for a in range(n3):
                                    acc += qtw2[k, a] * ja[e, 2, n, i, j, a] \
                                        * wvars[e, m, i, j, a]
                            big_g[e, m, n, i, j, k] = -acc * inv_j
        for f in range(6):
            code = bc[e, f]
            if code == BC_COLLAPSED:
                continue
            d, side = f // 2, f % 2
            sign = -1.0 if side == 0 else 1.0
            if d == 0:
                na, nb, wend = n2, n3, (w0[0] if side == 0 else w0[n1 - 1])
            elif d == 1:
                na, nb, wend = n1, n3, (w1[0] if side == 0 else w1[n2 - 1])
            else:
                na, nb, wend = n1, n2, (w2[0] if side == 0 else w2[n3 - 1])
            ne = nbr[e, f]
            for a in range(na):
                for b in range(nb):
                    i, j, k = _face_node(d, side, a, b, n1, n2, n3)
                    snx = sign * ja[e, d, 0, i, j, k]
                    sny = sign * ja[e, d, 1, i, j, k]
                    snz = sign * ja[e, d, 2, i, j, k]
                    s_jac = np.sqrt(snx * snx + sny * sny + snz * snz)
                    nx, ny, nz = snx / s_jac, sny / s_jac, snz / s_jac
                    wv1 = wvars[e, 1, i, j, k]
                    wv2 = wvars[e, 2, i, j, k]
                    wv3 = wvars[e, 3, i, j, k]
                    un = wv1 * nx + wv2 * ny + wv3 * nz
                    inv = 1.0 / (wend * jac[e, i, j, k])
                    io = _opposite_index(d, side, n1, n2, n3)
                    for m in range(5):
                        wm = wvars[e, m, i, j, k]
                        if code == BC_INTERIOR:
                            if d == 0:
                                w_nb = wvars[ne, m, io, a, b]
                            elif d == 1:
                                w_nb = wvars[ne, m, a, io, b]
                            else:
                                w_nb = wvars[ne, m, a, b, io]
                        else:
                            w_nb = _ghost_w(code, m, wm, un, nx, ny, nz,
                                            wv1, wv2, wv3)
                        w_star = 0.5 * (wm + w_nb)
                        for n in range(3):
                            big_g[e, m, n, i, j, k] += \
                                w_star * sign * ja[e, d, n, i, j, k] * inv


@njit(inline="always")
def _viscous_normal(big_g, e, i, j, k, nx, ny, nz, eta, mobility, out):
    """Normal viscous flux rows F_nu . n from the stored gradient block."""
    # strain S = (grad u + grad u^T)/2; big_g[m, d] = d w_m / d x_d
    g_mu0 = big_g[e, 0, 0, i, j, k]
    g_mu1 = big_g[e, 0, 1, i, j, k]
    g_mu2 = big_g[e, 0, 2, i, j, k]
    out[0] = mobility * (g_mu0 * nx + g_mu1 * ny + g_mu2 * nz)
    for r in range(3):
        acc = 0.0
        gur0 = big_g[e, 1 + r, 0, i, j, k]
        gur1 = big_g[e, 1 + r, 1, i, j, k]
        gur2 = big_g[e, 1 + r, 2, i, j, k]
        s0 = 0.5 * (gur0 + big_g[e, 1 + 0, r, i, j, k])
        s1 = 0.5 * (gur1 + big_g[e, 1 + 1, r, i, j, k])
        s2 = 0.5 * (gur2 + big_g[e, 1 + 2, r, i, j, k])
        acc = 2.0 * eta * (s0 * nx + s1 * ny + s2 * nz)
        out[1 + r] = acc
    out[4] = 0.0


@njit(inline="always")
def _star_state(un_l, vt1_l, vt2_l, p_l, rho_l, cs_l,
                un_r, vt1_r, vt2_r, p_r, rho_r, cs_r):
    a_l = np.sqrt(un_l * un_l + 4.0 * cs_l * cs_l)
    a_r = np.sqrt(un_r * un_r + 4.0 * cs_r * cs_r)
    lam_lp = 0.5 * (un_l + a_l)
    lam_lm = 0.5 * (un_l - a_l)
    lam_rp = 0.5 * (un_r + a_r)
    lam_rm = 0.5 * (un_r - a_r)
    denom = rho_l * lam_lp - rho_r * lam_rm
    us = (p_l - p_r + rho_l * un_l * lam_lp - rho_r * un_r * lam_rm) / denom
    ps = p_l + rho_l * lam_lp * (un_l - us)
    if us >= 0.0:
        rs = rho_l * lam_lp / (us - lam_lm)
        v1s, v2s = vt1_l, vt2_l
    else:
        rs = rho_r * lam_rm / (us - lam_rp)
        v1s, v2s = vt1_r, vt2_r
    return us, ps, rs, v1s, v2s


@njit(**_JIT)
def primary_pass(q, wvars, big_g, resid, x, ja, jac, nbr, bc,
                 qtw0, qtw1, qtw2, w0, w1, w2,
                 phys, src, time, flux_type, scratch):
    """Accumulate dq/dt.  phys = (rho1, rho2, cs1, cs2, eta1, eta2, sigma,
    eps, mobility); src = (kind, f, b, cx, cy, cz, gx, gy, gz) with kind
    -1 disabled / 0 x-sheet / 1 ball."""
    k_total, _, n1, n2, n3 = q.shape
    rho1, rho2 = phys[0], phys[1]
    cs1, cs2 = phys[2], phys[3]
    eta1, eta2 = phys[4], phys[5]
    mobility = phys[8]
    src_kind = int(src[0])
    omega_t = 2.0 * np.pi * src[1] * time
    cos_t = np.cos(omega_t)
    inv_b2 = 1.0 / (src[2] * src[2]) if src_kind >= 0 else 0.0

    for e in prange(k_total):
        # scratch is (n_threads, 3, 5, n1, n2, n3): one private row per thread
        ft = scratch[get_thread_id()]

        # contravariant combined flux (inviscid - viscous) at every node
        for i in range(n1):
            for j in range(n2):
                for k in range(n3):
                    c = q[e, 0, i, j, k]
                    p = q[e, 4, i, j, k]
                    rho = _mix(c, rho1, rho2)
                    eta = _mix(c, eta1, eta2)
                    u = wvars[e, 1, i, j, k]
                    v = wvars[e, 2, i, j, k]
                    w = wvars[e, 3, i, j, k]
                    # Cartesian flux rows per direction
                    for d in range(3):
                        ft[d, 0, i, j, k] = 0.0
                        ft[d, 1, i, j, k] = 0.0
                        ft[d, 2, i, j, k] = 0.0
                        ft[d, 3, i, j, k] = 0.0
                        ft[d, 4, i, j, k] = 0.0
                    for n in range(3):
                        if n == 0:
                            fe0 = c * u
                            fe1 = 0.5 * rho * u * u + p
                            fe2 = 0.5 * rho * u * v
                            fe3 = 0.5 * rho * u * w
                        elif n == 1:
                            fe0 = c * v
                            fe1 = 0.5 * rho * u * v
                            fe2 = 0.5 * rho * v * v + p
                            fe3 = 0.5 * rho * v * w
                        else:
                            fe0 = c * w
                            fe1 = 0.5 * rho * u * w
                            fe2 = 0.5 * rho * v * w
                            fe3 = 0.5 * rho * w * w + p
                        # subtract viscous rows in direction n
                        fv0 = mobility * big_g[e, 0, n, i, j, k]
                        s1 = big_g[e, 1, n, i, j, k] + big_g[e, 1 + n, 0, i, j, k]
                        s2 = big_g[e, 2, n, i, j, k] + big_g[e, 1 + n, 1, i, j, k]
                        s3 = big_g[e, 3, n, i, j, k] + big_g[e, 1 + n, 2, i, j, k]
                        f0 = fe0 - fv0
                        f1 = fe1 - eta * s1
                        f2 = fe2 - eta * s2
                        f3 = fe3 - eta * s3
                        for d in range(3):
                            jdn = ja[e, d, n, i, j, k]
                            ft[d, 0, i, j, k] += jdn * f0
                            ft[d, 1, i, j, k] += jdn * f1
                            ft[d, 2, i, j, k] += jdn * f2
                            ft[d, 3, i, j, k] += jdn * f3
                        # pressure row has no conservative/viscous flux

        # weak volume derivative + non-conservative volume + source
        for i in range(n1):
            for j in range(n2):
                for k in range(n3):
                    r0 = 0.0
                    r1 = 0.0
                    r2 = 0.0
                    r3 = 0.0
                    r4 = 0.0
                    if n1 > 1:
                        for a in range(n1):
                            qa = qtw0[i, a]
                            r0 += qa * ft[0, 0, a, j, k]
                            r1 += qa * ft[0, 1, a, j, k]
                            r2 += qa * ft[0, 2, a, j, k]
                            r3 += qa * ft[0, 3, a, j, k]
                    if n2 > 1:
                        for a in range(n2):
                            qa = qtw1[j, a]
                            r0 += qa * ft[1, 0, i, a, k]
                            r1 += qa * ft[1, 1, i, a, k]
                            r2 += qa * ft[1, 2, i, a, k]
                            r3 += qa * ft[1, 3, i, a, k]
                    if n3 > 1:
                        for a in range(n3):
                            qa = qtw2[k, a]
                            r0 += qa * ft[2, 0, i, j, a]
                            r1 += qa * ft[2, 1, i, j, a]
                            r2 += qa * ft[2, 2, i, j, a]
                            r3 += qa * ft[2, 3, i, j, a]

                    # non-conservative volume: Phi_m at the node contracted
                    # with the raw weak gradient J * G (surface parts are
                    # restored in the face loop below)
                    c = q[e, 0, i, j, k]
                    rho = _mix(c, rho1, rho2)
                    cs = _mix(c, cs1, cs2)
                    u = wvars[e, 1, i, j, k]
                    v = wvars[e, 2, i, j, k]
                    w = wvars[e, 3, i, j, k]
                    jj = jac[e, i, j, k]
                    # m=1: c grad(mu) into momentum rows
                    r1 -= c * jj * big_g[e, 0, 0, i, j, k]
                    r2 -= c * jj * big_g[e, 0, 1, i, j, k]
                    r3 -= c * jj * big_g[e, 0, 2, i, j, k]
                    # m=2..4: (rho/2) u . grad(u_i) and rho cs^2 div(u)
                    half_r = 0.5 * rho * jj
                    r1 -= half_r * (u * big_g[e, 1, 0, i, j, k]
                                    + v * big_g[e, 1, 1, i, j, k]
                                    + w * big_g[e, 1, 2, i, j, k])
                    r2 -= half_r * (u * big_g[e, 2, 0, i, j, k]
                                    + v * big_g[e, 2, 1, i, j, k]
                                    + w * big_g[e, 2, 2, i, j, k])
                    r3 -= half_r * (u * big_g[e, 3, 0, i, j, k]
                                    + v * big_g[e, 3, 1, i, j, k]
                                    + w * big_g[e, 3, 2, i, j, k])
                    rc2 = rho * cs * cs * jj
                    r4 -= rc2 * (big_g[e, 1, 0, i, j, k]
                                 + big_g[e, 2, 1, i, j, k]
                                 + big_g[e, 3, 2, i, j, k])

                    resid[e, 0, i, j, k] = r0
                    resid[e, 1, i, j, k] = r1
                    resid[e, 2, i, j, k] = r2
                    resid[e, 3, i, j, k] = r3
                    resid[e, 4, i, j, k] = r4

        # surface terms
        for f in range(6):
            code = bc[e, f]
            if code == BC_COLLAPSED:
                continue
            d, side = f // 2, f % 2
            sign = -1.0 if side == 0 else 1.0
            if d == 0:
                na, nb, wend = n2, n3, (w0[0] if side == 0 else w0[n1 - 1])
            elif d == 1:
                na, nb, wend = n1, n3, (w1[0] if side == 0 else w1[n2 - 1])
            else:
                na, nb, wend = n1, n2, (w2[0] if side == 0 else w2[n3 - 1])
            ne = nbr[e, f]
            io = _opposite_index(d, side, n1, n2, n3)
            fv_l = np.empty(5)
            fv_r = np.empty(5)
            for a in range(na):
                for b in range(nb):
                    i, j, k = _face_node(d, side, a, b, n1, n2, n3)
                    ii = jj_ = kk = 0
                    if code == BC_INTERIOR:
                        if d == 0:
                            ii, jj_, kk = io, a, b
                        elif d == 1:
                            ii, jj_, kk = a, io, b
                        else:
                            ii, jj_, kk = a, b, io

                    snx = sign * ja[e, d, 0, i, j, k]
                    sny = sign * ja[e, d, 1, i, j, k]
                    snz = sign * ja[e, d, 2, i, j, k]
                    s_jac = np.sqrt(snx * snx + sny * sny + snz * snz)
                    nx, ny, nz = snx / s_jac, sny / s_jac, snz / s_jac
                    # deterministic face triad
                    d1 = 1 if d == 0 else 0
                    if d1 == 0:
                        px, py, pz = 1.0 - nx * nx, -nx * ny, -nx * nz
                    else:
                        px, py, pz = -ny * nx, 1.0 - ny * ny, -ny * nz
                    tn = np.sqrt(px * px + py * py + pz * pz)
                    t1x, t1y, t1z = px / tn, py / tn, pz / tn
                    t2x = ny * t1z - nz * t1y
                    t2y = nz * t1x - nx * t1z
                    t2z = nx * t1y - ny * t1x

                    # left (owner) state
                    c_l = q[e, 0, i, j, k]
                    p_l = q[e, 4, i, j, k]
                    mu_l = wvars[e, 0, i, j, k]
                    u_l = wvars[e, 1, i, j, k]
                    v_l = wvars[e, 2, i, j, k]
                    w_l = wvars[e, 3, i, j, k]
                    rho_l = _mix(c_l, rho1, rho2)
                    cs_l = _mix(c_l, cs1, cs2)
                    eta_l = _mix(c_l, eta1, eta2)

                    # right (neighbour or ghost) state
                    if code == BC_INTERIOR:
                        c_r = q[ne, 0, ii, jj_, kk]
                        p_r = q[ne, 4, ii, jj_, kk]
                        mu_r = wvars[ne, 0, ii, jj_, kk]
                        u_r = wvars[ne, 1, ii, jj_, kk]
                        v_r = wvars[ne, 2, ii, jj_, kk]
                        w_r = wvars[ne, 3, ii, jj_, kk]
                        rho_r = _mix(c_r, rho1, rho2)
                        cs_r = _mix(c_r, cs1, cs2)
                        eta_r = _mix(c_r, eta1, eta2)
                    else:
                        c_r, p_r, mu_r = c_l, p_l, mu_l
                        rho_r, cs_r, eta_r = rho_l, cs_l, eta_l
                        if code == BC_NO_SLIP:
                            u_r, v_r, w_r = -u_l, -v_l, -w_l
                        else:
                            un_i = u_l * nx + v_l * ny + w_l * nz
                            u_r = u_l - 2.0 * un_i * nx
                            v_r = v_l - 2.0 * un_i * ny
                            w_r = w_l - 2.0 * un_i * nz

                    un_l = u_l * nx + v_l * ny + w_l * nz
                    vt1_l = u_l * t1x + v_l * t1y + w_l * t1z
                    vt2_l = u_l * t2x + v_l * t2y + w_l * t2z
                    un_r = u_r * nx + v_r * ny + w_r * nz
                    vt1_r = u_r * t1x + v_r * t1y + w_r * t1z
                    vt2_r = u_r * t2x + v_r * t2y + w_r * t2z
                    avg_mu = 0.5 * (mu_l + mu_r)

                    if flux_type == FLUX_ERS:
                        us, ps, rs, v1s, v2s = _star_state(
                            un_l, vt1_l, vt2_l, p_l, rho_l, cs_l,
                            un_r, vt1_r, vt2_r, p_r, rho_r, cs_r)
                        c_up = c_l if us >= 0.0 else c_r
                        fc0 = c_up * us
                        fc1 = 0.5 * rs * us * us + ps
                        fc2 = 0.5 * rs * us * v1s
                        fc3 = 0.5 * rs * us * v2s
                        dm1 = 0.5 * rs * us * us + 0.5 * rho_l * un_l * un_l \
                            - 0.5 * rs * us * un_l + c_l * avg_mu
                        dm2 = 0.5 * rs * us * v1s + 0.5 * rho_l * un_l * vt1_l \
                            - 0.5 * rs * us * vt1_l
                        dm3 = 0.5 * rs * us * v2s + 0.5 * rho_l * un_l * vt2_l \
                            - 0.5 * rs * us * vt2_l
                        dm4 = rho_l * cs_l * cs_l * us
                    else:
                        avg_un = 0.5 * (un_l + un_r)
                        fc0 = 0.5 * (c_l * un_l + c_r * un_r)
                        fc1 = 0.5 * (0.5 * rho_l * un_l * un_l + p_l
                                     + 0.5 * rho_r * un_r * un_r + p_r)
                        fc2 = 0.5 * (0.5 * rho_l * un_l * vt1_l
                                     + 0.5 * rho_r * un_r * vt1_r)
                        fc3 = 0.5 * (0.5 * rho_l * un_l * vt2_l
                                     + 0.5 * rho_r * un_r * vt2_r)
                        dm1 = 0.5 * rho_l * un_l * avg_un + c_l * avg_mu
                        dm2 = 0.5 * rho_l * un_l * 0.5 * (vt1_l + vt1_r)
                        dm3 = 0.5 * rho_l * un_l * 0.5 * (vt2_l + vt2_r)
                        dm4 = rho_l * cs_l * cs_l * avg_un

                    # unrotate momentum rows back to Cartesian components
                    m1 = fc1 + dm1
                    m2 = fc2 + dm2
                    m3 = fc3 + dm3
                    fx = m1 * nx + m2 * t1x + m3 * t2x
                    fy = m1 * ny + m2 * t1y + m3 * t2y
                    fz = m1 * nz + m2 * t1z + m3 * t2z

                    # viscous facet flux: BR1 mean inside, interior value at
                    # walls with the concentration row closed (no flux)
                    _viscous_normal(big_g, e, i, j, k, nx, ny, nz,
                                    eta_l, mobility, fv_l)
                    if code == BC_INTERIOR:
                        _viscous_normal(big_g, ne, ii, jj_, kk, nx, ny, nz,
                                        eta_r, mobility, fv_r)
                        for r in range(5):
                            fv_l[r] = 0.5 * (fv_l[r] + fv_r[r])
                    else:
                        fv_l[0] = 0.0

                    inv = s_jac / wend
                    resid[e, 0, i, j, k] -= inv * (fc0 - fv_l[0])
                    resid[e, 1, i, j, k] -= inv * (fx - fv_l[1])
                    resid[e, 2, i, j, k] -= inv * (fy - fv_l[2])
                    resid[e, 3, i, j, k] -= inv * (fz - fv_l[3])
                    resid[e, 4, i, j, k] -= inv * (dm4 - fv_l[4])

                    # restore the surface part of the weak non-conservative
                    # volume term (same facet values as the G solve)
                    if code == BC_INTERIOR:
                        mu_s = avg_mu
                        us_x = 0.5 * (u_l + u_r)
                        us_y = 0.5 * (v_l + v_r)
                        us_z = 0.5 * (w_l + w_r)
                        ps_s = 0.5 * (p_l + p_r)
                    else:
                        mu_s, ps_s = mu_l, p_l
                        us_x = 0.5 * (u_l + u_r)
                        us_y = 0.5 * (v_l + v_r)
                        us_z = 0.5 * (w_l + w_r)
                    inv_w = 1.0 / wend
                    u_dot_sn = (u_l * snx + v_l * sny + w_l * snz)
                    half_ru = 0.5 * rho_l * u_dot_sn
                    resid[e, 1, i, j, k] += \
                        (c_l * mu_s * snx + half_ru * us_x) * inv_w
                    resid[e, 2, i, j, k] += \
                        (c_l * mu_s * sny + half_ru * us_y) * inv_w
                    resid[e, 3, i, j, k] += \
                        (c_l * mu_s * snz + half_ru * us_z) * inv_w
                    resid[e, 4, i, j, k] += rho_l * cs_l * cs_l * \
                        (us_x * snx + us_y * sny + us_z * snz) * inv_w

        # scale by the mass matrix and add forcing
        for i in range(n1):
            for j in range(n2):
                for k in range(n3):
                    c = q[e, 0, i, j, k]
                    rho = _mix(c, rho1, rho2)
                    inv_srho = 1.0 / np.sqrt(rho)
                    inv_j = 1.0 / jac[e, i, j, k]
                    sx = src[6] * rho
                    sy = src[7] * rho
                    sz = src[8] * rho
                    sp = 0.0
                    if src_kind == 0:
                        dx = x[e, 0, i, j, k] - src[3]
                        sp = cos_t * np.exp(-dx * dx * inv_b2)
                    elif src_kind == 1:
                        dx = x[e, 0, i, j, k] - src[3]
                        dy = x[e, 1, i, j, k] - src[4]
                        dz = x[e, 2, i, j, k] - src[5]
                        sp = cos_t * np.exp(-(dx * dx + dy * dy + dz * dz)
                                            * inv_b2)
                    resid[e, 0, i, j, k] *= inv_j
                    resid[e, 1, i, j, k] = (resid[e, 1, i, j, k] * inv_j + sx) \
                        * inv_srho
                    resid[e, 2, i, j, k] = (resid[e, 2, i, j, k] * inv_j + sy) \
                        * inv_srho
                    resid[e, 3, i, j, k] = (resid[e, 3, i, j, k] * inv_j + sz) \
                        * inv_srho
                    resid[e, 4, i, j, k] = resid[e, 4, i, j, k] * inv_j + sp


@njit(**_JIT)
def lsrk_stage(q, reg, resid, coeff_a, coeff_b, dt):
    """One low-storage Runge-Kutta register/state update."""
    qf = q.reshape(-1)
    rf = reg.reshape(-1)
    sf = resid.reshape(-1)
    for n in prange(qf.shape[0]):
        rf[n] = coeff_a * rf[n] + dt * sf[n]
        qf[n] += coeff_b * rf[n]


@njit(**_JIT)
def wave_dt_pass(q, ja, jac, orders, out,
                 rho1, rho2, cs1, cs2, eta1, eta2, sigma, eps, mobility):
    """Per-element acoustic + parabolic time-step bound (pre-CFL)."""
    k_total, _, n1, n2, n3 = q.shape
    dims = np.array([n1, n2, n3], dtype=np.int64)
    for e in prange(k_total):
        best = 1e300
        for i in range(n1):
            for j in range(n2):
                for k in range(n3):
                    c = q[e, 0, i, j, k]
                    rho = _mix(c, rho1, rho2)
                    cs = _mix(c, cs1, cs2)
                    eta = _mix(c, eta1, eta2)
                    inv_srho = 1.0 / np.sqrt(rho)
                    u = q[e, 1, i, j, k] * inv_srho
                    v = q[e, 2, i, j, k] * inv_srho
                    w = q[e, 3, i, j, k] * inv_srho
                    jj = jac[e, i, j, k]
                    for d in range(3):
                        if dims[d] <= 1:
                            continue
                        a0 = ja[e, d, 0, i, j, k]
                        a1 = ja[e, d, 1, i, j, k]
                        a2 = ja[e, d, 2, i, j, k]
                        norm = np.sqrt(a0 * a0 + a1 * a1 + a2 * a2)
                        h = 2.0 * jj / norm
                        ud = (u * a0 + v * a1 + w * a2) / norm
                        lam = 0.5 * (abs(ud) + np.sqrt(ud * ud + 4.0 * cs * cs))
                        nn = orders[d] * orders[d]
                        dt_adv = h / (nn * lam)
                        if dt_adv < best:
                            best = dt_adv
                        hx = h / nn
                        nu = eta / rho
                        nu_ch = 1.5 * mobility * sigma * eps / (hx * hx)
                        nu_eff = nu if nu > nu_ch else nu_ch
                        if nu_eff > 0.0:
                            dt_visc = hx * hx / (4.0 * nu_eff)
                            if dt_visc < best:
                                best = dt_visc
        out[e] = best


@njit(**_JIT)
def entropy_pass(q, g, wvars, big_g, jac, w0, w1, w2, out,
                 rho1, rho2, cs1, cs2, eta1, eta2, sigma, eps, mobility):
    """Per-element entropy and dissipation quadrature.

    out[e, 0] = <J E, 1>  with E = f0 + (3/4) sigma eps |grad c|^2
                + rho |u|^2 / 2 + p^2 / (2 rho cs^2)
    out[e, 1] = <J (mobility |grad mu|^2 + 2 eta S:S), 1>
    """
    k_total, _, n1, n2, n3 = q.shape
    well = 12.0 * sigma / eps
    for e in prange(k_total):
        acc_e = 0.0
        acc_d = 0.0
        for i in range(n1):
            for j in range(n2):
                for k in range(n3):
                    c = q[e, 0, i, j, k]
                    p = q[e, 4, i, j, k]
                    rho = _mix(c, rho1, rho2)
                    cs = _mix(c, cs1, cs2)
                    eta = _mix(c, eta1, eta2)
                    u = wvars[e, 1, i, j, k]
                    v = wvars[e, 2, i, j, k]
                    w = wvars[e, 3, i, j, k]
                    g2 = (g[e, 0, i, j, k]**2 + g[e, 1, i, j, k]**2
                          + g[e, 2, i, j, k]**2)
                    energy = well * c * c * (1.0 - c) * (1.0 - c) \
                        + 0.75 * sigma * eps * g2 \
                        + 0.5 * rho * (u * u + v * v + w * w) \
                        + p * p / (2.0 * rho * cs * cs)
                    gm2 = (big_g[e, 0, 0, i, j, k]**2
                           + big_g[e, 0, 1, i, j, k]**2
                           + big_g[e, 0, 2, i, j, k]**2)
                    sdd = 0.0
                    for r in range(3):
                        for n in range(3):
                            s_rn = 0.5 * (big_g[e, 1 + r, n, i, j, k]
                                          + big_g[e, 1 + n, r, i, j, k])
                            sdd += s_rn * s_rn
                    diss = mobility * gm2 + 2.0 * eta * sdd
                    wght = w0[i] * w1[j] * w2[k] * jac[e, i, j, k]
                    acc_e += wght * energy
                    acc_d += wght * diss
        out[e, 0] = acc_e
        out[e, 1] = acc_d


@njit(cache=True)
def find_nonfinite(q):
    """Locate the first non-finite nodal value; (-1, ...) if clean."""
    k_total, nv, n1, n2, n3 = q.shape
    for e in range(k_total):
        for m in range(nv):
            for i in range(n1):
                for j in range(n2):
                    for k in range(n3):
                        if not np.isfinite(q[e, m, i, j, k]):
                            return e, m, i, j, k
    return -1, -1, -1, -1, -1
