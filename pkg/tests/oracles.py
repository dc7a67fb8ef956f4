"""Independent reference computations for the test suite.

The main piece is a fine-grid discretization of the primal total-variation
problem over complex spike amplitudes (the modulus-bounded dual certifies
exactly that problem): a first-order proximal-gradient (FISTA) solve with
a bisection on the l1 weight discovers support and phases, an exact
active-set polish on the phase-rotated atoms enforces the residual ball,
and a modulus-slack sweep over every grid atom certifies grid optimality.
It shares no code with the interior-point solver under test and can only
overestimate the continuous optimum, so it is a valid one-sided bound.

Atoms live on the uniform grid ``tau = g/G``, so products with the atom
matrix are plain FFTs and the frame is exactly tight (``A A^H = G I``).
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq

from coprimedoa.superres import atom_matrix


def _apply_A(s, f_c, G):
    """(A s)_n = sum_g s_g exp(-2j pi n g / G), n = -f_c..f_c."""
    spec = np.fft.fft(s)
    return np.concatenate([spec[G - f_c:], spec[:f_c + 1]])


def _apply_At(v, f_c, G):
    """Adjoint: (A^H v)_g = sum_n v_n exp(+2j pi n g / G)."""
    pad = np.zeros(G, dtype=complex)
    pad[:f_c + 1] = v[f_c:]
    pad[G - f_c:] = v[:f_c]
    return G * np.fft.ifft(pad)


def _fista(r, w, f_c, G, lam, s0, sw0, iters):
    """Complex-amplitude l1-penalized least squares at weight ``lam``."""
    L = float(G + (0.0 if w is None else np.vdot(w, w).real))
    s, sw = s0.copy(), sw0
    ys, yw = s.copy(), sw
    t_acc = 1.0
    thr = lam / L
    for _ in range(iters):
        e = _apply_A(ys, f_c, G) - r
        if w is not None:
            e = e + yw * w
        g = _apply_At(e, f_c, G)
        z = ys - g / L
        mag = np.abs(z)
        s_new = z * np.maximum(0.0, 1.0 - thr / np.maximum(mag, 1e-300))
        if w is not None:
            gw = float(np.vdot(w, e).real)
            sw_new = max(yw - gw / L, 0.0)
        else:
            sw_new = 0.0
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_acc * t_acc))
        ys = s_new + ((t_acc - 1.0) / t_new) * (s_new - s)
        yw = sw_new + ((t_acc - 1.0) / t_new) * (sw_new - sw)
        s, sw, t_acc = s_new, sw_new, t_new
    e = _apply_A(s, f_c, G) - r
    if w is not None:
        e = e + sw * w
    return s, sw, float(np.linalg.norm(e))


def grid_primal(r, w, epsilon, f_c, step=1e-4, tol=1e-8, fista_iters=500):
    """Solves the complex-amplitude grid primal with a certified gap.

    min sum |s_g| over complex grid amplitudes (plus a costless
    nonnegative noise coefficient when ``w`` is given) subject to
    ``||r - A s - sigma2 w|| <= epsilon``.

    Returns:
        dict with ``value``, ``dual_lower`` (certified lower bound for the
        grid problem), ``support`` (grid indices), ``amplitudes``
        (complex), ``sigma2``, ``taus``.
    """
    r = np.asarray(r, dtype=complex)
    G = int(round(1.0 / step))
    taus = np.arange(G) / G
    if np.linalg.norm(r) <= epsilon * (1 + 1e-12):
        return {"value": 0.0, "dual_lower": 0.0, "support": [],
                "amplitudes": np.zeros(0, complex), "sigma2": 0.0,
                "taus": taus}

    # --- support discovery: bisection on the l1 weight ---------------
    lam_hi = 2.0 * float(np.abs(_apply_At(r, f_c, G)).max())
    lam_lo = lam_hi * 1e-7
    s = np.zeros(G, dtype=complex)
    sw = 0.0
    for _ in range(40):
        lam = np.sqrt(lam_hi * lam_lo)
        s, sw, resid = _fista(r, w, f_c, G, lam, s, sw, fista_iters)
        if resid > epsilon:
            lam_hi = lam
        else:
            lam_lo = lam
        if 0.98 * epsilon <= resid <= 1.005 * epsilon:
            break

    mags = np.abs(s)
    support = list(np.nonzero(mags > 1e-7 * max(mags.max(), 1e-300))[0])
    corr = _apply_At(r, f_c, G)
    if not support:
        support = [int(np.argmax(np.abs(corr)))]
    phases = {g: (s[g] / abs(s[g]) if abs(s[g]) > 0
                  else corr[g] / max(abs(corr[g]), 1e-300))
              for g in support}

    # --- exact polish on phase-rotated atoms + certification ----------
    A_full = atom_matrix(f_c, taus)
    q = np.concatenate([r.real, r.imag])
    w_col = None
    if w is not None:
        w_col = np.concatenate([np.asarray(w).real, np.asarray(w).imag])

    def stacked_atom(g):
        col = A_full[:, g] * phases[g]
        return np.concatenate([col.real, col.imag])

    def polish(sup, with_w):
        """Nonnegative constrained solve on fixed phase-rotated atoms."""
        sup = list(sup)
        use_w = bool(with_w)
        for _ in range(400):
            cols = [np.column_stack([stacked_atom(g) for g in sup])]
            if use_w:
                cols.append(w_col[:, None])
            Ms = np.hstack(cols)
            cs = np.concatenate([np.ones(len(sup)),
                                 np.zeros(1 if use_w else 0)])
            Gm = Ms.T @ Ms + 1e-13 * np.eye(Ms.shape[1])
            b = Ms.T @ q

            def solve_at(nu):
                x = np.linalg.solve(Gm, b - cs / (2.0 * nu))
                return x, float(np.linalg.norm(Ms @ x - q))

            x_ls = np.linalg.lstsq(Ms, q, rcond=None)[0]
            min_res = float(np.linalg.norm(Ms @ x_ls - q))
            if min_res >= epsilon:
                return None
            lo, hi = 1e-12, 1.0
            while solve_at(hi)[1] > epsilon and hi < 1e15:
                hi *= 10.0
            while solve_at(lo)[1] < epsilon and lo > 1e-18:
                lo /= 10.0
            nu = brentq(lambda v: solve_at(v)[1] - epsilon, lo, hi,
                        xtol=1e-16, rtol=1e-14)
            x, _ = solve_at(nu)
            if np.all(x >= -1e-11):
                u = 2.0 * nu * (q - Ms @ x)
                n_at = len(sup)
                return (sup, np.maximum(x[:n_at], 0.0),
                        float(x[n_at]) if use_w else 0.0, u)
            neg = int(np.argmin(x[:len(sup)]))
            if x[neg] >= -1e-11 and use_w and x[-1] < -1e-11:
                use_w = False
                continue
            sup.pop(neg)
            if not sup:
                return None
        raise RuntimeError("oracle polish did not settle")

    def modulus_slack(u_stacked):
        """Per-atom |<a_g, u>| via one FFT; the dual modulus profile."""
        u_c = u_stacked[:r.size] + 1j * u_stacked[r.size:]
        return np.abs(_apply_At(u_c, f_c, G)), u_c

    def feasible_dual_bound(u_stacked, u_c, peaks):
        uf = u_c.copy()
        if w is not None:
            overlap = float(np.vdot(w, uf).real)
            wn2 = float(np.vdot(w, w).real)
            if overlap > 0 and wn2 > 0:
                uf = uf - (overlap / wn2) * np.asarray(w)
                peaks_f = np.abs(_apply_At(uf, f_c, G))
            else:
                peaks_f = peaks
        else:
            peaks_f = peaks
        top = float(peaks_f.max())
        if top > 1.0:
            uf = uf / top
        return float(np.vdot(uf, r).real) - \
            epsilon * float(np.linalg.norm(uf))

    pool = list(support)
    best = None
    for _round in range(120):
        res = polish(pool, w is not None)
        if res is None:
            cols = np.column_stack([stacked_atom(g) for g in pool])
            x_ls = np.linalg.lstsq(cols, q, rcond=None)[0]
            resid_v = q - cols @ x_ls
            rc = resid_v[:r.size] + 1j * resid_v[r.size:]
            sc = np.abs(_apply_At(rc, f_c, G))
            sc[pool] = -np.inf
            g_new = int(np.argmax(sc))
            corr_g = _apply_At(rc, f_c, G)[g_new]
            phases[g_new] = corr_g / max(abs(corr_g), 1e-300)
            pool.append(g_new)
            continue
        active, amps, sigma2, u = res
        value = float(np.sum(amps))
        peaks, u_c = modulus_slack(u)
        dual_lower = feasible_dual_bound(u, u_c, peaks)
        slack = peaks - 1.0
        slack[pool] = -np.inf
        worst = int(np.argmax(slack))
        if best is None or value < best["value"]:
            best = {"value": value,
                    "dual_lower": dual_lower,
                    "support": active,
                    "amplitudes": np.array(
                        [amps[i] * phases[g]
                         for i, g in enumerate(active)]),
                    "sigma2": sigma2, "taus": taus}
        best["dual_lower"] = max(best["dual_lower"], dual_lower)
        self_gap = best["value"] - best["dual_lower"]
        if slack[worst] <= tol or \
                self_gap <= 2e-4 * max(best["value"], 1e-6):
            return best
        # Re-anchor every pool atom's phase to the current dual
        # direction (the optimal phases align with it) and grow the pool.
        profile = _apply_At(u_c, f_c, G)
        for g in pool + [worst]:
            if abs(profile[g]) > 1e-12:
                phases[g] = profile[g] / abs(profile[g])
        pool.append(worst)
    raise RuntimeError("grid oracle failed to certify optimality")


def brute_force_difference_lags(positions) -> dict[int, int]:
    """Exhaustive difference multiset of a position list."""
    out: dict[int, int] = {}
    for a in positions:
        for b in positions:
            out[a - b] = out.get(a - b, 0) + 1
    return out


def fine_grid_peak(u, n_grid=1_000_000):
    """Arg max of the dual polynomial modulus by brute grid search."""
    from coprimedoa.superres import dual_polynomial
    grid = np.arange(n_grid) / n_grid
    vals = np.abs(dual_polynomial(u, grid))
    return grid[int(np.argmax(vals))], float(vals.max())
