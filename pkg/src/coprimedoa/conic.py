"""Specialized conic solvers for the gridless estimation pipeline.

Two fixed problem templates are handled:

* :func:`solve_dual_sdp` maximizes ``Re[u^H r] - eps*||u||_2`` over vectors
  ``u`` whose trigonometric polynomial ``sum_n u_n exp(2j*pi*n*tau)`` is
  bounded by one in modulus, with an optional sign condition
  ``Re[u^H w] <= 0``.  The modulus bound is encoded exactly by a Hermitian
  matrix ``Q`` with unit diagonal-sum structure and a positive semidefinite
  bordered matrix ``[[Q, u], [u^H, 1]]``.
* :func:`solve_l1_socp` minimizes ``||s||_1`` over nonnegative amplitudes
  subject to ``||r - F s - sigma2*w||_2 <= eps_d`` with a nonnegative noise
  power variable.

The SDP is solved by a primal-dual path-following interior-point method
with Nesterov-Todd scaling and Mehrotra correction, specialized to the
product cone (one complex Hermitian PSD block, one second-order cone for
the norm epigraph, one nonnegative slack for the sign condition).  The
Hermitian block is handled natively in complex arithmetic; the real
isometric vectorization (diagonal, then sqrt(2)-scaled real and imaginary
upper-triangle parts) is used only for the Schur-complement assembly.
Primal and dual iterates both start strictly feasible, so reported
certificates carry roundoff-level constraint residuals and the duality gap
is tracked explicitly.

Everything is deterministic: identical inputs produce identical outputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.optimize

__all__ = [
    "SdpProblem",
    "DualCertificate",
    "SdpSolverError",
    "solve_dual_sdp",
    "SocpProblem",
    "L1Solution",
    "solve_l1_socp",
]


# ---------------------------------------------------------------------------
# Problem and result containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SdpProblem:
    """Data of the dual semidefinite program.

    Attributes:
        r: Complex moment vector of length ``2*f_c + 1``.
        w: Deterministic noise direction of the same length, or ``None``
            when the noise power is known (no sign constraint).
        epsilon: Noise ball radius, ``>= 0``.
        f_c: Consecutive lag cutoff.
    """

    r: np.ndarray
    w: np.ndarray | None
    epsilon: float
    f_c: int

    def __post_init__(self):
        n = 2 * self.f_c + 1
        if self.r.shape != (n,):
            raise ValueError("r must have length 2*f_c + 1")
        if self.w is not None and self.w.shape != (n,):
            raise ValueError("w must have length 2*f_c + 1")
        if not np.isfinite(self.epsilon) or self.epsilon < 0:
            raise ValueError("epsilon must be finite and nonnegative")


@dataclass
class DualCertificate:
    """Solution of the dual SDP with machine-checkable residuals.

    Attributes:
        u: Dual vector of length ``2*f_c + 1``.
        Q: Hermitian matrix of the bounded-modulus recast.
        value: Dual objective ``Re[u^H r] - eps*||u||_2``; a valid lower
            bound on the primal total-variation optimum whenever the
            residuals vanish.
        residuals: ``psd_violation`` (negative part of the smallest
            eigenvalue of the bordered matrix), ``trace_violation``
            (largest deviation of the diagonal sums of ``Q``) and
            ``w_violation`` (positive part of ``Re[u^H w]``).
        converged: Whether the gap target was certified.
        gap_bound: Duality gap of the final primal-dual pair.
        iterations: Interior-point iterations taken.
    """

    u: np.ndarray
    Q: np.ndarray
    value: float
    residuals: dict[str, float]
    converged: bool
    gap_bound: float
    iterations: int
    epsilon: float = 0.0
    f_c: int = 0

    def to_json_dict(self) -> dict:
        return {
            "f_c": self.f_c,
            "epsilon": self.epsilon,
            "value": self.value,
            "converged": self.converged,
            "gap_bound": self.gap_bound,
            "iterations": self.iterations,
            "residuals": dict(self.residuals),
            "u_real": self.u.real.tolist(),
            "u_imag": self.u.imag.tolist(),
            "Q_real": self.Q.real.tolist(),
            "Q_imag": self.Q.imag.tolist(),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "DualCertificate":
        return cls(
            u=np.asarray(doc["u_real"]) + 1j * np.asarray(doc["u_imag"]),
            Q=np.asarray(doc["Q_real"]) + 1j * np.asarray(doc["Q_imag"]),
            value=doc["value"],
            residuals=dict(doc["residuals"]),
            converged=doc["converged"],
            gap_bound=doc["gap_bound"],
            iterations=doc["iterations"],
            epsilon=doc["epsilon"],
            f_c=doc["f_c"],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json(cls, text: str) -> "DualCertificate":
        return cls.from_json_dict(json.loads(text))


class SdpSolverError(RuntimeError):
    """Raised when the SDP solver cannot certify its gap target.

    Carries the best iterate so callers can inspect residuals instead of
    receiving a silent wrong answer.
    """

    def __init__(self, message: str, certificate: DualCertificate | None):
        super().__init__(message)
        self.certificate = certificate


# ---------------------------------------------------------------------------
# Hermitian vectorization helpers
# ---------------------------------------------------------------------------

def _svec_batch(H: np.ndarray, iu, ju) -> np.ndarray:
    """Isometric real vectorization of a stack of Hermitian matrices."""
    N = H.shape[-1]
    diag = H[..., np.arange(N), np.arange(N)].real
    upper = H[..., iu, ju]
    s2 = np.sqrt(2.0)
    return np.concatenate(
        [diag, s2 * upper.real, s2 * upper.imag], axis=-1
    )


def _unsvec(x: np.ndarray, N: int, iu, ju) -> np.ndarray:
    """Inverse of :func:`_svec_batch` for a single vector."""
    H = np.zeros((N, N), dtype=complex)
    k = len(iu)
    H[np.arange(N), np.arange(N)] = x[:N]
    upper = (x[N:N + k] + 1j * x[N + k:]) / np.sqrt(2.0)
    H[iu, ju] = upper
    H[ju, iu] = upper.conj()
    return H


# ---------------------------------------------------------------------------
# Constraint template of the dual SDP
# ---------------------------------------------------------------------------

class _SdpTemplate:
    """Constraint structure of the dual SDP for a given size and mode.

    The primal cone variable is a tuple of blocks: a Hermitian positive
    semidefinite matrix ``X`` of size ``N = 2*f_c + 2`` whose trailing
    column carries ``u``, an optional second-order-cone block ``(t, v)``
    with ``v`` linked to ``u`` (present when ``epsilon > 0``), and an
    optional scalar slack for ``Re[u^H w] <= 0``.
    """

    def __init__(self, f_c: int, has_soc: bool, w: np.ndarray | None):
        n = 2 * f_c + 1
        N = n + 1
        self.n, self.N = n, N
        self.has_soc = has_soc
        self.has_lin = w is not None
        self.iu, self.ju = np.triu_indices(N, 1)
        self.soc_dim = 1 + 2 * n if has_soc else 0

        rows: list[np.ndarray] = []   # Hermitian representers, PSD part
        soc_rows: list[np.ndarray] = []
        lin_rows: list[float] = []
        b: list[float] = []

        def herm(mat: np.ndarray) -> np.ndarray:
            return 0.5 * (mat + mat.conj().T)

        def add(mat, soc=None, lin=0.0, rhs=0.0):
            rows.append(herm(mat))
            soc_rows.append(
                soc if soc is not None else np.zeros(self.soc_dim)
            )
            lin_rows.append(lin)
            b.append(rhs)

        E = np.zeros((N, N), dtype=complex)

        # Corner normalization X[N-1, N-1] = 1.
        M = E.copy(); M[N - 1, N - 1] = 1.0
        add(M, rhs=1.0)
        # Diagonal sums of the Q block: 1 for lag 0, 0 otherwise.
        M = E.copy(); M[np.arange(n), np.arange(n)] = 1.0
        add(M, rhs=1.0)
        for j in range(1, n):
            i = np.arange(n - j)
            M = E.copy(); M[i, i + j] = 1.0
            add(M, rhs=0.0)                 # real part of the j-th sum
            M = E.copy(); M[i, i + j] = 1j
            add(M, rhs=0.0)                 # imaginary part
        # Link the SOC vector part to the trailing column of X.
        if has_soc:
            for i in range(n):
                soc = np.zeros(self.soc_dim); soc[1 + i] = -1.0
                M = E.copy(); M[i, N - 1] = 1.0
                add(M, soc=soc)
                soc = np.zeros(self.soc_dim); soc[1 + n + i] = -1.0
                M = E.copy(); M[i, N - 1] = 1j
                add(M, soc=soc)
        # Sign condition Re[u^H w] + slack = 0.
        if self.has_lin:
            M = E.copy()
            M[:n, N - 1] = w
            add(M, lin=1.0)

        self.T_A = np.stack(rows)                       # (m, N, N)
        self.A_psd = _svec_batch(self.T_A, self.iu, self.ju)
        self.A_soc = np.asarray(soc_rows)
        self.A_lin = np.asarray(lin_rows)
        self.b = np.asarray(b)
        self.m = len(b)
        # Degree of the product cone (for the gap normalization).
        self.deg = N + (2 if has_soc else 0) + (1 if self.has_lin else 0)


_TEMPLATE_CACHE: dict = {}


def _get_template(f_c, has_soc, w) -> _SdpTemplate:
    key = (f_c, has_soc, None if w is None else w.tobytes())
    tpl = _TEMPLATE_CACHE.get(key)
    if tpl is None:
        tpl = _SdpTemplate(f_c, has_soc, w)
        if len(_TEMPLATE_CACHE) > 32:
            _TEMPLATE_CACHE.clear()
        _TEMPLATE_CACHE[key] = tpl
    return tpl


# ---------------------------------------------------------------------------
# Cone block operations (Nesterov-Todd scaling)
# ---------------------------------------------------------------------------

def _soc_max_step(x: np.ndarray, dx: np.ndarray) -> float:
    """Largest step keeping ``x + a*dx`` in the second-order cone."""
    aq = dx[0] ** 2 - dx[1:] @ dx[1:]
    bq = 2.0 * (x[0] * dx[0] - x[1:] @ dx[1:])
    cq = x[0] ** 2 - x[1:] @ x[1:]
    best = np.inf
    if abs(aq) > 1e-300:
        disc = bq * bq - 4 * aq * cq
        if disc >= 0:
            for root in ((-bq - np.sqrt(disc)) / (2 * aq),
                         (-bq + np.sqrt(disc)) / (2 * aq)):
                if root > 0:
                    best = min(best, root)
    elif abs(bq) > 1e-300:
        root = -cq / bq
        if root > 0:
            best = min(best, root)
    if dx[0] < 0:
        best = min(best, -x[0] / dx[0])
    return best


def _psd_max_step(L: np.ndarray, dX: np.ndarray) -> float:
    """Largest step keeping ``X + a*dX`` PSD, given ``X = L L^H``."""
    M = sla.solve_triangular(L, dX, lower=True, check_finite=False)
    M = sla.solve_triangular(
        L, M.conj().T, lower=True, check_finite=False)
    lam = float(np.linalg.eigvalsh(0.5 * (M + M.conj().T))[0])
    return np.inf if lam >= -1e-300 else -1.0 / lam


def _arrow_solve(lam: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Solves ``L_lam y = d`` where ``L_lam`` is the SOC arrow matrix."""
    l0, l1 = lam[0], lam[1:]
    det = l0 * l0 - l1 @ l1
    a = (l0 * d[0] - l1 @ d[1:]) / det
    y = np.empty_like(d)
    y[0] = a
    y[1:] = (d[1:] - a * l1) / l0
    return y


# ---------------------------------------------------------------------------
# Dual SDP interior-point solver
# ---------------------------------------------------------------------------

def solve_dual_sdp(
    problem: SdpProblem,
    tol: float = 1e-7,
    max_iter: int = 200,
    verbose: bool = False,
) -> DualCertificate:
    """Solves the dual SDP to a certified relative duality gap.

    Primal and dual iterates are kept feasible (both start at strictly
    feasible closed-form points), so the certificate's constraint
    residuals are roundoff-level by construction and the measured duality
    gap of the final pair certifies optimality.

    Args:
        problem: Problem data.
        tol: Relative duality-gap target.
        max_iter: Interior-point iteration cap.
        verbose: Print per-iteration gap and step sizes.

    Returns:
        A :class:`DualCertificate`.

    Raises:
        SdpSolverError: If the gap target cannot be certified within the
            iteration budget; the best iterate rides along.
    """
    r = np.asarray(problem.r, dtype=complex)
    w = None if problem.w is None else np.asarray(problem.w, dtype=complex)
    eps = float(problem.epsilon)
    scale = max(1.0, float(np.linalg.norm(r)))
    has_soc = eps > 1e-12 * scale
    tpl = _get_template(problem.f_c, has_soc, w)
    n, N = tpl.n, tpl.N
    iu, ju = tpl.iu, tpl.ju
    has_lin = tpl.has_lin

    # Objective (min form): <C, X> + eps * t.
    C = np.zeros((N, N), dtype=complex)
    C[:n, N - 1] = -r / 2.0
    C[N - 1, :n] = -r.conj() / 2.0
    c_soc = np.zeros(tpl.soc_dim)
    if has_soc:
        c_soc[0] = eps

    # Strictly feasible primal start.
    delta = 0.3 / np.sqrt(n) if has_lin else 0.0
    X = np.zeros((N, N), dtype=complex)
    X[np.arange(n), np.arange(n)] = 1.0 / n
    X[N - 1, N - 1] = 1.0
    x_soc = np.zeros(tpl.soc_dim)
    x_lin = 0.0
    if has_lin:
        cidx = problem.f_c
        X[cidx, N - 1] = -delta
        X[N - 1, cidx] = -delta
        x_lin = delta
    if has_soc:
        x_soc[0] = 1.0 + delta
        if has_lin:
            x_soc[1 + cidx] = -delta

    # Strictly feasible dual start: y = 0 except the identity-generating
    # rows, chosen so z = c - A^T y sits safely inside each cone.
    y = np.zeros(tpl.m)
    gamma = 1.0 if has_lin else 0.0
    Zc = C.copy()
    if has_lin:
        Zc += gamma * tpl.T_A[-1]
    beta = float(np.linalg.norm(Zc, 2)) * 1.5 + scale
    y[0] = -beta   # corner row
    y[1] = -beta   # lag-0 diagonal sum row
    if has_lin:
        y[-1] = -gamma
    Zm = Zc + beta * np.eye(N)
    z_soc = c_soc - tpl.A_soc.T @ y
    z_lin = gamma


    def make_certificate(Xm, converged, gap, iters):
        u = Xm[:n, N - 1].copy()
        Q = 0.5 * (Xm[:n, :n] + Xm[:n, :n].conj().T)
        value = float(np.real(np.vdot(u, r)) - eps * np.linalg.norm(u))
        big = np.zeros((N, N), dtype=complex)
        big[:n, :n] = Q
        big[:n, N - 1] = u
        big[N - 1, :n] = u.conj()
        big[N - 1, N - 1] = 1.0
        eigmin = float(np.linalg.eigvalsh(big)[0])
        t_res = 0.0
        for j in range(n):
            i = np.arange(n - j)
            s = Q[i, i + j].sum()
            t_res = max(t_res, abs(s - (1.0 if j == 0 else 0.0)))
        w_res = 0.0
        if w is not None:
            w_res = max(0.0, float(np.real(np.vdot(u, w))))
        return DualCertificate(
            u=u,
            Q=Q,
            value=value,
            residuals={
                "psd_violation": max(0.0, -eigmin),
                "trace_violation": float(t_res),
                "w_violation": w_res,
            },
            converged=converged,
            gap_bound=float(gap),
            iterations=iters,
            epsilon=eps,
            f_c=problem.f_c,
        )

    deg = tpl.deg
    for it in range(max_iter):
        gap = float(np.real(np.vdot(X, Zm)))
        if has_soc:
            gap += float(x_soc @ z_soc)
        if has_lin:
            gap += x_lin * z_lin
        mu = gap / deg
        pri_obj = float(np.real(np.vdot(C, X))) + (
            eps * x_soc[0] if has_soc else 0.0)
        if verbose:
            dual_obj = float(tpl.b @ y)
            zr = C - _unsvec(y @ tpl.A_psd, N, iu, ju) - Zm
            rd = float(np.linalg.norm(_svec_batch(zr[None], iu, ju)[0]))
            if has_soc:
                rd += float(np.linalg.norm(c_soc - tpl.A_soc.T @ y - z_soc))
            print(f"  it={it:3d} gap={gap:.6e} pobj={-pri_obj:.9f} "
                  f"dobj={-dual_obj:.9f} rd={rd:.2e}")
        if gap <= tol * max(1.0, abs(pri_obj)):
            return make_certificate(X, True, gap, it)

        # Nesterov-Todd scalings.
        try:
            Lx = sla.cholesky(X, lower=True, check_finite=False)
            Lz = sla.cholesky(Zm, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise SdpSolverError(
                f"iterate left the cone: {exc}",
                make_certificate(X, False, gap, it),
            ) from exc
        U, sv, Vh = np.linalg.svd(Lz.conj().T @ Lx)
        sv = np.maximum(sv, 1e-300)
        R = Lx @ (Vh.conj().T / np.sqrt(sv))
        Rinv = (np.sqrt(sv)[:, None] * Vh) @ sla.solve_triangular(
            Lx, np.eye(N, dtype=complex), lower=True, check_finite=False)
        What = R @ R.conj().T
        What = 0.5 * (What + What.conj().T)
        lam_psd = sv  # scaled point is diagonal

        if has_soc:
            jx = x_soc[0] ** 2 - x_soc[1:] @ x_soc[1:]
            jz = z_soc[0] ** 2 - z_soc[1:] @ z_soc[1:]
            if jx <= 0 or jz <= 0 or x_soc[0] <= 0 or z_soc[0] <= 0:
                raise SdpSolverError(
                    "SOC iterate left the cone",
                    make_certificate(X, False, gap, it),
                )
            beta_s = (jx / jz) ** 0.25
            xb = x_soc / np.sqrt(jx)
            zb = z_soc / np.sqrt(jz)
            gam = np.sqrt((1.0 + xb @ zb) / 2.0)
            # NT point (J-unit), then its half-vector: the scaling matrix
            # is the hyperbolic Householder beta*(2 wb wb^T - J).
            wpt = np.empty(tpl.soc_dim)
            wpt[0] = (xb[0] + zb[0]) / (2 * gam)
            wpt[1:] = (xb[1:] - zb[1:]) / (2 * gam)
            wb = wpt.copy()
            wb[0] += 1.0
            wb /= np.sqrt(2.0 * (wpt[0] + 1.0))

            def soc_W(v, inv=False):
                # W = beta*(2 wb wb^T - J); W^{-1} swaps wb -> J wb and
                # beta -> 1/beta.  W is symmetric.
                b_ = 1.0 / beta_s if inv else beta_s
                w0, w1 = wb[0], (-wb[1:] if inv else wb[1:])
                dot = w0 * v[0] + w1 @ v[1:]
                out = np.empty_like(v)
                out[0] = 2.0 * w0 * dot - v[0]
                out[1:] = 2.0 * dot * w1 + v[1:]
                return b_ * out

            lam_soc = soc_W(z_soc)
        if has_lin:
            wl = np.sqrt(x_lin / z_lin)
            lam_lin = np.sqrt(x_lin * z_lin)

        # Schur complement S = A (W^T W) A^T over all blocks.
        TW = np.matmul(What, np.matmul(tpl.T_A, What))
        B_psd = _svec_batch(TW, iu, ju)
        S = tpl.A_psd @ B_psd.T
        if has_soc:
            WA = np.stack([soc_W(row) for row in tpl.A_soc])
            S += WA @ WA.T
        if has_lin:
            S += np.outer(tpl.A_lin, tpl.A_lin) * (wl * wl)
        S = 0.5 * (S + S.T)
        try:
            S_cho = sla.cho_factor(S, check_finite=False)
        except np.linalg.LinAlgError:
            S_cho = None
            S_reg = S + np.eye(tpl.m) * (1e-14 * np.trace(S))
            S_cho = sla.cho_factor(S_reg, check_finite=False)

        # Feasibility residuals (roundoff mop-up).
        x_svec = _svec_batch(X[None], iu, ju)[0]
        Ax = tpl.A_psd @ x_svec
        if has_soc:
            Ax = Ax + tpl.A_soc @ x_soc
        if has_lin:
            Ax = Ax + tpl.A_lin * x_lin
        r_p = tpl.b - Ax
        Zres = C - _unsvec(y @ tpl.A_psd, N, iu, ju) - Zm
        rd_soc = (c_soc - tpl.A_soc.T @ y - z_soc) if has_soc else None
        rd_lin = (0.0 - float(tpl.A_lin @ y) - z_lin) if has_lin else 0.0

        def kkt_solve(d_psd, d_soc, d_lin):
            """Direction from scaled complementarity targets ``ds``.

            Solves A dx = r_p, A^T dy + dz = r_d and
            W^{-T} dx + W dz = ds via the Schur complement
            S dy = r_p + A(W^T W r_d - W^T ds).
            """
            Wt_ds = np.matmul(R, np.matmul(d_psd, R.conj().T))
            rhs = tpl.A_psd @ _svec_batch(
                (np.matmul(What, np.matmul(Zres, What)) - Wt_ds)[None],
                iu, ju)[0]
            if has_soc:
                t1 = soc_W(soc_W(rd_soc)) - soc_W(d_soc)
                rhs = rhs + tpl.A_soc @ t1
            if has_lin:
                rhs = rhs + tpl.A_lin * (wl * wl * rd_lin - wl * d_lin)
            rhs = rhs + r_p
            dy = sla.cho_solve(S_cho, rhs, check_finite=False)
            dz_psd = Zres - _unsvec(dy @ tpl.A_psd, N, iu, ju)
            dX = Wt_ds - np.matmul(What, np.matmul(dz_psd, What))
            dX = 0.5 * (dX + dX.conj().T)
            if has_soc:
                dz_soc = rd_soc - tpl.A_soc.T @ dy
                dx_soc = soc_W(d_soc) - soc_W(soc_W(dz_soc))
            else:
                dz_soc = dx_soc = None
            if has_lin:
                dz_lin = rd_lin - float(tpl.A_lin @ dy)
                dx_lin = wl * d_lin - wl * wl * dz_lin
            else:
                dz_lin = dx_lin = 0.0
            return dX, dx_soc, dx_lin, dy, dz_psd, dz_soc, dz_lin

        def max_step(dX, dx_soc, dx_lin, dZ, dz_soc, dz_lin):
            a = _psd_max_step(Lx, dX)
            a = min(a, _psd_max_step(Lz, dZ))
            if has_soc:
                a = min(a, _soc_max_step(x_soc, dx_soc))
                a = min(a, _soc_max_step(z_soc, dz_soc))
            if has_lin:
                if dx_lin < 0:
                    a = min(a, -x_lin / dx_lin)
                if dz_lin < 0:
                    a = min(a, -z_lin / dz_lin)
            return a

        # Affine (predictor) direction: target lambda o lambda -> 0.
        d_psd = -np.diag(lam_psd).astype(complex)
        d_soc = -lam_soc if has_soc else None
        d_lin = -lam_lin if has_lin else 0.0
        aff = kkt_solve(d_psd, d_soc, d_lin)
        a_aff = min(1.0, max_step(aff[0], aff[1], aff[2],
                                  aff[4], aff[5], aff[6]))

        # Centering parameter from the predicted gap decrease.
        gap_aff = float(np.real(np.vdot(X + a_aff * aff[0],
                                        Zm + a_aff * aff[4])))
        if has_soc:
            gap_aff += float((x_soc + a_aff * aff[1])
                             @ (z_soc + a_aff * aff[5]))
        if has_lin:
            gap_aff += (x_lin + a_aff * aff[2]) * (z_lin + a_aff * aff[6])
        sigma = min(1.0, max(0.0, gap_aff / gap)) ** 3

        # Corrector: subtract the scaled cross term of the affine step.
        dxt = np.matmul(Rinv, np.matmul(aff[0], Rinv.conj().T))
        dzt = np.matmul(R.conj().T, np.matmul(aff[4], R))
        eta_psd = 0.5 * (np.matmul(dxt, dzt) + np.matmul(dzt, dxt))
        tgt = sigma * mu * np.eye(N) - np.diag(lam_psd ** 2) - eta_psd
        denom = lam_psd[:, None] + lam_psd[None, :]
        d_psd = 2.0 * tgt / denom
        d_psd = 0.5 * (d_psd + d_psd.conj().T)
        if has_soc:
            dxt_s = soc_W(aff[1], inv=True)
            dzt_s = soc_W(aff[5])
            eta = np.empty(tpl.soc_dim)
            eta[0] = dxt_s @ dzt_s
            eta[1:] = dxt_s[0] * dzt_s[1:] + dzt_s[0] * dxt_s[1:]
            ll = np.zeros(tpl.soc_dim)
            ll[0] = lam_soc @ lam_soc
            ll[1:] = 2.0 * lam_soc[0] * lam_soc[1:]
            tgt_s = -ll - eta
            tgt_s[0] += sigma * mu
            d_soc = _arrow_solve(lam_soc, tgt_s)
        if has_lin:
            dxt_l = aff[2] / wl
            dzt_l = wl * aff[6]
            d_lin = (sigma * mu - lam_lin ** 2 - dxt_l * dzt_l) / lam_lin

        dX, dx_soc, dx_lin, dy, dZ, dz_soc, dz_lin = kkt_solve(
            d_psd, d_soc, d_lin)
        a = min(1.0, 0.99 * max_step(dX, dx_soc, dx_lin,
                                     dZ, dz_soc, dz_lin))
        X = X + a * dX
        X = 0.5 * (X + X.conj().T)
        Zm = Zm + a * dZ
        Zm = 0.5 * (Zm + Zm.conj().T)
        y = y + a * dy
        if has_soc:
            x_soc = x_soc + a * dx_soc
            z_soc = z_soc + a * dz_soc
        if has_lin:
            x_lin = x_lin + a * dx_lin
            z_lin = z_lin + a * dz_lin
    gap = float(np.real(np.vdot(X, Zm)))
    if has_soc:
        gap += float(x_soc @ z_soc)
    if has_lin:
        gap += x_lin * z_lin
    cert = make_certificate(X, False, gap, max_iter)
    raise SdpSolverError(
        f"no convergence within {max_iter} interior-point iterations", cert
    )


# ---------------------------------------------------------------------------
# L1 / second-order-cone refinement solver
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SocpProblem:
    """Data of the sparse amplitude refinement problem.

    Attributes:
        F_est: Complex matrix ``(2*f_c + 1) x K_est`` of candidate atoms.
        r: Complex measurement vector.
        w: Deterministic noise direction (or ``None`` to drop the noise
            power variable).
        epsilon_d: Residual ball radius, ``>= 0``.
    """

    F_est: np.ndarray
    r: np.ndarray
    w: np.ndarray | None
    epsilon_d: float

    def __post_init__(self):
        if self.F_est.ndim != 2:
            raise ValueError("F_est must be a matrix")
        if self.r.shape != (self.F_est.shape[0],):
            raise ValueError("r length must match F_est rows")
        if self.w is not None and self.w.shape != self.r.shape:
            raise ValueError("w length must match r")
        if not np.isfinite(self.epsilon_d) or self.epsilon_d < 0:
            raise ValueError("epsilon_d must be finite and nonnegative")


@dataclass
class L1Solution:
    """Result of :func:`solve_l1_socp`.

    ``status`` is ``"optimal"`` or ``"infeasible"``; in the infeasible case
    ``s0``/``sigma2`` hold the minimal-residual nonnegative solution and
    ``residual`` its (unattainable-target) norm.
    """

    s0: np.ndarray
    sigma2: float
    residual: float
    status: str
    objective: float = 0.0


def _stack_real(F: np.ndarray) -> np.ndarray:
    return np.vstack([F.real, F.imag])


def solve_l1_socp(
    problem: SocpProblem,
    tol: float = 1e-9,
    nonneg: bool = True,
) -> L1Solution:
    """Solves ``min ||s||_1  s.t.  ||r - F s - sigma2*w|| <= eps_d``.

    Amplitudes are constrained nonnegative by default (they are source
    powers), which makes the l1 norm a plain sum; ``nonneg=False`` exposes
    the signed real variant through a positive/negative split.  The noise
    power ``sigma2`` is always nonnegative.

    ``eps_d == 0`` is solved as a linear program on the stacked real
    equalities; ``eps_d > 0`` by a feasible-start barrier Newton method.
    Infeasible targets are reported with the minimal-residual solution
    rather than raised.
    """
    F = np.asarray(problem.F_est, dtype=complex)
    K = F.shape[1]
    eps_d = float(problem.epsilon_d)
    has_w = problem.w is not None

    cols = [F] if K > 0 else []
    c = [np.ones(K)]
    if not nonneg and K > 0:
        cols.append(-F)
        c.append(np.ones(K))
    if has_w:
        cols.append(problem.w[:, None])
        c.append(np.zeros(1))
    if not cols:
        res = float(np.linalg.norm(problem.r))
        status = "optimal" if res <= eps_d * (1 + 1e-9) + 1e-12 \
            else "infeasible"
        return L1Solution(np.zeros(0), 0.0, res, status)
    M = _stack_real(np.hstack(cols))
    q = np.concatenate([problem.r.real, problem.r.imag])
    cvec = np.concatenate(c)
    d = M.shape[1]

    def unpack(x):
        if nonneg:
            s0 = x[:K]
            rest = K
        else:
            s0 = x[:K] - x[K:2 * K]
            rest = 2 * K
        sigma2 = float(x[rest]) if has_w else 0.0
        return s0, sigma2

    # Minimal-residual nonnegative solution; doubles as the feasibility
    # check and the interior-point warm start.
    x_nn, res_nn = scipy.optimize.nnls(M, q)
    if res_nn > eps_d * (1 + 1e-9) + 1e-9:
        s0, sigma2 = unpack(x_nn)
        return L1Solution(s0, sigma2, float(res_nn), "infeasible",
                          float(cvec @ x_nn))

    if eps_d <= 1e-14 * max(1.0, float(np.linalg.norm(q))):
        lp = scipy.optimize.linprog(
            cvec, A_eq=M, b_eq=q, bounds=[(0, None)] * d, method="highs"
        )
        if not lp.success:
            s0, sigma2 = unpack(x_nn)
            return L1Solution(s0, sigma2, float(res_nn), "infeasible",
                              float(cvec @ x_nn))
        s0, sigma2 = unpack(lp.x)
        res = float(np.linalg.norm(M @ lp.x - q))
        return L1Solution(s0, sigma2, res, "optimal", float(lp.fun))

    # Strictly feasible start: nudge the NNLS point into the interior.
    x0 = None
    for shift in (1e-2, 1e-3, 1e-4, 1e-6, 1e-8):
        cand = x_nn + shift * max(1.0, float(x_nn.max(initial=1.0)))
        if np.linalg.norm(M @ cand - q) < eps_d * (1 - 1e-9):
            x0 = cand
            break
    if x0 is None:
        # Boundary-only feasible set; the minimal-residual point is it.
        s0, sigma2 = unpack(x_nn)
        return L1Solution(s0, sigma2, float(res_nn), "optimal",
                          float(cvec @ x_nn))

    MtM = M.T @ M
    nu = d + 2
    x = x0
    mu = max(1.0, float(cvec @ x)) / nu

    def barrier_val(xv):
        e = M @ xv - q
        s = eps_d ** 2 - e @ e
        if s <= 0 or np.any(xv <= 0):
            return np.inf
        return cvec @ xv - mu * (np.log(s) + np.sum(np.log(xv)))

    for _outer in range(80):
        for _inner in range(60):
            e = M @ x - q
            s = eps_d ** 2 - e @ e
            Mte = M.T @ e
            g = cvec - mu / x + (2.0 * mu / s) * Mte
            H = (2.0 * mu / s) * MtM \
                + (4.0 * mu / s ** 2) * np.outer(Mte, Mte)
            H[np.arange(d), np.arange(d)] += mu / x ** 2
            try:
                dx = -sla.cho_solve(
                    sla.cho_factor(H, check_finite=False), g,
                    check_finite=False)
            except np.linalg.LinAlgError:
                dx = -np.linalg.lstsq(H, g, rcond=None)[0]
            dec2 = float(-g @ dx)
            alpha = 1.0
            neg = dx < 0
            if np.any(neg):
                alpha = min(alpha, 0.98 * float(np.min(-x[neg] / dx[neg])))
            base = barrier_val(x)
            ok = False
            for _ls in range(50):
                xn = x + alpha * dx
                if barrier_val(xn) <= base - 0.01 * alpha * dec2:
                    ok = True
                    break
                alpha *= 0.5
            if not ok:
                break
            x = xn
            if dec2 <= 1e-10:
                break
        if nu * mu <= tol * max(1.0, abs(float(cvec @ x))):
            break
        mu *= 0.15

    s0, sigma2 = unpack(x)
    res = float(np.linalg.norm(M @ x - q))
    return L1Solution(s0, sigma2, res, "optimal", float(cvec @ x))
