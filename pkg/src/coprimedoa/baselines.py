"""Classical baselines on the coarray vector: MUSIC and on-grid recovery.

Spatial smoothing restores a rank-``K`` covariance from the single coarray
"snapshot" by averaging outer products of overlapping subvectors; MUSIC
and root-MUSIC then operate on the ``(f_c + 1)``-element virtual ULA.  The
discrete sparse recovery (DSR) baseline solves nonnegative basis pursuit
on a fixed ``sin(theta)`` grid, which is exactly the on-grid counterpart
of the gridless estimator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coarray import CoarrayVector, VirtualMeasurement, doa_to_tau
from .conic import SocpProblem, solve_l1_socp
from .superres import SpectrumEstimate, Spike, atom_matrix

__all__ = [
    "SmoothedCovariance",
    "spatial_smooth",
    "music_spectrum",
    "root_music",
    "dsr_estimate",
]


@dataclass(frozen=True)
class SmoothedCovariance:
    """Spatially smoothed coarray covariance for subspace methods.

    Attributes:
        Rss: Hermitian PSD matrix of size ``(f_c + 1) x (f_c + 1)``.
        f_c: Consecutive lag cutoff of the originating coarray.
    """

    Rss: np.ndarray
    f_c: int

    def __post_init__(self):
        if self.Rss.shape != (self.f_c + 1, self.f_c + 1):
            raise ValueError("Rss must be (f_c+1) x (f_c+1)")


def spatial_smooth(z: CoarrayVector) -> SmoothedCovariance:
    """Averages outer products of overlapping coarray subvectors.

    Subvector ``i`` (for ``i = 0 .. f_c``) collects lags
    ``i - f_c .. i``, oriented so its entries follow the steering vector
    of an ``(f_c + 1)``-element unit-spacing virtual ULA.  For an exact
    coarray vector the result equals ``R1^2 / (f_c + 1)`` where ``R1`` is
    the virtual ULA covariance, so the eigenvectors match those of ``R1``
    and subspace methods apply unchanged.
    """
    f_c = z.f_c
    if f_c == 0:
        raise ValueError("spatial smoothing needs f_c >= 1")
    m = f_c + 1
    sub = np.empty((m, m), dtype=complex)
    for i in range(m):
        sub[:, i] = z.values[i:i + m]
    Rss = (sub @ sub.conj().T) / m
    return SmoothedCovariance(Rss=0.5 * (Rss + Rss.conj().T), f_c=f_c)


def _noise_projector(Rss: SmoothedCovariance, K: int) -> np.ndarray:
    m = Rss.f_c + 1
    if not 1 <= K <= Rss.f_c:
        raise ValueError(f"need 1 <= K <= f_c = {Rss.f_c}")
    _, vecs = np.linalg.eigh(Rss.Rss)
    En = vecs[:, : m - K]  # eigenvalues ascending: leading m-K are noise
    return En @ En.conj().T


def music_spectrum(
    Rss: SmoothedCovariance, K: int, grid, d_over_lambda: float = 0.5
) -> np.ndarray:
    """MUSIC pseudospectrum ``1 / ||E_n^H a||^2`` on a ``sin(theta)`` grid.

    Normalized to unit maximum.  ``K`` is the assumed source count.
    """
    Pn = _noise_projector(Rss, K)
    grid = np.asarray(grid, dtype=float)
    ell = np.arange(Rss.f_c + 1)
    A = np.exp(2j * np.pi * d_over_lambda * np.outer(ell, grid))
    denom = np.real(np.einsum("ig,ij,jg->g", A.conj(), Pn, A))
    spec = 1.0 / np.maximum(denom, 1e-300)
    return spec / spec.max()


def root_music(
    Rss: SmoothedCovariance, K: int, d_over_lambda: float = 0.5
) -> np.ndarray:
    """Root-MUSIC DOA estimates from the smoothed coarray covariance.

    The noise-subspace polynomial's roots come in conjugate-reciprocal
    pairs; the ``K`` roots inside the unit disk closest to the circle give
    the directions.

    Returns:
        Sorted array of ``K`` ``sin(theta)`` estimates.
    """
    Pn = _noise_projector(Rss, K)
    m = Rss.f_c + 1
    # Coefficients c_j = sum of the j-th diagonal of the projector.
    coeffs = np.array(
        [np.trace(Pn, offset=j) for j in range(-(m - 1), m)]
    )
    roots = np.roots(coeffs[::-1])
    inside = roots[np.abs(roots) < 1.0]
    # Guard the measure-zero case of roots exactly on the circle.
    if inside.size < K:
        inside = roots[np.abs(roots) <= 1.0 + 1e-12]
    order = np.argsort(np.abs(np.abs(inside) - 1.0))
    picked: list[complex] = []
    for idx in order:
        cand = inside[idx]
        if any(abs(np.angle(cand / p)) < 1e-7 for p in picked):
            continue
        picked.append(cand)
        if len(picked) == K:
            break
    sines = np.angle(np.asarray(picked)) / (2.0 * np.pi * d_over_lambda)
    return np.sort(sines)


def dsr_estimate(
    vm: VirtualMeasurement,
    epsilon: float,
    grid_step: float = 0.005,
    prune_frac: float = 0.01,
) -> SpectrumEstimate:
    """Discrete (on-grid) sparse recovery over a ``sin(theta)`` grid.

    Solves nonnegative basis pursuit ``min ||x||_1`` subject to
    ``||r - A x - sigma2*w|| <= epsilon`` where the columns of ``A`` are
    coarray atoms at grid points from -1 to 1 with the given step.

    Returns:
        A :class:`SpectrumEstimate` whose spikes sit on grid points; no
        dual certificate is attached.
    """
    if grid_step <= 0:
        raise ValueError("grid_step must be positive")
    grid = np.arange(-1.0, 1.0 + grid_step / 2, grid_step)
    taus = np.array([doa_to_tau(s, vm.d_over_lambda) for s in grid])
    A = atom_matrix(vm.f_c, taus)
    sol = solve_l1_socp(
        SocpProblem(F_est=A, r=vm.r, w=vm.w, epsilon_d=epsilon)
    )
    amps = np.maximum(sol.s0, 0.0)
    amax = amps.max(initial=0.0)
    spikes = [
        Spike(tau=float(taus[i]), sin_theta=float(grid[i]),
              amplitude=float(amps[i]))
        for i in np.nonzero(amps > prune_frac * amax)[0]
    ]
    spikes.sort(key=lambda s: s.sin_theta)
    return SpectrumEstimate(
        spikes=spikes,
        noise_power_est=max(0.0, sol.sigma2),
        certificate=None,
        diagnostics={
            "dual_value": float("nan"),
            "refinement_residual": sol.residual,
            "grid_size": int(grid.size),
            "status": sol.status,
        },
        raw_taus=taus,
        raw_amplitudes=amps,
        d_over_lambda=vm.d_over_lambda,
    )
