"""Monte Carlo verification of the concentration bounds and kernel metrics.

The coarray statistic is a quadratic function of Gaussian data, so its
perturbation obeys Bernstein-type tail bounds built from two primitives:
cross products of independent complex Gaussian sequences and centered
square sums.  These checks draw large trial batches, compare empirical
tail frequencies against the stated bounds (with three-sigma binomial
slack), and flag grid points outside a bound's validity range instead of
scoring them.

Also here: the nonnegative low-pass kernel used to measure reconstruction
error up to a cutoff frequency, and the smoothed-L1 spike-train metric
built on it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .coarray import doa_to_tau
from .geometry import ArrayGeometry, steering_matrix
from .simulate import SourceScene
from .superres import SpectrumEstimate

__all__ = [
    "TailCheckReport",
    "tail_check_xy",
    "tail_check_xx",
    "emn_tail_check",
    "fejer_kernel",
    "smoothed_l1_error",
    "spike_train_l1",
]

_CHUNK = 2000  # trials per vectorized batch; caps memory


@dataclass
class TailCheckReport:
    """Empirical tail frequencies against a theoretical bound.

    Attributes:
        epsilon_grid: Thresholds, ascending.
        empirical_freq: Monte Carlo estimate of the tail probability at
            each threshold.
        bound_values: Theoretical bound at each threshold, clipped to 1.
        trials: Trial count behind the frequencies.
        passed: Per point: frequency does not exceed the bound by more
            than three binomial standard errors.  Out-of-validity points
            pass vacuously.
        in_validity: Whether each point lies in the bound's validity
            range.
        label: Which check produced the report.
    """

    epsilon_grid: np.ndarray
    empirical_freq: np.ndarray
    bound_values: np.ndarray
    trials: int
    passed: np.ndarray
    in_validity: np.ndarray
    label: str = ""

    @property
    def all_passed(self) -> bool:
        return bool(np.all(self.passed))

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("epsilon,empirical,bound,in_validity,passed\n")
            for i in range(len(self.epsilon_grid)):
                fh.write(
                    f"{self.epsilon_grid[i]:.12g},"
                    f"{self.empirical_freq[i]:.12g},"
                    f"{self.bound_values[i]:.12g},"
                    f"{int(self.in_validity[i])},{int(self.passed[i])}\n"
                )

    def to_json_dict(self) -> dict:
        return {
            "label": self.label,
            "trials": self.trials,
            "epsilon_grid": self.epsilon_grid.tolist(),
            "empirical_freq": self.empirical_freq.tolist(),
            "bound_values": self.bound_values.tolist(),
            "in_validity": self.in_validity.astype(bool).tolist(),
            "passed": self.passed.astype(bool).tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


def _assemble(eps_grid, emp, bound, trials, valid, label) -> TailCheckReport:
    emp = np.asarray(emp)
    bound = np.minimum(np.asarray(bound), 1.0)
    stderr = np.sqrt(np.maximum(emp * (1 - emp), 0.0) / trials)
    passed = emp <= bound + 3.0 * stderr
    passed = passed | ~valid
    return TailCheckReport(
        epsilon_grid=np.asarray(eps_grid, dtype=float),
        empirical_freq=emp,
        bound_values=bound,
        trials=trials,
        passed=passed,
        in_validity=valid,
        label=label,
    )


def _tail_freq(stat_fn, trials: int, seed: int, eps_grid) -> np.ndarray:
    """Empirical Pr(stat >= eps) over chunked trials."""
    rng = np.random.default_rng(seed)
    eps_grid = np.asarray(eps_grid, dtype=float)
    counts = np.zeros(eps_grid.size)
    done = 0
    while done < trials:
        b = min(_CHUNK, trials - done)
        stats = stat_fn(rng, b)
        counts += (stats[:, None] >= eps_grid[None, :]).sum(axis=0)
        done += b
    return counts / trials


def tail_check_xy(
    T: int,
    sigma_x: float,
    sigma_y: float,
    eps_grid=None,
    trials: int = 10_000,
    seed: int = 0,
) -> TailCheckReport:
    """Tail of ``|sum_t x(t) y(t)^*|`` for independent complex Gaussians.

    Bound: ``8 exp(-eps^2 / (16 sx sy (T sx sy + eps/4)))``, valid for all
    ``eps >= 0``.

    The default grid spans multiples of the natural scale
    ``sx * sy * sqrt(T)`` from the trivially-passing region (bound above
    one) into the deep tail.
    """
    if trials < 1000:
        raise ValueError("need at least 1000 trials")
    sx, sy = float(sigma_x), float(sigma_y)
    if eps_grid is None:
        eps_grid = np.array([1, 2, 4, 6, 8, 10, 12]) * sx * sy * np.sqrt(T)
    eps_grid = np.sort(np.asarray(eps_grid, dtype=float))

    def stat(rng, b):
        if sx == 0 or sy == 0:
            return np.zeros(b)
        x = np.sqrt(sx * sx / 2) * (rng.standard_normal((b, T))
                                    + 1j * rng.standard_normal((b, T)))
        y = np.sqrt(sy * sy / 2) * (rng.standard_normal((b, T))
                                    + 1j * rng.standard_normal((b, T)))
        return np.abs(np.sum(x * y.conj(), axis=1))

    emp = _tail_freq(stat, trials, seed, eps_grid)
    denom = 16.0 * sx * sy * (T * sx * sy + eps_grid / 4.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        bound = 8.0 * np.exp(-np.where(denom > 0, eps_grid ** 2 / denom,
                                       np.inf))
    bound = np.where(eps_grid == 0, 8.0, bound)
    valid = np.ones(eps_grid.size, dtype=bool)
    return _assemble(eps_grid, emp, bound, trials, valid, "xy")


def tail_check_xx(
    T: int,
    sigma_x: float,
    eps_grid=None,
    trials: int = 10_000,
    seed: int = 0,
    real_variant: bool = False,
) -> TailCheckReport:
    """Tail of the centered square sum ``|sum_t |x(t)|^2 - T sx^2|``.

    Bound: ``4 exp(-eps^2 / (16 T sx^4))`` for complex data, valid on
    ``0 <= eps <= 4 sx^2 T``; with ``real_variant=True`` the data are real
    ``N(0, sx^2)`` and the bound is ``2 exp(-eps^2 / (16 sx^4 T))`` on the
    same range.  Points beyond the validity range are reported but
    excluded from pass/fail.
    """
    if trials < 1000:
        raise ValueError("need at least 1000 trials")
    sx = float(sigma_x)
    if eps_grid is None:
        eps_grid = np.array([1, 2, 4, 6, 8, 10, 12]) * sx * sx * np.sqrt(T)
    eps_grid = np.sort(np.asarray(eps_grid, dtype=float))

    def stat(rng, b):
        if sx == 0:
            return np.zeros(b)
        if real_variant:
            x = sx * rng.standard_normal((b, T))
            return np.abs(np.sum(x * x, axis=1) - T * sx * sx)
        x = np.sqrt(sx * sx / 2) * (rng.standard_normal((b, T))
                                    + 1j * rng.standard_normal((b, T)))
        return np.abs(np.sum(np.abs(x) ** 2, axis=1) - T * sx * sx)

    emp = _tail_freq(stat, trials, seed, eps_grid)
    amp = 2.0 if real_variant else 4.0
    with np.errstate(divide="ignore", invalid="ignore"):
        bound = amp * np.exp(
            -np.where(sx > 0, eps_grid ** 2 / (16.0 * T * sx ** 4), np.inf)
        )
    bound = np.where(eps_grid == 0, amp, bound)
    valid = eps_grid <= 4.0 * sx * sx * T
    return _assemble(eps_grid, emp, bound, trials, valid,
                     "xx-real" if real_variant else "xx")


def _emn_constants(eps, K, sigma_s, sigma):
    """The four exponential rates of the covariance-residual bound."""
    eps = np.asarray(eps, dtype=float)
    out = {}
    if K >= 2:
        a = 16.0 * sigma_s ** 2 * K * (K - 1)
        out["C1"] = eps ** 2 / (a * (a + eps))
    a2 = 16.0 * sigma_s * sigma * max(K, 1)
    out["C2"] = eps ** 2 / (a2 * (a2 + eps)) if a2 > 0 else np.full_like(
        eps, np.inf)
    a3 = 16.0 * sigma ** 2
    out["C3"] = eps ** 2 / (a3 * (a3 + eps)) if a3 > 0 else np.full_like(
        eps, np.inf)
    out["C4"] = eps ** 2 / (256.0 * sigma ** 4) if sigma > 0 else \
        np.full_like(eps, np.inf)
    return out


def emn_tail_check(
    geom: ArrayGeometry,
    scene: SourceScene,
    T: int,
    eps_grid=None,
    trials: int = 10_000,
    seed: int = 0,
    diagonal: bool = False,
) -> TailCheckReport:
    """Tail of one covariance-residual entry against its composite bound.

    The residual is the sample covariance minus its signal-plus-noise
    model with per-trial empirical source powers, i.e. the cross terms
    among sources, between sources and noise, and the centered noise
    square sum.  Requires equal source powers (the bound's scope).

    Args:
        geom: Array geometry supplying the steering matrix.
        scene: Scene with equal source powers.
        T: Snapshots per trial.
        eps_grid: Thresholds; defaults to multiples of the residual's
            natural scale.
        trials: Monte Carlo trials (>= 1000).
        seed: RNG seed.
        diagonal: Check a diagonal entry (``m == n``; the bound is valid
            only up to ``16 sigma^2`` there) instead of an off-diagonal
            one.
    """
    if trials < 1000:
        raise ValueError("need at least 1000 trials")
    powers = np.asarray(scene.powers)
    K = scene.n_sources
    if K > 0 and not np.allclose(powers, powers[0]):
        raise ValueError("bound requires equal source powers")
    sigma_s = float(np.sqrt(powers[0])) if K > 0 else 0.0
    sigma = float(np.sqrt(scene.noise_power))
    consts = _emn_constants(np.asarray([1.0, 2.0]), K, sigma_s, sigma)
    for name, vals in consts.items():
        if np.all(np.isfinite(vals)) and \
                not np.all(np.diff(vals) >= -1e-15):
            raise AssertionError(f"{name} not increasing")

    scale = (K * sigma_s ** 2 + sigma ** 2) / np.sqrt(T)
    if eps_grid is None:
        eps_grid = np.array([1, 2, 4, 8, 16, 32, 64, 128]) * max(scale, 1e-12)
    eps_grid = np.sort(np.asarray(eps_grid, dtype=float))

    A = steering_matrix(geom, scene.doas)
    m_idx, n_idx = (0, 0) if diagonal else (0, 1)
    if not diagonal and geom.n_sensors < 2:
        raise ValueError("off-diagonal check needs >= 2 sensors")
    am = A[m_idx]
    an = A[n_idx]

    def stat(rng, b):
        out = np.empty(b)
        for i in range(b):
            S = np.sqrt(powers[:, None] / 2) * (
                rng.standard_normal((K, T))
                + 1j * rng.standard_normal((K, T)))
            noise = np.sqrt(scene.noise_power / 2) * (
                rng.standard_normal((2, T))
                + 1j * rng.standard_normal((2, T)))
            em = noise[0]
            en = em if diagonal else noise[1]
            xm = am @ S + em
            xn = an @ S + en
            rhat = (xm @ xn.conj()) / T
            dhat = np.mean(np.abs(S) ** 2, axis=1)
            model = (am * dhat) @ an.conj()
            if diagonal:
                model = model + scene.noise_power
            out[i] = abs(rhat - model)
        return out

    emp = _tail_freq(stat, trials, seed, eps_grid)
    cs = _emn_constants(eps_grid, K, sigma_s, sigma)
    bound = 16.0 * np.exp(-cs["C2"] * T)
    if K >= 2:
        bound = bound + 8.0 * np.exp(-cs["C1"] * T)
    if diagonal:
        bound = bound + 4.0 * np.exp(-cs["C4"] * T)
        valid = eps_grid <= 16.0 * sigma ** 2
    else:
        bound = bound + 8.0 * np.exp(-cs["C3"] * T)
        valid = np.ones(eps_grid.size, dtype=bool)
    label = "emn-diag" if diagonal else "emn-offdiag"
    return _assemble(eps_grid, emp, bound, trials, valid, label)


def fejer_kernel(f_h: int, t, form: str = "closed"):
    """Nonnegative low-pass kernel with cutoff frequency ``f_h``.

    ``K(t) = (1/(f_h+1)) * (sin(pi (f_h+1) t) / sin(pi t))^2`` with the
    removable singularity at integer ``t`` evaluating to ``f_h + 1``.
    ``form="sum"`` evaluates the equivalent triangular Fourier sum
    ``(1/(f_h+1)) * sum_{|k|<=f_h} (f_h+1-|k|) e^{2j pi k t}`` instead
    (same values, used for cross-validation).  The kernel has unit
    integral over one period.
    """
    if f_h < 1:
        raise ValueError("f_h must be >= 1")
    scalar = np.isscalar(t)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    m = f_h + 1
    if form == "closed":
        s = np.sin(np.pi * t)
        num = np.sin(np.pi * m * t)
        near = np.abs(s) < 1e-12
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = (num / np.where(near, 1.0, s)) ** 2 / m
        vals = np.where(near, float(m), vals)
    elif form == "sum":
        k = np.arange(-f_h, f_h + 1)
        weights = (m - np.abs(k)) / m
        vals = np.real(
            np.exp(2j * np.pi * np.outer(t, k)) @ weights.astype(complex)
        )
    else:
        raise ValueError("form must be 'closed' or 'sum'")
    return float(vals[0]) if scalar else vals


def spike_train_l1(
    taus_a, amps_a, taus_b, amps_b, f_h: int, grid_points: int = 8192
) -> float:
    """L1 distance of two spike trains after smoothing by the kernel.

    Integrates ``|sum_a a_i K(t - tau_i) - sum_b b_j K(t - tau_j)|`` over
    one period on a uniform grid (periodic rectangle rule).
    """
    grid = np.arange(grid_points) / grid_points
    acc = np.zeros(grid_points)
    for tau, amp in zip(np.atleast_1d(taus_a), np.atleast_1d(amps_a)):
        acc += amp * fejer_kernel(f_h, grid - tau)
    for tau, amp in zip(np.atleast_1d(taus_b), np.atleast_1d(amps_b)):
        acc -= amp * fejer_kernel(f_h, grid - tau)
    return float(np.mean(np.abs(acc)))


def smoothed_l1_error(
    est: SpectrumEstimate,
    truth: SourceScene,
    f_h: int,
    grid_points: int = 8192,
) -> float:
    """Smoothed-L1 distance between an estimate and the true scene.

    The truth's spike locations come from the estimate's own spacing
    ratio; the cutoff must exceed the coarray cutoff the estimate was
    built from for the metric to see full detail.
    """
    if est.certificate is not None and f_h <= est.certificate.f_c:
        raise ValueError("f_h must exceed the coarray cutoff f_c")
    t_taus = [doa_to_tau(s, est.d_over_lambda) for s in truth.doas]
    e_taus = [s.tau for s in est.spikes]
    e_amps = [s.amplitude for s in est.spikes]
    return spike_train_l1(
        t_taus, list(truth.powers), e_taus, e_amps, f_h, grid_points
    )
