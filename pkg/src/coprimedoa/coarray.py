"""Coarray covariance processing and the super-resolution measurement.

The sample covariance of a sparse array is mapped onto the virtual coarray
ULA: entry ``R[i, j]`` observes spatial correlation lag
``positions[i] - positions[j]``, so sorting entries by lag yields a vector
``z(n)`` on the consecutive range ``-f_c .. f_c``.  A deterministic phase
change of variables then turns ``z`` into a trigonometric-moment vector
``r(n) = sum_k p_k exp(-2j*pi*n*tau_k)`` with spike locations
``tau_k = (d/lambda) * (1 - sin(theta_k))`` in [0, 1], which is the input
of the gridless estimator.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .geometry import ArrayGeometry, difference_set
from .simulate import SnapshotMatrix


@dataclass(frozen=True)
class CoarrayVector:
    """Coarray correlations indexed by lag ``-f_c .. f_c``.

    Attributes:
        values: Complex vector of length ``2*f_c + 1``; ``values[f_c + n]``
            belongs to lag ``n``.
        f_c: Consecutive lag cutoff.
    """

    values: np.ndarray
    f_c: int

    def __post_init__(self):
        if self.values.shape != (2 * self.f_c + 1,):
            raise ValueError("values must have length 2*f_c + 1")

    def at(self, lag: int) -> complex:
        """Value at an integer lag in ``[-f_c, f_c]``."""
        if abs(lag) > self.f_c:
            raise IndexError(f"lag {lag} outside [-{self.f_c}, {self.f_c}]")
        return self.values[self.f_c + lag]

    @property
    def lags(self) -> np.ndarray:
        return np.arange(-self.f_c, self.f_c + 1)


@dataclass(frozen=True)
class VirtualMeasurement:
    """The transformed coarray measurement feeding the gridless estimator.

    Attributes:
        r: Complex moment vector over lags ``-f_c .. f_c``.
        w: Deterministic noise direction after the phase transform.  It has
            a single unit-modulus entry at the lag-0 position; in known
            noise-power mode that direction has already been subtracted
            from ``r`` but is kept for the refinement stage, which
            re-estimates a nonnegative residual noise power either way.
        f_c: Consecutive lag cutoff.
        d_over_lambda: Spacing ratio used by the change of variables.
        mode: ``"known"`` or ``"unknown"`` noise-power mode.
        known_noise_power: The subtracted power in known mode, else None.
    """

    r: np.ndarray
    w: np.ndarray
    f_c: int
    d_over_lambda: float
    mode: str
    known_noise_power: float | None = None

    def __post_init__(self):
        n = 2 * self.f_c + 1
        if self.r.shape != (n,) or self.w.shape != (n,):
            raise ValueError("r and w must have length 2*f_c + 1")
        if self.mode not in ("known", "unknown"):
            raise ValueError("mode must be 'known' or 'unknown'")
        if self.mode == "known" and self.known_noise_power is None:
            raise ValueError("known mode requires known_noise_power")

    @property
    def lags(self) -> np.ndarray:
        return np.arange(-self.f_c, self.f_c + 1)

    def to_json_dict(self) -> dict:
        return {
            "f_c": self.f_c,
            "d_over_lambda": self.d_over_lambda,
            "mode": self.mode,
            "known_noise_power": self.known_noise_power,
            "r_real": self.r.real.tolist(),
            "r_imag": self.r.imag.tolist(),
            "w_real": self.w.real.tolist(),
            "w_imag": self.w.imag.tolist(),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "VirtualMeasurement":
        r = np.asarray(doc["r_real"]) + 1j * np.asarray(doc["r_imag"])
        w = np.asarray(doc["w_real"]) + 1j * np.asarray(doc["w_imag"])
        return cls(
            r=r,
            w=w,
            f_c=doc["f_c"],
            d_over_lambda=doc["d_over_lambda"],
            mode=doc["mode"],
            known_noise_power=doc.get("known_noise_power"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json(cls, text: str) -> "VirtualMeasurement":
        return cls.from_json_dict(json.loads(text))


def sample_covariance(X: SnapshotMatrix) -> np.ndarray:
    """Sample covariance ``(1/T) sum_t x(t) x(t)^H``; exactly Hermitian."""
    R = (X.data @ X.data.conj().T) / X.T
    # Blocked matrix products are not bit-symmetric; symmetrize so the
    # coarray conjugate symmetry holds exactly.
    return 0.5 * (R + R.conj().T)


def virtualize(
    R: np.ndarray, geom: ArrayGeometry, combine: str = "average"
) -> CoarrayVector:
    """Maps a covariance matrix onto the consecutive coarray lags.

    For each lag ``n`` in ``-f_c .. f_c`` the entries ``R[i, j]`` with
    ``positions[i] - positions[j] == n`` are aggregated.

    Args:
        R: Hermitian covariance matrix matching the geometry.
        geom: Array geometry providing positions and ``f_c``.
        combine: ``"average"`` averages all entries observing a lag
            (variance reduction, the default); ``"first"`` keeps a single
            representative, the entry with the smallest sensor-index pair.
            For lag 0 the representative is the origin sensor's diagonal
            entry, a self difference of the first subarray.  Both rules
            agree exactly on analytic covariances.

    Raises:
        ValueError: On shape mismatch, unknown combine rule, or a geometry
            whose coarray has no usable aperture (``f_c == 0``).
    """
    L = geom.n_sensors
    if R.shape != (L, L):
        raise ValueError(f"R must be {L}x{L} for this geometry")
    if combine not in ("average", "first"):
        raise ValueError("combine must be 'average' or 'first'")
    lagset = difference_set(geom)
    f_c = lagset.f_c
    if f_c == 0:
        raise ValueError("geometry has no consecutive coarray (f_c == 0)")
    pos = np.asarray(geom.positions)
    diff = pos[:, None] - pos[None, :]
    z = np.zeros(2 * f_c + 1, dtype=complex)
    for n in range(-f_c, f_c + 1):
        ii, jj = np.nonzero(diff == n)
        if combine == "average":
            z[f_c + n] = R[ii, jj].mean()
        else:
            k = np.lexsort((jj, ii))[0]
            z[f_c + n] = R[ii[k], jj[k]]
    return CoarrayVector(values=z, f_c=f_c)


def to_super_resolution(
    z: CoarrayVector,
    d_over_lambda: float,
    known_noise_power: float | None = None,
) -> VirtualMeasurement:
    """Applies the change of variables producing the moment vector ``r``.

    ``r(n) = exp(-2j*pi*n*d/lambda) * (z(n) - sigma2 * [n == 0])`` in known
    mode (``known_noise_power`` given); unknown mode keeps the noise term
    inside ``r`` and the estimator carries the direction ``w`` explicitly.
    Spike locations implied by ``r`` live at
    ``tau = (d/lambda) * (1 - sin(theta))``.
    """
    f_c = z.f_c
    lags = np.arange(-f_c, f_c + 1)
    phase = np.exp(-2j * np.pi * lags * d_over_lambda)
    w_raw = np.zeros(2 * f_c + 1, dtype=complex)
    w_raw[f_c] = 1.0
    if known_noise_power is not None:
        r = phase * (z.values - known_noise_power * w_raw)
        mode = "known"
    else:
        r = phase * z.values
        mode = "unknown"
    return VirtualMeasurement(
        r=r,
        w=phase * w_raw,
        f_c=f_c,
        d_over_lambda=d_over_lambda,
        mode=mode,
        known_noise_power=known_noise_power,
    )


class DoaMapping(NamedTuple):
    """Result of mapping a spike location ``tau`` back to ``sin(theta)``."""

    sin_theta: float
    clip_distance: float
    spurious: bool


def doa_to_tau(sin_theta: float, d_over_lambda: float) -> float:
    """Forward map ``tau = (d/lambda) * (1 - sin(theta))``."""
    return d_over_lambda * (1.0 - sin_theta)


def tau_to_doa(
    tau: float, d_over_lambda: float, tol: float = 1e-6
) -> DoaMapping:
    """Inverse map ``sin(theta) = 1 - tau / (d/lambda)``, clipped to [-1, 1].

    Args:
        tau: Spike location in [0, 1).
        d_over_lambda: Spacing ratio; physical locations satisfy
            ``0 <= tau <= 2*d/lambda``.
        tol: How far outside the physical interval ``tau`` may fall (in tau
            units) before the spike is flagged spurious.

    Returns:
        A :class:`DoaMapping` with the clipped ``sin(theta)``, the clip
        distance in ``sin(theta)`` units, and the spurious flag.
    """
    sin_theta = 1.0 - tau / d_over_lambda
    clipped = float(np.clip(sin_theta, -1.0, 1.0))
    clip_distance = abs(sin_theta - clipped)
    outside = max(-tau, tau - 2.0 * d_over_lambda)
    return DoaMapping(
        sin_theta=clipped,
        clip_distance=clip_distance,
        spurious=bool(outside > tol),
    )
