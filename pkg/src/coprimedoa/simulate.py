"""Synthetic snapshot generation for the narrowband source model.

Snapshots follow ``x(t) = A s(t) + eps(t)`` with circularly-symmetric
complex Gaussian sources and noise; sources are temporally and mutually
uncorrelated.  All randomness flows through a seeded PCG64 generator so
experiments are bit-reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .geometry import ArrayGeometry, steering_matrix


@dataclass(frozen=True)
class SourceScene:
    """Ground truth: source directions, powers, and the noise power.

    Attributes:
        doas: ``sin(theta)`` of each source, distinct values in [-1, 1].
        powers: Linear source powers, one per DOA, all positive.
        noise_power: Linear noise power, nonnegative.
    """

    doas: tuple[float, ...]
    powers: tuple[float, ...]
    noise_power: float

    def __post_init__(self):
        doas = tuple(float(v) for v in self.doas)
        powers = tuple(float(v) for v in self.powers)
        if len(doas) != len(powers):
            raise ValueError("doas and powers must have equal length")
        if len(set(doas)) != len(doas):
            raise ValueError("source directions must be distinct")
        if any(abs(v) > 1.0 for v in doas):
            raise ValueError("all |sin(theta)| values must be <= 1")
        if any(p <= 0.0 for p in powers):
            raise ValueError("source powers must be positive")
        if self.noise_power < 0.0:
            raise ValueError("noise power must be nonnegative")
        object.__setattr__(self, "doas", doas)
        object.__setattr__(self, "powers", powers)

    @property
    def n_sources(self) -> int:
        return len(self.doas)

    def to_json_dict(self) -> dict:
        return {
            "doas": list(self.doas),
            "powers": list(self.powers),
            "noise_power": self.noise_power,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "SourceScene":
        return cls(
            doas=tuple(doc["doas"]),
            powers=tuple(doc["powers"]),
            noise_power=doc["noise_power"],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json(cls, text: str) -> "SourceScene":
        return cls.from_json_dict(json.loads(text))


@dataclass(frozen=True)
class SnapshotMatrix:
    """Complex snapshot data, one column per time sample.

    Attributes:
        data: Complex matrix of shape ``(n_sensors, T)``.
        T: Number of snapshots.
        seed: RNG seed the data was generated from.
    """

    data: np.ndarray
    T: int
    seed: int

    def __post_init__(self):
        if self.data.ndim != 2 or self.data.shape[1] != self.T or self.T < 1:
            raise ValueError("data must be (n_sensors, T) with T >= 1")


def _complex_gaussian(rng: np.random.Generator, shape, power) -> np.ndarray:
    """Draws CN(0, power) samples; real/imag parts carry power/2 each."""
    scale = np.sqrt(np.asarray(power, dtype=float) / 2.0)
    return scale * (
        rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    )


def generate_snapshots(
    geom: ArrayGeometry, scene: SourceScene, T: int, seed: int
) -> SnapshotMatrix:
    """Draws ``T`` snapshots of ``x(t) = A s(t) + eps(t)``.

    Source ``k`` emits i.i.d. CN(0, powers[k]) samples; the noise is i.i.d.
    CN(0, noise_power) across sensors and time.  More sources than sensors
    are allowed; resolving that regime is exactly what coarray processing
    is for.

    Args:
        geom: Array geometry.
        scene: Source scene; validated on construction.
        T: Number of snapshots, ``>= 1``.
        seed: Seed for the PCG64 generator; identical seeds give identical
            matrices.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    rng = np.random.default_rng(seed)
    L = geom.n_sensors
    K = scene.n_sources
    if K > 0:
        A = steering_matrix(geom, scene.doas)
        S = _complex_gaussian(rng, (K, T), np.asarray(scene.powers)[:, None])
        X = A @ S
    else:
        X = np.zeros((L, T), dtype=complex)
    X = X + _complex_gaussian(rng, (L, T), scene.noise_power)
    return SnapshotMatrix(data=X, T=T, seed=seed)


def exact_covariance(geom: ArrayGeometry, scene: SourceScene) -> np.ndarray:
    """Analytic covariance ``sum_k p_k a_k a_k^H + noise_power * I``.

    Returns a Hermitian positive semidefinite matrix; useful as the
    infinite-snapshot idealization of :func:`sample_covariance`.
    """
    L = geom.n_sensors
    R = scene.noise_power * np.eye(L, dtype=complex)
    if scene.n_sources > 0:
        A = steering_matrix(geom, scene.doas)
        R = R + (A * np.asarray(scene.powers)) @ A.conj().T
    return 0.5 * (R + R.conj().T)
