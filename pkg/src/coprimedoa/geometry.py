"""Co-prime array geometries and their difference coarrays.

A co-prime array interleaves two uniform subarrays: one with ``N`` sensors at
multiples of ``M`` (in units of the base spacing ``d``) and one with ``2M``
sensors at multiples of ``N``.  The pairwise position differences form a
virtual coarray whose consecutive lag range determines how many spatial
correlation lags are observable, and hence how many sources second-order
methods can resolve.

References:
    [1] P. Pal and P. P. Vaidyanathan, "Coprime sampling and the MUSIC
    algorithm," Proc. IEEE DSP/SPE Workshop, 2011.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from math import gcd

import numpy as np


@dataclass(frozen=True)
class ArrayGeometry:
    """Physical sensor positions of a linear array.

    Positions are exact integers in units of the base spacing ``d`` so that
    coarray lags are exact; no floating-point geometry is stored.

    Attributes:
        positions: Sorted tuple of distinct integer sensor positions.
        d_over_lambda: Ratio of the base spacing to the wavelength, in
            (0, 0.5].  Spacings above half a wavelength alias and are
            rejected.
        M: First co-prime parameter, or ``None`` for custom geometries.
        N: Second co-prime parameter, or ``None`` for custom geometries.
    """

    positions: tuple[int, ...]
    d_over_lambda: float
    M: int | None = None
    N: int | None = None

    def __post_init__(self):
        pos = tuple(int(p) for p in self.positions)
        if len(pos) == 0:
            raise ValueError("geometry needs at least one sensor")
        if len(set(pos)) != len(pos):
            raise ValueError("sensor positions must be distinct")
        if tuple(sorted(pos)) != pos:
            raise ValueError("sensor positions must be sorted ascending")
        if not (0.0 < self.d_over_lambda <= 0.5):
            raise ValueError(
                f"d_over_lambda must lie in (0, 0.5], got {self.d_over_lambda}"
            )
        if (self.M is None) != (self.N is None):
            raise ValueError("M and N must be given together or not at all")
        if self.M is not None and gcd(self.M, self.N) != 1:
            raise ValueError(f"M={self.M} and N={self.N} are not co-prime")
        object.__setattr__(self, "positions", pos)

    @property
    def n_sensors(self) -> int:
        """Number of physically distinct sensors (authoritative count)."""
        return len(self.positions)

    @property
    def n_nominal(self) -> int | None:
        """Nominal ``2M + N`` sensor count of the co-prime construction.

        One larger than :attr:`n_sensors` because the two subarrays share
        the sensor at the origin.  ``None`` for custom geometries.
        """
        if self.M is None:
            return None
        return 2 * self.M + self.N

    def to_json_dict(self) -> dict:
        return {
            "M": self.M,
            "N": self.N,
            "d_over_lambda": self.d_over_lambda,
            "positions": list(self.positions),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ArrayGeometry":
        return cls(
            positions=tuple(doc["positions"]),
            d_over_lambda=doc["d_over_lambda"],
            M=doc.get("M"),
            N=doc.get("N"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json(cls, text: str) -> "ArrayGeometry":
        return cls.from_json_dict(json.loads(text))


@dataclass(frozen=True)
class LagSet:
    """Multiset of coarray lags with the consecutive cutoff frequency.

    Attributes:
        lags: Mapping from integer lag to its multiplicity (number of sensor
            pairs realizing it).  Symmetric: lag ``l`` and ``-l`` always have
            equal multiplicity.
        f_c: Largest integer such that every lag in ``[-f_c, f_c]`` is
            present.
    """

    lags: dict[int, int]
    f_c: int

    def multiplicity(self, lag: int) -> int:
        return self.lags.get(int(lag), 0)

    @property
    def consecutive_lags(self) -> np.ndarray:
        """All lags of the maximal consecutive range, ``-f_c .. f_c``."""
        return np.arange(-self.f_c, self.f_c + 1)


def build_coprime(M: int, N: int, d_over_lambda: float = 0.5) -> ArrayGeometry:
    """Constructs the extended co-prime geometry with ``N`` + ``2M`` sensors.

    Sensor positions are ``{M*n : 0 <= n <= N-1}`` union
    ``{N*m : 0 <= m <= 2M-1}``; the origin is shared by both subarrays, so
    the physical sensor count is ``2M + N - 1``.

    Args:
        M: First co-prime parameter, ``>= 1``.
        N: Second co-prime parameter, ``>= 2``.
        d_over_lambda: Base spacing over wavelength, in (0, 0.5].

    Returns:
        The resulting :class:`ArrayGeometry`.

    Raises:
        ValueError: If ``(M, N)`` are not co-prime or arguments are out of
            range.
    """
    if M < 1 or N < 2:
        raise ValueError(f"need M >= 1 and N >= 2, got M={M}, N={N}")
    if gcd(M, N) != 1:
        raise ValueError(f"M={M} and N={N} are not co-prime")
    pos = sorted({M * n for n in range(N)} | {N * m for m in range(2 * M)})
    return ArrayGeometry(
        positions=tuple(pos), d_over_lambda=float(d_over_lambda), M=M, N=N
    )


def difference_set(geom: ArrayGeometry) -> LagSet:
    """Computes the difference coarray of a geometry.

    Enumerates all ordered sensor pairs ``(i, j)`` and counts the lags
    ``positions[i] - positions[j]``.  The cutoff ``f_c`` is taken from the
    actual difference set rather than any nominal formula, so geometries
    whose consecutive range exceeds ``M*N`` (the extended co-prime arrays
    do) get full credit.
    """
    pos = np.asarray(geom.positions)
    diffs = (pos[:, None] - pos[None, :]).ravel()
    lags = Counter(int(v) for v in diffs)
    f_c = 0
    while lags.get(f_c + 1, 0) > 0:
        f_c += 1
    return LagSet(lags=dict(lags), f_c=f_c)


def steering_matrix(geom: ArrayGeometry, doas) -> np.ndarray:
    """Builds the array steering matrix for given source directions.

    Entry ``(l, k)`` is ``exp(2j*pi*(d/lambda)*positions[l]*sin_theta_k)``.

    Args:
        geom: Array geometry.
        doas: Sequence of ``sin(theta)`` values, each in [-1, 1].

    Returns:
        Complex matrix of shape ``(n_sensors, len(doas))`` with unit-modulus
        entries.
    """
    doas = np.atleast_1d(np.asarray(doas, dtype=float))
    if np.any(np.abs(doas) > 1.0):
        raise ValueError("all |sin(theta)| values must be <= 1")
    pos = np.asarray(geom.positions, dtype=float)
    phase = 2.0 * np.pi * geom.d_over_lambda * np.outer(pos, doas)
    return np.exp(1j * phase)
