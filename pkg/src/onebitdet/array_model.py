"""Uniform linear array geometry and receive covariance model.

A narrow-band source from direction `angle` hits S sensors with
half-wavelength spacing; each sensor exposes an in-phase and a
quadrature channel, stacked as [I-block; Q-block] into M = 2S real
channels.  The receive covariance is gamma^2 A A^T + I with unit-power
source and unit-variance sensor noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ArrayConfig",
    "SteeringMatrix",
    "ReceiveCovariance",
    "build_steering",
    "receive_covariance",
    "correlation_normalize",
]


@dataclass(frozen=True)
class ArrayConfig:
    """Sensor count and arrival angle (radians, in [-pi/2, pi/2])."""

    sensors: int
    angle: float

    def __post_init__(self):
        if int(self.sensors) != self.sensors or self.sensors < 1:
            raise ValueError("sensors must be a positive integer")
        if not -np.pi / 2 <= self.angle <= np.pi / 2:
            raise ValueError("angle must lie in [-pi/2, pi/2] radians")

    @property
    def channels(self) -> int:
        """Number of real receive channels M = 2S (I and Q per sensor)."""
        return 2 * self.sensors


@dataclass(frozen=True)
class SteeringMatrix:
    """M x 2 array response, I-block rows stacked above Q-block rows."""

    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[1] != 2 or entries.shape[0] % 2:
            raise ValueError("steering matrix must have shape (2S, 2)")
        object.__setattr__(self, "entries", entries)

    @property
    def channels(self) -> int:
        return self.entries.shape[0]

    @property
    def sensors(self) -> int:
        return self.entries.shape[0] // 2


@dataclass(frozen=True)
class ReceiveCovariance:
    """Receive covariance gamma^2 A A^T + I (symmetric positive definite)."""

    matrix: np.ndarray = field(repr=False)
    gamma: float

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError("covariance must be square")
        object.__setattr__(self, "matrix", matrix)

    @property
    def channels(self) -> int:
        return self.matrix.shape[0]


def build_steering(config: ArrayConfig) -> SteeringMatrix:
    """Steering matrix of a half-wavelength uniform linear array.

    Sensor s sees the source with electrical phase psi_s = s*pi*sin(angle);
    its I row is (cos psi_s, sin psi_s) and its Q row is the same vector
    rotated by 90 degrees.
    """
    psi = np.arange(config.sensors) * np.pi * np.sin(config.angle)
    a_i = np.column_stack([np.cos(psi), np.sin(psi)])
    a_q = np.column_stack([-np.sin(psi), np.cos(psi)])
    return SteeringMatrix(np.vstack([a_i, a_q]))


def receive_covariance(steering: SteeringMatrix, gamma: float) -> ReceiveCovariance:
    """Covariance gamma^2 A A^T + I of the unquantized receive vector.

    Steering rows have unit norm analytically, so the diagonal is pinned
    to exactly 1 + gamma^2 (row dot products would only smear it by ulps).
    """
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    a = steering.entries
    matrix = gamma * gamma * (a @ a.T) + np.eye(a.shape[0])
    np.fill_diagonal(matrix, 1.0 + gamma * gamma)
    return ReceiveCovariance(matrix=matrix, gamma=float(gamma))


def correlation_normalize(cov) -> np.ndarray:
    """Rescale a covariance to unit diagonal: D^{-1/2} R D^{-1/2}.

    Accepts a ReceiveCovariance or any symmetric matrix with a strictly
    positive diagonal.  A constant diagonal (the receive-model case)
    reduces to one exact scalar division, so the result equals the input
    divided by 1 + gamma^2 with no extra round-off.
    """
    matrix = cov.matrix if isinstance(cov, ReceiveCovariance) else np.asarray(cov, dtype=float)
    diag = np.diag(matrix)
    if np.any(diag <= 0):
        raise ValueError("covariance has a non-positive diagonal entry")
    if np.all(diag == diag[0]):
        return matrix / diag[0]
    scale = 1.0 / np.sqrt(diag)
    return matrix * np.outer(scale, scale)
