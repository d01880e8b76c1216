"""Angle-delay profile transform and similarity measure.

The ADP maps the antenna axis of a CSI matrix to angle bins via a
half-shifted unitary DFT and the subcarrier axis to delay taps, then takes
the elementwise modulus. Bin (q, z) corresponds to arrival angle
arccos((2q - N_t)/N_t) and delay z * T_s.
"""

import numpy as np

from .channel import ScenarioConfig
from .errors import ConfigurationError, DomainError


def dft_v(n_antennas: int) -> np.ndarray:
    """Half-shifted unitary DFT over the antenna axis.

    Entry (z, q) = exp(-j*2*pi*z*(q - N_t/2)/N_t) / sqrt(N_t). The N_t/2
    shift centers the angle bins, so the antenna count must be even.
    """
    if n_antennas < 1:
        raise ConfigurationError("n_antennas must be at least 1")
    if n_antennas % 2:
        raise ConfigurationError(
            f"angle transform requires an even antenna count, got {n_antennas}"
        )
    z = np.arange(n_antennas)[:, None]
    q = np.arange(n_antennas)[None, :]
    return np.exp(-2j * np.pi * z * (q - n_antennas / 2) / n_antennas) / np.sqrt(n_antennas)


def dft_f(n_subcarriers: int) -> np.ndarray:
    """Unitary DFT over the subcarrier axis: entry (z, q) = exp(-j*2*pi*z*q/N_c)/sqrt(N_c)."""
    if n_subcarriers < 1:
        raise ConfigurationError("n_subcarriers must be at least 1")
    z = np.arange(n_subcarriers)[:, None]
    q = np.arange(n_subcarriers)[None, :]
    return np.exp(-2j * np.pi * z * q / n_subcarriers) / np.sqrt(n_subcarriers)


def compute_adp(csi: np.ndarray) -> np.ndarray:
    """Nonnegative angle-delay profile of a CSI matrix.

    Both transforms are applied as conjugated correlations so that a path
    with sampled delay n peaks in column n (the delay axis would otherwise
    come out mirrored); the antenna side gets its conjugate from the
    Hermitian transpose. Unitarity makes the transform norm-preserving.
    """
    H = np.asarray(csi)
    if H.ndim != 2:
        raise DomainError("CSI must be a 2-D matrix")
    if not np.all(np.isfinite(H.real)) or not np.all(np.isfinite(H.imag)):
        raise DomainError("CSI entries must be finite")
    n_t, n_c = H.shape
    V = dft_v(n_t)
    F = dft_f(n_c)
    return np.abs(V.conj().T @ H @ F.conj())


def bin_to_angle_delay(q: int, z: int, scenario: ScenarioConfig) -> tuple:
    """Arrival angle (radians) and delay (seconds) of ADP bin (q, z)."""
    if not 0 <= q < scenario.n_antennas:
        raise DomainError(f"angle bin {q} outside [0, {scenario.n_antennas})")
    if not 0 <= z < scenario.n_subcarriers:
        raise DomainError(f"delay bin {z} outside [0, {scenario.n_subcarriers})")
    theta = float(np.arccos((2 * q - scenario.n_antennas) / scenario.n_antennas))
    tau = z * scenario.sample_duration
    return theta, tau


def vec(adp: np.ndarray) -> np.ndarray:
    """Column-concatenation of a matrix into a vector (1-D input passes through)."""
    a = np.asarray(adp, dtype=float)
    if a.ndim == 1:
        return a
    if a.ndim != 2:
        raise DomainError("expected a matrix or a vector")
    return a.ravel(order="F")


def similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Normalized correlation vec(a).vec(b) / (||a||_F ||b||_F).

    Equals 1 for identical (or positively scaled) inputs and 0 for inputs
    with disjoint support; lies in [0, 1] whenever both inputs are
    nonnegative.
    """
    va = vec(a)
    vb = vec(b)
    if va.shape != vb.shape:
        raise DomainError(f"shape mismatch: {va.shape} vs {vb.shape}")
    na = np.linalg.norm(va)
    nb = np.linalg.norm(vb)
    if na == 0.0 or nb == 0.0:
        raise DomainError("similarity is undefined for zero-norm input")
    return float(va @ vb / (na * nb))


def to_unit_vector(adp: np.ndarray) -> np.ndarray:
    """Vectorize an ADP and scale it to unit Frobenius norm."""
    v = vec(adp)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise DomainError("cannot normalize a zero-norm profile")
    return v / norm
