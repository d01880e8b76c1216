"""Geometric multipath channel simulator.

Generates geo-tagged CSI over a rectangular user grid served by one base
station with a uniform linear array. Propagation is a deterministic
line-of-sight ray plus one single-bounce ray per scatterer, so nearby grid
points produce smoothly varying fingerprints.

Conventions: positions are 2-D (x, y) in meters, the array axis points
along +y, and the angle of arrival is measured from that axis (broadside
is pi/2). Grid point (row i, col j) sits at origin + (j*spacing, i*spacing)
and datasets enumerate rows first (row-major).
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, DomainError

SPEED_OF_LIGHT = 299_792_458.0

# amplitude factor applied once per bounce
REFLECTION_LOSS = 0.5

ARRAY_AXIS = np.array([0.0, 1.0])


@dataclass(frozen=True)
class ScenarioConfig:
    """Radio and geometry parameters for one synthetic environment.

    `antenna_spacing=None` resolves to half the carrier wavelength.
    """

    carrier_frequency: float
    bandwidth: float
    n_antennas: int
    n_subcarriers: int
    bs_position: tuple
    scatterer_positions: tuple
    grid_origin: tuple
    grid_rows: int
    grid_cols: int
    grid_spacing: float
    rng_seed: int = 0
    antenna_spacing: float = None

    def __post_init__(self):
        if self.carrier_frequency <= 0 or self.bandwidth <= 0:
            raise ConfigurationError("carrier_frequency and bandwidth must be positive")
        if self.n_antennas < 2 or self.n_subcarriers < 2:
            raise ConfigurationError("need n_antennas >= 2 and n_subcarriers >= 2")
        if self.grid_rows < 1 or self.grid_cols < 1 or self.grid_spacing <= 0:
            raise ConfigurationError("grid must have positive extent and spacing")
        object.__setattr__(self, "bs_position", tuple(float(v) for v in self.bs_position))
        object.__setattr__(self, "grid_origin", tuple(float(v) for v in self.grid_origin))
        object.__setattr__(
            self,
            "scatterer_positions",
            tuple(tuple(float(v) for v in s) for s in self.scatterer_positions),
        )
        if self.antenna_spacing is None:
            object.__setattr__(self, "antenna_spacing", self.wavelength / 2.0)
        elif self.antenna_spacing <= 0:
            raise ConfigurationError("antenna_spacing must be positive")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency

    @property
    def sample_duration(self) -> float:
        """Delay-tap duration T_s = 1/bandwidth, in seconds."""
        return 1.0 / self.bandwidth

    @property
    def subcarrier_spacing(self) -> float:
        return self.bandwidth / self.n_subcarriers

    @property
    def n_grid_points(self) -> int:
        return self.grid_rows * self.grid_cols

    def grid_positions(self) -> np.ndarray:
        """All grid positions as an (rows*cols, 2) array in row-major order."""
        ox, oy = self.grid_origin
        jj, ii = np.meshgrid(np.arange(self.grid_cols), np.arange(self.grid_rows))
        x = ox + jj.ravel() * self.grid_spacing
        y = oy + ii.ravel() * self.grid_spacing
        return np.column_stack([x, y])

    def validate(self):
        """Check every grid-point path fits the delay budget (tap < n_subcarriers).

        Raises ConfigurationError naming the offending scatterer (or the
        line of sight) instead of letting long paths alias in the CFR.
        """
        grid = self.grid_positions()
        bs = np.asarray(self.bs_position)
        tap_length = SPEED_OF_LIGHT * self.sample_duration

        los = np.linalg.norm(grid - bs, axis=1)
        if np.any(los <= 0):
            raise ConfigurationError("a grid point coincides with the base station")
        worst = np.argmax(los)
        if int(np.round(los[worst] / tap_length)) >= self.n_subcarriers:
            raise ConfigurationError(
                f"line-of-sight path to grid point {tuple(grid[worst])} has sampled "
                f"delay >= n_subcarriers={self.n_subcarriers}; shrink the grid, move "
                "the base station closer, or lower the bandwidth"
            )
        for i, s in enumerate(self.scatterer_positions):
            s = np.asarray(s)
            d_bs = np.linalg.norm(s - bs)
            if d_bs <= 0:
                raise ConfigurationError(f"scatterer {i} coincides with the base station")
            total = d_bs + np.linalg.norm(grid - s, axis=1)
            worst = np.argmax(total)
            if int(np.round(total[worst] / tap_length)) >= self.n_subcarriers:
                raise ConfigurationError(
                    f"scatterer {i} at {tuple(s)}: bounce path via grid point "
                    f"{tuple(grid[worst])} has sampled delay >= n_subcarriers="
                    f"{self.n_subcarriers}"
                )


@dataclass(frozen=True)
class PathComponent:
    """One propagation path: integer delay tap, angle of arrival, complex gain."""

    sampled_delay: int
    aoa: float
    gain: complex


@dataclass(frozen=True)
class GeoTaggedSample:
    """A grid position together with its CSI matrix."""

    position: np.ndarray
    csi: np.ndarray


def array_response(theta: float, n_antennas: int, spacing: float, wavelength: float) -> np.ndarray:
    """Uniform-linear-array response vector for arrival angle `theta`.

    Element k is exp(-j*2*pi*k*spacing*cos(theta)/wavelength); element 0 is 1.
    """
    if not 0.0 <= theta <= np.pi:
        raise DomainError(f"arrival angle {theta} outside [0, pi]")
    if wavelength <= 0:
        raise DomainError("wavelength must be positive")
    if n_antennas < 1:
        raise DomainError("n_antennas must be at least 1")
    k = np.arange(n_antennas)
    return np.exp(-2j * np.pi * k * spacing * np.cos(theta) / wavelength)


def _aoa_from(bs: np.ndarray, target: np.ndarray) -> float:
    u = (target - bs) / np.linalg.norm(target - bs)
    return float(np.arccos(np.clip(u @ ARRAY_AXIS, -1.0, 1.0)))


def _on_grid(scenario: ScenarioConfig, position: np.ndarray) -> bool:
    rel = (np.asarray(position, dtype=float) - np.asarray(scenario.grid_origin)) / scenario.grid_spacing
    idx = np.round(rel)
    if np.max(np.abs(rel - idx)) > 1e-6:
        return False
    j, i = idx
    return 0 <= j < scenario.grid_cols and 0 <= i < scenario.grid_rows


def synthesize_paths(scenario: ScenarioConfig, user_position) -> list:
    """Deterministic multipath for one user: LOS plus one bounce per scatterer.

    Gains are 1/path_length with phase exp(-j*2*pi*length/wavelength);
    bounces carry an extra REFLECTION_LOSS factor. Delays are quantized to
    taps n = round(length / (c * T_s)); n >= n_subcarriers is rejected.
    """
    pos = np.asarray(user_position, dtype=float)
    if not _on_grid(scenario, pos):
        raise DomainError(f"user position {tuple(pos)} is not a grid point")
    bs = np.asarray(scenario.bs_position)
    tap_length = SPEED_OF_LIGHT * scenario.sample_duration
    wavelength = scenario.wavelength

    def path(length, aoa, bounces, origin):
        n = int(np.round(length / tap_length))
        if n >= scenario.n_subcarriers:
            raise ConfigurationError(
                f"{origin}: sampled delay {n} >= n_subcarriers={scenario.n_subcarriers}"
            )
        gain = (REFLECTION_LOSS ** bounces / length) * np.exp(-2j * np.pi * length / wavelength)
        return PathComponent(sampled_delay=n, aoa=aoa, gain=complex(gain))

    los_length = float(np.linalg.norm(pos - bs))
    if los_length <= 0:
        raise ConfigurationError("user position coincides with the base station")
    paths = [path(los_length, _aoa_from(bs, pos), 0, "line-of-sight path")]
    for i, s in enumerate(scenario.scatterer_positions):
        s = np.asarray(s)
        length = float(np.linalg.norm(s - bs) + np.linalg.norm(pos - s))
        paths.append(path(length, _aoa_from(bs, s), 1, f"scatterer {i} at {tuple(s)}"))
    return paths


def csi_from_paths(paths, scenario: ScenarioConfig) -> np.ndarray:
    """Channel frequency response H (n_antennas x n_subcarriers) of a path set.

    Column l (l = 1..n_subcarriers) is the sum over paths of
    gain * array_response(aoa) * exp(-j*2*pi*l*n/n_subcarriers).
    """
    if not paths:
        raise DomainError("csi_from_paths needs at least one path")
    n_c = scenario.n_subcarriers
    l = np.arange(1, n_c + 1)
    H = np.zeros((scenario.n_antennas, n_c), dtype=np.complex128)
    for p in paths:
        if not 0 <= p.sampled_delay < n_c:
            raise DomainError(f"sampled delay {p.sampled_delay} outside [0, {n_c})")
        e = array_response(p.aoa, scenario.n_antennas, scenario.antenna_spacing, scenario.wavelength)
        H += p.gain * np.outer(e, np.exp(-2j * np.pi * l * p.sampled_delay / n_c))
    return H


def generate_dataset(scenario: ScenarioConfig) -> list:
    """One GeoTaggedSample per grid point, row-major, deterministic."""
    scenario.validate()
    samples = []
    for pos in scenario.grid_positions():
        paths = synthesize_paths(scenario, pos)
        samples.append(GeoTaggedSample(position=pos.copy(), csi=csi_from_paths(paths, scenario)))
    return samples


def synthetic_scenario(
    n_antennas: int = 8,
    n_subcarriers: int = 8,
    grid_rows: int = 20,
    grid_cols: int = 20,
    grid_spacing: float = 0.2,
    n_scatterers: int = 8,
    carrier_frequency: float = 3.5e9,
    bandwidth: float = 50e6,
    bs_distance: float = 14.0,
    rng_seed: int = 0,
) -> ScenarioConfig:
    """Build a ready-to-use scenario with seeded scatterer placement.

    The base station sits at the origin, the grid is centered `bs_distance`
    away along +x, and scatterers are scattered in an annulus around the
    grid center with radii kept inside the delay budget.
    """
    rng = np.random.default_rng(rng_seed)
    span_x = (grid_cols - 1) * grid_spacing
    span_y = (grid_rows - 1) * grid_spacing
    center = np.array([bs_distance, 0.0])
    origin = center - np.array([span_x / 2.0, span_y / 2.0])

    budget = n_subcarriers * SPEED_OF_LIGHT / bandwidth  # meters of path length
    # worst bounce path <= bs_distance + 2*radius + half_diag; keep it under 90% budget
    half_diag = float(np.hypot(span_x, span_y)) / 2.0
    max_radius = 0.5 * (0.9 * budget - bs_distance - half_diag)
    # scatterers stay clear of the user grid so bounce geometry varies slowly
    min_radius = half_diag + 3.0
    if max_radius <= min_radius:
        raise ConfigurationError(
            "delay budget too tight for scatterer placement; raise n_subcarriers, "
            "lower the bandwidth, or move the base station closer"
        )

    # grid sector in cos(aoa) as seen from the BS; scatterers go outside it
    # (plus one bin of margin) so bounces land in angle bins the direct path
    # does not occupy, keeping fingerprints smooth in space
    corners = origin + np.array([[0, 0], [span_x, 0], [0, span_y], [span_x, span_y]])
    corner_cos = corners[:, 1] / np.linalg.norm(corners, axis=1)
    margin = 2.0 / n_antennas
    sector = (corner_cos.min() - margin, corner_cos.max() + margin)

    # one scatterer per annulus stratum so bounces spread over distinct
    # arrival angles instead of clumping into a few interfering bins
    scatterers = []
    for k in range(n_scatterers):
        candidate = None
        for _ in range(20):
            radius = rng.uniform(min_radius, max_radius)
            angle = 2.0 * np.pi * (k + rng.uniform(0.1, 0.9)) / n_scatterers
            s = center + radius * np.array([np.cos(angle), np.sin(angle)])
            norm = np.linalg.norm(s)
            if norm < 1.0:  # keep clear of the BS
                continue
            candidate = s
            if not sector[0] <= s[1] / norm <= sector[1]:
                break  # outside the grid's angular sector: take it
        scatterers.append((float(candidate[0]), float(candidate[1])))

    scenario = ScenarioConfig(
        carrier_frequency=carrier_frequency,
        bandwidth=bandwidth,
        n_antennas=n_antennas,
        n_subcarriers=n_subcarriers,
        bs_position=(0.0, 0.0),
        scatterer_positions=tuple(scatterers),
        grid_origin=(float(origin[0]), float(origin[1])),
        grid_rows=grid_rows,
        grid_cols=grid_cols,
        grid_spacing=grid_spacing,
        rng_seed=rng_seed,
    )
    scenario.validate()
    return scenario


def with_grid(scenario: ScenarioConfig, grid_rows: int, grid_cols: int) -> ScenarioConfig:
    """Same radio environment on a different grid size."""
    return replace(scenario, grid_rows=grid_rows, grid_cols=grid_cols)
