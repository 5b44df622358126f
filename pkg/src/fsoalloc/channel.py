"""Block-fading FSO channel: deterministic path loss times log-normal turbulence.

All lengths are metres internally. Attenuation coefficients arrive in dB/km
and are converted to nepers per metre.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DB_PER_NEPER = 10.0 * math.log10(math.e)  # 4.3429...


class InvalidParameterError(ValueError):
    pass


def circular_area(diameter_m: float) -> float:
    return math.pi * (diameter_m / 2.0) ** 2


@dataclass(frozen=True)
class AttenuationParams:
    alpha_db_per_km: float
    distance_m: float
    wavelength_m: float
    aperture_tx_m2: float
    aperture_rx_m2: float

    def __post_init__(self) -> None:
        errors = []
        if not self.alpha_db_per_km >= 0:
            errors.append(f"alpha_db_per_km must be >= 0, got {self.alpha_db_per_km}")
        for name in ("distance_m", "wavelength_m", "aperture_tx_m2", "aperture_rx_m2"):
            value = getattr(self, name)
            if not value > 0:
                errors.append(f"{name} must be > 0, got {value}")
        if errors:
            raise InvalidParameterError("; ".join(errors))

    @classmethod
    def from_km(
        cls,
        alpha_db_per_km: float,
        distance_km: float,
        wavelength_nm: float = 1550.0,
        diameter_tx_m: float = 0.015,
        diameter_rx_m: float = 0.05,
    ) -> "AttenuationParams":
        """Build from the units used in config files (km, nm, aperture diameters)."""
        return cls(
            alpha_db_per_km=alpha_db_per_km,
            distance_m=distance_km * 1e3,
            wavelength_m=wavelength_nm * 1e-9,
            aperture_tx_m2=circular_area(diameter_tx_m),
            aperture_rx_m2=circular_area(diameter_rx_m),
        )


@dataclass(frozen=True)
class TurbulenceParams:
    sigma_x: float = 0.2
    normalize_mean: bool = True

    def __post_init__(self) -> None:
        if not self.sigma_x >= 0:
            raise InvalidParameterError(f"sigma_x must be >= 0, got {self.sigma_x}")

    @property
    def mu_x(self) -> float:
        return -self.sigma_x**2 if self.normalize_mean else 0.0


def attenuation(params: AttenuationParams) -> float:
    """Path gain A_t A_r exp(-alpha d) / (d^2 lambda^2)."""
    alpha_per_m = params.alpha_db_per_km / DB_PER_NEPER / 1e3
    d = params.distance_m
    return (
        params.aperture_tx_m2
        * params.aperture_rx_m2
        * math.exp(-alpha_per_m * d)
        / (d**2 * params.wavelength_m**2)
    )


def attenuation_array(
    distances_m: np.ndarray,
    alpha_db_per_km: float,
    wavelength_m: float,
    aperture_tx_m2: float,
    aperture_rx_m2: float,
) -> np.ndarray:
    """Vectorised :func:`attenuation` over an array of link lengths."""
    d = np.asarray(distances_m, dtype=float)
    if np.any(d <= 0):
        raise InvalidParameterError("distances must be > 0")
    if wavelength_m <= 0:
        raise InvalidParameterError("wavelength must be > 0")
    alpha_per_m = alpha_db_per_km / DB_PER_NEPER / 1e3
    return aperture_tx_m2 * aperture_rx_m2 * np.exp(-alpha_per_m * d) / (d**2 * wavelength_m**2)


def sample_turbulence(
    params: TurbulenceParams, rng: np.random.Generator, size=None
) -> float | np.ndarray:
    """Log-normal irradiance factor exp(2X), X ~ N(mu_x, sigma_x^2)."""
    if params.sigma_x == 0:
        return 1.0 if size is None else np.ones(size)
    x = rng.normal(params.mu_x, params.sigma_x, size=size)
    return np.exp(2.0 * x)


def sample_csi(
    link_attenuation: np.ndarray,
    turb: TurbulenceParams,
    rng: np.random.Generator,
    batch: int | None = None,
) -> np.ndarray:
    """Draw channel gains for every link of a topology.

    ``link_attenuation`` holds the deterministic gain of each link and fixes
    the output shape; with ``batch`` a leading axis of independent draws is
    added.
    """
    att = np.asarray(link_attenuation, dtype=float)
    if np.any(att < 0) or not np.all(np.isfinite(att)):
        raise InvalidParameterError("link attenuations must be finite and nonnegative")
    shape = att.shape if batch is None else (batch,) + att.shape
    return att * sample_turbulence(turb, rng, size=shape)
