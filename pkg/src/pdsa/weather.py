"""Synthetic weather: hourly wind/solar capacity factors and load shape.

One "MC year" is a time-series realisation of renewable availability and
load for 8760 hours. Wind capacity factors follow a per-zone AR(1) process
clipped to [0, 1]; solar follows a clear-sky diurnal shape with stochastic
attenuation; load combines a seasonal amplitude, a diurnal profile and
multiplicative noise.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .rng import stream

HOURS_PER_YEAR = 8760


@dataclass(frozen=True)
class WindParams:
    mean_cf: float
    autocorr: float
    noise_std: float

    def __post_init__(self):
        if not 0.0 <= self.autocorr < 1.0:
            raise ValueError("autocorrelation must be in [0, 1)")


@dataclass(frozen=True)
class SolarParams:
    peak_cf: float = 0.8
    attenuation_mean: float = 0.85
    attenuation_std: float = 0.15


@dataclass(frozen=True)
class LoadParams:
    seasonal_amplitude: float = 0.125   # fractional swing around the mean
    diurnal: tuple = (0.62, 0.60, 0.58, 0.58, 0.60, 0.66, 0.75, 0.85,
                      0.92, 0.95, 0.96, 0.97, 0.96, 0.94, 0.93, 0.94,
                      0.97, 1.00, 0.99, 0.95, 0.88, 0.80, 0.72, 0.66)
    noise_std: float = 0.02
    floor: float = 0.05                 # minimum multiplier, keeps load > 0


@dataclass(frozen=True)
class WeatherModel:
    wind: dict            # zone -> WindParams
    solar: SolarParams = SolarParams()
    load: LoadParams = LoadParams()

    def fingerprint(self) -> str:
        blob = json.dumps({
            "wind": {z: vars(p) for z, p in sorted(self.wind.items())},
            "solar": vars(self.solar),
            "load": {"seasonal_amplitude": self.load.seasonal_amplitude,
                     "diurnal": list(self.load.diurnal),
                     "noise_std": self.load.noise_std,
                     "floor": self.load.floor},
        }, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def default_weather_model(zones) -> WeatherModel:
    return WeatherModel(wind={z: WindParams(0.35, 0.9, 0.08) for z in zones})


@dataclass(frozen=True)
class YearRealization:
    """Hourly series for one MC year (arrays of length 8760)."""

    wind_cf: dict          # zone -> ndarray
    solar_cf: dict         # zone -> ndarray
    load_mult: np.ndarray


def clear_sky_shape(hour_of_day: np.ndarray) -> np.ndarray:
    """Clear-sky solar shape; zero at local midnight, peak at noon."""
    return np.maximum(0.0, np.cos(math.pi * (hour_of_day - 12.0) / 12.0))


def generate_mc_year(model: WeatherModel, seed: int, year: int = 0,
                     hours: int = HOURS_PER_YEAR) -> YearRealization:
    """One hourly realization of wind/solar capacity factors and load."""
    hour = np.arange(hours)
    hod = hour % 24
    doy = hour // 24

    wind_cf = {}
    for zone in sorted(model.wind):
        p = model.wind[zone]
        rng = stream(seed, "wind", year, zone)
        noise = rng.normal(0.0, p.noise_std, size=hours)
        x = np.empty(hours)
        prev = p.mean_cf
        for t in range(hours):
            prev = p.mean_cf + p.autocorr * (prev - p.mean_cf) + noise[t]
            x[t] = prev
        wind_cf[zone] = np.clip(x, 0.0, 1.0)

    solar_cf = {}
    shape = clear_sky_shape(hod.astype(float)) * model.solar.peak_cf
    for zone in sorted(model.wind):
        rng = stream(seed, "solar", year, zone)
        att = np.clip(rng.normal(model.solar.attenuation_mean,
                                 model.solar.attenuation_std, size=hours),
                      0.0, 1.0)
        solar_cf[zone] = shape * att

    rng = stream(seed, "load", year)
    seasonal = 1.0 + model.load.seasonal_amplitude * np.cos(
        2.0 * math.pi * doy / 365.0)
    diurnal = np.asarray(model.load.diurnal)[hod]
    noise = 1.0 + rng.normal(0.0, model.load.noise_std, size=hours)
    load_mult = np.maximum(model.load.floor, seasonal * diurnal * noise)

    return YearRealization(wind_cf=wind_cf, solar_cf=solar_cf,
                           load_mult=load_mult)
