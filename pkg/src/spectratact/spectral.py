"""Wavelength-resolved light transport through dyed media.

A pressed waveguide sensor reads out color: light crossing a lightly dyed
medium loses short wavelengths faster than long ones, so the spectrum at
the detector encodes the path length.  This module provides the sampled
spectral types (source spectra, dye decay profiles, detector channel
banks), exponential attenuation, channel integration and the log-ratio
that is affine in path length for narrow channels.

All spectral objects live on a shared, strictly increasing wavelength
grid; operations that combine two objects require the grids to be
identical and raise :class:`GridMismatchError` otherwise.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import BelowFloorError, GridMismatchError

# Default sampling grid: 400-700 nm at 1 nm, covering the blue and red
# bands used by the default channel bank.
GRID_MIN_NM = 400.0
GRID_MAX_NM = 700.0
GRID_STEP_NM = 1.0


def default_wavelength_grid() -> np.ndarray:
    return np.arange(GRID_MIN_NM, GRID_MAX_NM + 0.5 * GRID_STEP_NM, GRID_STEP_NM)


def _as_grid(wavelengths) -> np.ndarray:
    grid = np.asarray(wavelengths, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("wavelength grid needs at least 2 samples")
    if not np.all(np.diff(grid) > 0):
        raise ValueError("wavelength grid must be strictly increasing")
    return grid


def _require_same_grid(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape or not np.array_equal(a, b):
        raise GridMismatchError(
            f"wavelength grids differ ({a.size} vs {b.size} samples)"
        )


@dataclass(frozen=True)
class Spectrum:
    """Sampled radiant intensity per wavelength, arbitrary linear units."""

    wavelengths_nm: np.ndarray
    intensities: np.ndarray

    def __post_init__(self):
        grid = _as_grid(self.wavelengths_nm)
        inten = np.asarray(self.intensities, dtype=float)
        if inten.shape != grid.shape:
            raise ValueError("intensities must match the wavelength grid shape")
        if np.any(inten < 0) or not np.all(np.isfinite(inten)):
            raise ValueError("intensities must be finite and nonnegative")
        object.__setattr__(self, "wavelengths_nm", grid)
        object.__setattr__(self, "intensities", inten)

    @classmethod
    def flat(cls, intensity: float = 1.0, wavelengths_nm=None) -> "Spectrum":
        """Uniform spectrum, the default model for a white LED source."""
        grid = default_wavelength_grid() if wavelengths_nm is None else _as_grid(wavelengths_nm)
        return cls(grid, np.full_like(grid, float(intensity)))

    def to_dict(self) -> dict:
        return {
            "wavelengths_nm": self.wavelengths_nm.tolist(),
            "values": self.intensities.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Spectrum":
        return cls(np.asarray(doc["wavelengths_nm"]), np.asarray(doc["values"]))


@dataclass(frozen=True)
class DyeProfile:
    """Per-wavelength exponential decay coefficients of a dyed medium.

    ``decay_per_mm`` is the base profile; ``concentration_scale`` is a
    dimensionless multiplier standing in for the dye concentration, so the
    effective exponent is ``concentration_scale * decay_per_mm * path``.
    """

    wavelengths_nm: np.ndarray
    decay_per_mm: np.ndarray
    concentration_scale: float = 1.0

    def __post_init__(self):
        grid = _as_grid(self.wavelengths_nm)
        decay = np.asarray(self.decay_per_mm, dtype=float)
        if decay.shape != grid.shape:
            raise ValueError("decay_per_mm must match the wavelength grid shape")
        if np.any(decay < 0) or not np.all(np.isfinite(decay)):
            raise ValueError("decay coefficients must be finite and nonnegative")
        if not (self.concentration_scale >= 0):
            raise ValueError("concentration_scale must be >= 0")
        object.__setattr__(self, "wavelengths_nm", grid)
        object.__setattr__(self, "decay_per_mm", decay)

    def with_concentration(self, scale: float) -> "DyeProfile":
        return replace(self, concentration_scale=float(scale))

    def to_dict(self) -> dict:
        return {
            "wavelengths_nm": self.wavelengths_nm.tolist(),
            "values": self.decay_per_mm.tolist(),
            "concentration_scale": self.concentration_scale,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DyeProfile":
        return cls(
            np.asarray(doc["wavelengths_nm"]),
            np.asarray(doc["values"]),
            float(doc.get("concentration_scale", 1.0)),
        )


def default_red_dye(
    blue_decay_per_mm: float = 0.15,
    red_decay_per_mm: float = 0.005,
    crossover_nm: float = 560.0,
    width_nm: float = 25.0,
    wavelengths_nm=None,
    concentration_scale: float = 1.0,
) -> DyeProfile:
    """Smooth logistic-shaped red-dye profile.

    Decay falls monotonically from ``blue_decay_per_mm`` at the short end
    to ``red_decay_per_mm`` at the long end: blue is absorbed sharply, red
    passes.  The defaults give the stock sensor a log-ratio slope around
    -0.136 /mm over the blue/red band pair.
    """
    grid = default_wavelength_grid() if wavelengths_nm is None else _as_grid(wavelengths_nm)
    lo, hi = float(red_decay_per_mm), float(blue_decay_per_mm)
    if not 0 <= lo <= hi:
        raise ValueError("need 0 <= red_decay_per_mm <= blue_decay_per_mm")
    sigmoid = 1.0 / (1.0 + np.exp(-(grid - crossover_nm) / width_nm))
    return DyeProfile(grid, hi - (hi - lo) * sigmoid, concentration_scale)


@dataclass(frozen=True)
class Channel:
    """One named detector channel: a nonnegative response curve."""

    name: str
    wavelengths_nm: np.ndarray
    response: np.ndarray

    def __post_init__(self):
        grid = _as_grid(self.wavelengths_nm)
        resp = np.asarray(self.response, dtype=float)
        if resp.shape != grid.shape:
            raise ValueError("response must match the wavelength grid shape")
        if np.any(resp < 0) or not np.all(np.isfinite(resp)):
            raise ValueError("channel response must be finite and nonnegative")
        if not np.any(resp > 0):
            raise ValueError(f"channel {self.name!r} has zero integral")
        object.__setattr__(self, "wavelengths_nm", grid)
        object.__setattr__(self, "response", resp)


def boxcar_channel(name: str, lo_nm: float, hi_nm: float, wavelengths_nm=None,
                   closed_hi: bool = False) -> Channel:
    grid = default_wavelength_grid() if wavelengths_nm is None else _as_grid(wavelengths_nm)
    if closed_hi:
        mask = (grid >= lo_nm) & (grid <= hi_nm)
    else:
        mask = (grid >= lo_nm) & (grid < hi_nm)
    return Channel(name, grid, mask.astype(float))


def line_channel(name: str, wavelength_nm: float, wavelengths_nm=None) -> Channel:
    """Channel responding at a single grid sample (idealized narrow filter)."""
    grid = default_wavelength_grid() if wavelengths_nm is None else _as_grid(wavelengths_nm)
    idx = int(np.argmin(np.abs(grid - wavelength_nm)))
    resp = np.zeros_like(grid)
    resp[idx] = 1.0
    return Channel(name, grid, resp)


@dataclass(frozen=True)
class ChannelBank:
    """Ordered collection of channels sharing one wavelength grid."""

    channels: tuple[Channel, ...]

    def __post_init__(self):
        channels = tuple(self.channels)
        if not channels:
            raise ValueError("channel bank must not be empty")
        grid = channels[0].wavelengths_nm
        for ch in channels[1:]:
            _require_same_grid(grid, ch.wavelengths_nm)
        names = [ch.name for ch in channels]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate channel names: {names}")
        object.__setattr__(self, "channels", channels)

    @property
    def wavelengths_nm(self) -> np.ndarray:
        return self.channels[0].wavelengths_nm

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(ch.name for ch in self.channels)

    @property
    def responses(self) -> np.ndarray:
        return np.stack([ch.response for ch in self.channels])

    def channel(self, name: str) -> Channel:
        for ch in self.channels:
            if ch.name == name:
                return ch
        raise KeyError(f"no channel named {name!r}")

    def to_dict(self) -> dict:
        return {
            "wavelengths_nm": self.wavelengths_nm.tolist(),
            "channels": [
                {"name": ch.name, "values": ch.response.tolist()}
                for ch in self.channels
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ChannelBank":
        grid = np.asarray(doc["wavelengths_nm"]) if "wavelengths_nm" in doc else None
        channels = []
        for entry in doc["channels"]:
            name = entry["name"]
            if "values" in entry:
                if grid is None:
                    raise ValueError("explicit channel values need wavelengths_nm")
                channels.append(Channel(name, grid, np.asarray(entry["values"])))
            elif "band_nm" in entry:
                lo, hi = entry["band_nm"]
                closed = bool(entry.get("closed_hi", False))
                channels.append(boxcar_channel(name, lo, hi, grid, closed_hi=closed))
            elif "line_nm" in entry:
                channels.append(line_channel(name, float(entry["line_nm"]), grid))
            else:
                raise ValueError(f"channel {name!r} needs values, band_nm or line_nm")
        return cls(tuple(channels))


def default_bank(wavelengths_nm=None) -> ChannelBank:
    """Three boxcar channels: B [400,500), G [500,600), R [600,700]."""
    return ChannelBank((
        boxcar_channel("B", 400.0, 500.0, wavelengths_nm),
        boxcar_channel("G", 500.0, 600.0, wavelengths_nm),
        boxcar_channel("R", 600.0, 700.0, wavelengths_nm, closed_hi=True),
    ))


def line_bank(pairs, wavelengths_nm=None) -> ChannelBank:
    """Bank of single-sample channels from (name, wavelength_nm) pairs."""
    return ChannelBank(tuple(line_channel(n, w, wavelengths_nm) for n, w in pairs))


# ---------------------------------------------------------------------------
# operations

def attenuate(spectrum: Spectrum, dye: DyeProfile, path_mm: float) -> Spectrum:
    """Exponential attenuation of a spectrum over a dyed path.

    Every sample decays as ``exp(-c * k(lambda) * path)`` where ``c`` is
    the dye concentration scale and ``k`` its base decay profile.
    """
    _require_same_grid(spectrum.wavelengths_nm, dye.wavelengths_nm)
    if not path_mm >= 0:
        raise ValueError(f"path_mm must be >= 0, got {path_mm}")
    factor = np.exp(-dye.concentration_scale * dye.decay_per_mm * float(path_mm))
    return Spectrum(spectrum.wavelengths_nm, spectrum.intensities * factor)


def _sample_widths(grid: np.ndarray) -> np.ndarray:
    # Rectangle rule on the (uniform) grid; np.gradient degrades gracefully
    # to local spacing on non-uniform grids.
    return np.gradient(grid)


def integrate_channels(spectrum: Spectrum, bank: ChannelBank) -> np.ndarray:
    """Integrate a spectrum into per-channel intensities (rectangle rule)."""
    _require_same_grid(spectrum.wavelengths_nm, bank.wavelengths_nm)
    widths = _sample_widths(spectrum.wavelengths_nm)
    return bank.responses @ (spectrum.intensities * widths)


def _channel_value(reading, name: str) -> float:
    channel = getattr(reading, "channel", None)
    if callable(channel):
        return float(channel(name))
    return float(reading[name])


def log_ratio(reading, numerator_ch: str, denominator_ch: str) -> float:
    """Natural log of two channel intensities; affine in filtering length.

    Raises :class:`BelowFloorError` when either channel is nonpositive,
    which signals a dead-zone reading rather than a numeric accident.
    """
    num = _channel_value(reading, numerator_ch)
    den = _channel_value(reading, denominator_ch)
    if num <= 0 or den <= 0:
        raise BelowFloorError(
            f"channel intensity at or below floor: "
            f"{numerator_ch}={num:g}, {denominator_ch}={den:g}"
        )
    return math.log(num / den)


def band_effective_decay(
    dye: DyeProfile,
    channel: Channel,
    source: Spectrum,
    max_path_mm: float = 85.0,
    n_paths: int = 86,
) -> float:
    """Best-fit single decay exponent for a band-integrated signal.

    The band signal is not exactly exponential when the decay varies
    across the channel; this fits ``ln I(x)`` against path length by
    ordinary least squares over ``n_paths`` samples of [0, max_path_mm]
    and returns the negated slope.
    """
    _require_same_grid(dye.wavelengths_nm, channel.wavelengths_nm)
    _require_same_grid(dye.wavelengths_nm, source.wavelengths_nm)
    if n_paths < 2:
        raise ValueError("need at least 2 path samples")
    widths = _sample_widths(source.wavelengths_nm)
    weight = source.intensities * channel.response * widths
    if not np.any(weight > 0):
        raise ValueError("channel has zero overlap with the source support")
    paths = np.linspace(0.0, float(max_path_mm), int(n_paths))
    k_eff = dye.concentration_scale * dye.decay_per_mm
    signal = np.exp(-np.outer(paths, k_eff)) @ weight
    y = np.log(signal)
    x = paths - paths.mean()
    slope = float(x @ (y - y.mean()) / (x @ x))
    return -slope


# ---------------------------------------------------------------------------
# JSON helpers

def load_spectrum(path) -> Spectrum:
    with open(path, "r", encoding="utf-8") as fh:
        return Spectrum.from_dict(json.load(fh))


def load_dye(path) -> DyeProfile:
    with open(path, "r", encoding="utf-8") as fh:
        return DyeProfile.from_dict(json.load(fh))


def load_bank(path) -> ChannelBank:
    with open(path, "r", encoding="utf-8") as fh:
        return ChannelBank.from_dict(json.load(fh))
