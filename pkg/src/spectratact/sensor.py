"""End-to-end forward model of the optical tactile sensor.

A stimulus (press position, force) turns into a multi-channel reading:
the coupling law sets how much source light enters the dyed waveguide,
the dye filters it over the press-to-detector distance, the channel bank
integrates the arriving spectrum, and an optional noise model adds
per-channel Gaussian noise.  LED and detector sit at the same end, so
the filtering length equals the press distance from that end.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .contact import CouplingLaw, PerturbationState, bending_gain, coupled_fraction, strained_dye
from .errors import UndefinedSnrError
from .spectral import (
    ChannelBank,
    DyeProfile,
    Spectrum,
    attenuate,
    default_bank,
    default_red_dye,
    integrate_channels,
)

MIN_LENGTH_MM = 30.0
MAX_LENGTH_MM = 200.0

# Readings below this fraction of the full-scale intensity are clamped to
# zero; they carry no usable ratio information.
RELATIVE_INTENSITY_FLOOR = 1e-12


@dataclass(frozen=True)
class SensorConfig:
    """Full static description of one sensor."""

    length_mm: float
    source: Spectrum
    dye: DyeProfile
    bank: ChannelBank
    coupling: CouplingLaw = field(default_factory=CouplingLaw)
    clear_loss_per_mm: float = 0.002
    perturbation: PerturbationState = field(default_factory=PerturbationState)

    def __post_init__(self):
        if not MIN_LENGTH_MM <= self.length_mm <= MAX_LENGTH_MM:
            raise ValueError(
                f"length_mm must lie in [{MIN_LENGTH_MM:g}, {MAX_LENGTH_MM:g}], "
                f"got {self.length_mm}"
            )
        if not self.clear_loss_per_mm >= 0:
            raise ValueError("clear_loss_per_mm must be >= 0")
        if not np.array_equal(self.source.wavelengths_nm, self.dye.wavelengths_nm) or \
           not np.array_equal(self.source.wavelengths_nm, self.bank.wavelengths_nm):
            raise ValueError("source, dye and bank must share one wavelength grid")

    @classmethod
    def default(cls, length_mm: float = 85.0, **overrides) -> "SensorConfig":
        kwargs = dict(
            length_mm=length_mm,
            source=Spectrum.flat(),
            dye=default_red_dye(),
            bank=default_bank(),
        )
        kwargs.update(overrides)
        return cls(**kwargs)

    def with_perturbation(self, perturbation: PerturbationState) -> "SensorConfig":
        return replace(self, perturbation=perturbation)

    def to_dict(self) -> dict:
        return {
            "length_mm": self.length_mm,
            "source": self.source.to_dict(),
            "dye": self.dye.to_dict(),
            "bank": self.bank.to_dict(),
            "coupling": self.coupling.to_dict(),
            "clear_loss_per_mm": self.clear_loss_per_mm,
            "perturbation": self.perturbation.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SensorConfig":
        defaults = cls.default()
        return cls(
            length_mm=float(doc.get("length_mm", 85.0)),
            source=Spectrum.from_dict(doc["source"]) if "source" in doc else defaults.source,
            dye=DyeProfile.from_dict(doc["dye"]) if "dye" in doc else defaults.dye,
            bank=ChannelBank.from_dict(doc["bank"]) if "bank" in doc else defaults.bank,
            coupling=CouplingLaw.from_dict(doc.get("coupling", {})),
            clear_loss_per_mm=float(doc.get("clear_loss_per_mm", 0.002)),
            perturbation=PerturbationState.from_dict(doc.get("perturbation", {})),
        )


def load_sensor_config(path) -> SensorConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return SensorConfig.from_dict(json.load(fh))


def save_sensor_config(config: SensorConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config.to_dict(), fh, sort_keys=True)
        fh.write("\n")


@dataclass(frozen=True)
class Stimulus:
    """Applied press: position measured from the detector end, in mm."""

    position_mm: float
    force_n: float

    def __post_init__(self):
        if not self.force_n >= 0:
            raise ValueError(f"force_n must be >= 0, got {self.force_n}")

    def validate_for(self, config: SensorConfig) -> None:
        if not 0 <= self.position_mm <= config.length_mm:
            raise ValueError(
                f"position {self.position_mm} mm outside sensor span "
                f"[0, {config.length_mm}] mm"
            )


@dataclass(frozen=True)
class NoiseModel:
    """Additive white Gaussian noise per channel.

    ``snr_db`` mode scales each channel's sigma to its own noise-free
    level (sigma_i = I_i * 10**(-snr/20)), which keeps the total-intensity
    SNR at or above the nominal value regardless of press position.
    ``absolute_sigma`` mode applies one constant sigma, in intensity
    units, to every channel.
    """

    mode: str = "snr_db"
    value: float = 40.0
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("snr_db", "absolute_sigma"):
            raise ValueError(f"unknown noise mode {self.mode!r}")
        if self.mode == "snr_db" and not self.value > 0:
            raise ValueError("snr_db must be > 0")
        if self.mode == "absolute_sigma" and not self.value >= 0:
            raise ValueError("absolute sigma must be >= 0")

    def sigma_vector(self, noise_free: np.ndarray) -> np.ndarray:
        if self.mode == "snr_db":
            return np.asarray(noise_free, dtype=float) * 10.0 ** (-self.value / 20.0)
        return np.full(len(noise_free), float(self.value))

    def to_dict(self) -> dict:
        return {"mode": self.mode, "value": self.value, "seed": self.seed}

    @classmethod
    def from_dict(cls, doc: dict) -> "NoiseModel":
        return cls(doc.get("mode", "snr_db"), float(doc.get("value", 40.0)),
                   int(doc.get("seed", 0)))


class ChannelReading:
    """Per-channel intensities, in the bank's channel order."""

    __slots__ = ("values", "channel_names", "below_floor")

    def __init__(self, values, channel_names, below_floor: bool = False):
        self.values = np.asarray(values, dtype=float)
        self.channel_names = tuple(channel_names)
        if self.values.shape != (len(self.channel_names),):
            raise ValueError("values and channel_names lengths differ")
        if np.any(self.values < 0):
            raise ValueError("channel intensities must be nonnegative")
        self.below_floor = bool(below_floor)

    def channel(self, name: str) -> float:
        try:
            return float(self.values[self.channel_names.index(name)])
        except ValueError:
            raise KeyError(f"no channel named {name!r}") from None

    __getitem__ = channel

    def total(self) -> float:
        return float(self.values.sum())

    def __repr__(self):
        pairs = ", ".join(f"{n}={v:g}" for n, v in zip(self.channel_names, self.values))
        return f"ChannelReading({pairs}, below_floor={self.below_floor})"

    def __eq__(self, other):
        return (
            isinstance(other, ChannelReading)
            and self.channel_names == other.channel_names
            and self.below_floor == other.below_floor
            and np.array_equal(self.values, other.values)
        )


def full_scale_intensity(config: SensorConfig) -> float:
    """Total intensity of the unattenuated source through the bank."""
    return float(integrate_channels(config.source, config.bank).sum())


def noise_free_channels(config: SensorConfig, stim: Stimulus) -> np.ndarray:
    """Deterministic part of the forward model, before floor clamping."""
    stim.validate_for(config)
    fraction = coupled_fraction(config.coupling, stim.force_n)
    gain = bending_gain(config.perturbation)
    dye = strained_dye(config.dye, config.perturbation.strain)
    filtered = attenuate(config.source, dye, stim.position_mm)
    clear = math.exp(-config.clear_loss_per_mm * stim.position_mm)
    return fraction * clear * integrate_channels(filtered, config.bank) * gain


def position_transmission(config: SensorConfig, position_mm: float) -> float:
    """Total intensity per unit coupled fraction at a press position.

    Dividing a reading's total by this factor recovers the coupled
    fraction, the position-free quantity the force calibration inverts.
    """
    if not 0 <= position_mm <= config.length_mm:
        raise ValueError(
            f"position {position_mm} mm outside sensor span [0, {config.length_mm}] mm"
        )
    gain = bending_gain(config.perturbation)
    dye = strained_dye(config.dye, config.perturbation.strain)
    filtered = attenuate(config.source, dye, position_mm)
    clear = math.exp(-config.clear_loss_per_mm * position_mm)
    return clear * float(integrate_channels(filtered, config.bank).sum()) * gain


def make_transmission(config: SensorConfig):
    """Transmission factor as a callable of position, for decoders."""
    return lambda position_mm: position_transmission(config, position_mm)


def simulate_reading(
    config: SensorConfig,
    stim: Stimulus,
    noise: NoiseModel | None = None,
    rng: np.random.Generator | None = None,
) -> ChannelReading:
    """One sensor reading; deterministic given (config, stim, seed)."""
    values = noise_free_channels(config, stim)
    if noise is not None:
        if rng is None:
            rng = np.random.default_rng(noise.seed)
        sigma = noise.sigma_vector(values)
        values = values + rng.standard_normal(len(values)) * sigma
        values = np.maximum(values, 0.0)
    floor = RELATIVE_INTENSITY_FLOOR * full_scale_intensity(config)
    values = np.where(values < floor, 0.0, values)
    return ChannelReading(values, config.bank.names, below_floor=not np.any(values > 0))


def measure_snr_db(config: SensorConfig, stim: Stimulus, noise: NoiseModel) -> float:
    """SNR of the total intensity: 20*log10(signal / total noise sigma)."""
    values = noise_free_channels(config, stim)
    signal = float(values.sum())
    if signal <= RELATIVE_INTENSITY_FLOOR * full_scale_intensity(config):
        raise UndefinedSnrError("dead-zone stimulus: noise-free reading is zero")
    sigma_total = float(np.sqrt(np.sum(noise.sigma_vector(values) ** 2)))
    if sigma_total == 0:
        return math.inf
    return 20.0 * math.log10(signal / sigma_total)


@dataclass(frozen=True)
class SweepRow:
    position_mm: float
    force_n: float
    reading: ChannelReading


def rng_substreams(seed: int, n: int) -> list[np.random.Generator]:
    """Deterministic per-row RNG substreams, independent of consumption order."""
    return [np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(n)]


def sweep(
    config: SensorConfig,
    positions_mm,
    forces_n,
    noise: NoiseModel | None = None,
    seed: int = 0,
) -> list[SweepRow]:
    """Simulate a position-major grid of stimuli, one row each.

    Row i draws from an RNG substream derived from (seed, i), so the
    table is reproducible and rows could be computed in any order.
    """
    positions = [float(p) for p in positions_mm]
    forces = [float(f) for f in forces_n]
    stimuli = [Stimulus(p, f) for p in positions for f in forces]
    for stim in stimuli:
        stim.validate_for(config)
    rngs = rng_substreams(seed, len(stimuli)) if noise is not None else [None] * len(stimuli)
    return [
        SweepRow(stim.position_mm, stim.force_n,
                 simulate_reading(config, stim, noise, rng))
        for stim, rng in zip(stimuli, rngs)
    ]
