"""
Analytic link budget for a frequency-converted single-photon channel.

Signal photons enter the converter at ``signal_rate_hz``, are converted with
efficiency ``eta_c``, travel through a fiber with transmittance ``eta_l`` and
are detected with efficiency ``eta_d``. Pump-induced noise is defined at the
converter output, so it sees fiber and detector but not the converter.
Detector dark counts are added unattenuated.

All rates are in Hz, powers in W, lengths in m (waveguide) or km (fiber).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal
from enum import Enum
from typing import Sequence, Union

import numpy as np

#: Explicit marker for a zero-background channel. ``math.inf`` compares and
#: formats predictably, so it doubles as the sentinel value.
SNR_INFINITE = math.inf


class DomainError(ValueError):
    """An input lies outside the domain of a model function."""


@dataclass(frozen=True)
class ConverterParams:
    waveguide_length: float  # m
    alpha_qfc: float  # W^-1 m^-2
    eta_max: float

    def __post_init__(self):
        if not self.waveguide_length > 0:
            raise DomainError(f"waveguide_length must be > 0, got {self.waveguide_length}")
        if not self.alpha_qfc > 0:
            raise DomainError(f"alpha_qfc must be > 0, got {self.alpha_qfc}")
        if not 0.0 <= self.eta_max <= 1.0:
            raise DomainError(f"eta_max must lie in [0, 1], got {self.eta_max}")

    @property
    def optimal_pump_power(self) -> float:
        """Pump power that puts the sin^2 argument at pi/2."""
        return (math.pi / (2.0 * self.waveguide_length)) ** 2 / self.alpha_qfc


# Fitted curve from the 20 mm waveguide characterisation.
DEFAULT_CONVERTER = ConverterParams(waveguide_length=0.02, alpha_qfc=2.87e3, eta_max=0.1095)


class TargetBand(str, Enum):
    PUMP = "pump"
    SPDC_NOISE = "spdc_noise"


@dataclass(frozen=True)
class FilterStage:
    name: str
    center_wavelength_nm: float
    bandwidth: float
    bandwidth_unit: str  # "hz" or "nm"
    insertion_loss_db: float
    isolation_db: float
    target_band: TargetBand

    def __post_init__(self):
        if self.bandwidth_unit not in ("hz", "nm"):
            raise DomainError(f"bandwidth_unit must be 'hz' or 'nm', got {self.bandwidth_unit!r}")
        if self.insertion_loss_db < 0:
            raise DomainError(f"{self.name}: insertion loss must be >= 0 dB")
        if self.isolation_db < 0:
            raise DomainError(f"{self.name}: isolation must be >= 0 dB")
        object.__setattr__(self, "target_band", TargetBand(self.target_band))


# DWDM, two FBGs and the ultra-narrow tunable filter, in optical order.
DEFAULT_FILTER_STAGES = (
    FilterStage("DWDM", 1588.0, 10.0, "nm", 0.7, 66.3, TargetBand.PUMP),
    FilterStage("FBG1", 1588.3, 10e9, "hz", 1.2, 46.2, TargetBand.SPDC_NOISE),
    FilterStage("FBG2", 1588.3, 10e9, "hz", 1.1, 36.6, TargetBand.SPDC_NOISE),
    FilterStage("UNTF", 1588.3, 250e6, "hz", 1.4, 14.8, TargetBand.SPDC_NOISE),
)


@dataclass(frozen=True)
class FiberLink:
    length_km: float
    attenuation_db_per_km: float = 0.16

    def __post_init__(self):
        if self.length_km < 0:
            raise DomainError(f"fiber length must be >= 0 km, got {self.length_km}")
        if self.attenuation_db_per_km < 0:
            raise DomainError("attenuation must be >= 0 dB/km")

    @property
    def loss_db(self) -> float:
        return self.length_km * self.attenuation_db_per_km


@dataclass(frozen=True)
class DetectorModel:
    efficiency: float
    dark_rate_hz: float

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise DomainError(f"detector efficiency must lie in [0, 1], got {self.efficiency}")
        if self.dark_rate_hz < 0:
            raise DomainError("dark rate must be >= 0 Hz")


@dataclass(frozen=True)
class SourceModel:
    signal_rate_hz: float
    rep_rate_hz: float = 1e6
    pulse_width_s: float = 300e-9

    def __post_init__(self):
        if self.signal_rate_hz < 0:
            raise DomainError("signal rate must be >= 0 Hz")
        if not self.rep_rate_hz > 0:
            raise DomainError("repetition rate must be > 0 Hz")
        if not self.pulse_width_s > 0:
            raise DomainError("pulse width must be > 0 s")
        # tolerate rounding in e.g. 1e-6 s * 1e6 Hz
        if self.duty_cycle > 1.0 + 1e-12:
            raise DomainError(f"duty cycle {self.duty_cycle:g} exceeds 1")

    @property
    def duty_cycle(self) -> float:
        return self.pulse_width_s * self.rep_rate_hz


@dataclass(frozen=True)
class NoiseModel:
    """Converter noise rate, either fixed or proportional to pump power.

    The linear mode passes through the origin: no pump, no down-conversion.
    """

    mode: str  # "fixed" or "linear"
    value: float  # Hz for fixed, Hz/W for linear

    def __post_init__(self):
        if self.mode not in ("fixed", "linear"):
            raise DomainError(f"noise mode must be 'fixed' or 'linear', got {self.mode!r}")
        if self.value < 0:
            raise DomainError("noise rate/slope must be >= 0")

    @classmethod
    def fixed(cls, rate_hz: float) -> "NoiseModel":
        return cls("fixed", rate_hz)

    @classmethod
    def linear(cls, slope_hz_per_watt: float) -> "NoiseModel":
        return cls("linear", slope_hz_per_watt)

    def rate(self, pump_power: float | None = None) -> float:
        if self.mode == "fixed":
            return self.value
        if pump_power is None:
            raise DomainError("linear noise model needs a pump power")
        if pump_power < 0:
            raise DomainError("pump power must be >= 0 W")
        return self.value * pump_power


# 154 Hz measured at 1.2 W pump
DEFAULT_NOISE_SLOPE = 154.0 / 1.2


@dataclass(frozen=True)
class LinkBudgetResult:
    eta_c: float
    eta_l: float
    detected_signal_rate_hz: float
    detected_noise_rate_hz: float
    dark_rate_hz: float
    snr: float
    fidelity: float

    @property
    def snr_is_infinite(self) -> bool:
        return math.isinf(self.snr)


def conversion_efficiency(params: ConverterParams, pump_power):
    """Conversion efficiency ``eta_max * sin^2(L * sqrt(alpha * P))``.

    Accepts a scalar or array of pump powers (W).
    """
    p = np.asarray(pump_power, dtype=float)
    if np.any(p < 0) or np.any(np.isnan(p)):
        raise DomainError("pump power must be >= 0 W")
    eta = params.eta_max * np.sin(params.waveguide_length * np.sqrt(params.alpha_qfc * p)) ** 2
    return float(eta) if eta.ndim == 0 else eta


def db_to_transmittance(loss_db):
    return 10.0 ** (-np.asarray(loss_db, dtype=float) / 10.0)


def fiber_transmittance(link: FiberLink) -> float:
    return float(db_to_transmittance(link.loss_db))


def _decimal_sum(values) -> float:
    # dB figures are decimal quantities; summing them as decimals gives
    # 46.2 + 36.6 + 14.8 == 97.6 rather than 97.60000000000001
    return float(sum((Decimal(repr(float(v))) for v in values), Decimal(0)))


def cascade_insertion_loss_db(stages: Sequence[FilterStage]) -> float:
    return _decimal_sum(s.insertion_loss_db for s in stages)


def cascade_isolation_db(stages: Sequence[FilterStage], band) -> float:
    band = TargetBand(band)
    return _decimal_sum(s.isolation_db for s in stages if s.target_band is band)


def fidelity_from_snr(snr):
    """Bell-state fidelity ``1 - 3 / (2 (SNR + 2))``; infinite SNR gives 1."""
    s = np.asarray(snr, dtype=float)
    if np.any(s < 0) or np.any(np.isnan(s)):
        raise DomainError("SNR must be >= 0")
    with np.errstate(divide="ignore"):
        f = np.where(np.isinf(s), 1.0, 1.0 - 3.0 / (2.0 * (s + 2.0)))
    return float(f) if f.ndim == 0 else f


def _fidelity_from_rates(signal: float, background: float) -> float:
    denom = 2.0 * signal + 4.0 * background
    if denom == 0:
        raise DomainError("fidelity undefined with no signal and no background")
    # same as 1 - 3b/denom, without cancellation at the F = 1/4 end
    return (2.0 * signal + background) / denom


Efficiency = Union[float, ConverterParams]


def resolve_efficiency(converter: Efficiency, pump_power: float | None = None) -> float:
    if isinstance(converter, ConverterParams):
        if pump_power is None:
            raise DomainError("converter parameters need a pump power")
        return conversion_efficiency(converter, pump_power)
    eta = float(converter)
    if not 0.0 <= eta <= 1.0:
        raise DomainError(f"conversion efficiency must lie in [0, 1], got {eta}")
    return eta


def link_budget(
    source: SourceModel,
    converter: Efficiency,
    noise: NoiseModel,
    link: FiberLink,
    detector: DetectorModel,
    pump_power: float | None = None,
    background_scale: float = 1.0,
) -> LinkBudgetResult:
    """Detected rates, SNR and fidelity for one operating point.

    ``converter`` is either a fixed efficiency or :class:`ConverterParams`,
    in which case ``pump_power`` selects the point on the efficiency curve.
    ``background_scale`` multiplies the noise and dark rates before they
    enter the SNR; 1 treats quoted rates as already in-gate, the duty cycle
    treats them as continuous-wave rates seen through a signal gate.
    """
    if background_scale < 0:
        raise DomainError("background_scale must be >= 0")
    eta_c = resolve_efficiency(converter, pump_power)
    eta_l = fiber_transmittance(link)
    eta_d = detector.efficiency
    r_n = noise.rate(pump_power)

    signal = source.signal_rate_hz * eta_c * eta_l * eta_d
    noise_det = r_n * eta_l * eta_d * background_scale
    dark = detector.dark_rate_hz * background_scale
    background = noise_det + dark

    if background == 0:
        snr = SNR_INFINITE
        fidelity = 1.0
    else:
        snr = signal / background
        fidelity = _fidelity_from_rates(signal, background)
    return LinkBudgetResult(
        eta_c=eta_c,
        eta_l=eta_l,
        detected_signal_rate_hz=signal,
        detected_noise_rate_hz=noise_det,
        dark_rate_hz=dark,
        snr=snr,
        fidelity=fidelity,
    )


@dataclass(frozen=True)
class PumpScan:
    pump_w: np.ndarray
    eta_c: np.ndarray
    noise_rate_hz: np.ndarray
    snr: np.ndarray
    best_pump_w: float
    best_snr: float


@dataclass(frozen=True)
class LengthScan:
    length_km: np.ndarray
    eta_l: np.ndarray
    snr: np.ndarray
    fidelity: np.ndarray


def scan_snr_vs_pump(
    source: SourceModel,
    converter: Efficiency,
    noise: NoiseModel,
    link: FiberLink,
    detector: DetectorModel,
    pump_grid: Sequence[float],
    background_scale: float = 1.0,
) -> PumpScan:
    grid = np.asarray(pump_grid, dtype=float)
    if grid.size == 0:
        raise DomainError("pump grid is empty")
    results = [
        link_budget(source, converter, noise, link, detector, pump_power=p,
                    background_scale=background_scale)
        for p in grid
    ]
    snr = np.array([r.snr for r in results])
    best = int(np.argmax(snr))
    return PumpScan(
        pump_w=grid,
        eta_c=np.array([r.eta_c for r in results]),
        noise_rate_hz=np.array([noise.rate(p) for p in grid]),
        snr=snr,
        best_pump_w=float(grid[best]),
        best_snr=float(snr[best]),
    )


def scan_fidelity_vs_length(
    source: SourceModel,
    converter: Efficiency,
    noise: NoiseModel,
    link: FiberLink,
    detector: DetectorModel,
    length_grid: Sequence[float],
    pump_power: float | None = None,
    background_scale: float = 1.0,
) -> LengthScan:
    grid = np.asarray(length_grid, dtype=float)
    if grid.size == 0:
        raise DomainError("length grid is empty")
    results = [
        link_budget(source, converter, noise,
                    FiberLink(float(l), link.attenuation_db_per_km), detector,
                    pump_power=pump_power, background_scale=background_scale)
        for l in grid
    ]
    return LengthScan(
        length_km=grid,
        eta_l=np.array([r.eta_l for r in results]),
        snr=np.array([r.snr for r in results]),
        fidelity=np.array([r.fidelity for r in results]),
    )
