"""Link-budget, coincidence and time-tag simulation for frequency-converted photons."""
from .model import (
    DEFAULT_CONVERTER,
    DEFAULT_FILTER_STAGES,
    SNR_INFINITE,
    ConverterParams,
    DetectorModel,
    DomainError,
    FiberLink,
    FilterStage,
    LinkBudgetResult,
    NoiseModel,
    SourceModel,
    TargetBand,
    cascade_insertion_loss_db,
    cascade_isolation_db,
    conversion_efficiency,
    fiber_transmittance,
    fidelity_from_snr,
    link_budget,
    scan_fidelity_vs_length,
    scan_snr_vs_pump,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_CONVERTER",
    "DEFAULT_FILTER_STAGES",
    "SNR_INFINITE",
    "ConverterParams",
    "DetectorModel",
    "DomainError",
    "FiberLink",
    "FilterStage",
    "LinkBudgetResult",
    "NoiseModel",
    "SourceModel",
    "TargetBand",
    "cascade_insertion_loss_db",
    "cascade_isolation_db",
    "conversion_efficiency",
    "fiber_transmittance",
    "fidelity_from_snr",
    "link_budget",
    "scan_fidelity_vs_length",
    "scan_snr_vs_pump",
]
