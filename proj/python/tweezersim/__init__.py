from ._core import (
    ConfigError,
    IoError,
    NumericError,
    __version__,
    fit_spectrum,
    infidelity_quasi_static,
    nbar_from_ratio,
    nonthermal_correction,
    ratio_from_nbar,
    remove_one_quantum,
    resolve_config,
    response_closed_form,
    response_numeric,
    simulate,
    spectrum,
    thermal_distribution,
)

__all__ = [
    "ConfigError",
    "IoError",
    "NumericError",
    "__version__",
    "fit_spectrum",
    "infidelity_quasi_static",
    "nbar_from_ratio",
    "nonthermal_correction",
    "ratio_from_nbar",
    "remove_one_quantum",
    "resolve_config",
    "response_closed_form",
    "response_numeric",
    "simulate",
    "spectrum",
    "thermal_distribution",
]
