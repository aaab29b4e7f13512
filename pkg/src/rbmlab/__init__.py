"""Random band matrices: sampling, spectra, local statistics and localization."""

__version__ = "0.1.0"

from .ensemble import (  # noqa: E402
    BandMatrix,
    BandMatrixParams,
    ConfigurationError,
    EntryDistribution,
    sample_band_matrix,
)
from .eigensolver import (  # noqa: E402
    NumericalError,
    count_in_interval,
    counts_below,
    reduce_to_tridiagonal,
    spectrum,
    sturm_count,
)
from .seeding import derive_trial_seed  # noqa: E402
from .spectralstats import RescaleWindow, les_count  # noqa: E402

__all__ = [
    "__version__",
    "BandMatrix",
    "BandMatrixParams",
    "ConfigurationError",
    "EntryDistribution",
    "NumericalError",
    "RescaleWindow",
    "count_in_interval",
    "counts_below",
    "derive_trial_seed",
    "les_count",
    "reduce_to_tridiagonal",
    "sample_band_matrix",
    "spectrum",
    "sturm_count",
]
