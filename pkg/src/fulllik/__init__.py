"""Full-likelihood optimization: jointly fitting model weights and likelihood parameters."""

__version__ = "0.1.0"

from .errors import (DivergedError, DomainError, InvalidStateError, ParseError, SchemaError,
                     UndefinedMetricError, UnsupportedAtInference)
from .families import LikelihoodSpec
from .fitting import FitConfig, FitReport, fit
from .conditioning import provider_init
from .priors import make_prior

__all__ = ["DivergedError", "DomainError", "InvalidStateError", "ParseError", "SchemaError",
           "UndefinedMetricError", "UnsupportedAtInference", "LikelihoodSpec", "FitConfig",
           "FitReport", "fit", "provider_init", "make_prior", "__version__"]
