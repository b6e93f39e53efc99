from .base import Dataset, ModelBackend, ParamDraws
from .mixture import MixtureBackend, MixtureRegressionState, mixture_fit, mixture_loglik
from .poisson import PoissonBackend, PoissonMeanState, poisson_fit, poisson_loglik


def make_backend(name: str, **options) -> ModelBackend:
    if name == "poisson":
        return PoissonBackend(**options)
    if name == "mixture":
        return MixtureBackend(**options)
    raise ValueError(f"unknown model {name!r}; expected 'poisson' or 'mixture'")


__all__ = [
    "Dataset",
    "ModelBackend",
    "ParamDraws",
    "PoissonBackend",
    "PoissonMeanState",
    "MixtureBackend",
    "MixtureRegressionState",
    "make_backend",
    "poisson_fit",
    "poisson_loglik",
    "mixture_fit",
    "mixture_loglik",
]
