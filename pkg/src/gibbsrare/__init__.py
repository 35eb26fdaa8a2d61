"""Rare-pattern statistics for lattice Gibbs random fields."""

__version__ = "0.1.0"

from .lattice import Box, Configuration, Pattern, cube, restrict, translate  # noqa: E402
from .models import Interaction, Model, bernoulli, gibbs, iid, ising, markov_product, potts  # noqa: E402

__all__ = [
    "Box",
    "Configuration",
    "Interaction",
    "Model",
    "Pattern",
    "bernoulli",
    "cube",
    "gibbs",
    "iid",
    "ising",
    "markov_product",
    "potts",
    "restrict",
    "translate",
]
