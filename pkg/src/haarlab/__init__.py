"""Grid-based experiments with Haar measure on small locally compact groups."""

from .errors import (GridOverflowError, HaarLabError, HypothesisRefused,
                     NonUnimodularError, SoundnessError, ZeroMeasureError)
from .groups import catalog_names, compose, element, get_group, inverse, modular_value
from .grids import (GridSet, MeasureEstimate, box_set, energy, inverse_set, measure,
                    product_pair, product_set, translate, union_of_boxes)

__version__ = "0.1.0"

__all__ = [
    "GridOverflowError", "HaarLabError", "HypothesisRefused", "NonUnimodularError",
    "SoundnessError", "ZeroMeasureError", "catalog_names", "compose", "element",
    "get_group", "inverse", "modular_value", "GridSet", "MeasureEstimate", "box_set",
    "energy", "inverse_set", "measure", "product_pair", "product_set", "translate",
    "union_of_boxes",
]
