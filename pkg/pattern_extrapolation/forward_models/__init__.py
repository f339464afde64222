"""Full pattern maps for the supported antenna families."""

from pattern_extrapolation.forward_models.arrays import (
    GeneralArrayConfig,
    RectArrayConfig,
    array_nearfield_pattern,
    nearfield_basis,
    rect_array_basis,
    rect_array_pattern,
)
from pattern_extrapolation.forward_models.dish import (
    check_reflector_grid,
    DishConfig,
    dish_basis,
    dish_pattern,
    reflector_facets,
    reflector_grid,
)
from pattern_extrapolation.forward_models.horn import (
    HornConfig,
    eplane_horn_pattern,
    fresnel,
    horn_basis,
)

__all__ = [
    "DishConfig",
    "GeneralArrayConfig",
    "HornConfig",
    "RectArrayConfig",
    "array_nearfield_pattern",
    "check_reflector_grid",
    "dish_basis",
    "dish_pattern",
    "eplane_horn_pattern",
    "fresnel",
    "horn_basis",
    "nearfield_basis",
    "rect_array_basis",
    "rect_array_pattern",
    "reflector_facets",
    "reflector_grid",
]
