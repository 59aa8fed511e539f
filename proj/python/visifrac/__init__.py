from visifrac._core import (
    DiscreteMeasure,
    DyadicSet,
    box_dimension_fit,
    builtin_dimension,
    builtin_names,
    builtin_set,
    calibrate_grid_constant,
    covering_number,
    decompose,
    direction_average_experiment,
    direction_average_sobolev,
    dyadic_content,
    frostman_dyadic,
    heavy_set,
    natural_measure,
    parse_dyset,
    riesz_energy,
    slice_spectrum,
    solve_parameters,
    visible_cells,
    write_dyset,
)

__all__ = [
    "DiscreteMeasure",
    "DyadicSet",
    "box_dimension_fit",
    "builtin_dimension",
    "builtin_names",
    "builtin_set",
    "calibrate_grid_constant",
    "covering_number",
    "decompose",
    "direction_average_experiment",
    "direction_average_sobolev",
    "dyadic_content",
    "frostman_dyadic",
    "heavy_set",
    "natural_measure",
    "parse_dyset",
    "riesz_energy",
    "slice_spectrum",
    "solve_parameters",
    "visible_cells",
    "write_dyset",
]

__version__ = "0.1.0"
