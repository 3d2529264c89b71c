"""Knee-onset and knee identification for battery capacity fade."""

from ._kneescout import (
    KneeScoutError,
    approximate_curvature,
    fluss,
    generate,
    identify_knees,
    identify_knees_dbw,
    mass,
    pearson,
    rea,
    savgol_smooth,
    stamp,
)

__all__ = [
    "KneeScoutError",
    "approximate_curvature",
    "fluss",
    "generate",
    "identify_knees",
    "identify_knees_dbw",
    "mass",
    "pearson",
    "rea",
    "savgol_smooth",
    "stamp",
]
