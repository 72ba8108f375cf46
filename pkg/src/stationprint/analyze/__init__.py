"""Landscape analyses over station fingerprints: archetypes, PCA, day parts."""

from stationprint.analyze.archetypes import (
    ArchetypeModel,
    archetypal_analysis,
    rss_scree,
    select_archetype_count,
    simplex_project_rows,
)
from stationprint.analyze.pca import PcaProjection, pca_2d
from stationprint.analyze.daypart import (
    archetype_neighborhood,
    daytime_archetypes,
    daytime_trajectories,
)
from stationprint.analyze.export import export_plot_data

__all__ = [
    "ArchetypeModel",
    "archetypal_analysis",
    "rss_scree",
    "select_archetype_count",
    "simplex_project_rows",
    "PcaProjection",
    "pca_2d",
    "archetype_neighborhood",
    "daytime_archetypes",
    "daytime_trajectories",
    "export_plot_data",
]
