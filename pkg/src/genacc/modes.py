"""Enumerations shared by the evaluation layers."""

import enum


class _Parse(enum.Enum):
    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        for m in cls:
            if key in (m.value, m.name.lower()):
                return m
        raise ValueError(f"unknown {cls.__name__} {value!r}")


class NormMode(_Parse):
    MAX = "max"      # the whole ball
    EXACT = "exact"  # the sphere only


class VoronoiMode(_Parse):
    POINT_CELL = "point_cell"      # Voronoi cell of the sample itself
    CLASS_REGION = "class_region"  # connected component of the class region


class AttackMode(_Parse):
    GRID_EXHAUSTIVE = "grid"
    PGD = "pgd"
    ANALYTIC_1D = "analytic_1d"


class Evaluator(_Parse):
    STD_MAX = "std_max"
    STD_EXACT = "std_exact"
    GEN_MAX = "gen_max"
    GEN_EXACT = "gen_exact"

    @property
    def genuine(self) -> bool:
        return self in (Evaluator.GEN_MAX, Evaluator.GEN_EXACT)

    @property
    def norm_mode(self) -> NormMode:
        return NormMode.EXACT if self.value.endswith("exact") else NormMode.MAX
