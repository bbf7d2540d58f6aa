"""Classification of finite semifields via spread sets, with rank-based invariants."""

from .gf import FieldSpec, field_make
from .linalg import Mat
from .spreadset import MatrixCode, SeedSets, desarguesian, random_spread_set
from .invariants import RankMultiset, VectorCode, invariant_key, m_ranks, vector_code
from .equivalence import matrix_code_equivalent, vector_code_equivalent
from .classify import ClassifyConfig, classify

__all__ = [
    "FieldSpec",
    "field_make",
    "Mat",
    "MatrixCode",
    "SeedSets",
    "desarguesian",
    "random_spread_set",
    "RankMultiset",
    "VectorCode",
    "invariant_key",
    "m_ranks",
    "vector_code",
    "matrix_code_equivalent",
    "vector_code_equivalent",
    "ClassifyConfig",
    "classify",
]
