"""Malware detection by NP-similarity over system-call group dependency graphs."""
from .detector import DEFAULT_LAMBDA, FamilyScore, NpWeights, Verdict, detect, np_similarity
from .family import FamilyModel, IdMatrix, build_id_matrix, load_family, save_family, train_family
from .grd import CastMatrix, GrdMatrix, GroupMap, build_grd, cast, default_groups, load_groups
from .kernels import BACKEND
from .trace import ScdGraph, parse_trace, serialize_trace

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CastMatrix",
    "DEFAULT_LAMBDA",
    "FamilyModel",
    "FamilyScore",
    "GrdMatrix",
    "GroupMap",
    "IdMatrix",
    "NpWeights",
    "ScdGraph",
    "Verdict",
    "build_grd",
    "build_id_matrix",
    "cast",
    "default_groups",
    "detect",
    "load_family",
    "load_groups",
    "np_similarity",
    "parse_trace",
    "save_family",
    "serialize_trace",
    "train_family",
]
