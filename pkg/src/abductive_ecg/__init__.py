"""Abductive correction of QRS beat annotations with temporal abstraction patterns."""
from .ecg_kb import EcgContext, build_model
from .model import AbstractionModel, Observable, Observation, PatternGrammar
from .search import InterpretationProblem, emit_annotations, pe_kbfs
from .stp import Interval, STPNetwork

__all__ = [
    "AbstractionModel", "EcgContext", "Interval", "InterpretationProblem", "Observable",
    "Observation", "PatternGrammar", "STPNetwork", "build_model", "emit_annotations",
    "pe_kbfs",
]
