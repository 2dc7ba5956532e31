"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class OperadForgeError(Exception):
    pass


# core
class NonComposable(OperadForgeError):
    pass


class SignatureMismatch(OperadForgeError):
    pass


class NotInjective(OperadForgeError):
    pass


class CarrierMismatch(OperadForgeError):
    pass


class UnknownBuiltin(OperadForgeError):
    pass


class OutOfBound(OperadForgeError):
    pass


# trees
class LabelMismatch(OperadForgeError):
    pass


class ArityMismatch(OperadForgeError):
    pass


class NotInner(OperadForgeError):
    pass


class NotPrunable(OperadForgeError):
    pass


class NotUnary(OperadForgeError):
    pass


class BoundExceeded(OperadForgeError):
    pass


class DecorationMismatch(OperadForgeError):
    pass


# colimits
class Unstabilized(OperadForgeError):
    pass


class NotCommuting(OperadForgeError):
    pass


class HypothesisViolated(OperadForgeError):
    pass


class NotFiltered(OperadForgeError):
    pass


class UnsupportedShape(OperadForgeError):
    pass


# model
class SearchBudgetExceeded(OperadForgeError):
    def __init__(self, explored: int):
        super().__init__(f"search budget exhausted after {explored} nodes")
        self.explored = explored


class NotComposable(OperadForgeError):
    pass


class NotEquivalent(OperadForgeError):
    pass


# cli
class SchemaError(OperadForgeError):
    def __init__(self, pointer: str, message: str):
        super().__init__(f"{pointer}: {message}")
        self.pointer = pointer


class DanglingReference(OperadForgeError):
    pass


class GenerationExhausted(OperadForgeError):
    pass
