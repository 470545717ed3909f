"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`ArtDirectorError`.  The CLI maps these to exit code 2.
"""
from __future__ import annotations

from typing import Any


class ArtDirectorError(Exception):
    """Base class for all domain errors."""


# token model

class UnknownTokenError(ArtDirectorError, IndexError):
    def __init__(self, token_id: int, size: int):
        super().__init__(f"unknown token id {token_id} (vocabulary size {size})")
        self.token_id = token_id


class InvalidOrderError(ArtDirectorError, ValueError):
    pass


class VocabularyError(ArtDirectorError, ValueError):
    pass


class ProviderUnavailableError(ArtDirectorError):
    pass


# grammar

class GrammarSyntaxError(ArtDirectorError, ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class UndefinedSymbolError(ArtDirectorError, ValueError):
    def __init__(self, name: str):
        super().__init__(f"undefined symbol {name!r}")
        self.name = name


class UnproductiveNonterminalError(ArtDirectorError, ValueError):
    def __init__(self, names: list[str]):
        super().__init__("unproductive nonterminal(s): " + ", ".join(names))
        self.names = names


class EmptyTerminalError(ArtDirectorError, ValueError):
    pass


class RejectionError(ArtDirectorError):
    def __init__(self, offset: int, consumed: bytes):
        super().__init__(
            f"input rejected at byte offset {offset} (after {consumed[:offset]!r})"
        )
        self.offset = offset


class LengthExhaustedError(ArtDirectorError):
    def __init__(self, partial: str, max_tokens: int):
        super().__init__(
            f"max_tokens={max_tokens} reached before the grammar was complete; "
            f"partial output {partial!r}"
        )
        self.partial = partial


class ExplosionError(ArtDirectorError):
    pass


# constrained beam

class ConstraintError(ArtDirectorError, ValueError):
    pass


class EmptyPhraseError(ConstraintError):
    pass


class UnknownPaletteError(ConstraintError):
    def __init__(self, name: str):
        super().__init__(f"unknown palette {name!r}")
        self.name = name


class UnsatisfiableError(ArtDirectorError):
    def __init__(self, message: str, best: Any = None):
        super().__init__(message)
        self.best = best


# guidance / smc

class ShapeMismatchError(ArtDirectorError, ValueError):
    pass


class AllMaskedError(ArtDirectorError):
    pass


class EmptyStoreError(ArtDirectorError):
    pass


class AllDeadError(ArtDirectorError):
    pass


class BudgetError(ArtDirectorError):
    def __init__(self, message: str, results: list | None = None, unfinished: int = 0):
        super().__init__(message)
        self.results = results or []
        self.unfinished = unfinished


# retrieval

class DuplicateIdError(ArtDirectorError, KeyError):
    pass


class UnknownIdError(ArtDirectorError, KeyError):
    pass


class DimensionMismatchError(ArtDirectorError, ValueError):
    pass


# art director

class MissingSubjectError(ArtDirectorError, ValueError):
    pass


class PhraseNotFoundError(ArtDirectorError, ValueError):
    pass


class OverlappingPhrasesError(ArtDirectorError, ValueError):
    pass


class WeightBoundsError(ArtDirectorError, ValueError):
    pass


class OverlapTooLowError(ArtDirectorError, ValueError):
    def __init__(self, first: int, second: int, value: float, threshold: float):
        super().__init__(
            f"frames {first} and {second} overlap {value:.4f} < threshold {threshold}"
        )
        self.pair = (first, second)
        self.value = value
        self.threshold = threshold


class NonIncreasingIndicesError(ArtDirectorError, ValueError):
    pass
