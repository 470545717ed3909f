"""Grammar engine: parsing, incremental recognition, masks, sampling."""
from .language import enumerate_bytes, enumerate_language
from .recognizer import (
    CompiledGrammar,
    RecognizerState,
    TokenMask,
    advance,
    compile_grammar,
    init_state,
    is_complete,
    valid_mask,
)
from .sample import grammar_sample, grammar_sample_tokens
from .source import Grammar, Production, load_grammar, parse_grammar

PAPER_GRAMMAR = """\
# scene grammar: elements, attributes and relations
S         ::= Element
            | Element Attribute
            | Element Attribute Relation Element
Element   ::= "cat" | "dog"
Attribute ::= "sitting" | "jumping"
Relation  ::= "next to" | "above"
"""

__all__ = [
    "CompiledGrammar", "Grammar", "PAPER_GRAMMAR", "Production", "RecognizerState",
    "TokenMask", "advance", "compile_grammar", "enumerate_bytes", "enumerate_language",
    "grammar_sample", "grammar_sample_tokens", "init_state", "is_complete",
    "load_grammar", "parse_grammar", "valid_mask",
]
