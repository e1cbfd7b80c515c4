"""Token, clause and parse-depth counters.

The baseline has no parser.  Clause boundaries come from subordinator and
relativizer cues, and tree depth is estimated from those cues plus
prepositional attachments.  Corpora can supply real parser output through
the ``n_clauses``/``dep_depth``/``parse_height`` columns instead.
"""

from __future__ import annotations

import re
from typing import Callable

Tokenizer = Callable[[str], list]


def whitespace_tokenize(text: str) -> list[str]:
    return text.split()


_tokenizer: Tokenizer = whitespace_tokenize


def set_tokenizer(fn: Tokenizer | None) -> None:
    """Install a tokenizer for :func:`count_tokens` (``None`` restores whitespace)."""
    global _tokenizer
    _tokenizer = fn or whitespace_tokenize


def count_tokens(text: str, tokenizer: Tokenizer | None = None) -> int:
    return len((tokenizer or _tokenizer)(text))


_WORD = re.compile(r"[A-Za-z0-9]+(?:['’][A-Za-z]+)?|[,.;:?!]")

SUBORDINATORS = frozenset("""
although though because unless whereas while if whether once until till whenever
wherever after before lest
""".split())
# multiword subordinators, matched on consecutive lowercase words
SUBORDINATOR_PHRASES = (("even", "though"), ("so", "that"), ("as", "long", "as"),
                        ("in", "order", "to"), ("provided", "that"), ("given", "that"),
                        ("even", "if"))
RELATIVIZERS = frozenset("who whom whose which where when what how why".split())
_THAT_NEXT = frozenset("""
is are was were be been has have had do does did will would can could should may might
must i you he she it we they this that these those the a an there his her its their my
our your
""".split())
COORDINATORS = frozenset({"and", "or", "but", "nor"})
PREPOSITIONS = frozenset("""
of in on at by for with from into onto about over under between among through during
against without within across along around behind beyond near toward towards upon via
""".split())


def words(text: str) -> list[str]:
    return [w.lower() for w in _WORD.findall(text)]


def _clause_markers(toks: list[str]) -> int:
    n = 0
    skip = 0
    for i, tok in enumerate(toks):
        if skip:
            skip -= 1
            continue
        phrase = next((p for p in SUBORDINATOR_PHRASES if tuple(toks[i:i + len(p)]) == p),
                      None)
        if phrase is not None:
            n += 1
            skip = len(phrase) - 1
            continue
        prev = toks[i - 1] if i else None
        nxt = toks[i + 1] if i + 1 < len(toks) else None
        sentence_start = prev is None or prev in {".", "?", "!", ";", ":"}
        if tok in SUBORDINATORS:
            n += 1
        elif tok == "since":
            # "since 2019" is a preposition, "since prices rose" a clause
            if nxt is not None and not nxt.isdigit():
                n += 1
        elif tok in RELATIVIZERS:
            if not sentence_start and nxt is not None and nxt.isalpha():
                n += 1
        elif tok == "that":
            if (not sentence_start and nxt is not None and prev not in PREPOSITIONS
                    and (nxt in _THAT_NEXT or nxt.endswith("ed") or
                         (nxt.endswith("s") and len(nxt) > 3))):
                n += 1
    return n


def count_clauses(text: str) -> int:
    """1 plus the number of subordinate/relative/conditional clause markers."""
    toks = words(text)
    if not any(t.isalnum() for t in toks):
        return 0
    return 1 + _clause_markers(toks)


def parse_depths(text: str) -> tuple[int, int]:
    """Heuristic (dependency depth, constituency height).

    Each clause marker adds one dependency level and two constituent levels
    (SBAR over S).  Prepositional phrases nest in dependency depth only
    within one comma-delimited stretch, while every preposition and every
    coordinator adds a constituent level.  Both values are capped by the
    sizes of a chain-shaped tree over the tokens.
    """
    all_toks = words(text)
    toks = [t for t in all_toks if t.isalnum()]
    n = len(toks)
    if n == 0:
        return 0, 0
    if n == 1:
        return 1, 1
    markers = _clause_markers(all_toks)
    preps = sum(t in PREPOSITIONS for t in toks)
    chain = run = 0
    for t in all_toks:
        if t in PREPOSITIONS:
            run += 1
            chain = max(chain, run)
        elif not t.isalnum():
            run = 0
    coord = sum(t in COORDINATORS for t in toks)
    depth = min(n, 2 + markers + chain)
    height = min(2 * n - 1, 3 + 2 * markers + preps + coord)
    return depth, height
