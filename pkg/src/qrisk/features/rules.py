"""Keyword and pattern detectors for the 17 binary features.

These run offline and are deterministic.  The word lists are our own
choices, tuned for English questions; they are a baseline and are
documented here rather than claimed as ground truth.
"""

from __future__ import annotations

import re

from . import syntax

NEGATIONS = frozenset("""
not no never without hardly scarcely barely none nobody nothing neither nor nowhere cannot
""".split())

ANAPHORS = frozenset("he she it they him her them his its their theirs hers".split())
DEMONSTRATIVES = frozenset("this these those".split())
_EXPLETIVE_IT = re.compile(r"\b(is|was|it's)\s+it\s+(not\s+)?(true|possible|likely|necessary)\b"
                           r"|\bit\s+(is|was)\s+(not\s+)?(true|possible|likely)\b")

SUPERLATIVE_WORDS = frozenset("best worst most least first foremost".split())
# -est words that are not superlatives
_NOT_SUPERLATIVE = frozenset("""
interest test rest west forest honest request guest chest nest contest harvest suggest
protest digest invest modest manifest arrest quest pest vest behest earnest inquest
attest detest conquest southwest northwest midwest everest tempest
""".split())

POLYSEMES = {
    "bank": {"account", "loan", "money", "deposit", "river", "central", "savings"},
    "cell": {"biology", "prison", "phone", "battery", "membrane", "nucleus", "solar"},
    "java": {"programming", "code", "island", "indonesia", "coffee"},
    "mercury": {"element", "thermometer", "poisoning", "freddie", "metal"},
    "python": {"programming", "code", "snake", "script"},
    "bat": {"baseball", "cricket", "wing", "cave"},
    "pitch": {"baseball", "frequency", "note", "football"},
    "crane": {"bird", "construction", "lift"},
    "spring": {"season", "coil", "water", "april"},
    "bark": {"tree", "dog"},
    "seal": {"animal", "wax", "navy"},
    "jaguar": {"car", "cat", "animal"},
    "mole": {"skin", "chemistry", "animal", "avogadro"},
    "plant": {"power", "nuclear", "factory", "flower", "leaf", "leaves"},
    "court": {"tennis", "supreme", "judge", "law"},
    "key": {"lock", "door", "keyboard", "piano", "music"},
    "match": {"football", "tennis", "fire", "game"},
    "bass": {"fish", "guitar", "music"},
    "apple": {"fruit", "inc", "iphone", "mac", "orchard"},
    "division": {"math", "arithmetic", "number", "numbers"},
    "blocks": {"lego", "building", "city"},
}

ANSWERABILITY_BLOCKERS = (
    re.compile(r"\bwill\b.*\b(next|tomorrow|future|ever|someday)\b"),
    re.compile(r"\b(going to|predict|forecast|in the future)\b"),
    re.compile(r"\bshould (i|we|you)\b"),
    re.compile(r"\b(is|are) .* (good|bad|worth it|overrated)\b"),
    re.compile(r"\b(exact number of|is there life|what if|meaning of life)\b"),
    re.compile(r"\bwould\b"),
    re.compile(r"\b(might|could possibly|speculate|imagine)\b"),
)

SUBJECTIVE = frozenset("""
best worst beautiful ugly good bad should worth favorite favourite overrated underrated
prefer opinion think criticism nicest coolest greatest
""".split())

VAGUE_PATTERNS = (
    re.compile(r"\b(tell|talk) (me )?about\b"),
    re.compile(r"\bwhat about\b"),
    re.compile(r"\b(anything|something|stuff|things|whatever)\b"),
    re.compile(r"\bin general\b"),
    re.compile(r"\bwhat happened\b"),
    re.compile(r"\bcompare the (models|options|things|two)\b"),
    re.compile(r"\bsome (kind|sort) of\b"),
)

OPERATION_VERBS = frozenset("""
summarize summarise extract compare classify translate list define name identify explain
describe calculate compute select choose give find state rank convert outline
""".split())

DETAIL_ASIDES = (
    re.compile(r"\b(my|our) (favorite|favourite|blue|red|old|new|little)\b"),
    re.compile(r"\b(last summer|on my|in my|given my|from my)\b"),
    re.compile(r"\b(by the way|incidentally|as an aside)\b"),
)

CONSTRAINT_PATTERNS = (
    re.compile(r"\b1[0-9]{3}\b|\b20[0-9]{2}\b"),
    re.compile(r"\b(only|exclusively|at most|at least|no more than)\b"),
    re.compile(r"\b(after|before|during|between|since) [0-9a-z]"),
    re.compile(r"\bat sea level\b"),
    re.compile(r"\b(in|of|within|across) (the )?[A-Z][a-z]+"),
)

DOMAIN_TERMS = frozenset("""
statute section immunity liability plaintiff defendant jurisdiction gdpr legal tort
pathophysiology diagnosis syndrome clinical dosage pharmacology rhabdomyolysis
regression variance heteroscedasticity gradient neural stochastic bayesian alpha
crispr cas9 protein enzyme gene genome biochemical mitosis meiosis polymerase metabolic
earnings derivative equity bond yield amortization ebitda
thermodynamics entropy quantum decoherence isotope isotopes molecule orbital syzygy
""".split())

RARE_SUFFIXES = ("osis", "ysis", "itis", "ygy", "asticity", "idity", "ectomy", "ium")

# sentence starters that are capitalized for grammatical reasons only
_FUNCTION_CAPS = frozenset("""
What Who Whom Whose Which Where When Why How Is Are Was Were Do Does Did Can Could Should
Would Will The A An In On At Of For To Tell Give List Name Define Explain Describe Summarize
Compare Extract Please Along During Some If Although Since Because While Select Choose Find
""".split())


def _hit(found, rationale: str) -> tuple[bool, str]:
    if found:
        return True, rationale.format(found)
    return False, ""


def _first(tokens, vocab):
    return next((t for t in tokens if t in vocab), None)


def anaphora(text: str, toks: list[str], scenario: str) -> tuple[bool, str]:
    if _EXPLETIVE_IT.search(text.lower()):
        toks = [t for t in toks if t != "it"]
    tok = _first(toks, ANAPHORS | DEMONSTRATIVES)
    if tok is None:
        for i, t in enumerate(toks[:-1]):
            if t == "that" and toks[i + 1] in {"one", "paper", "book", "thing", "place",
                                              "time", "guy", "method", "model"}:
                tok = f"that {toks[i + 1]}"
                break
    return _hit(tok, "'{}' needs an antecedent that the query does not supply.")


def clause_complexity(text, toks, scenario):
    n = syntax.count_clauses(text)
    if n >= 2:
        return True, f"{n} clauses detected from subordinator or relativizer cues."
    return False, ""


def scenario_mismatch(text, toks, scenario):
    low = text.lower()
    mc_cue = re.search(r"\b(choose|select|pick)\b.*\b(option|options|answer|choices)\b"
                       r"|\(a[–-]d\)|\boptions?\b", low)
    extract_cue = re.search(r"\b(extract|exact span|quote|verbatim)\b", low)
    free_cue = re.search(r"\b(summary|summarize|summarise|free-form|essay|in your own words)\b",
                         low)
    if scenario == "Abstractive" and extract_cue:
        return True, "Span extraction requested in an abstractive setting."
    if scenario != "MultipleChoice" and mc_cue:
        return True, "Option selection requested without answer choices."
    if scenario == "MultipleChoice" and (free_cue or extract_cue) and not mc_cue:
        return True, "Open-ended output requested in a multiple-choice setting."
    return False, ""


_PRESUP = re.compile(r"\b(again|still|anymore|stop|stopped|quit|admit|admitted|realize|"
                     r"realized|regret|continue|continued|manage|managed|resumed)\b"
                     r"|^why (did|does|do|is|was|were|are)\b|\bthe (current )?king of\b")


def presupposition(text, toks, scenario):
    m = _PRESUP.search(text.lower())
    return _hit(m.group(0) if m else None, "'{}' takes an unstated fact for granted.")


_PRAGMATIC = re.compile(r"\b(could|can|would) you\b|\bwould you mind\b|\b(in here|right now|"
                        r"this time|over here|around here)\b|\b(maybe|a bit|really|kind of)\b"
                        r"|^is that\b|\bthis (pattern|one|thing|issue)\b")


def pragmatic(text, toks, scenario):
    m = _PRAGMATIC.search(text.lower())
    return _hit(m.group(0) if m else None, "'{}' relies on situational or indirect meaning.")


def rare_word(text, toks, scenario):
    for t in toks:
        if t.isalpha() and (len(t) >= 14 or (len(t) >= 6 and t.endswith(RARE_SUFFIXES))):
            return True, f"'{t}' is a low-frequency term."
    return False, ""


def negation(text, toks, scenario):
    tok = _first(toks, NEGATIONS) or next((t for t in toks if t.endswith(("n't", "n’t"))), None)
    return _hit(tok, "Negation '{}' scopes over the request.")


def superlative(text, toks, scenario):
    for t in toks:
        if t in SUPERLATIVE_WORDS:
            return True, f"Superlative '{t}'."
        if t.isalpha() and len(t) >= 6 and t.endswith("est") and t not in _NOT_SUPERLATIVE:
            return True, f"Superlative '{t}'."
    if "of all" in text.lower():
        return True, "Superlative 'of all'."
    return False, ""


def polysemous(text, toks, scenario):
    stems = {t.removesuffix("'s").removesuffix("’s") for t in toks}
    for word, cues in POLYSEMES.items():
        if word in stems and not (cues & stems):
            return True, f"'{word}' has several senses and nothing picks one."
    return False, ""


def answerability(text, toks, scenario):
    low = text.lower()
    for pat in ANSWERABILITY_BLOCKERS:
        m = pat.search(low)
        if m:
            return False, f"'{m.group(0)}' asks for speculation or opinion."
    return True, "Seeks a verifiable answer."


def excessive_details(text, toks, scenario):
    low = text.lower()
    for pat in DETAIL_ASIDES:
        m = pat.search(low)
        if m:
            return True, f"Aside '{m.group(0)}' does not constrain the answer."
    if syntax.count_tokens(text) > 28 or text.count(",") >= 3:
        return True, "Long query carrying more detail than the question needs."
    return False, ""


def subjectivity(text, toks, scenario):
    tok = _first(toks, SUBJECTIVE)
    return _hit(tok, "'{}' calls for a judgment of taste or value.")


def lack_of_specificity(text, toks, scenario):
    low = text.lower()
    for pat in VAGUE_PATTERNS:
        m = pat.search(low)
        if m:
            return True, f"'{m.group(0)}' leaves the scope open."
    content = [t for t in toks if t.isalnum()]
    if len(content) <= 2 and not any(c.isdigit() for c in low):
        return True, "Too short to pin down a target."
    return False, ""


def intention_grounding(text, toks, scenario):
    content = [t for t in toks if t.isalnum()]
    if content and content[0] in OPERATION_VERBS:
        return True, f"Leading verb '{content[0]}' names the operation."
    if " ".join(content[:2]) == "which of":
        return True, "Explicit selection among named alternatives."
    return False, ""


def contextual_constraints(text, toks, scenario):
    for pat in CONSTRAINT_PATTERNS:
        m = pat.search(text)
        if m and not (pat is CONSTRAINT_PATTERNS[-1] and _is_function_cap(m.group(0))):
            return True, f"'{m.group(0)}' narrows the scope."
    return False, ""


def _is_function_cap(match: str) -> bool:
    return match.split()[-1] in _FUNCTION_CAPS


def named_entities(text, toks, scenario):
    raw = re.findall(r"[A-Za-z0-9][A-Za-z0-9'’\-]*", text)
    for i, tok in enumerate(raw):
        if sum(c.isupper() for c in tok) >= 2 and tok.upper() == tok.replace("'", ""):
            return True, f"Acronym '{tok}'."
        if tok[0].isupper() and tok != "I" and (i > 0 or tok not in _FUNCTION_CAPS):
            if i == 0 and tok.lower() in syntax.PREPOSITIONS:
                continue
            return True, f"Proper name '{tok}'."
        if re.fullmatch(r"1[0-9]{3}|20[0-9]{2}", tok):
            return True, f"Dated reference '{tok}'."
    return False, ""


def domain_specificity(text, toks, scenario):
    tok = _first(toks, DOMAIN_TERMS)
    if tok is None:
        tok = next((t for t in toks if t.isalpha() and len(t) >= 6
                    and t.endswith(("osis", "ysis", "itis"))), None)
    return _hit(tok, "'{}' belongs to a specialist vocabulary.")


DETECTORS = {
    "AnaphoraUsage": anaphora,
    "ClauseComplexity": clause_complexity,
    "QueryScenarioMismatch": scenario_mismatch,
    "Presupposition": presupposition,
    "PragmaticFeatures": pragmatic,
    "RareWordUsage": rare_word,
    "NegationUsage": negation,
    "SuperlativeUsage": superlative,
    "PolysemousWords": polysemous,
    "Answerability": answerability,
    "ExcessiveDetails": excessive_details,
    "Subjectivity": subjectivity,
    "LackOfSpecificity": lack_of_specificity,
    "IntentionGrounding": intention_grounding,
    "ContextualConstraints": contextual_constraints,
    "NamedEntitiesPresent": named_entities,
    "DomainSpecificity": domain_specificity,
}


def detect(feature: str, text: str, scenario: str) -> tuple[bool, str]:
    toks = syntax.words(text)
    label, why = DETECTORS[feature](text, toks, scenario)
    if not label and not why:
        why = "No cue for this feature."
    return bool(label), why
