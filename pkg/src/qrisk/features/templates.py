"""Detector, paraphrase and judge prompt templates.

Placeholders use ``{{name}}`` and are filled by :func:`render`.  The text is
sent to the model unchanged apart from placeholder substitution, so edits
here change cache keys for every recorded transcript.
"""

from __future__ import annotations

_FOOTER = """INPUT:
{{query}}

STRUCTURED OUTPUT:
label=<true|false>; rationale="..."
"""


def _template(header: str, feature: str, rubric: tuple[str, str, str], examples: str,
              footer: str = _FOOTER) -> str:
    bullets = "\n".join(f"- {b}" for b in rubric)
    return (f"{header}\n\nFEATURE: {feature}\n\nOPERATIONAL RUBRIC:\n{bullets}\n\n"
            f"EXAMPLES (5-shot):\n{examples}\n\n{footer}")


UNIVERSAL = """You are an expert linguist. Given a user query, decide whether it exhibits the FEATURE below using the operational rubric.
Return STRUCTURED OUTPUT with fields:
- label: true|false
- rationale: <=2 sentences (short, evidence-based)

FEATURE: {{FEATURE_NAME}}

OPERATIONAL RUBRIC:
- {{RUBRIC_BULLET_1}}
- {{RUBRIC_BULLET_2}}
- {{RUBRIC_BULLET_3}}

EXAMPLES (5-shot; mix of positive and negative):
[E1] FEATURE=Negation Usage; INPUT: Why didn't the test run?
OUTPUT: label=true; rationale="Contains explicit negation (didn't) affecting the main predicate."

[E2] FEATURE=Negation Usage; INPUT: Why did the test run?
OUTPUT: label=false; rationale="No negation markers present."

[E3] FEATURE=Lack of Specificity; INPUT: Tell me about Tesla.
OUTPUT: label=true; rationale="Multiple plausible scopes (company, vehicles, stock) with no constraints."

[E4] FEATURE=Lack of Specificity; INPUT: Summarize Tesla's 2024 Q4 earnings call in 5 bullets.
OUTPUT: label=false; rationale="Time, scope, and format are clearly specified."

[E5] FEATURE=Named Entities Present; INPUT: Did the CDC issue RSV guidance in 2024?
OUTPUT: label=true; rationale="Contains named entity (CDC) and dated reference (2024)."

Now classify the following query.

INPUT:
{{query}}

STRUCTURED OUTPUT:
label=<true|false>; rationale="<two short sentences>"
"""

_SHORT = "Return STRUCTURED OUTPUT {label, rationale<=2 sentences}."
_BRACED = "Return STRUCTURED OUTPUT with {label, rationale<=2 sentences}."
_FIELDS = "Return STRUCTURED OUTPUT with fields {label, rationale (<=2 sentences)}."

ANAPHORA = _template(
    "You are an expert linguist. Given a user query, decide whether it exhibits the FEATURE "
    "below using the operational rubric.\nReturn STRUCTURED OUTPUT with fields:\n"
    "- label: true|false\n- rationale: <=2 sentences",
    "Anaphora Usage",
    ("Contains pronominal/definite references (it/this/that/they/he/she/these/those/that one) "
     "with an antecedent not locally introduced.",
     "Correct interpretation depends on prior discourse or missing antecedent.",
     "If read in isolation, resolution is unclear or ambiguous."),
    """[E1] INPUT: Is he the same person who founded the company?  → STRUCTURED OUTPUT: label=true; rationale="'he' lacks an antecedent; resolution depends on prior context."
[E2] INPUT: How does this compare to that paper from last year? → label=true; rationale="'this' and 'that paper' require discourse to resolve."
[E3] INPUT: It was delayed again–when will it ship? → label=true; rationale="'It' is anaphoric with no antecedent in the query."
[E4] INPUT: Who founded Apple? → label=false; rationale="No anaphoric expressions; fully self-contained."
[E5] INPUT: Define photosynthesis. → label=false; rationale="No pronouns or anaphoric references."

Now classify the following query.""",
    footer="""INPUT:
{{query}}

STRUCTURED OUTPUT:
label=<true|false>; rationale="<two short sentences>"
""")

CLAUSE_COMPLEXITY = _template(
    "You are an expert linguist. Decide whether the query exhibits the FEATURE below using "
    "the rubric. \n" + _FIELDS,
    "Clause Complexity",
    ("Contains multiple subordinate/relative/conditional clauses.",
     "Uses subordinators or relativizers (because, although, which/that, if/when/while, "
     "even though, so that).",
     "Meaning would materially change if reduced to a single clause."),
    """[E1] INPUT: If the trial succeeds, which regulators will, according to the memo that leaked, approve it first? → label=true; rationale="Multiple embedded/conditional clauses."
[E2] INPUT: Summarize the study that was published last week, which compared three models. → label=true; rationale="Relative clauses 'that was published' and 'which compared'."
[E3] INPUT: Although sales fell, margins improved. → label=true; rationale="Subordinate concessive clause."
[E4] INPUT: Who wrote The Road? → label=false; rationale="Single simple clause."
[E5] INPUT: Define GDP. → label=false; rationale="No subordination or embedding.\"""")

QUERY_SCENARIO_MISMATCH = _template(
    "You are an expert linguist. Decide whether the query is mismatched with the declared "
    "scenario.\n" + _FIELDS,
    "Query–Scenario Mismatch",
    ("Requested operation conflicts with SCENARIO (Extractive / Abstractive / Multiple-Choice).",
     "Expected answer format is incompatible with SCENARIO resources (e.g., asks for \"exact "
     "span\" but no passage; asks to \"pick an option\" but no options).",
     "The query presupposes inputs (choices/passage) absent in the scenario."),
    """[E1] SCENARIO=Abstractive; INPUT: Extract the exact span containing the date. → label=true; rationale="Extraction request in Abstractive setting."
[E2] SCENARIO=Multiple-Choice; INPUT: Provide a free-form summary of the article. → label=true; rationale="Open summary in MC setting."
[E3] SCENARIO=Extractive; INPUT: Choose the correct option (A–D). → label=true; rationale="MC instruction in Extractive scenario."
[E4] SCENARIO=Abstractive; INPUT: Summarize the passage in three bullets. → label=false; rationale="Matches Abstractive scenario."
[E5] SCENARIO=Multiple-Choice; INPUT: Select the best answer from the options. → label=false; rationale="Matches MC scenario.\"""",
    footer="""INPUT:
SCENARIO: {{scenario}}
{{query}}

STRUCTURED OUTPUT:
label=<true|false>; rationale="..."
""")

PRESUPPOSITION = _template(
    "You are an expert linguist. Decide whether the query embeds a nontrivial presupposition.\n"
    + _BRACED,
    "Presupposition",
    ("Assumes some fact is true (existence/uniqueness/factivity) without evidence in the query.",
     "Removing the presupposition changes truth conditions (e.g., \"When did X stop…\" "
     "presupposes X used to…).",
     "The assumed fact may be false or unverifiable given typical inputs."),
    """[E1] INPUT: When did the CEO admit the fraud? → label=true; rationale="Presupposes there was a fraud and an admission."
[E2] INPUT: Who is the king of France now? → label=true; rationale="Presupposes France has a king."
[E3] INPUT: Why did the model fail again? → label=true; rationale="Presupposes failure occurred previously."
[E4] INPUT: Who wrote Pride and Prejudice? → label=false; rationale="No hidden assumption beyond existence of the book."
[E5] INPUT: Define inflation. → label=false; rationale="No presupposed event/state.\"""")

PRAGMATIC = _template(
    "You are an expert linguist. Decide whether the query relies on pragmatics (implicature, "
    "deixis, indirect speech acts).\n" + _BRACED,
    "Pragmatic Features",
    ("Literal form diverges from intended act (e.g., \"Can you pass the salt?\" = request).",
     "Meaning depends on deixis (\"here\", \"now\", \"this time\") or shared situational context.",
     "Interpretation requires implicature/sarcasm/politeness beyond literal semantics."),
    """[E1] INPUT: Could you maybe tone that down a bit? → label=true; rationale="Indirect request, politeness strategy."
[E2] INPUT: It's cold in here. → label=true; rationale="Likely a request to close window/adjust temp (implicature)."
[E3] INPUT: Is that really how we want to do this? → label=true; rationale="Rhetorical/indirect suggestion."
[E4] INPUT: What is the capital of Japan? → label=false; rationale="Literal Q&A."
[E5] INPUT: Define entropy in thermodynamics. → label=false; rationale="No pragmatic inference required.\"""")

RARE_WORD = _template(
    "You are an expert linguist. Decide whether the query uses rare/low-frequency or highly "
    "technical terms.\nReturn STRUCTURED OUTPUT {label, rationale<=2 sentences}.",
    "Rare Word Usage",
    ("Contains niche jargon or low-frequency lexical items relative to general English.",
     "Common synonyms exist that would be much more frequent.",
     "A typical non-expert would flag the term as uncommon."),
    """[E1] INPUT: Explain the pathophysiology of rhabdomyolysis. → label=true; rationale="'rhabdomyolysis' is rare, technical."
[E2] INPUT: Define syzygy in orbital mechanics. → label=true; rationale="'syzygy' is rare."
[E3] INPUT: What does heteroscedasticity mean? → label=true; rationale="Technical statistical term."
[E4] INPUT: What is a star? → label=false; rationale="Common vocabulary."
[E5] INPUT: Who was the first president of the US? → label=false; rationale="No rare words.\"""")

NEGATION = _template(
    "You are an expert linguist. Decide whether the query contains semantic negation.\n"
    + _SHORT,
    "Negation Usage",
    ("Uses explicit negation tokens (not, no, never, without, hardly, scarcely).",
     "Negation scope changes the truth of the main predicate.",
     "Negative polarity is central to the request."),
    """[E1] INPUT: Which vaccines are not mRNA-based? → label=true; rationale="Explicit negation 'not' restricting set."
[E2] INPUT: Why didn't the test run? → label=true; rationale="Negated auxiliary 'didn't'."
[E3] INPUT: Summarize the paper without mentioning formulas. → label=true; rationale="'without' introduces negation constraint."
[E4] INPUT: Who wrote Hamlet? → label=false; rationale="No negation."
[E5] INPUT: Define polymerase. → label=false; rationale="No negation.\"""")

SUPERLATIVE = _template(
    "You are an expert linguist. Decide whether the query uses superlatives.\n" + _SHORT,
    "Superlative Usage",
    ("Morphological/lexical superlatives (biggest, smallest, \"the most/least\", \"of all\").",
     "Implies an ordering over a set with an extreme endpoint.",
     "Expects a unique argmax/argmin or tie-breaking criterion."),
    """[E1] INPUT: What is the fastest marine mammal? → label=true; rationale="Superlative 'fastest'."
[E2] INPUT: Which city has the most museums? → label=true; rationale="'the most' indicates superlative count."
[E3] INPUT: What is the smallest prime number greater than 50? → label=true; rationale="'smallest' within a constrained set."
[E4] INPUT: Name a city with many museums. → label=false; rationale="Comparative/quantified, not superlative."
[E5] INPUT: Define prime number. → label=false; rationale="No superlative.\"""")

POLYSEMOUS = _template(
    "You are an expert linguist. Decide whether a key content word is polysemous and "
    "under-specified here.\n" + _SHORT,
    "Polysemous Words",
    ("A salient word has multiple distinct senses (bank, cell, Java, Mercury).",
     "Local context does not disambiguate the intended sense.",
     "Different senses would change the answer."),
    """[E1] INPUT: How do I open a new account at the bank? → label=false; rationale="Context favors financial institution."
[E2] INPUT: What is the weather like in Java? → label=true; rationale="Could be island or language; under-specified."
[E3] INPUT: Describe the function of a cell. → label=true; rationale="Could be biological cell or prison cell."
[E4] INPUT: Mercury's orbital period is what? → label=true; rationale="Planet vs. element; ambiguous."
[E5] INPUT: Who wrote The Hobbit? → label=false; rationale="No polysemous ambiguity.\"""")

ANSWERABILITY = _template(
    "You are an expert linguist. Decide whether the query is answerable on the basis of "
    "provided/commonly-known information (not speculation).\n" + _SHORT,
    "Answerability",
    ("Has a verifiable answer given supplied context or widely-known facts.",
     "Not opinion-based, rhetorical, or forecasting without data.",
     "Does not require time-varying external info unless included."),
    """[E1] INPUT: Who wrote The Road? → label=true; rationale="Single verifiable fact (Cormac McCarthy)."
[E2] INPUT: What is 17×19? → label=true; rationale="Deterministic computation."
[E3] INPUT: Will Stock X crash next month? → label=false; rationale="Speculative forecasting."
[E4] INPUT: Should I move to New York? → label=false; rationale="Subjective; no criteria."
[E5] INPUT: Is there life on Europa? → label=false; rationale="Unknown; not currently verifiable.\"""")

EXCESSIVE_DETAILS = _template(
    "You are an expert linguist. Decide whether the query includes extraneous details not "
    "needed to answer it.\n" + _SHORT,
    "Excessive Details",
    ("Contains descriptive asides that do not constrain the answer.",
     "Removing them would not change the target operation or output.",
     "Details distract or broaden scope without adding specificity."),
    """[E1] INPUT: In my blue notebook from last summer's trip to Italy, can you define mitosis? → label=true; rationale="Notebook/trip details irrelevant to defining mitosis."
[E2] INPUT: Please, given my favorite mug and desk plant, what is 12×8? → label=true; rationale="Superfluous objects unrelated to arithmetic."
[E3] INPUT: When did WWI begin? → label=false; rationale="No extra details."
[E4] INPUT: Summarize this article in 3 bullets. → label=false; rationale="No extraneous info."
[E5] INPUT: What is the boiling point of water at sea level? → label=false; rationale="All details are relevant.\"""")

SUBJECTIVITY = _template(
    "You are an expert linguist. Decide whether the query requests a subjective judgment or "
    "preference.\n" + _SHORT,
    "Subjectivity",
    ("Invites personal taste/value judgment (best, beautiful, should, worth) without criteria.",
     "No objective rubric is provided to adjudicate correctness.",
     "Output depends on preferences rather than evidence."),
    """[E1] INPUT: Which smartphone is the best right now? → label=true; rationale="'best' without criteria is subjective."
[E2] INPUT: Should I learn Rust or Go? → label=true; rationale="Advisory preference question."
[E3] INPUT: Is modern art good? → label=true; rationale="Value judgment."
[E4] INPUT: What's the battery capacity of iPhone 13? → label=false; rationale="Objective spec."
[E5] INPUT: Define convolution. → label=false; rationale="Objective definition.\"""")

LACK_OF_SPECIFICITY = _template(
    "You are an expert linguist. Decide whether the query is under-specified.\n" + _SHORT,
    "Lack of Specificity",
    ("Missing disambiguating constraints (time/place/entity/scope).",
     "Multiple plausible interpretations; no tie-breaker.",
     "Task intent or output format is underspecified."),
    """[E1] INPUT: Tell me about Tesla. → label=true; rationale="Company vs. cars vs. stock; scope unclear."
[E2] INPUT: Compare the models. → label=true; rationale="Which models? No domain or criteria."
[E3] INPUT: What happened yesterday? → label=true; rationale="No topic or domain given."
[E4] INPUT: Summarize Tesla's 2024 Q4 earnings call in 5 bullets. → label=false; rationale="Time, domain, and format specified."
[E5] INPUT: Extract the date of publication from the abstract. → label=false; rationale="Clear operation and target.\"""")

INTENTION_GROUNDING = _template(
    "You are an expert linguist. Decide whether the user's intended operation is explicit.\n"
    + _SHORT,
    "Intention Grounding",
    ("Verb makes the operation clear (summarize, compare, extract, classify, translate).",
     "Expected output form is inferable (bullets, short answer, definition).",
     "Operation applies to supplied or implied content."),
    """[E1] INPUT: Summarize the article in three bullets. → label=true; rationale="Clear directive and format."
[E2] INPUT: Extract the chemical formula from the passage. → label=true; rationale="Unambiguous extraction task."
[E3] INPUT: Compare Model A and Model B on latency and cost. → label=true; rationale="Operation and criteria stated."
[E4] INPUT: Java? → label=false; rationale="No operation specified."
[E5] INPUT: Tell me about space. → label=false; rationale="Vague goal, no operation.\"""")

CONTEXTUAL_CONSTRAINTS = _template(
    "You are an expert linguist. Decide whether the query includes explicit constraints that "
    "narrow scope.\n" + _SHORT,
    "Contextual Constraints",
    ("Names time, location, population, or conditions that meaningfully narrow the answer.",
     "Constraints are integral to fulfilling the request.",
     "Removing constraints would broaden or change the target."),
    """[E1] INPUT: List three causes of inflation in the US during 2022. → label=true; rationale="Time and location constraints."
[E2] INPUT: Summarize EU AI Act obligations for SMEs only. → label=true; rationale="Jurisdiction and population constraints."
[E3] INPUT: Give NYC subway delays after 10pm. → label=true; rationale="Location and time constraints."
[E4] INPUT: Define inflation. → label=false; rationale="No constraints."
[E5] INPUT: Summarize the article. → label=false; rationale="No narrowing conditions.\"""")

NAMED_ENTITIES = _template(
    "You are an expert linguist. Decide whether the query includes named entities (proper "
    "names).\n" + _SHORT,
    "Named Entities Present",
    ("Contains proper names (persons, orgs, places, products, works, dates).",
     "Entities are pivotal to resolving the query.",
     "Generic categories alone (city, company) do not count as named entities."),
    """[E1] INPUT: Did Sundar Pichai announce Gemini in 2023? → label=true; rationale="Person and product names; year."
[E2] INPUT: What did the CDC advise about RSV in 2024? → label=true; rationale="Org and year."
[E3] INPUT: When did World War I begin? → label=true; rationale="Named historical event."
[E4] INPUT: Who wrote that book? → label=false; rationale="No explicit names given."
[E5] INPUT: Define a balanced tree. → label=false; rationale="No proper names.\"""")

DOMAIN_SPECIFICITY = _template(
    "You are an expert linguist. Decide whether the query is specialized to a "
    "technical/professional domain.\n" + _SHORT,
    "Domain Specificity",
    ("Requires discipline-specific knowledge/terminology (law, medicine, finance, ML, biology, "
     "etc.).",
     "A layperson would likely consult an expert/reference.",
     "Uses domain conventions or statutory/technical terms."),
    """[E1] INPUT: Interpret Section 230 immunity in the context of platform moderation. → label=true; rationale="Legal doctrine."
[E2] INPUT: Differentiate Type I vs. Type II error and discuss α control. → label=true; rationale="Statistical terminology."
[E3] INPUT: Explain CRISPR-Cas9 off-target effects. → label=true; rationale="Molecular biology."
[E4] INPUT: What is a triangle? → label=false; rationale="Elementary concept."
[E5] INPUT: Who was Ada Lovelace? → label=false; rationale="General knowledge biography.\"""")

# keyed by FeatureName value
FEATURE_TEMPLATES = {
    "AnaphoraUsage": ANAPHORA,
    "ClauseComplexity": CLAUSE_COMPLEXITY,
    "QueryScenarioMismatch": QUERY_SCENARIO_MISMATCH,
    "Presupposition": PRESUPPOSITION,
    "PragmaticFeatures": PRAGMATIC,
    "RareWordUsage": RARE_WORD,
    "NegationUsage": NEGATION,
    "SuperlativeUsage": SUPERLATIVE,
    "PolysemousWords": POLYSEMOUS,
    "Answerability": ANSWERABILITY,
    "ExcessiveDetails": EXCESSIVE_DETAILS,
    "Subjectivity": SUBJECTIVITY,
    "LackOfSpecificity": LACK_OF_SPECIFICITY,
    "IntentionGrounding": INTENTION_GROUNDING,
    "ContextualConstraints": CONTEXTUAL_CONSTRAINTS,
    "NamedEntitiesPresent": NAMED_ENTITIES,
    "DomainSpecificity": DOMAIN_SPECIFICITY,
}

PARAPHRASE_INSTRUCTION = ("Produce a semantically indifferent but lexically perturbed version "
                          "of the query.\n\nQuery: {{query}}\n\nParaphrase:")

ANSWER_TEMPLATE = "Answer the question concisely.\n\nQuestion: {{query}}\n{{extra}}Answer:"

JUDGE = """You are an impartial grader. Decide whether the model's answer is correct for the given query and gold reference.
Return STRUCTURED OUTPUT with fields:
- correct: true|false
- rationale: <=2 sentences (concise, cite the decisive mismatch or match)

CRITERIA:
- Accept semantic equivalence to the gold even if phrased differently.
- Penalize invented facts, contradictions, or unsupported specifics.
- If gold is a set, accept any member as correct.
- If the gold is not applicable or missing, mark correct=false and explain.

EXAMPLES (5-shot):
[E1]
INPUT:
query: Who wrote "The Road"?
model_answer: Cormac McCarthy.
gold: Cormac McCarthy
OUTPUT:
correct=true; rationale="Exact match to the reference author."

[E2]
INPUT:
query: What is the boiling point of water at sea level?
model_answer: 90°C.
gold: 100°C
OUTPUT:
correct=false; rationale="Numerical value contradicts the reference (90≠100)."

[E3]
INPUT:
query: Name one prime number greater than 10.
model_answer: 13.
gold: {11, 13, 17, 19, ...}
OUTPUT:
correct=true; rationale="Answer (13) is a valid member of the acceptable set."

[E4]
INPUT:
query: Define photosynthesis.
model_answer: It is the process by which plants convert light into chemical energy, producing glucose and oxygen from carbon dioxide and water.
gold: Process converting light energy into chemical energy, producing glucose and oxygen from CO2 and water.
OUTPUT:
correct=true; rationale="Semantically equivalent definition."

[E5]
INPUT:
query: Who is the current king of France?
model_answer: Louis XX.
gold: No current king of France.
OUTPUT:
correct=false; rationale="Asserts a non-existent monarch; contradicts the reference."

Now grade the following example.

INPUT:
query: {{query}}
model_answer: {{answer}}
gold: {{gold}}

STRUCTURED OUTPUT:
correct=<true|false>; rationale="<two short sentences>"
"""


def render(template: str, **values: str) -> str:
    out = template
    for name, value in values.items():
        out = out.replace("{{" + name + "}}", value)
    return out


def format_gold(gold) -> str:
    gold = list(gold)
    if len(gold) == 1:
        return gold[0]
    return "{" + ", ".join(gold) + "}"
