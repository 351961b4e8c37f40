"""Deterministic spatial-language parser and synthetic corpus generator.

Sentences are reduced to observation tuples (target, relation, landmark,
negated). Matching is typo-tolerant: any non-numeric token may be off by one
Damerau-Levenshtein edit. Digit strings (landmark numbers) must match exactly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

RELATIONS = (
    "at",
    "near",
    "close_to",
    "far_from",
    "in_front_of",
    "behind",
    "next_to",
    "beside",
    "by",
    "around",
)

# surface form -> canonical relation; multi-word aliases are space-joined
ALIASES: dict[str, str] = {
    "at": "at",
    "near": "near",
    "nearby": "near",
    "close to": "close_to",
    "far from": "far_from",
    "far away from": "far_from",
    "in front of": "in_front_of",
    "in front": "in_front_of",
    "behind": "behind",
    "in back of": "behind",
    "at the back of": "behind",
    "next to": "next_to",
    "beside": "beside",
    "alongside": "beside",
    "by": "by",
    "around": "around",
}

NEGATION_TOKENS = ("not", "nowhere", "never")

# tokens skipped when hunting for the target noun
_STOPWORDS = {
    "the", "a", "an", "is", "was", "are", "were", "be", "been", "being",
    "can", "could", "will", "would", "may", "might", "there", "here",
    "you", "i", "we", "it", "that", "this", "s", "located", "situated",
    "find", "found", "see", "seen", "spotted", "left", "placed", "lying",
    "sitting", "standing", "somewhere", "right",
}

_FUZZY_MIN_LEN = 3  # shorter tokens must match exactly


class ParseError(ValueError):
    pass


class NoObservationFound(ParseError):
    pass


class UnknownRelation(ParseError):
    pass


class AmbiguousRelation(ParseError):
    pass


class UnknownLandmark(ParseError):
    pass


@dataclass(frozen=True)
class SpatialObservation:
    target: str
    relation: str
    landmark_id: str
    negated: bool = False
    raw_span: tuple[int, int] = (0, 0)  # token range in the source sentence

    def as_dict(self) -> dict:
        return {
            "target": self.target,
            "relation": self.relation,
            "landmark": self.landmark_id,
            "negated": self.negated,
        }


def damerau_levenshtein(a: str, b: str) -> int:
    """Edit distance with adjacent transpositions."""
    la, lb = len(a), len(b)
    if abs(la - lb) > 4:
        return abs(la - lb)
    prev2: list[int] = []
    prev = list(range(lb + 1))
    for i in range(1, la + 1):
        cur = [i] + [0] * lb
        for j in range(1, lb + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
            if (
                i > 1
                and j > 1
                and a[i - 1] == b[j - 2]
                and a[i - 2] == b[j - 1]
            ):
                cur[j] = min(cur[j], prev2[j - 2] + 1)
        prev2, prev = prev, cur
    return prev[lb]


def _fuzzy_eq(token: str, word: str) -> bool:
    if token == word:
        return True
    if len(word) < _FUZZY_MIN_LEN or token.isdigit() or word.isdigit():
        return False
    return damerau_levenshtein(token, word) <= 1


def tokenize(sentence: str) -> list[str]:
    """Lowercase word/digit tokens; possessive 's split off as its own token."""
    s = sentence.lower().replace("’", "'")
    s = re.sub(r"'s\b", " s", s)
    s = re.sub(r"n't\b", " not", s)
    return re.findall(r"[a-z]+|\d+", s)


def normalize_relation(surface: str) -> str:
    """Map a surface form to its canonical relation.

    Exact alias match wins; otherwise a unique alias within Damerau-Levenshtein
    distance 1 (whole phrase, spaces included) is accepted. Aliases shorter
    than 4 characters never fuzzy-match.
    """
    phrase = " ".join(tokenize(surface))
    if phrase in ALIASES:
        return ALIASES[phrase]
    hits = []
    for alias, rel in ALIASES.items():
        if len(alias) < 4:
            continue
        if damerau_levenshtein(phrase, alias) <= 1:
            hits.append(rel)
    uniq = sorted(set(hits))
    if len(uniq) == 1:
        return uniq[0]
    if len(uniq) > 1:
        raise AmbiguousRelation(f"ambiguous relation surface: {surface!r}")
    raise UnknownRelation(f"unknown relation surface: {surface!r}")


_ALIAS_TOKENS = sorted(
    ((alias.split(), rel) for alias, rel in ALIASES.items()),
    key=lambda kv: -len(kv[0]),
)


def _find_relation(tokens: list[str]) -> tuple[int, int, str] | None:
    """Locate the relation span: (start, end, canonical). Longest alias wins.

    Exact window matches are preferred over fuzzy ones anywhere in the clause.
    """
    n = len(tokens)
    # pass 1: exact token-window match, longest aliases first
    for alias_toks, rel in _ALIAS_TOKENS:
        k = len(alias_toks)
        for i in range(n - k + 1):
            if tokens[i : i + k] == alias_toks:
                return (i, i + k, rel)
    # pass 2: fuzzy whole-phrase match over windows sized k-1..k+1
    best: tuple[int, tuple[int, int, str]] | None = None
    ambiguous = False
    for alias_toks, rel in _ALIAS_TOKENS:
        alias = " ".join(alias_toks)
        if len(alias) < 4:
            continue
        for k in {len(alias_toks), len(alias_toks) + 1, max(len(alias_toks) - 1, 1)}:
            for i in range(n - k + 1):
                window = tokens[i : i + k]
                if any(t.isdigit() for t in window):
                    continue
                d = damerau_levenshtein(" ".join(window), alias)
                if d <= 1:
                    cand = (i, i + k, rel)
                    if best is None or d < best[0]:
                        best, ambiguous = (d, cand), False
                    elif d == best[0] and cand[2] != best[1][2]:
                        ambiguous = True
    if best is not None and not ambiguous:
        return best[1]
    if ambiguous:
        raise AmbiguousRelation(f"ambiguous relation in: {' '.join(tokens)!r}")
    return None


def resolve_landmark(phrase: str, lexicon: dict[str, str]) -> str:
    """Resolve a landmark phrase to an id.

    Word tokens tolerate one edit; digit tokens must match exactly.
    """
    toks = tokenize(phrase)
    matches = []
    for name, lm_id in lexicon.items():
        name_toks = tokenize(name)
        k = len(name_toks)
        for i in range(len(toks) - k + 1):
            window = toks[i : i + k]
            ok = True
            for t, w in zip(window, name_toks):
                if w.isdigit() or t.isdigit():
                    if t != w:
                        ok = False
                        break
                elif not _fuzzy_eq(t, w):
                    ok = False
                    break
            if ok:
                matches.append((k, lm_id))
                break
    if not matches:
        raise UnknownLandmark(f"no landmark resolves: {phrase!r}")
    best_len = max(m[0] for m in matches)
    ids = sorted({lm_id for k, lm_id in matches if k == best_len})
    if len(ids) > 1:
        raise UnknownLandmark(f"ambiguous landmark phrase: {phrase!r}")
    return ids[0]


def _extract_target(tokens: list[str], vocab: tuple[str, ...] | None) -> str:
    cands = []
    for t in tokens:
        if any(_fuzzy_eq(t, s) for s in _STOPWORDS if len(s) >= 2) or t in _STOPWORDS:
            continue
        if any(_fuzzy_eq(t, n) for n in NEGATION_TOKENS):
            continue
        cands.append(t)
    if not cands:
        return "target"
    t = cands[-1]
    if vocab:
        for v in vocab:
            if _fuzzy_eq(t, v):
                return v
    return t


def _split_clauses(tokens: list[str]) -> list[list[str]]:
    clauses: list[list[str]] = []
    cur: list[str] = []
    for t in tokens:
        if t == "and":
            if cur:
                clauses.append(cur)
            cur = []
        else:
            cur.append(t)
    if cur:
        clauses.append(cur)
    return clauses


def parse(
    sentence: str,
    lexicon: dict[str, str],
    target_vocab: tuple[str, ...] | None = None,
) -> list[SpatialObservation]:
    """Parse a sentence into spatial observation tuples.

    One observation per (relation, landmark) clause; clauses split on "and".
    Raises NoObservationFound if no clause yields an observation, and
    UnknownLandmark if a relation matched but its landmark cannot resolve.
    """
    if not lexicon:
        raise ValueError("lexicon must be non-empty")
    tokens = tokenize(sentence)
    out: list[SpatialObservation] = []
    last_error: ParseError | None = None
    offset = 0
    for clause in _split_clauses(tokens):
        try:
            span = _find_relation(clause)
        except AmbiguousRelation as exc:
            last_error = exc
            offset += len(clause) + 1
            continue
        if span is None:
            offset += len(clause) + 1
            continue
        start, end, rel = span
        try:
            lm_id = resolve_landmark(" ".join(clause[end:]), lexicon)
        except UnknownLandmark as exc:
            last_error = exc
            offset += len(clause) + 1
            continue
        head = clause[:start]
        negated = any(
            any(_fuzzy_eq(t, nt) for nt in NEGATION_TOKENS) for t in head
        )
        target = _extract_target(head, target_vocab)
        out.append(
            SpatialObservation(
                target=target,
                relation=rel,
                landmark_id=lm_id,
                negated=negated,
                raw_span=(offset + start, offset + end),
            )
        )
        offset += len(clause) + 1
    if not out:
        if isinstance(last_error, UnknownLandmark):
            raise last_error
        try:
            resolve_landmark(" ".join(tokens), lexicon)
        except UnknownLandmark:
            raise NoObservationFound(
                f"no spatial observation in: {sentence!r}"
            ) from None
        # a known landmark with no recognizable relation is a different
        # failure than plain gibberish, and the caller can say so
        raise UnknownRelation(f"no known spatial relation in: {sentence!r}")
    return out


# ---------------------------------------------------------------------------
# corpus generation


TARGET_NOUNS = ("bag", "bicycle", "robot", "backpack", "drone", "suitcase")

_REL_SURFACE = {
    "at": "at",
    "near": "near",
    "close_to": "close to",
    "far_from": "far from",
    "in_front_of": "in front of",
    "behind": "behind",
    "next_to": "next to",
    "beside": "beside",
    "by": "by",
    "around": "around",
}


@dataclass
class CorpusRecord:
    sentence: str
    expected: list[SpatialObservation]
    has_typo: bool = False
    structure: str = "subject-predicate"

    def as_dict(self) -> dict:
        return {
            "sentence": self.sentence,
            "expected": [o.as_dict() for o in self.expected],
        }


def _inject_typo(sentence: str, rng: np.random.Generator) -> str:
    """One random substitution/transposition/deletion in a non-numeric word."""
    words = sentence.split(" ")
    idx = [
        i
        for i, w in enumerate(words)
        if len(re.sub(r"[^a-z]", "", w.lower())) >= 3 and not any(c.isdigit() for c in w)
    ]
    if not idx:
        return sentence
    i = int(rng.choice(idx))
    w = words[i]
    letters = [j for j, c in enumerate(w) if c.isalpha()]
    for _ in range(20):
        op = rng.choice(["sub", "swap", "del"])
        j = int(rng.choice(letters))
        if op == "sub":
            c = chr(ord("a") + int(rng.integers(26)))
            new = w[:j] + c + w[j + 1 :]
        elif op == "swap" and j + 1 in letters:
            new = w[:j] + w[j + 1] + w[j] + w[j + 2 :]
        else:
            new = w[:j] + w[j + 1 :]
        if new != w:
            words[i] = new
            return " ".join(words)
    return sentence


def realize_sentence(
    rng: np.random.Generator,
    target: str,
    relation: str,
    landmark_name: str,
    negated: bool = False,
) -> tuple[str, str]:
    """Render one sentence from the corpus templates.

    Returns (sentence, structure). Draws the structural choices from rng in
    a fixed order so corpora are reproducible.
    """
    surface = _REL_SURFACE[relation]
    if rng.random() >= 0.83:
        neg = "not " if negated else ""
        return f"There is a {target} {neg}{surface} {landmark_name}.", "existential"
    # passive share chosen so active voice is 69.7% overall
    if rng.random() < (1.0 - 0.697) / 0.83:
        neg = "not " if negated else ""
        sentence = f"The {target} can {neg}be found {surface} {landmark_name}."
    elif rng.random() < 0.5:
        neg = " not" if negated else ""
        sentence = f"The {target}'s{neg} {surface} {landmark_name}."
    elif rng.random() < 0.5:
        neg = " not" if negated else ""
        sentence = f"The {target} is{neg} {surface} {landmark_name}."
    else:
        neg = "not " if negated else ""
        sentence = f"You can {neg}find the {target} {surface} {landmark_name}."
    return sentence, "subject-predicate"


def generate_corpus(
    seed: int,
    n: int,
    lexicon: dict[str, str],
    negation_rate: float = 0.15,
    typo_rate: float = 0.325,
) -> list[CorpusRecord]:
    """Sample sentences with the corpus structure mix.

    83% subject-predicate / 17% existential; 69.7% active voice overall;
    about half of the active target-subject sentences use the 's contraction;
    typo_rate of sentences carry one injected typo in a word token.
    """
    rng = np.random.default_rng(seed)
    names = sorted(lexicon)
    out: list[CorpusRecord] = []
    for _ in range(n):
        target = str(rng.choice(TARGET_NOUNS))
        rel = str(rng.choice(RELATIONS))
        name = str(rng.choice(names))
        negated = bool(rng.random() < negation_rate)
        sentence, structure = realize_sentence(rng, target, rel, name, negated)
        has_typo = bool(rng.random() < typo_rate)
        if has_typo:
            sentence = _inject_typo(sentence, rng)
        out.append(
            CorpusRecord(
                sentence=sentence,
                expected=[
                    SpatialObservation(target, rel, lexicon[name], negated)
                ],
                has_typo=has_typo,
                structure=structure,
            )
        )
    return out


def corpus_accuracy(
    records: list[CorpusRecord], lexicon: dict[str, str]
) -> float:
    """Fraction of records whose parse matches the expected tuples exactly."""
    if not records:
        return 1.0
    good = 0
    for rec in records:
        try:
            obs = parse(rec.sentence, lexicon, target_vocab=TARGET_NOUNS)
        except ParseError:
            continue
        got = [o.as_dict() for o in obs]
        want = [o.as_dict() for o in rec.expected]
        if got == want:
            good += 1
    return good / len(records)
