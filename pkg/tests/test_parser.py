import pytest

from langground import parser
from langground.parser import (
    NoObservationFound,
    UnknownLandmark,
    UnknownRelation,
    corpus_accuracy,
    damerau_levenshtein,
    generate_corpus,
    normalize_relation,
    parse,
    resolve_landmark,
)

LEX = {f"Building {i}": f"b{i}" for i in range(1, 20)}


def test_canonical_worked_example():
    obs = parse(
        "The robot is in front of building 1, and a bicycle is near building 2",
        LEX,
    )
    assert [o.as_dict() for o in obs] == [
        {"target": "robot", "relation": "in_front_of", "landmark": "b1", "negated": False},
        {"target": "bicycle", "relation": "near", "landmark": "b2", "negated": False},
    ]


def test_negated_contraction():
    (o,) = parse("the bag's not in front of building 5", LEX)
    assert o.target == "bag"
    assert o.relation == "in_front_of"
    assert o.landmark_id == "b5"
    assert o.negated


def test_existential():
    (o,) = parse("There is a bag in front of Building 16.", LEX)
    assert (o.target, o.relation, o.landmark_id, o.negated) == (
        "bag",
        "in_front_of",
        "b16",
        False,
    )


def test_passive_voice():
    (o,) = parse("The bag can be found near Building 7.", LEX)
    assert (o.target, o.relation, o.landmark_id) == ("bag", "near", "b7")


def test_find_pattern():
    (o,) = parse("You can find the bag close to Building 3.", LEX)
    assert (o.target, o.relation, o.landmark_id) == ("bag", "close_to", "b3")


def test_nowhere_near_negates():
    (o,) = parse("the bag is nowhere near building 2", LEX)
    assert o.relation == "near"
    assert o.negated


def test_negation_only_toggles_flag():
    (pos,) = parse("the bag is behind building 2", LEX)
    (neg,) = parse("the bag is not behind building 2", LEX)
    assert pos.relation == neg.relation == "behind"
    assert not pos.negated and neg.negated


def test_no_observation():
    with pytest.raises(NoObservationFound):
        parse("the weather is nice today", LEX)


def test_unknown_landmark():
    with pytest.raises(UnknownLandmark):
        parse("the bag is near building 99", LEX)


def test_empty_lexicon_rejected():
    with pytest.raises(ValueError):
        parse("the bag is near building 1", {})


def test_normalize_relation_alias():
    assert normalize_relation("alongside") == "beside"
    assert normalize_relation("in front") == "in_front_of"


def test_normalize_relation_typo():
    assert normalize_relation("infront of") == "in_front_of"
    assert normalize_relation("nexxt to") == "next_to"


def test_normalize_relation_unknown():
    with pytest.raises(UnknownRelation):
        normalize_relation("xyzzy")


def test_normalize_relation_edit_distance_oracle():
    # every accepted fuzzy form really is within DL distance 1 of an alias
    for surface, rel in [("cloze to", "close_to"), ("aroound", "around")]:
        assert normalize_relation(surface) == rel
        dists = [
            damerau_levenshtein(surface, alias)
            for alias, r in parser.ALIASES.items()
            if r == rel
        ]
        assert min(dists) <= 1


def test_resolve_landmark_exact_and_typo():
    assert resolve_landmark("Building 7", LEX) == "b7"
    assert resolve_landmark("buliding 7", LEX) == "b7"
    with pytest.raises(UnknownLandmark):
        resolve_landmark("Building 99", LEX)
    with pytest.raises(UnknownLandmark):
        # digits never fuzzy-match
        resolve_landmark("building 77", {"Building 7": "b7"})


def test_damerau_levenshtein():
    assert damerau_levenshtein("abc", "abc") == 0
    assert damerau_levenshtein("abc", "acb") == 1
    assert damerau_levenshtein("abc", "ab") == 1
    assert damerau_levenshtein("abc", "xbc") == 1
    assert damerau_levenshtein("abc", "xyz") == 3


def test_generate_corpus_counts():
    recs = generate_corpus(seed=7, n=1000, lexicon=LEX)
    assert len(recs) == 1000
    n_sp = sum(1 for r in recs if r.structure == "subject-predicate")
    n_typo = sum(1 for r in recs if r.has_typo)
    assert 810 <= n_sp <= 850
    assert 305 <= n_typo <= 345


def test_generate_corpus_empty():
    assert generate_corpus(seed=1, n=0, lexicon=LEX) == []


def test_generate_corpus_deterministic():
    a = generate_corpus(seed=3, n=50, lexicon=LEX)
    b = generate_corpus(seed=3, n=50, lexicon=LEX)
    assert [r.sentence for r in a] == [r.sentence for r in b]


def test_parse_recovers_typo_free_corpus_exactly():
    recs = generate_corpus(seed=11, n=400, lexicon=LEX, typo_rate=0.0)
    assert corpus_accuracy(recs, LEX) == 1.0


def test_parse_accuracy_with_typos():
    recs = generate_corpus(seed=7, n=1000, lexicon=LEX)
    assert corpus_accuracy(recs, LEX) >= 0.97
