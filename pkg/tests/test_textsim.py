from __future__ import annotations

import random

from secforge.textsim import fuzzy_ratio, levenshtein

from reference import fuzzy_ratio_reference, levenshtein_matrix


def test_identical_strings():
    assert fuzzy_ratio("abc", "abc") == 100
    assert levenshtein("abc", "abc") == 0


def test_worked_example_abc_abd():
    # lev = 1, max len 3 -> round(100 * 2/3) = 67 (frozen from the DP oracle)
    assert levenshtein_matrix("abc", "abd") == 1
    assert fuzzy_ratio("abc", "abd") == 67


def test_empty_cases():
    assert fuzzy_ratio("", "xyz") == 0
    assert fuzzy_ratio("", "") == 100
    assert levenshtein("", "xyz") == 3


def test_symmetry():
    rng = random.Random(11)
    for _ in range(50):
        a = "".join(rng.choice("abcd \n") for _ in range(rng.randrange(0, 30)))
        b = "".join(rng.choice("abcd \n") for _ in range(rng.randrange(0, 30)))
        assert levenshtein(a, b) == levenshtein(b, a)
        assert fuzzy_ratio(a, b) == fuzzy_ratio(b, a)


def test_matches_dp_oracle_on_random_pairs():
    rng = random.Random(7)
    alphabet = "abcdefgh()x =\n"
    for _ in range(200):
        a = "".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 60)))
        b = "".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 60)))
        assert levenshtein(a, b) == levenshtein_matrix(a, b)
        assert fuzzy_ratio(a, b) == fuzzy_ratio_reference(a, b)
