import math

import tidepy


def test_discrepancies():
    assert tidepy.d_aes(4, 2) == 2
    assert tidepy.d_acd(["Claim", "Fact"], [(1, "Claim"), (2, "Claim")]) == 1
    assert tidepy.d_acd(["Claim", "Fact"], [(1, "Claim")]) == 1  # missing unit
    assert tidepy.d_ari([(1, 2, {"Positive"})], []) == 5
    assert tidepy.d_ari([(1, 2, {"Positive"})], [(1, 3, {"Positive"})]) == 10
    assert tidepy.d_ari([(1, 2, {"Positive"})], [], penalty=1) == 3


def test_metrics():
    assert math.isclose(tidepy.qwk([1, 2, 3, 4, 5], [1, 2, 3, 4, 5], 5), 1.0)
    assert math.isclose(tidepy.qwk([1, 5], [5, 1], 5), -1.0)
    assert math.isclose(tidepy.pearson([1, 2, 3], [1, 2, 4]), 0.9819805060619659)
    micro, macro = tidepy.classification_f1(["A", "A", "B"], ["A", "B", "B"])
    assert math.isclose(micro, 2 / 3)
    assert math.isclose(macro, 2 / 3)
    out = tidepy.ari_f1([[(1, 2, {"Positive", "Example"})]], [[(1, 2, {"Positive"})]])
    assert math.isclose(out["micro"], 2 / 3)
    assert math.isclose(out["pair_f1"], 1.0)


def test_parsing():
    assert tidepy.strip_reasoning("<think>x</think>{\"a\":1}") == '{"a":1}'
    parsed = tidepy.parse_score('<think>hm</think>{"score": 4, "rationale": "r"}')
    assert parsed["score"] == 4
    assert tidepy.parse_verdict('{"winner":"Expert B","reason":"x"}')["winner"] == "Expert B"
    unit = tidepy.parse_unit_lines("#1:\nClaim\nwhy\n", tidepy.TaskKind.ACD, 2)
    assert unit["units"][0]["label"] == "Claim"
    assert unit["missing_units"] == [2]
    rel = tidepy.parse_unit_lines("#2 -> #5: Positive, Example\nbecause\n",
                                  tidepy.TaskKind.ARI, 0)
    assert rel["relations"][0]["types"] == {"Example", "Positive"}


def test_render_template():
    text = tidepy.render_template(
        "aes_predict",
        {"essay_text": "E", "current_criteria": "C", "score_min": "1", "score_max": "5"},
    )
    assert "E" in text and "C" in text and "{essay_text}" not in text


def test_split_determinism():
    a = tidepy.split_indices(10, seed=42, train_fraction=0.6)
    b = tidepy.split_indices(10, seed=42, train_fraction=0.6)
    assert a == b
    train, evals = a
    assert len(train) == 6 and len(evals) == 4
    assert sorted(train + evals) == list(range(10))
