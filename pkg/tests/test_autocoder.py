import pytest

from textcausal.autocoder import (
    Lexicon,
    Scorer,
    ScoringError,
    binarize,
    code_callable,
    code_custom_topics,
    code_emotion,
    code_sentiment,
)
from textcausal.tabular import Column, ColumnKind, SchemaError, Table


def table_of(n):
    return Table([Column("id", ColumnKind.NUMERIC, list(map(float, range(n))))])


def test_sentiment_no_hits_is_half_half():
    t = code_sentiment(["the box arrived on a day"], table_of(1))
    assert t.column("positive").values[0] == pytest.approx(0.5)
    assert t.column("negative").values[0] == pytest.approx(0.5)


def test_sentiment_two_positive_unit_weights():
    lex = Lexicon({"positive": {"great": 1.0, "wonderful": 1.0}, "negative": {"bad": 1.0}})
    t = code_sentiment(["great wonderful"], table_of(1), lexicon=lex)
    assert t.column("positive").values[0] == pytest.approx(0.75)
    assert t.column("negative").values[0] == pytest.approx(0.25)


def test_sentiment_column_names_and_sum():
    texts = ["great stuff", "bad junk", "nothing to say"]
    t = code_sentiment(texts, table_of(3))
    assert t.column_names()[-2:] == ["positive", "negative"]
    for p, n in zip(t.column("positive").values, t.column("negative").values):
        assert p + n == pytest.approx(1.0, abs=1e-12)
        assert 0.0 <= p <= 1.0


def test_sentiment_collision_and_prefix():
    t = code_sentiment(["good"], table_of(1))
    with pytest.raises(SchemaError):
        code_sentiment(["good"], t)
    t2 = code_sentiment(["good"], t, prefix="re_")
    assert t2.has_column("re_positive")


def test_emotion_uniform_fallback_and_names():
    t = code_emotion(["neutral words only here"], table_of(1))
    for name in ("joy", "anger", "fear", "sadness"):
        assert t.column(name).values[0] == pytest.approx(0.25)
    assert t.column_names()[-4:] == ["joy", "anger", "fear", "sadness"]


def test_emotion_joy_dominates_on_joy_terms():
    lex = Lexicon(
        {
            "joy": {"happy": 1.0, "glad": 1.0},
            "anger": {"mad": 1.0},
            "fear": {"scared": 1.0},
            "sadness": {"sad": 1.0},
        }
    )
    t = code_emotion(["happy glad happy"], table_of(1), lexicon=lex)
    joy = t.column("joy").values[0]
    for other in ("anger", "fear", "sadness"):
        assert joy > t.column(other).values[0]
    total = sum(t.column(n).values[0] for n in ("joy", "anger", "fear", "sadness"))
    assert total == pytest.approx(1.0, abs=1e-12)


def test_topics_ordering_and_floor():
    kw = {"politics": {"vote", "senate"}, "tv": {"episode", "season"}}
    t = code_custom_topics(
        ["can t wait to vote", "plain words"], table_of(2), ["politics", "tv"], kw
    )
    row0_pol = t.column("politics").values[0]
    row0_tv = t.column("tv").values[0]
    assert row0_pol > row0_tv
    assert row0_tv < 0.2  # near zero, smoothing floor only
    # no hits anywhere: both labels at the floor 1/(2+n)
    n = 2
    assert t.column("politics").values[1] == pytest.approx(1.0 / (2 + n))
    assert t.column("tv").values[1] == pytest.approx(1.0 / (2 + n))


def test_topics_all_label_terms_hits_maximum():
    kw = {"cook": {"bake", "fry"}}
    t = code_custom_topics(["bake fry bake"], table_of(1), ["cook"], kw)
    # every token hits: (1 + 3) / (2 + 3)
    assert t.column("cook").values[0] == pytest.approx(4.0 / 5.0)


def test_topics_validation():
    with pytest.raises(ValueError):
        code_custom_topics(["x"], table_of(1), [], {})
    with pytest.raises(ValueError):
        code_custom_topics(["x"], table_of(1), ["a"], {})
    with pytest.raises(ValueError):
        code_custom_topics(["x"], table_of(1), ["a"], {"a": set()})


class LengthScorer(Scorer):
    output_columns = ["length_score"]

    def score(self, text):
        return {"length_score": min(len(text) / 1000.0, 1.0)}


class EmptyScorer(Scorer):
    output_columns = ["nothing"]

    def score(self, text):
        return {}


class WordLenScorer(Scorer):
    output_columns = ["readability"]

    def score(self, text):
        words = text.split()
        if not words:
            return {"readability": 0.0}
        return {"readability": sum(len(w) for w in words) / len(words) / 10.0}


def test_code_callable_length_scorer():
    t = code_callable(["x" * 100], table_of(1), LengthScorer())
    assert t.column("length_score").values[0] == pytest.approx(0.1)


def test_code_callable_empty_dict_gives_zero():
    t = code_callable(["a", "b"], table_of(2), EmptyScorer())
    assert t.column("nothing").values == [0.0, 0.0]


def test_code_callable_readability_proxy():
    t = code_callable(["a bb ccc"], table_of(1), WordLenScorer())
    assert t.column("readability").values[0] == pytest.approx(0.2)


def test_code_callable_out_of_range_names_row():
    class Bad(Scorer):
        output_columns = ["s"]

        def score(self, text):
            return {"s": 2.0 if text == "boom" else 0.5}

    with pytest.raises(ScoringError, match="row 1"):
        code_callable(["fine", "boom"], table_of(2), Bad())


def test_code_callable_undeclared_column_rejected():
    class Sneaky(Scorer):
        output_columns = ["a"]

        def score(self, text):
            return {"a": 0.5, "b": 0.5}

    with pytest.raises(ScoringError):
        code_callable(["x"], table_of(1), Sneaky())


def test_length_mismatch_rejected():
    with pytest.raises(ValueError):
        code_sentiment(["one", "two"], table_of(1))


def test_binarize_strict_threshold():
    t = table_of(3)
    t = t.with_column("score", ColumnKind.NUMERIC, [0.7, 0.5, 0.2])
    t = binarize(t, "score", 0.5)
    col = t.column("score_bin")
    assert col.kind is ColumnKind.BINARY
    assert col.values == [1, 0, 0]


def test_binarize_zero_threshold_on_positive_scores():
    t = table_of(2).with_column("score", ColumnKind.NUMERIC, [0.01, 1.0])
    assert binarize(t, "score", 0.0).column("score_bin").values == [1, 1]


def test_binarize_requires_numeric():
    t = table_of(1).with_column("s", ColumnKind.TEXT, ["x"])
    with pytest.raises(SchemaError):
        binarize(t, "s", 0.5)


def test_lexicon_parsing_and_validation(tmp_path):
    p = tmp_path / "custom.lex"
    p.write_text("# comment\n[up]\ngood\t2.0\nfine\n[down]\nbad\t1.5\n", encoding="utf-8")
    lex = Lexicon.load(str(p))
    assert lex.weights == {"up": {"good": 2.0, "fine": 1.0}, "down": {"bad": 1.5}}
    with pytest.raises(ValueError):
        Lexicon({"x": {"Upper": 1.0}})
    with pytest.raises(ValueError):
        Lexicon({"x": {"term": 0.0}})
    p2 = tmp_path / "broken.lex"
    p2.write_text("orphan\t1.0\n", encoding="utf-8")
    with pytest.raises(ValueError):
        Lexicon.load(str(p2))


def test_builtin_lexicons_load():
    sent = Lexicon.builtin("sentiment")
    assert set(sent.labels) == {"positive", "negative"}
    emo = Lexicon.builtin("emotion")
    assert set(emo.labels) == {"joy", "anger", "fear", "sadness"}


def test_coders_do_not_touch_existing_columns():
    base = table_of(2)
    t = code_sentiment(["good", "bad"], base)
    assert t.column("id").values == base.column("id").values
    assert t.column_names()[0] == "id"
