import numpy as np
import pytest

from textcausal.tabular import (
    Column,
    ColumnKind,
    DesignRecipe,
    ParseError,
    SchemaError,
    Table,
    build_design_matrix,
    load_csv,
)
from textcausal.vectorizer import VectorizerConfig, fit_vocabulary


def write_csv(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_load_csv_type_inference(tmp_path):
    p = write_csv(
        tmp_path / "d.csv",
        "num,flag,cat,text\n"
        "1.5,0,red,the quick brown fox jumps over the lazy dog one\n"
        "2.5,1,blue,pack my box with five dozen liquor jugs today now\n"
        "3.5,1,red,how vexingly quick daft zebras jump over fences ok\n",
    )
    t = load_csv(p)
    assert t.column("num").kind is ColumnKind.NUMERIC
    assert t.column("flag").kind is ColumnKind.BINARY
    assert t.column("cat").kind is ColumnKind.CATEGORICAL
    assert t.column("text").kind is ColumnKind.TEXT
    assert t.column("flag").values == [0, 1, 1]
    assert t.numeric("num").tolist() == [1.5, 2.5, 3.5]


def test_load_csv_ragged_row_names_line(tmp_path):
    p = write_csv(tmp_path / "d.csv", "a,b\n1,2\n3\n")
    with pytest.raises(ParseError, match=":3"):
        load_csv(p)


def test_load_csv_duplicate_header(tmp_path):
    p = write_csv(tmp_path / "d.csv", "a,a\n1,2\n")
    with pytest.raises(SchemaError):
        load_csv(p)


def test_load_csv_empty_file(tmp_path):
    p = write_csv(tmp_path / "d.csv", "")
    with pytest.raises(ParseError):
        load_csv(p)


def test_load_csv_type_hints_override(tmp_path):
    p = write_csv(tmp_path / "d.csv", "a,b\n0,x\n1,y\n")
    t = load_csv(p, type_hints={"a": ColumnKind.NUMERIC})
    assert t.column("a").kind is ColumnKind.NUMERIC
    with pytest.raises(ParseError):
        load_csv(p, type_hints={"b": ColumnKind.NUMERIC})
    with pytest.raises(SchemaError):
        load_csv(p, type_hints={"zzz": ColumnKind.NUMERIC})


def test_load_csv_missing_tokens_become_none(tmp_path):
    p = write_csv(tmp_path / "d.csv", "a\n1\n\nNA\n2\n")
    t = load_csv(p, type_hints={"a": ColumnKind.NUMERIC})
    assert t.column("a").values == [1.0, None, None, 2.0]
    vals = t.numeric("a")
    assert np.isnan(vals[1]) and np.isnan(vals[2])


def test_table_invariants():
    with pytest.raises(SchemaError):
        Table([Column("a", ColumnKind.NUMERIC, [1]), Column("a", ColumnKind.NUMERIC, [2])])
    with pytest.raises(SchemaError):
        Table([Column("a", ColumnKind.NUMERIC, [1]), Column("b", ColumnKind.NUMERIC, [1, 2])])
    with pytest.raises(SchemaError):
        Table([Column("a", ColumnKind.BINARY, [0, 2])])


def test_with_column_appends_without_mutating():
    t = Table([Column("a", ColumnKind.NUMERIC, [1.0, 2.0])])
    t2 = t.with_column("b", ColumnKind.BINARY, [0, 1])
    assert t.column_names() == ["a"]
    assert t2.column_names() == ["a", "b"]
    with pytest.raises(SchemaError):
        t2.with_column("b", ColumnKind.BINARY, [1, 1])


def test_to_csv_round_trip(tmp_path):
    t = Table(
        [
            Column("x", ColumnKind.NUMERIC, [1.0, 2.5]),
            Column("b", ColumnKind.BINARY, [0, 1]),
            Column("s", ColumnKind.TEXT, ["hello there", "and, a comma"]),
        ]
    )
    p = str(tmp_path / "out.csv")
    t.to_csv(p)
    t2 = load_csv(p, type_hints={"s": ColumnKind.TEXT})
    assert t2.column("x").values == [1.0, 2.5]
    assert t2.column("b").values == [0, 1]
    assert t2.column("s").values == ["hello there", "and, a comma"]


def test_recipe_numeric_imputation_and_indicator():
    t = Table([Column("x", ColumnKind.NUMERIC, [1.0, None, 3.0])])
    r = DesignRecipe(["x"]).fit(t)
    fm = r.transform(t)
    assert fm.feature_names == ["x", "x__isna"]
    np.testing.assert_allclose(fm.dense[:, 0], [1.0, 2.0, 3.0])
    np.testing.assert_allclose(fm.dense[:, 1], [0.0, 1.0, 0.0])


def test_recipe_no_indicator_when_fully_observed():
    t = Table([Column("x", ColumnKind.NUMERIC, [1.0, 3.0])])
    fm = DesignRecipe(["x"]).fit(t).transform(t)
    assert fm.feature_names == ["x"]


def test_recipe_one_hot_and_unseen_level():
    t = Table([Column("c", ColumnKind.CATEGORICAL, ["red", "blue", None])])
    r = DesignRecipe(["c"]).fit(t)
    fm = r.transform(t)
    assert fm.feature_names == ["c=red", "c=blue", "c=__missing__"]
    np.testing.assert_allclose(fm.dense, np.eye(3))
    t2 = Table([Column("c", ColumnKind.CATEGORICAL, ["green"])])
    fm2 = r.transform(t2)
    np.testing.assert_allclose(fm2.dense, [[0.0, 0.0, 0.0]])


def test_recipe_rejects_text_covariate():
    t = Table([Column("s", ColumnKind.TEXT, ["a", "b"])])
    with pytest.raises(SchemaError):
        DesignRecipe(["s"]).fit(t)


def test_recipe_text_block():
    t = Table(
        [
            Column("x", ColumnKind.NUMERIC, [0.0, 1.0]),
            Column("s", ColumnKind.TEXT, ["apple apple", "banana"]),
        ]
    )
    vocab = fit_vocabulary(["apple apple", "banana"], VectorizerConfig(min_df=1))
    fm = build_design_matrix(t, ["x"], text_col="s", vectorizer=vocab)
    assert fm.n_features == 1 + len(vocab)
    assert fm.feature_names[1:] == vocab.feature_names()
    arr = fm.toarray()
    assert arr.shape == (2, 3)
    assert fm.tocsr().toarray() == pytest.approx(arr)


def test_with_extra_dense_appends_named_column():
    t = Table([Column("x", ColumnKind.NUMERIC, [1.0, 2.0])])
    fm = DesignRecipe(["x"]).fit(t).transform(t)
    fm2 = fm.with_extra_dense(np.array([1.0, 0.0]), "treat")
    assert fm2.feature_names == ["x", "treat"]
    np.testing.assert_allclose(fm2.dense[:, 1], [1.0, 0.0])


def test_build_design_matrix_ignores_cols():
    t = Table(
        [
            Column("x", ColumnKind.NUMERIC, [1.0, 2.0]),
            Column("y", ColumnKind.NUMERIC, [3.0, 4.0]),
        ]
    )
    fm = build_design_matrix(t, ["x", "y"], ignore_cols=["y"])
    assert fm.feature_names == ["x"]
