"""Catalog loading, code normalization, and the inverted token index."""

from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from alirecover.errors import DuplicateCode, EmptyCode, MalformedRow, MissingFile
from alirecover.icd_catalog import (
    Catalog,
    IcdEntry,
    code_key,
    load_catalog,
    normalize_code,
    tokenize,
)

code_like = st.from_regex(r"[A-Za-z][0-9]{2}[0-9A-Za-z]{0,4}", fullmatch=True)


def test_normalize_inserts_dot_after_third_char():
    assert normalize_code("e119") == "E11.9"
    assert normalize_code("o365190") == "O36.5190"


def test_normalize_preserves_existing_dot():
    assert normalize_code("E11.9") == "E11.9"
    assert normalize_code("e11.9") == "E11.9"


def test_normalize_leaves_three_char_codes_alone():
    assert normalize_code("I10") == "I10"
    assert normalize_code("i10") == "I10"


def test_normalize_rejects_empty():
    with pytest.raises(EmptyCode):
        normalize_code("   ")


@given(code_like)
def test_normalize_idempotent(raw):
    once = normalize_code(raw)
    assert normalize_code(once) == once


@given(code_like)
def test_code_key_strips_dots(raw):
    assert "." not in code_key(raw)
    assert code_key(normalize_code(raw)) == code_key(raw)


def test_tokenize_splits_on_any_non_alphanumeric():
    assert tokenize("Auto-Immune") == ["auto", "immune"]
    assert tokenize("Type 2 diabetes mellitus") == ["type", "2", "diabetes", "mellitus"]
    assert tokenize("  (unspecified)  ") == ["unspecified"]
    assert tokenize("") == []


def test_demo_catalog_loads(catalog):
    assert len(catalog) > 500
    assert "E11.9" in catalog
    assert "e119" in catalog  # dot and case variants hit the same entry
    entry = catalog.get("E119")
    assert entry is not None
    assert entry.code == "E11.9"
    assert catalog.get("Z99.99") is None


def test_catalog_codes_are_dotted(catalog):
    for entry in catalog.entries:
        if len(entry.code.replace(".", "")) > 3:
            assert entry.code[3] == "."


def test_inverted_index_round_trip(catalog):
    # every token of every entry points back at it, and vice versa
    for position, entry in enumerate(catalog.entries):
        for token in entry.tokens:
            assert position in catalog.positions_for_token(token)
    for token, positions in catalog.index.items():
        for position in positions:
            assert token in catalog.entries[position].tokens
    assert catalog.vocabulary_size() == len(catalog.index)


def test_duplicate_code_rejected_across_dot_variants(tmp_path):
    path = tmp_path / "dup.tsv"
    path.write_text("E119\tfirst\nE11.9\tsecond\n")
    with pytest.raises(DuplicateCode):
        load_catalog(path)


def test_malformed_row_reports_line_number(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("I10\tEssential hypertension\nE119\n")
    with pytest.raises(MalformedRow) as exc:
        load_catalog(path)
    assert exc.value.line == 2


def test_empty_description_rejected(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("I10\t   \n")
    with pytest.raises(MalformedRow):
        load_catalog(path)


def test_empty_code_rejected(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("\tEssential hypertension\n")
    with pytest.raises(MalformedRow):
        load_catalog(path)


def test_blank_lines_skipped(tmp_path):
    path = tmp_path / "ok.tsv"
    path.write_text("I10\tEssential hypertension\n\n  \nE119\tType 2 diabetes\n")
    assert len(load_catalog(path)) == 2


def test_missing_file():
    with pytest.raises(MissingFile):
        load_catalog("/nonexistent/catalog.tsv")


def test_format_override_beats_extension(tmp_path):
    path = tmp_path / "catalog.weird"
    path.write_text("I10,Essential hypertension\n")
    catalog = load_catalog(path, format="csv")
    assert len(catalog) == 1
    with pytest.raises(ValueError):
        load_catalog(path, format="pipe")


def test_csv_extension_uses_comma(tmp_path):
    path = tmp_path / "catalog.csv"
    path.write_text("I10,Essential hypertension\n")
    assert load_catalog(path).get("I10").description == "Essential hypertension"


def test_entry_create_normalizes():
    entry = IcdEntry.create("e6601", "Morbid (severe) obesity due to excess calories")
    assert entry.code == "E66.01"
    assert "severe" in entry.tokens
    assert "obesity" in entry.tokens


def test_catalog_rejects_duplicate_entries_directly():
    entries = [IcdEntry.create("I10", "one"), IcdEntry.create("I10", "two")]
    with pytest.raises(DuplicateCode):
        Catalog(entries)
