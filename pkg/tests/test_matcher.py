"""Conjunctive matching against the inverted index, checked against the
naive scan and exercised over random word combinations.
"""

from __future__ import annotations

from types import SimpleNamespace

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from alirecover.errors import EmptyTerm, SchemaViolation
from alirecover.matcher import (
    MatchResult,
    match_roadmap,
    match_term,
    match_term_naive,
    read_matches,
    write_matches,
)
from alirecover.roadmap import (
    AliComponent,
    Provenance,
    Roadmap,
    SearchTerm,
    TermStatus,
)


def term(phrase, component=AliComponent.CRP):
    return SearchTerm.create(component, phrase)


def test_single_word_term_matches_posting_list(catalog):
    matched = match_term(term("Hypertension"), catalog)
    assert "I10" in matched
    assert len(matched) == 31


def test_multi_word_term_requires_every_word(catalog):
    # adjacency is not required, only co-occurrence of whole tokens
    assert match_term(term("Renal Failure"), catalog) == {"I13.11", "I13.2", "P96.0"}


def test_token_mode_does_not_split_compound_words(catalog):
    # descriptions say "autoimmune"; the hyphenated phrase tokenizes to two
    # words that never appear as separate tokens
    assert match_term(term("Auto-Immune"), catalog) == set()


def test_substring_mode_relaxes_token_boundaries(catalog):
    matched = match_term(term("Auto-Immune"), catalog, mode="substring")
    assert {"D59.11", "E06.3", "E31.0", "K75.4"} <= matched


def test_substring_mode_is_superset_of_token_mode(catalog, original_roadmap):
    for t in original_roadmap:
        assert match_term(t, catalog) <= match_term(t, catalog, mode="substring")


def test_unknown_mode_rejected(catalog):
    with pytest.raises(ValueError):
        match_term(term("Sepsis"), catalog, mode="regex")


def test_empty_term_guard(catalog):
    stub = SimpleNamespace(phrase="", words=())
    with pytest.raises(EmptyTerm):
        match_term(stub, catalog)
    with pytest.raises(EmptyTerm):
        match_term_naive(stub, catalog)


def test_index_agrees_with_naive_scan_on_roadmap(catalog, original_roadmap):
    for t in original_roadmap:
        assert match_term(t, catalog) == match_term_naive(t, catalog)


@pytest.fixture(scope="module")
def vocabulary(catalog):
    return sorted(catalog.index)


@settings(max_examples=200, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(data=st.data())
def test_index_agrees_with_naive_scan_on_random_terms(catalog, vocabulary, data):
    words = data.draw(st.lists(st.sampled_from(vocabulary), min_size=1, max_size=3))
    t = term(" ".join(words))
    assert match_term(t, catalog) == match_term_naive(t, catalog)


@settings(max_examples=200, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(data=st.data())
def test_adding_a_word_never_grows_the_match_set(catalog, vocabulary, data):
    words = data.draw(st.lists(st.sampled_from(vocabulary), min_size=1, max_size=3))
    extra = data.draw(st.sampled_from(vocabulary))
    base = match_term(term(" ".join(words)), catalog)
    narrowed = match_term(term(" ".join(words + [extra])), catalog)
    assert narrowed <= base


@settings(max_examples=200, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(data=st.data())
def test_conjunction_is_intersection_of_single_words(catalog, vocabulary, data):
    words = data.draw(
        st.lists(st.sampled_from(vocabulary), min_size=2, max_size=4, unique=True)
    )
    combined = match_term(term(" ".join(words)), catalog)
    singles = [match_term(term(word), catalog) for word in words]
    expected = set.intersection(*singles)
    assert combined == expected


def test_match_roadmap_counts_distinct_word_sets(catalog, original_roadmap):
    results, summary = match_roadmap(original_roadmap, catalog)
    assert len(results) == 21  # one result per record
    assert summary.terms == 20  # Hypertension counted once
    assert summary.in_sample_codes == 0  # no sample given
    assert [r.term_id for r in results] == sorted(r.term_id for r in results)


def test_match_roadmap_skips_non_retained_terms(catalog):
    roadmap = Roadmap(
        "r",
        [
            SearchTerm.create(AliComponent.CRP, "Sepsis"),
            SearchTerm.create(AliComponent.CRP, "Infection", Provenance.LLM_CONTEXT),
        ],
    )
    results, summary = match_roadmap(roadmap, catalog)
    assert len(results) == 1 and summary.terms == 1
    promoted_results, promoted_summary = match_roadmap(
        roadmap.with_proposals_retained(), catalog
    )
    assert len(promoted_results) == 2 and promoted_summary.terms == 2
    # or ask for proposed terms explicitly
    both, _ = match_roadmap(
        roadmap, catalog, statuses=(TermStatus.RETAINED, TermStatus.PROPOSED)
    )
    assert len(both) == 2


def test_match_roadmap_sample_restriction(catalog, original_roadmap):
    sample = {"I10", "E11.9"}
    results, summary = match_roadmap(original_roadmap, catalog, sample_codes=sample)
    by_id = {r.term_id: r for r in results}
    assert by_id["systolicbp:hypertension"].in_sample_codes == frozenset({"I10"})
    assert by_id["hba1c:diabetes"].in_sample_codes == frozenset({"E11.9"})
    assert summary.in_sample_codes == 2


def test_write_read_round_trip(tmp_path, catalog, original_roadmap):
    results, _ = match_roadmap(
        original_roadmap, catalog, sample_codes={"I10", "E11.9"}
    )
    path = write_matches(results, original_roadmap, tmp_path / "matches.csv")
    assert read_matches(path) == results


def test_zero_match_terms_survive_round_trip(tmp_path, catalog, original_roadmap):
    results, _ = match_roadmap(original_roadmap, catalog)
    empty_ids = {r.term_id for r in results if not r.matched_codes}
    assert empty_ids  # the bundled roadmap has phrases with no demo hits
    path = write_matches(results, original_roadmap, tmp_path / "matches.csv")
    back = {r.term_id: r for r in read_matches(path)}
    for term_id in empty_ids:
        assert back[term_id].matched_codes == frozenset()


def test_read_matches_rejects_wrong_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("term,code\nx,y\n")
    with pytest.raises(SchemaViolation):
        read_matches(path)


def test_match_result_is_hashable_value_object():
    a = MatchResult("t", frozenset({"I10"}), frozenset())
    b = MatchResult("t", frozenset({"I10"}), frozenset())
    assert a == b and hash(a) == hash(b)
