from __future__ import annotations

import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tmlpredict.corpus import (
    CorpusError,
    MappingError,
    MetricRecord,
    ModelFamilyMapping,
    ViewRole,
    canonicalize_task,
    load_corpus,
    load_mapping,
    reduce_corpus,
    save_mapping,
    serialize_mapping,
)

from .conftest import FIXTURES


def small_mapping(task="machine_translation", entries=None):
    entries = entries or {
        "eng": {"FamA": (MetricRecord("bleu", 30.0, "P1"),)},
        "deu": {"FamA": (MetricRecord("bleu", 28.0, "P2"),),
                "FamB": (MetricRecord("bleu", 25.0, "P2"),)},
    }
    return ModelFamilyMapping(task=task, entries=entries)


class TestLoadMapping:
    def test_fixture_round_trip(self, tmp_path):
        mapping = load_mapping(FIXTURES / "mappings" / "machine_translation.json")
        out = tmp_path / "copy.json"
        save_mapping(mapping, out)
        assert load_mapping(out) == mapping

    def test_two_by_two_fixture(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text(json.dumps({
            "task": "machine_translation",
            "entries": {
                "aaa": {"F1": [{"metric": "bleu", "value": 1.0, "paper_id": "P"}],
                        "F2": [{"metric": "bleu", "value": 2.0, "paper_id": "P"}]},
                "bbb": {"F1": [{"metric": "bleu", "value": 3.0, "paper_id": "P"}],
                        "F2": [{"metric": "bleu", "value": 4.0, "paper_id": "P"}]},
            },
        }), encoding="utf-8")
        mapping = load_mapping(path)
        assert mapping.record_count() == 4
        assert mapping.languages() == ["aaa", "bbb"]
        assert mapping.families() == ["F1", "F2"]

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.json"
        path.write_text('{"task": "machine_translation", "entries": {}}', encoding="utf-8")
        with pytest.raises(MappingError, match="empty mapping"):
            load_mapping(path)

    def test_unparseable_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{nope", encoding="utf-8")
        with pytest.raises(MappingError, match="parse"):
            load_mapping(path)

    def test_duplicate_record_kept_once(self, tmp_path):
        path = tmp_path / "dup.json"
        record = {"metric": "bleu", "value": 9.0, "paper_id": "P1"}
        path.write_text(json.dumps({
            "task": "machine_translation",
            "entries": {"aaa": {"F1": [record, dict(record)]}},
        }), encoding="utf-8")
        mapping = load_mapping(path)
        assert mapping.record_count() == 1

    def test_programming_language_rejected_for_codegen(self, tmp_path):
        path = tmp_path / "pl.json"
        path.write_text(json.dumps({
            "task": "code_generation",
            "entries": {"python": {"F1": [{"metric": "pass@1", "value": 1.0,
                                           "paper_id": "P"}]}},
        }), encoding="utf-8")
        with pytest.raises(MappingError, match="programming language"):
            load_mapping(path)

    def test_programming_language_fine_elsewhere(self, tmp_path):
        path = tmp_path / "pl2.json"
        path.write_text(json.dumps({
            "task": "machine_translation",
            "entries": {"python": {"F1": [{"metric": "bleu", "value": 1.0,
                                           "paper_id": "P"}]}},
        }), encoding="utf-8")
        assert load_mapping(path).languages() == ["python"]

    def test_serialize_is_stable(self):
        mapping = small_mapping()
        assert serialize_mapping(mapping) == serialize_mapping(mapping)


class TestMetricRecord:
    def test_invariants(self):
        with pytest.raises(MappingError):
            MetricRecord("", 1.0, "P")
        with pytest.raises(MappingError):
            MetricRecord("bleu", float("nan"), "P")
        with pytest.raises(MappingError):
            MetricRecord("bleu", 1.0, "")


class TestReduceCorpus:
    def test_empty_removal_is_identity(self):
        mapping = small_mapping()
        corpus = reduce_corpus({mapping.task: mapping}, set(), require_instantiable=False)
        assert corpus.reduced[mapping.task] == mapping

    def test_removing_only_paper_drops_language(self):
        mapping = small_mapping()
        corpus = reduce_corpus({mapping.task: mapping}, {"P1"}, require_instantiable=False)
        reduced = corpus.reduced[mapping.task]
        assert "eng" not in reduced.entries
        assert "deu" in reduced.entries

    def test_hand_tally_on_fixture(self, corpus):
        # machine_translation fixture: 17 combined records (3 eng + 3 deu +
        # 2 each for fra/nld/spa/jpn/npi + 1 swa); 6 survive P4/P5 removal
        combined = corpus.combined["machine_translation"]
        reduced = corpus.reduced["machine_translation"]
        assert combined.record_count() == 17
        assert reduced.record_count() == 6
        assert reduced.languages() == ["deu", "eng", "fra"]

    def test_unknown_paper_rejected(self):
        mapping = small_mapping()
        with pytest.raises(CorpusError, match="unknown paper_id"):
            reduce_corpus({mapping.task: mapping}, {"P9"}, require_instantiable=False)

    def test_uninstantiable_scenario_rejected(self):
        mapping = small_mapping()
        # removing P2 leaves only (eng, FamA): no S2/S5 material
        with pytest.raises(CorpusError, match="not instantiable"):
            reduce_corpus({mapping.task: mapping}, {"P2"})

    def test_full_check_needs_close_oracle(self, split):
        corpus = load_corpus(FIXTURES / "manifest.json", is_close=split.is_close_or_none)
        assert corpus.removed_papers == {"P4", "P5"}


class TestLookup:
    def test_reduced_hides_removed_combination(self, corpus):
        reduced = corpus.view(ViewRole.REDUCED_ONLY)
        combined = corpus.view(ViewRole.COMBINED)
        # (spa, GammaMT) exists only in removed paper P4
        assert reduced.lookup("machine_translation", "spa", "GammaMT") == []
        assert combined.lookup("machine_translation", "spa", "GammaMT") != []

    def test_unknown_language_is_empty_not_error(self, reduced_view):
        assert reduced_view.lookup("machine_translation", "zzz", "GammaMT") == []

    def test_unknown_task_is_empty(self, reduced_view):
        assert reduced_view.lookup("no_such_task", "eng", "GammaMT") == []

    def test_case_insensitive_matching(self, combined_view):
        a = combined_view.lookup("machine_translation", "ENG", "gammamt")
        b = combined_view.lookup("machine_translation", "eng", "GammaMT")
        assert a == b and a

    def test_display_task_name_canonicalized(self, combined_view):
        assert canonicalize_task("Machine Translation") == "machine_translation"
        assert combined_view.lookup("Machine Translation", "eng", "GammaMT")

    def test_monotonicity_reduced_subset_of_combined(self, corpus):
        reduced = corpus.view(ViewRole.REDUCED_ONLY)
        combined = corpus.view(ViewRole.COMBINED)
        for task in corpus.tasks():
            for lang in combined.languages(task):
                for fam in combined.families_for_language(task, lang):
                    r = reduced.lookup(task, lang, fam)
                    c = combined.lookup(task, lang, fam)
                    assert set(r) <= set(c)


@st.composite
def mapping_and_removal(draw):
    languages = draw(st.lists(
        st.sampled_from(["aaa", "bbb", "ccc", "ddd"]), min_size=1, max_size=4,
        unique=True,
    ))
    papers = ["P1", "P2", "P3", "P4"]
    entries = {}
    for lang in languages:
        fams = {}
        for fam in draw(st.lists(st.sampled_from(["F1", "F2", "F3"]),
                                 min_size=1, max_size=3, unique=True)):
            records = tuple(
                MetricRecord("bleu", float(draw(st.integers(1, 90))), p)
                for p in draw(st.lists(st.sampled_from(papers), min_size=1,
                                       max_size=3, unique=True))
            )
            fams[fam] = records
        entries[lang] = fams
    mapping = ModelFamilyMapping(task="machine_translation", entries=entries)
    removed = draw(st.sets(st.sampled_from(papers)))
    return mapping, removed & mapping.paper_ids()


class TestGuardSoundness:
    @given(mapping_and_removal())
    @settings(max_examples=150, deadline=None)
    def test_reduced_view_never_returns_removed_papers(self, case):
        mapping, removed = case
        corpus = reduce_corpus(
            {mapping.task: mapping}, removed, require_instantiable=False
        )
        reduced = corpus.view(ViewRole.REDUCED_ONLY)
        for lang in mapping.languages():
            for fam in mapping.entries[lang]:
                for record in reduced.lookup(mapping.task, lang, fam):
                    assert record.paper_id not in removed
