"""Dataset loading: formats, field maps, gold parsing, manifests."""

import json
import logging
from decimal import Decimal

import pytest

from dup.datasets import (
    DATASET_SPECS,
    FieldMap,
    Problem,
    canonical_dataset_id,
    load_dataset,
    load_from_manifest,
    load_manifest,
    parse_gold_answer,
)
from dup.exceptions import DatasetFormatError, InvalidInputError
from dup.grading import NormalizedAnswer
from dup.prompts import AnswerType

from conftest import DATA_DIR, SYNTH_DATASET, SYNTH_IDS


class TestSyntheticFixture:
    def test_loads_ten_problems_in_file_order(self, synthetic_problems):
        assert [p.id for p in synthetic_problems] == SYNTH_IDS
        assert all(p.answer_type is AnswerType.NUMBER for p in synthetic_problems)
        assert synthetic_problems[0].gold.number == Decimal(18)
        assert synthetic_problems[-1].gold.number == Decimal(32)

    def test_gold_delimiter_respected(self, synthetic_problems):
        # The gold field holds reasoning plus "#### n"; only n is the answer.
        assert "####" in synthetic_problems[0].gold_raw
        assert synthetic_problems[0].gold == NormalizedAnswer.of_number(18)


class TestGoldParsing:
    def test_number_with_delimiter(self):
        assert parse_gold_answer("Some steps.\n#### 18", AnswerType.NUMBER).number == 18
        assert parse_gold_answer("#### 1,234", AnswerType.NUMBER).number == 1234
        assert parse_gold_answer("#### -3.5", AnswerType.NUMBER).number == Decimal("-3.5")

    def test_number_without_delimiter(self):
        assert parse_gold_answer("42", AnswerType.NUMBER).number == 42
        assert parse_gold_answer("5.0", AnswerType.NUMBER).number == Decimal("5")

    def test_number_fraction(self):
        assert parse_gold_answer("1/4", AnswerType.NUMBER).number == Decimal("0.25")

    def test_option_forms(self):
        assert parse_gold_answer("B", AnswerType.OPTION).option == "B"
        assert parse_gold_answer("(c)", AnswerType.OPTION).option == "C"

    def test_yes_no_forms(self):
        assert parse_gold_answer("yes", AnswerType.YES_NO).yes_no == "yes"
        assert parse_gold_answer("False", AnswerType.YES_NO).yes_no == "no"
        assert parse_gold_answer("true", AnswerType.YES_NO).yes_no == "yes"

    def test_string_lowercased(self):
        assert parse_gold_answer("NK", AnswerType.STRING).string == "nk"

    def test_unparseable_gold_is_an_error(self):
        with pytest.raises(DatasetFormatError):
            parse_gold_answer("no digits", AnswerType.NUMBER)
        with pytest.raises(DatasetFormatError):
            parse_gold_answer("maybe", AnswerType.YES_NO)


class TestFormats:
    def test_json_array(self, tmp_path):
        path = tmp_path / "data.json"
        path.write_text(json.dumps([{"question": "Q1?", "answer": "1"}]), encoding="utf-8")
        problems = load_dataset(path, "custom", answer_type=AnswerType.NUMBER)
        assert len(problems) == 1
        assert problems[0].question == "Q1?"

    def test_wrapper_object(self, tmp_path):
        path = tmp_path / "data.json"
        path.write_text(
            json.dumps({"examples": [{"question": "Q1?", "answer": "2"}]}), encoding="utf-8"
        )
        problems = load_dataset(path, "custom", answer_type=AnswerType.NUMBER)
        assert problems[0].gold.number == 2

    def test_empty_file_is_empty_dataset(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("", encoding="utf-8")
        assert load_dataset(path, "custom", answer_type=AnswerType.NUMBER) == []

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "data.jsonl"
        path.write_text('{"question": "Q?", "answer": "1"}\n\n\n', encoding="utf-8")
        assert len(load_dataset(path, "custom", answer_type=AnswerType.NUMBER)) == 1

    def test_malformed_line_reports_position(self, tmp_path):
        path = tmp_path / "data.jsonl"
        path.write_text('{"question": "Q?", "answer": "1"}\n{broken\n', encoding="utf-8")
        with pytest.raises(DatasetFormatError) as excinfo:
            load_dataset(path, "custom", answer_type=AnswerType.NUMBER)
        assert ":2:" in str(excinfo.value)

    def test_missing_field_reports_record(self, tmp_path):
        path = tmp_path / "data.jsonl"
        path.write_text('{"question": "Q?"}\n', encoding="utf-8")
        with pytest.raises(DatasetFormatError) as excinfo:
            load_dataset(path, "custom", answer_type=AnswerType.NUMBER)
        assert "answer" in str(excinfo.value)


class TestKnownDatasets:
    def test_unknown_dataset_needs_answer_type(self, tmp_path):
        path = tmp_path / "data.jsonl"
        path.write_text('{"question": "Q?", "answer": "1"}\n', encoding="utf-8")
        with pytest.raises(DatasetFormatError):
            load_dataset(path, "mystery")

    def test_canonical_ids(self):
        assert canonical_dataset_id("GSM8K") == "gsm8k"
        assert canonical_dataset_id("Last Letters") == "last_letters"
        assert canonical_dataset_id("coin-flip") == "coin_flip"

    def test_every_known_dataset_has_a_spec(self):
        assert set(DATASET_SPECS) == {
            "gsm8k",
            "multiarith",
            "addsub",
            "svamp",
            "singleeq",
            "aqua",
            "last_letters",
            "coin_flip",
            "strategyqa",
            "csqa",
        }

    def test_gsm8k_shape(self, tmp_path):
        path = tmp_path / "gsm8k.jsonl"
        path.write_text(
            json.dumps({"question": "Q?", "answer": "steps\n#### 7"}) + "\n", encoding="utf-8"
        )
        problems = load_dataset(path, "gsm8k")
        assert problems[0].gold.number == 7

    def test_count_mismatch_warns_but_loads(self, tmp_path, caplog):
        path = tmp_path / "gsm8k.jsonl"
        path.write_text(
            json.dumps({"question": "Q?", "answer": "#### 7"}) + "\n", encoding="utf-8"
        )
        with caplog.at_level(logging.WARNING):
            problems = load_dataset(path, "gsm8k")
        assert len(problems) == 1
        assert any("expected 1319" in message for message in caplog.messages)

    def test_svamp_body_question_join(self, tmp_path):
        path = tmp_path / "svamp.json"
        path.write_text(
            json.dumps(
                [{"Body": "There are 5 birds.", "Question": "How many wings?", "Answer": 10, "ID": "sv-1"}]
            ),
            encoding="utf-8",
        )
        problems = load_dataset(path, "svamp")
        assert problems[0].question == "There are 5 birds. How many wings?"
        assert problems[0].id == "sv-1"

    def test_multiarith_list_answer(self, tmp_path):
        path = tmp_path / "multiarith.json"
        path.write_text(
            json.dumps([{"sQuestion": "Q?", "lSolutions": [12.0], "iIndex": 3}]),
            encoding="utf-8",
        )
        problems = load_dataset(path, "multiarith")
        assert problems[0].id == "3"
        assert problems[0].gold.number == 12

    def test_aqua_options_folded_into_question(self, tmp_path):
        path = tmp_path / "aqua.jsonl"
        record = {
            "question": "What is 2+3?",
            "options": ["A)4", "B)5", "C)6", "D)7", "E)8"],
            "correct": "B",
        }
        path.write_text(json.dumps(record) + "\n", encoding="utf-8")
        problems = load_dataset(path, "aqua")
        problem = problems[0]
        assert problem.gold.option == "B"
        assert problem.options is not None and len(problem.options) == 5
        assert "Answer Choices:" in problem.question
        assert "(B) 5" in problem.question

    def test_csqa_nested_fields(self, tmp_path):
        path = tmp_path / "csqa.jsonl"
        record = {
            "id": "q1",
            "answerKey": "C",
            "question": {
                "stem": "Where do books live?",
                "choices": [
                    {"label": "A", "text": "kitchen"},
                    {"label": "B", "text": "garden"},
                    {"label": "C", "text": "library"},
                ],
            },
        }
        path.write_text(json.dumps(record) + "\n", encoding="utf-8")
        problems = load_dataset(path, "csqa")
        assert problems[0].id == "q1"
        assert problems[0].gold.option == "C"
        assert "(C) library" in problems[0].question

    def test_strategyqa_boolean_answer(self, tmp_path):
        path = tmp_path / "strategyqa.jsonl"
        record = {"qid": "s1", "question": "Is fire hot?", "answer": True}
        path.write_text(json.dumps(record) + "\n", encoding="utf-8")
        problems = load_dataset(path, "strategyqa")
        assert problems[0].gold.yes_no == "yes"
        assert problems[0].id == "s1"


class TestManifest:
    def test_paths_resolved_relative_to_manifest(self):
        manifest = load_manifest(DATA_DIR / "manifest.json")
        assert "synth10" in manifest
        assert manifest["synth10"]["path"] == str(SYNTH_DATASET.resolve())

    def test_load_from_manifest(self):
        manifest = load_manifest(DATA_DIR / "manifest.json")
        problems = load_from_manifest(manifest, "synth10")
        assert len(problems) == 10

    def test_unknown_dataset_rejected(self):
        manifest = load_manifest(DATA_DIR / "manifest.json")
        with pytest.raises(DatasetFormatError):
            load_from_manifest(manifest, "nope")

    def test_entry_without_path_rejected(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps({"datasets": {"x": {}}}), encoding="utf-8")
        with pytest.raises(DatasetFormatError):
            load_manifest(path)

    def test_field_map_override(self, tmp_path):
        data = tmp_path / "data.jsonl"
        data.write_text(json.dumps({"q": "Q?", "a": "9", "key": "k1"}) + "\n", encoding="utf-8")
        manifest_path = tmp_path / "manifest.json"
        manifest_path.write_text(
            json.dumps(
                {
                    "datasets": {
                        "mine": {
                            "path": "data.jsonl",
                            "answer_type": "number",
                            "field_map": {"question": "q", "answer": "a", "id": "key"},
                        }
                    }
                }
            ),
            encoding="utf-8",
        )
        problems = load_from_manifest(load_manifest(manifest_path), "mine")
        assert problems[0].id == "k1"
        assert problems[0].gold.number == 9


class TestProblemInvariants:
    def test_question_required(self):
        with pytest.raises(InvalidInputError):
            Problem(
                id="p",
                dataset="d",
                question="",
                gold_raw="1",
                gold=NormalizedAnswer.of_number(1),
                answer_type=AnswerType.NUMBER,
            )

    def test_gold_kind_must_match(self):
        with pytest.raises(InvalidInputError):
            Problem(
                id="p",
                dataset="d",
                question="Q?",
                gold_raw="B",
                gold=NormalizedAnswer.of_option("B"),
                answer_type=AnswerType.NUMBER,
            )

    def test_option_problems_need_choices(self):
        with pytest.raises(InvalidInputError):
            Problem(
                id="p",
                dataset="d",
                question="Q?",
                gold_raw="B",
                gold=NormalizedAnswer.of_option("B"),
                answer_type=AnswerType.OPTION,
                options=(("B", "only one"),),
            )
        with pytest.raises(InvalidInputError):
            Problem(
                id="p",
                dataset="d",
                question="Q?",
                gold_raw="B",
                gold=NormalizedAnswer.of_option("B"),
                answer_type=AnswerType.OPTION,
                options=(("B", "x"), ("B", "y")),
            )
