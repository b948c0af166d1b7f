from __future__ import annotations

import json

import numpy as np
import pytest
from scipy.stats import ortho_group

from termbridge.alignment import AlignmentMatrix, AnchorDictionary, IterationRecord
from termbridge.errors import AlignmentError, EvaluationError
from termbridge.storage import (
    ALIGNMENT_MAGIC,
    alignment_binary_path,
    config_comment,
    load_alignment,
    read_dictionary,
    read_terms,
    save_alignment,
    write_dictionary,
    write_jsonl,
    write_text,
)


@pytest.fixture
def alignment():
    return AlignmentMatrix(
        W=ortho_group.rvs(dim=4, random_state=0),
        residual=0.25,
        iterations_used=2,
        converged=True,
        method="procrustes-refined",
        dictionary_size=17,
        history=[IterationRecord(1, 10, 0.5), IterationRecord(2, 17, 0.25)],
    )


class TestAlignmentFiles:
    def test_text_round_trip_is_exact(self, tmp_path, alignment):
        text, binary = save_alignment(alignment, tmp_path / "map.txt", {"seed": 3})
        loaded = load_alignment(text)
        np.testing.assert_array_equal(loaded.W, alignment.W)
        assert loaded.method == "procrustes-refined"
        assert loaded.history == alignment.history
        assert loaded.converged
        assert binary == alignment_binary_path(text)

    def test_header_carries_metadata_and_run_config(self, tmp_path, alignment):
        text, _ = save_alignment(alignment, tmp_path / "map.txt", {"seed": 3})
        lines = text.read_text(encoding="utf-8").splitlines()
        header = json.loads(lines[0][1:])
        assert header["run_config"] == {"seed": 3}
        assert header["dictionary_size"] == 17
        assert lines[1] == "4"
        assert len(lines) == 6

    def test_binary_sidecar_layout(self, tmp_path, alignment):
        _, binary = save_alignment(alignment, tmp_path / "map.txt")
        data = binary.read_bytes()
        assert data[:4] == ALIGNMENT_MAGIC
        assert int.from_bytes(data[4:8], "little") == 4
        assert len(data) == 8 + 8 * 16

    def test_binary_load_uses_text_companion(self, tmp_path, alignment):
        _, binary = save_alignment(alignment, tmp_path / "map.txt")
        loaded = load_alignment(binary)
        np.testing.assert_array_equal(loaded.W, alignment.W)
        assert loaded.method == "procrustes-refined"

    def test_binary_alone_has_defaults(self, tmp_path, alignment):
        _, binary = save_alignment(alignment, tmp_path / "map.txt")
        lone = tmp_path / "lone.w"
        lone.write_bytes(binary.read_bytes())
        loaded = load_alignment(lone)
        np.testing.assert_array_equal(loaded.W, alignment.W)
        assert loaded.method == "procrustes"

    def test_truncated_binary(self, tmp_path, alignment):
        _, binary = save_alignment(alignment, tmp_path / "map.txt")
        binary.write_bytes(binary.read_bytes()[:-8])
        with pytest.raises(AlignmentError, match="expected"):
            load_alignment(binary)

    @pytest.mark.parametrize(
        "content, message",
        [
            ("# {broken\n2\n1 0\n0 1\n", "not JSON"),
            ("# {}\n", "missing dimension"),
            ("two\n1 0\n0 1\n", "expected the dimension"),
            ("2\n1 0\n", "expected 2 matrix rows"),
            ("2\n1 0\n0\n", ":3: expected 2 values"),
            ("2\n1 0\n0 x\n", "unparseable"),
        ],
    )
    def test_malformed_text(self, tmp_path, content, message):
        path = tmp_path / "bad.txt"
        path.write_text(content, encoding="utf-8")
        with pytest.raises(AlignmentError, match=message):
            load_alignment(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(AlignmentError, match="does not exist"):
            load_alignment(tmp_path / "absent.txt")


class TestDictionaryFiles:
    def test_round_trip_keeps_order(self, tmp_path):
        anchors = AnchorDictionary([("b", "b"), ("a", "x")], provenance="refined")
        path = write_dictionary(anchors, tmp_path / "anchors.tsv", {"seed": 1})
        first = path.read_text(encoding="utf-8").splitlines()[0]
        assert first.startswith("# config: ")
        assert json.loads(first[len("# config: "):]) == {"provenance": "refined", "seed": 1}
        loaded = read_dictionary(path, provenance="refined")
        assert loaded.pairs == anchors.pairs

    def test_bad_line(self, tmp_path):
        path = tmp_path / "anchors.tsv"
        path.write_text("a\tb\nonly-one-column\n", encoding="utf-8")
        with pytest.raises(AlignmentError, match=":2:"):
            read_dictionary(path)

    def test_missing_dictionary(self, tmp_path):
        with pytest.raises(AlignmentError):
            read_dictionary(tmp_path / "absent.tsv")


def test_config_comment_is_compact_json():
    assert config_comment({"b": 1, "a": [1, 2]}) == '# config: {"a": [1, 2], "b": 1}\n'


def test_write_text_without_config(tmp_path):
    path = write_text(tmp_path / "nested" / "out.tsv", "x\n")
    assert path.read_text(encoding="utf-8") == "x\n"


def test_write_jsonl_accepts_records_and_dicts(tmp_path):
    path = write_jsonl(tmp_path / "log.jsonl", [IterationRecord(1, 5, 0.5), {"plain": True}])
    lines = [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]
    assert lines == [{"dictionary_size": 5, "iteration": 1, "residual": 0.5}, {"plain": True}]


class TestReadTerms:
    def test_groups_by_side(self, tmp_path):
        path = tmp_path / "terms.tsv"
        path.write_text("# terms\nsource\tmyocardial\nTARGET\theart\nsource\tedema\n", encoding="utf-8")
        assert read_terms(path) == {"source": ["myocardial", "edema"], "target": ["heart"]}

    def test_rejects_unknown_side(self, tmp_path):
        path = tmp_path / "terms.tsv"
        path.write_text("both\tword\n", encoding="utf-8")
        with pytest.raises(EvaluationError, match=":1:"):
            read_terms(path)
