import json
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emofuse import (
    FOUR_CLASS_NAMES,
    SIX_CLASS_NAMES,
    LabelSet,
    Sample,
    filter_classes,
    load_manifest,
    make_session_folds,
    split_dataset,
)
from emofuse.errors import (
    DuplicateId,
    EmptyResult,
    MalformedRecord,
    MissingFile,
    SessionCountMismatch,
    TooFewSamples,
    UnknownLabel,
)


def _sample(i, label="happy", session=None, speaker=None):
    return Sample(id=f"u{i}", audio_ref=f"a{i}.wav", transcript="hi",
                  label=label, speaker_id=speaker or f"spk{i % 4}",
                  session_id=session or f"s{i % 5}", duration_s=1.0)


def _record(i, **over):
    rec = {"id": f"u{i}", "audio": f"a{i}.wav", "text": "hey", "label": "happy",
           "speaker": f"spk{i}", "session": f"s{i % 5}", "duration": 1.5}
    rec.update(over)
    return rec


def _write_manifest(path, records):
    path.write_text("\n".join(json.dumps(r) for r in records) + ("\n" if records else ""),
                    encoding="utf-8")
    return path


class TestLoadManifest:
    def test_empty_file_gives_empty_list(self, tmp_path):
        path = _write_manifest(tmp_path / "m.jsonl", [])
        assert load_manifest(path) == []

    def test_three_valid_lines_in_file_order(self, tmp_path):
        path = _write_manifest(tmp_path / "m.jsonl", [_record(i) for i in range(3)])
        samples = load_manifest(path)
        assert [s.id for s in samples] == ["u0", "u1", "u2"]
        assert samples[0].transcript == "hey"
        assert samples[0].duration_s == 1.5

    def test_unknown_label_rejected(self, tmp_path):
        path = _write_manifest(tmp_path / "m.jsonl", [_record(0, label="joyful")])
        with pytest.raises(UnknownLabel):
            load_manifest(path)

    def test_duplicate_id_rejected(self, tmp_path):
        path = _write_manifest(tmp_path / "m.jsonl", [_record(0), _record(0)])
        with pytest.raises(DuplicateId):
            load_manifest(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingFile):
            load_manifest(tmp_path / "nope.jsonl")

    def test_malformed_json_carries_line_number(self, tmp_path):
        path = tmp_path / "m.jsonl"
        path.write_text(json.dumps(_record(0)) + "\n{broken\n", encoding="utf-8")
        with pytest.raises(MalformedRecord) as exc:
            load_manifest(path)
        assert exc.value.line_no == 2

    def test_nonpositive_duration_rejected(self, tmp_path):
        path = _write_manifest(tmp_path / "m.jsonl", [_record(0, duration=0.0)])
        with pytest.raises(MalformedRecord):
            load_manifest(path)

    def test_missing_key_rejected(self, tmp_path):
        rec = _record(0)
        del rec["speaker"]
        path = _write_manifest(tmp_path / "m.jsonl", [rec])
        with pytest.raises(MalformedRecord):
            load_manifest(path)

    def test_missing_text_allowed_and_session_defaults_to_speaker(self, tmp_path):
        rec = _record(0)
        del rec["text"]
        del rec["session"]
        path = _write_manifest(tmp_path / "m.jsonl", [rec])
        (sample,) = load_manifest(path)
        assert sample.transcript == ""
        assert sample.session_id == sample.speaker_id

    def test_four_class_set_rejects_fear(self, tmp_path):
        path = _write_manifest(tmp_path / "m.jsonl", [_record(0, label="fear")])
        from emofuse import FOUR_CLASS
        with pytest.raises(UnknownLabel):
            load_manifest(path, label_set=FOUR_CLASS)


class TestLabelSet:
    def test_six_class_set_is_closed(self):
        assert LabelSet(SIX_CLASS_NAMES).names == (
            "angry", "fear", "happy", "neutral", "sad", "surprise")

    def test_four_class_set(self):
        assert LabelSet(FOUR_CLASS_NAMES).names == ("angry", "happy", "neutral", "sad")

    def test_indices_contiguous_alphabetical(self):
        ls = LabelSet(("sad", "angry", "happy"))
        assert [ls.index(n) for n in ls.names] == [0, 1, 2]
        assert ls.names == ("angry", "happy", "sad")

    def test_unknown_label_raises(self):
        with pytest.raises(UnknownLabel):
            LabelSet(FOUR_CLASS_NAMES).index("fear")


class TestSplitDataset:
    def test_ten_samples_exact_ratio(self):
        split = split_dataset([_sample(i) for i in range(10)], seed=1)
        assert (len(split.train), len(split.val), len(split.test)) == (8, 1, 1)

    def test_7477_samples(self):
        split = split_dataset([_sample(i) for i in range(7477)], seed=3)
        assert (len(split.train), len(split.val), len(split.test)) == (5981, 748, 748)

    def test_same_seed_identical(self):
        samples = [_sample(i) for i in range(57)]
        a = split_dataset(samples, seed=11)
        b = split_dataset(samples, seed=11)
        assert a == b

    def test_different_seed_differs(self):
        samples = [_sample(i) for i in range(57)]
        assert split_dataset(samples, seed=1) != split_dataset(samples, seed=2)

    def test_too_few(self):
        with pytest.raises(TooFewSamples):
            split_dataset([_sample(0), _sample(1)], seed=0)

    @settings(max_examples=40, deadline=None)
    @given(n=st.integers(min_value=3, max_value=400),
           seed=st.integers(min_value=0, max_value=2**31))
    def test_partition_property(self, n, seed):
        samples = [_sample(i) for i in range(n)]
        split = split_dataset(samples, seed=seed)
        combined = list(split.train) + list(split.val) + list(split.test)
        assert Counter(s.id for s in combined) == Counter(s.id for s in samples)
        ids = [set(s.id for s in part) for part in (split.train, split.val, split.test)]
        assert not (ids[0] & ids[1]) and not (ids[0] & ids[2]) and not (ids[1] & ids[2])

    def test_speaker_disjoint_mode(self):
        samples = [_sample(i, speaker=f"spk{i % 10}") for i in range(100)]
        split = split_dataset(samples, seed=5, speaker_disjoint=True)
        spk = [set(s.speaker_id for s in part)
               for part in (split.train, split.val, split.test)]
        assert not (spk[0] & spk[1]) and not (spk[0] & spk[2]) and not (spk[1] & spk[2])


class TestFilterClasses:
    def test_full_set_identity(self):
        samples = [_sample(i, label=SIX_CLASS_NAMES[i % 6]) for i in range(18)]
        assert filter_classes(samples, SIX_CLASS_NAMES) == samples

    def test_four_class_subset(self):
        samples = [_sample(i, label=SIX_CLASS_NAMES[i % 6]) for i in range(24)]
        kept = filter_classes(samples, FOUR_CLASS_NAMES)
        assert {s.label for s in kept} == set(FOUR_CLASS_NAMES)
        assert all(s.label in FOUR_CLASS_NAMES for s in kept)

    def test_repacked_indices_alphabetical(self):
        kept_names = LabelSet(("sad", "neutral"))
        assert kept_names.index("neutral") == 0
        assert kept_names.index("sad") == 1

    def test_empty_result(self):
        samples = [_sample(i, label="happy") for i in range(5)]
        with pytest.raises(EmptyResult):
            filter_classes(samples, ("fear",))


class TestSessionFolds:
    def test_five_sessions_five_folds(self):
        samples = [_sample(i, session=f"s{i % 5}") for i in range(40)]
        folds = make_session_folds(samples, k=5)
        assert len(folds) == 5
        assert sorted(f.val_session for f in folds) == sorted({s.session_id for s in samples})

    def test_mismatch(self):
        samples = [_sample(i, session=f"s{i % 4}") for i in range(20)]
        with pytest.raises(SessionCountMismatch) as exc:
            make_session_folds(samples, k=5)
        assert (exc.value.found, exc.value.expected) == (4, 5)

    def test_each_fold_trains_on_other_four_sessions(self):
        samples = [_sample(i, session=f"s{i % 5}") for i in range(40)]
        for fold in make_session_folds(samples, k=5):
            assert len(fold.train_sessions) == 4
            assert fold.val_session not in fold.train_sessions
            assert {s.session_id for s in fold.train} == set(fold.train_sessions)
            assert {s.session_id for s in fold.val} == {fold.val_session}

    def test_folds_partition_samples(self):
        samples = [_sample(i, session=f"s{i % 5}") for i in range(33)]
        folds = make_session_folds(samples, k=5)
        val_ids = [s.id for f in folds for s in f.val]
        assert Counter(val_ids) == Counter(s.id for s in samples)
