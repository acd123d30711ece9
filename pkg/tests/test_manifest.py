"""Dataset-manifest tests: record guards, JSONL round trips, deterministic
largest-remainder splits, frame subsampling, merging, and directory import."""

import csv
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lesionforge.errors import DuplicateIdError, EmptyInputError, ManifestError
from lesionforge.manifest import (
    DatasetManifest,
    ManifestRecord,
    export_csv,
    import_directory,
    largest_remainder_sizes,
    load_manifest,
    merge_for_finetune,
    save_manifest,
    split_dataset,
    subsample_frames,
)


def rec(i, dataset_id="ds", split="train", kind="real_positive", **kw):
    defaults = dict(
        record_id=f"{dataset_id}-{i:04d}",
        dataset_id=dataset_id,
        split=split,
        kind=kind,
        image_path=f"images/{i:04d}.png",
        mask_path=None if kind == "real_negative" else f"masks/{i:04d}.png",
    )
    if kind == "synthetic" and "provenance" not in kw:
        kw["provenance"] = {"condition_id": "c", "background_id": "b"}
    defaults.update(kw)
    return ManifestRecord(**defaults)


class TestRecordGuards:
    def test_bad_split(self):
        with pytest.raises(ManifestError):
            rec(0, split="holdout")

    def test_bad_kind(self):
        with pytest.raises(ManifestError):
            rec(0, kind="fake")

    def test_negative_with_mask_rejected(self):
        with pytest.raises(ManifestError):
            ManifestRecord("r", "ds", "train", "real_negative", "i.png", mask_path="m.png")

    def test_negative_without_mask_ok(self):
        r = ManifestRecord("r", "ds", "train", "real_negative", "i.png")
        assert r.mask_path is None

    def test_synthetic_requires_provenance(self):
        with pytest.raises(ManifestError):
            ManifestRecord("r", "ds", "train", "synthetic", "i.png", mask_path="m.png")

    def test_duplicate_ids_rejected(self):
        with pytest.raises(DuplicateIdError):
            DatasetManifest((rec(0), rec(0)))


class TestManifestQueries:
    def test_split_counts_and_lookups(self):
        m = DatasetManifest(
            (
                rec(0, split="train"),
                rec(1, split="val"),
                rec(2, split="test"),
                rec(3, split="train", dataset_id="other"),
            )
        )
        assert m.split_counts() == {"train": 2, "val": 1, "test": 1}
        assert [r.record_id for r in m.by_split("train")] == ["ds-0000", "other-0003"]
        assert [r.record_id for r in m.by_dataset("other")] == ["other-0003"]
        assert m.get("ds-0001").split == "val"
        assert m.get("missing") is None
        assert len(m) == 4


class TestSerialization:
    def test_round_trip_identity(self, tmp_path):
        m = DatasetManifest(
            (
                rec(0),
                rec(1, kind="real_negative"),
                rec(
                    2,
                    kind="synthetic",
                    provenance={"condition_id": "c1", "seed": 7, "scores": {"alignment": 0.97}},
                ),
                rec(3, sequence_id="vidA"),
            )
        )
        path = tmp_path / "m.jsonl"
        save_manifest(m, path)
        assert load_manifest(path) == m

    def test_file_is_one_json_object_per_line(self, tmp_path):
        m = DatasetManifest((rec(0), rec(1)))
        path = tmp_path / "m.jsonl"
        save_manifest(m, path)
        lines = path.read_text().strip().split("\n")
        assert len(lines) == 2
        for line in lines:
            payload = json.loads(line)
            assert payload["record_id"].startswith("ds-")

    def test_save_is_byte_deterministic(self, tmp_path):
        m = DatasetManifest((rec(0), rec(1, kind="synthetic", provenance={"b": 1, "a": 2})))
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        save_manifest(m, p1)
        save_manifest(m, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_optional_fields_omitted_from_json(self):
        payload = json.loads(rec(0, kind="real_negative").to_json())
        assert "mask_path" not in payload
        assert "sequence_id" not in payload
        assert "provenance" not in payload

    def test_bad_json_line(self):
        with pytest.raises(ManifestError):
            ManifestRecord.from_json("{not json")

    def test_missing_field(self):
        with pytest.raises(ManifestError):
            ManifestRecord.from_json('{"record_id": "x"}')

    def test_blank_lines_ignored(self, tmp_path):
        path = tmp_path / "m.jsonl"
        path.write_text(rec(0).to_json() + "\n\n" + rec(1).to_json() + "\n")
        assert len(load_manifest(path)) == 2

    def test_export_csv(self, tmp_path):
        m = DatasetManifest((rec(0), rec(1, kind="synthetic", provenance={"seed": 3})))
        path = tmp_path / "m.csv"
        export_csv(m, path)
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2
        assert rows[0]["record_id"] == "ds-0000"
        assert rows[0]["provenance"] == ""
        assert json.loads(rows[1]["provenance"]) == {"seed": 3}


class TestLargestRemainder:
    def test_1000_records(self):
        assert largest_remainder_sizes(1000, (0.6, 0.2, 0.2)) == [600, 200, 200]

    def test_196_records(self):
        assert largest_remainder_sizes(196, (0.6, 0.2, 0.2)) == [118, 39, 39]

    def test_remainder_goes_to_largest_fraction(self):
        # 7 * (0.6, 0.2, 0.2) = (4.2, 1.4, 1.4): floors (4,1,1), one left over,
        # the tie between the two 0.4 fractions resolves to the earlier bucket
        assert largest_remainder_sizes(7, (0.6, 0.2, 0.2)) == [4, 2, 1]

    @settings(max_examples=50, deadline=None)
    @given(total=st.integers(0, 5000))
    def test_sizes_sum_to_total(self, total):
        sizes = largest_remainder_sizes(total, (0.6, 0.2, 0.2))
        assert sum(sizes) == total
        assert all(s >= 0 for s in sizes)


class TestSplitDataset:
    def test_empty_rejected(self):
        with pytest.raises(EmptyInputError):
            split_dataset([])

    def test_bad_ratios(self):
        with pytest.raises(ValueError):
            split_dataset([rec(0)], ratios=(0.5, 0.2, 0.2))
        with pytest.raises(ValueError):
            split_dataset([rec(0)], ratios=(1.2, -0.1, -0.1))

    def test_1000_records_600_200_200(self):
        m = split_dataset([rec(i) for i in range(1000)], seed=5)
        assert m.split_counts() == {"train": 600, "val": 200, "test": 200}

    def test_196_records_118_39_39(self):
        m = split_dataset([rec(i) for i in range(196)], seed=5)
        assert m.split_counts() == {"train": 118, "val": 39, "test": 39}

    def test_same_seed_same_assignment(self):
        records = [rec(i) for i in range(97)]
        a = split_dataset(records, seed=9)
        b = split_dataset(list(reversed(records)), seed=9)  # input order irrelevant
        assert {r.record_id: r.split for r in a.records} == {r.record_id: r.split for r in b.records}

    def test_different_seed_different_assignment(self):
        records = [rec(i) for i in range(97)]
        a = {r.record_id: r.split for r in split_dataset(records, seed=1).records}
        b = {r.record_id: r.split for r in split_dataset(records, seed=2).records}
        assert a != b

    @settings(max_examples=25, deadline=None)
    @given(n=st.integers(1, 300), seed=st.integers(0, 99))
    def test_partition_property(self, n, seed):
        records = [rec(i) for i in range(n)]
        m = split_dataset(records, seed=seed)
        assert len(m) == n
        assert {r.record_id for r in m.records} == {r.record_id for r in records}
        counts = m.split_counts()
        assert counts["train"] >= counts["val"] >= 0
        assert sum(counts.values()) == n


class TestSubsampleFrames:
    def test_rate_one_keeps_all(self):
        records = [rec(i, sequence_id="vid") for i in range(10)]
        assert subsample_frames(records, 1) == records

    def test_every_thirtieth_frame(self):
        records = [rec(i, sequence_id="vid") for i in range(90)]
        kept = subsample_frames(records, 30)
        assert len(kept) == 3
        assert [k.record_id for k in kept] == ["ds-0000", "ds-0030", "ds-0060"]

    def test_sequences_independent(self):
        records = [rec(i, sequence_id="a") for i in range(4)] + [
            rec(i + 100, sequence_id="b") for i in range(4)
        ]
        kept = subsample_frames(records, 3)
        assert [k.record_id for k in kept] == ["ds-0000", "ds-0003", "ds-0100", "ds-0103"]

    def test_records_without_sequence_always_kept(self):
        records = [rec(i) for i in range(5)]
        assert subsample_frames(records, 30) == records

    def test_bad_rate(self):
        with pytest.raises(ValueError):
            subsample_frames([rec(0)], 0)


class TestMergeForFinetune:
    def _syn(self, i, split="train"):
        return rec(1000 + i, dataset_id="syn", split=split, kind="synthetic")

    def test_merge_appends_synthetic(self):
        base = DatasetManifest((rec(0), rec(1, split="test")))
        syn = DatasetManifest((self._syn(0), self._syn(1)))
        merged = merge_for_finetune(base, syn)
        assert len(merged) == 4
        assert [r.kind for r in merged.records].count("synthetic") == 2

    def test_synthetic_must_be_train_split(self):
        base = DatasetManifest((rec(0),))
        with pytest.raises(ManifestError):
            merge_for_finetune(base, DatasetManifest((self._syn(0, split="test"),)))

    def test_id_collision_rejected(self):
        base = DatasetManifest((rec(0),))
        clash = rec(0, kind="synthetic")
        with pytest.raises(DuplicateIdError):
            merge_for_finetune(base, DatasetManifest((clash,)))

    def test_non_synthetic_kind_rejected(self):
        base = DatasetManifest((rec(0),))
        with pytest.raises(ManifestError):
            merge_for_finetune(base, DatasetManifest((rec(5, dataset_id="syn"),)))


class TestImportDirectory:
    def _make_tree(self, root, stems, with_masks=True):
        (root / "images").mkdir(parents=True)
        if with_masks:
            (root / "masks").mkdir()
        from PIL import Image

        for stem in stems:
            Image.new("RGB", (4, 4)).save(root / "images" / f"{stem}.png")
            if with_masks:
                Image.new("L", (4, 4)).save(root / "masks" / f"{stem}.png")

    def test_import_positives(self, tmp_path):
        self._make_tree(tmp_path, ["a", "b"])
        records = import_directory(tmp_path, "dsX")
        assert [r.record_id for r in records] == ["dsX/a", "dsX/b"]
        assert all(r.kind == "real_positive" and r.mask_path == f"masks/{r.record_id[-1]}.png" for r in records)

    def test_import_negatives_no_masks_needed(self, tmp_path):
        self._make_tree(tmp_path, ["a"], with_masks=False)
        records = import_directory(tmp_path, "dsX", kind="real_negative")
        assert records[0].mask_path is None

    def test_missing_mask_raises(self, tmp_path):
        self._make_tree(tmp_path, ["a"], with_masks=False)
        with pytest.raises(ManifestError):
            import_directory(tmp_path, "dsX")

    def test_missing_images_dir(self, tmp_path):
        with pytest.raises(ManifestError):
            import_directory(tmp_path, "dsX")

    def test_sequence_from_stem(self, tmp_path):
        self._make_tree(tmp_path, ["vid1_0001", "vid1_0002", "solo"])
        records = import_directory(tmp_path, "dsX", sequence_from_stem=True)
        by_id = {r.record_id: r.sequence_id for r in records}
        assert by_id["dsX/vid1_0001"] == "vid1"
        assert by_id["dsX/vid1_0002"] == "vid1"
        assert by_id["dsX/solo"] is None

    def test_non_image_files_skipped(self, tmp_path):
        self._make_tree(tmp_path, ["a"])
        (tmp_path / "images" / "notes.txt").write_text("skip me")
        records = import_directory(tmp_path, "dsX")
        assert len(records) == 1
