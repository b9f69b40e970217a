import numpy as np
import pytest

from fusionette import (
    LABEL_MAPS,
    TABLE1,
    DatasetSplit,
    EmbeddingRecord,
    RawRow,
    Table1Row,
    apply_label_map,
    gen_synthetic,
    load_dataset_dir,
    read_split,
    synthetic_directions,
    validate_counts,
    write_split,
)
from fusionette.data import split_arrays
from fusionette.errors import ChecksumError, DataError, FormatError, TruncationError


def make_split(n=5, d_i=6, d_t=4, seed=0, split_name="train", class_names=None, num_classes=2):
    rng = np.random.default_rng(seed)
    records = [
        EmbeddingRecord(
            f"id-{i}",
            rng.standard_normal(d_i).astype(np.float32),
            rng.standard_normal(d_t).astype(np.float32),
            int(rng.integers(0, num_classes)),
        )
        for i in range(n)
    ]
    names = class_names or [f"class_{k}" for k in range(num_classes)]
    return DatasetSplit(records, num_classes, list(names), task_id=1, split_name=split_name)


# --- round trips ------------------------------------------------------------


def test_roundtrip_is_bitwise(tmp_path):
    split = make_split(seed=1)
    path_a, path_b = tmp_path / "a.mmeb", tmp_path / "b.mmeb"
    write_split(split, path_a)
    loaded = read_split(path_a)
    write_split(loaded, path_b)
    assert path_a.read_bytes() == path_b.read_bytes()
    assert loaded.num_classes == split.num_classes
    assert loaded.class_names == split.class_names
    for orig, back in zip(split.records, loaded.records):
        assert orig.id == back.id and orig.label == back.label
        np.testing.assert_array_equal(orig.f_i, back.f_i)
        np.testing.assert_array_equal(orig.f_t, back.f_t)


def test_roundtrip_nonascii_class_names(tmp_path):
    split = make_split(seed=2, class_names=["informatif·élevé", "дождь☂"])
    path = tmp_path / "x.mmeb"
    write_split(split, path)
    assert read_split(path).class_names == ["informatif·élevé", "дождь☂"]


def test_empty_split_roundtrips(tmp_path):
    split = DatasetSplit([], 2, ["a", "b"], task_id=1, split_name="test")
    path = tmp_path / "empty.mmeb"
    write_split(split, path)
    assert len(read_split(path)) == 0


def test_split_arrays_widen_to_float64():
    fi, ft, y = split_arrays(make_split(seed=3))
    assert fi.dtype == np.float64 and ft.dtype == np.float64 and y.dtype == np.int64


# --- corruption -------------------------------------------------------------


def test_bad_magic(tmp_path):
    path = tmp_path / "x.mmeb"
    write_split(make_split(), path)
    raw = bytearray(path.read_bytes())
    raw[:4] = b"WAT?"
    path.write_bytes(raw)
    with pytest.raises(FormatError, match="magic"):
        read_split(path)


def test_flipped_crc_byte(tmp_path):
    path = tmp_path / "x.mmeb"
    write_split(make_split(), path)
    raw = bytearray(path.read_bytes())
    raw[-2] ^= 0x10
    path.write_bytes(raw)
    with pytest.raises(ChecksumError):
        read_split(path)


def test_truncation(tmp_path):
    path = tmp_path / "x.mmeb"
    write_split(make_split(), path)
    raw = path.read_bytes()
    path.write_bytes(raw[: len(raw) - 9])
    with pytest.raises(TruncationError):
        read_split(path)


def test_write_rejects_bad_label_and_nan():
    split = make_split()
    split.records[0].label = 7
    with pytest.raises(DataError, match="label"):
        write_split(split, "/dev/null")
    split = make_split()
    split.records[2].f_i[0] = np.nan
    with pytest.raises(DataError, match="finite"):
        write_split(split, "/dev/null")


def test_write_rejects_duplicate_ids():
    split = make_split()
    split.records[1].id = split.records[0].id
    with pytest.raises(DataError, match="duplicate"):
        write_split(split, "/dev/null")


# --- dataset directory -------------------------------------------------------


def test_discovery_by_split_name_not_filename(tmp_path):
    write_split(make_split(split_name="train", seed=1), tmp_path / "zzz.mmeb")
    write_split(make_split(split_name="validation", seed=2), tmp_path / "aaa.mmeb")
    write_split(make_split(split_name="test", seed=3), tmp_path / "mmm.mmeb")
    splits = load_dataset_dir(tmp_path)
    assert set(splits) == {"train", "validation", "test"}
    assert splits["train"].records[0].id == "id-0"


def test_duplicate_split_name_rejected(tmp_path):
    write_split(make_split(split_name="train", seed=1), tmp_path / "a.mmeb")
    write_split(make_split(split_name="train", seed=2), tmp_path / "b.mmeb")
    with pytest.raises(DataError, match="both claim"):
        load_dataset_dir(tmp_path)


# --- label maps ---------------------------------------------------------------


def test_task2_grouping_merges_three_categories():
    mapping = LABEL_MAPS[2].mapping
    assert (
        mapping["affected_individuals"]
        == mapping["injured_or_dead_people"]
        == mapping["missing_or_found_people"]
    )
    assert LABEL_MAPS[2].num_classes == 5


def test_task_label_space_sizes():
    assert LABEL_MAPS[1].num_classes == 2
    assert LABEL_MAPS[3].num_classes == 3
    assert set(LABEL_MAPS[3].mapping) == {"severe_damage", "mild_damage", "little_or_no_damage"}


def test_apply_label_map():
    rng = np.random.default_rng(4)
    rows = [
        RawRow(f"r{i}", rng.standard_normal(4), rng.standard_normal(4), cat)
        for i, cat in enumerate(
            [
                "injured_or_dead_people",
                "missing_or_found_people",
                "not_humanitarian",
                "vehicle_damage",
                "other_relevant_information",
            ]
        )
    ]
    split = apply_label_map(rows, LABEL_MAPS[2], "train")
    assert len(split) == 4  # not_humanitarian dropped
    assert split.num_classes == 5
    assert split.records[0].label == split.records[1].label


def test_apply_label_map_unknown_category():
    row = RawRow("r", np.zeros(4), np.zeros(4), "alien_invasion")
    with pytest.raises(DataError, match="unknown raw category"):
        apply_label_map([row], LABEL_MAPS[2], "train")


# --- synthetic generators -------------------------------------------------------


def test_gen_synthetic_separable_is_linearly_solvable():
    train, val, test = gen_synthetic("separable", (400, 50, 50), d_i=64, d_t=64, seed=5)
    u, _ = synthetic_directions(64, 64, seed=5)
    for split in (train, val, test):
        fi, _, y = split_arrays(split)
        preds = (fi @ u > 0).astype(int)
        assert (preds == y).all()


def test_gen_synthetic_xor_unimodal_blindness():
    train, _, test = gen_synthetic("xor", (4000, 1, 4000), d_i=64, d_t=64, seed=6)
    u, v = synthetic_directions(64, 64, seed=6)
    fi, ft, y = split_arrays(test)
    img_acc = ((fi @ u > 0).astype(int) == y).mean()
    txt_acc = ((ft @ v > 0).astype(int) == y).mean()
    assert abs(img_acc - 0.5) < 0.03
    assert abs(txt_acc - 0.5) < 0.03
    # but the XOR of the two signs is the label by construction
    both = ((fi @ u > 0) ^ (ft @ v > 0)).astype(int)
    assert (both == y).all()


def test_gen_synthetic_xor_linear_scores_uncorrelated_with_label():
    train, _, _ = gen_synthetic("xor", (10000, 1, 1), d_i=32, d_t=32, seed=7)
    u, v = synthetic_directions(32, 32, seed=7)
    fi, ft, y = split_arrays(train)
    rng = np.random.default_rng(8)
    for side, direction in ((fi, u), (ft, v), (fi, rng.standard_normal(32)), (ft, rng.standard_normal(32))):
        score = side @ direction
        corr = np.corrcoef(score, y)[0, 1]
        assert abs(corr) < 0.05


def test_gen_synthetic_same_seed_identical_bytes(tmp_path):
    for sub in ("one", "two"):
        d = tmp_path / sub
        d.mkdir()
        for split in gen_synthetic("xor", (30, 10, 10), d_i=16, d_t=16, seed=9):
            write_split(split, d / f"{split.split_name}.mmeb")
    for name in ("train", "validation", "test"):
        a = (tmp_path / "one" / f"{name}.mmeb").read_bytes()
        b = (tmp_path / "two" / f"{name}.mmeb").read_bytes()
        assert a == b


def test_gen_synthetic_rejects_bad_kind_and_sizes():
    with pytest.raises(ValueError, match="kind"):
        gen_synthetic("fractal", 10)
    with pytest.raises(ValueError, match="positive"):
        gen_synthetic("xor", (10, 0, 10))


# --- count bookkeeping -------------------------------------------------------------


def _fixture_splits(counts: Table1Row, d=2):
    out = []
    for name, n in (("train", counts.train), ("validation", counts.validation), ("test", counts.test)):
        records = [
            EmbeddingRecord(f"{name}-{i}", np.zeros(d, np.float32), np.zeros(d, np.float32), 0)
            for i in range(n)
        ]
        out.append(DatasetSplit(records, 2, ["a", "b"], task_id=1, split_name=name))
    return out


@pytest.mark.parametrize("task", [1, 2, 3])
def test_validate_counts_passes_on_expected_totals(task):
    row = TABLE1[task]
    report = validate_counts(_fixture_splits(row), row)
    assert report.ok
    assert report.total_actual == row.total


def test_table1_totals():
    assert TABLE1[1].total == 12706
    assert TABLE1[2].total == 3802
    assert TABLE1[3].total == 3526


def test_validate_counts_reports_deltas_on_perturbation():
    row = TABLE1[3]
    splits = _fixture_splits(row)
    splits[0].records.pop()  # train short by one
    report = validate_counts(splits, row)
    assert not report.ok
    by_name = {d.split_name: d.delta for d in report.deltas}
    assert by_name == {"train": -1, "validation": 0, "test": 0}
    assert "-1" in report.describe()
