import csv

import numpy as np
import pytest

from sectkit.bench import (FULL_EPSILONS, RuntimeConfig, StudyConfig, family_fields, run_rejection_study,
                           run_runtime_study)
from sectkit.ecc import direction_grid, shape_eccs
from sectkit.errors import ValidationError
from sectkit.sect import LevelGrid, sect_from_ecc, sect_many
from sectkit.shapes import FAMILY_R, FamilyParams, sample_group

SMALL = dict(epsilon_list=(0.0, 0.1), n=10, replicates=2, gamma=2, delta=12, permutations=19, seed=7)


@pytest.fixture(scope="module")
def small_study():
    return run_rejection_study(StudyConfig(**SMALL))


def test_config_defaults_and_validation():
    cfg = StudyConfig()
    assert (cfg.gamma, cfg.delta, cfg.n, cfg.alpha) == (4, 50, 100, 0.05)
    assert StudyConfig.full_scale().epsilon_list == FULL_EPSILONS
    assert StudyConfig.from_dict({"full_scale": True, "n": 10}).n == 10
    for bad in ({"replicates": 0}, {"alpha": 1.0}, {"algorithms": [4]}, {"epsilon_list": [-0.1]}, {"n": 1}):
        with pytest.raises(ValidationError):
            StudyConfig.from_dict(bad)
    with pytest.raises(ValidationError):
        StudyConfig.from_dict({"unknown": 1})
    with pytest.raises(ValidationError):
        RuntimeConfig(algorithms=(3,))


def test_study_rows_and_records(small_study):
    assert len(small_study.rows) == 2 * 3
    assert len(small_study.records) == 2 * 2 * 3
    for row in small_study.rows:
        assert row["replicates"] == 2
        assert row["rejection_rate"] in (0.0, 0.5, 1.0)
        assert row["rejections"] == round(row["rejection_rate"] * 2)


def test_study_is_deterministic(small_study):
    again = run_rejection_study(StudyConfig(**SMALL, threads=3))
    strip = lambda recs: [{k: v for k, v in r.items() if k != "runtime_s"} for r in recs]
    assert strip(again.records) == strip(small_study.records)


def test_single_replicate_rates_are_binary():
    res = run_rejection_study(StudyConfig(**{**SMALL, "replicates": 1, "algorithms": (1,)}))
    assert all(r["rejection_rate"] in (0.0, 1.0) for r in res.rows)


def test_study_output_files(tmp_path, small_study):
    paths = small_study.write(tmp_path)
    names = {p.name for p in paths}
    assert names == {"rejection.csv", "rejection_summary.json", "rejection_replicates.csv",
                     "rejection_vs_epsilon.csv"}
    with open(tmp_path / "rejection.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["epsilon", "algorithm", "method", "rejections", "replicates", "rejection_rate",
                             "mean_R_F", "mean_R_inf", "mean_runtime_s"]
    with open(tmp_path / "rejection_vs_epsilon.csv") as fh:
        plot = list(csv.DictReader(fh))
    assert [float(r["epsilon"]) for r in plot] == [0.0, 0.1]
    assert set(plot[0]) == {"epsilon", "algorithm_1", "algorithm_2", "algorithm_3"}


def test_family_fields_match_direct_computation():
    dirs = direction_grid(2, 3).directions
    levels = LevelGrid(2 * FAMILY_R, 9)
    sect, ect = family_fields(FamilyParams(0.05), 3, dirs, levels, 1, 0, 0, 1)
    shapes = sample_group(FamilyParams(0.05), 3, 1, 0, 0, 1)
    c = shape_eccs(shapes[2], dirs)[1]
    assert np.array_equal(sect[2, 1], sect_from_ecc(c, levels))
    assert np.array_equal(ect[2, 1], c(levels.levels))


def test_batched_sect_matches_single_curves():
    dirs = direction_grid(2, 5).directions
    levels = LevelGrid(2 * FAMILY_R, 33)
    curves = [c for s in sample_group(FamilyParams(0.1), 4, 3, 9) for c in shape_eccs(s, dirs)]
    batch = sect_many(curves, levels)
    single = np.array([sect_from_ecc(c, levels) for c in curves])
    assert np.abs(batch - single).max() < 1e-12
    assert np.all(batch[:, -1] == 0)


def test_runtime_study_grid(tmp_path):
    cfg = RuntimeConfig(gammas=(1, 2), deltas=(5, 10), ns=(4, 8), replicates=2, permutations=5, repeats=1)
    res = run_runtime_study(cfg)
    assert len(res.rows) == 2 * 2 * 2 * 2
    assert all(r["mean_s"] > 0 and r["replicates"] == 2 for r in res.rows)
    paths = res.write(tmp_path)
    with open(tmp_path / "runtime_table.csv") as fh:
        table = list(csv.DictReader(fh))
    assert len(table) == 2 * 2 * 2 and set(table[0]) == {"algorithm", "gamma", "delta", "n=4", "n=8"}
    assert tmp_path / "runtime.csv" in paths


def test_runtime_study_with_sect_evaluation():
    cfg = RuntimeConfig(gammas=(2,), deltas=(5,), ns=(4,), replicates=1, algorithms=(1,), include_sect=True)
    assert run_runtime_study(cfg).config["include_sect"] is True
