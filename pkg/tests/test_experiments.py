import itertools
import json
import math
from fractions import Fraction

import pytest

from fiqsim.domains import TruncatedReal
from fiqsim.experiments import (
    CONFIG_SCHEMA,
    emergence_test,
    exact_recurrence_probability,
    indistinguishability_test,
    measurement_stability_test,
    normalize_config,
    recurrence_test,
    run_experiment,
    truncation_unit_dependence_demo,
)


def brute_recurrence_probability(k, T):
    hits = 0
    for word in itertools.product("01", repeat=k + T):
        s = "".join(word)
        if any(s[t:t + k] == s[:k] for t in range(1, T + 1)):
            hits += 1
    return Fraction(hits, 2 ** (k + T))


class TestIndistinguishability:
    def test_uniform_readings(self):
        rep = indistinguishability_test(2, 4000, 5, seed=3, d=0)
        assert rep.passed
        assert rep.statistics["p_value"] > 0.01
        assert rep.statistics["expected_probabilities"] == ["1/4"] * 4

    def test_fully_determined_region_is_identical(self):
        rep = indistinguishability_test(2, 200, 3, seed=1, d=5)
        assert rep.statistics["chi2"] == 0.0
        assert all(row["reading_fiq"] == row["reading_hidden"] for row in rep.rows)

    def test_window_at_emission_position(self):
        R = 4000
        rep = indistinguishability_test(1, R, 2, seed=9, d=2, window=["3/10"])
        band = 4 * math.sqrt(0.3 * 0.7 / R)
        for key in ("counts_fiq", "counts_hidden"):
            freq = rep.statistics[key][1] / R
            assert abs(freq - 0.3) <= band
        assert rep.passed

    def test_seed_matched_completion(self):
        rep = indistinguishability_test(3, 300, 4, seed=5, d=1, window=["1/3", "3/4"])
        assert rep.statistics["matched_mismatches"] == 0

    def test_under_powered_flag(self):
        rep = indistinguishability_test(6, 100, 1, seed=0)
        assert any("under-powered" in flag for flag in rep.flags)

    def test_too_few_replicas(self):
        with pytest.raises(ValueError):
            indistinguishability_test(2, 50, 1, seed=0)


class TestMeasurementStability:
    def test_repeat_is_identical(self):
        rep = measurement_stability_test([3, 3], 50, seed=0)
        for row in rep.rows:
            a, b = row["readings"].split("|")
            assert a == b
        assert rep.passed

    def test_refinement_extends(self):
        rep = measurement_stability_test([2, 4, 8], 50, seed=1, window=["1/3", "9/10"])
        for row in rep.rows:
            r2, r4, r8 = row["readings"].split("|")
            assert r4.startswith(r2) and r8.startswith(r4)
        assert rep.statistics["violations"] == 0

    def test_coarser_after_finer(self):
        rep = measurement_stability_test([4, 2], 50, seed=2, prefix=(1,))
        for row in rep.rows:
            r4, r2 = row["readings"].split("|")
            assert r2 == r4[:2] and r4[0] == "1"

    def test_bad_schedule(self):
        with pytest.raises(ValueError):
            measurement_stability_test([], 10, seed=0)
        with pytest.raises(ValueError):
            measurement_stability_test([2, 0], 10, seed=0)


class TestRecurrence:
    def test_one_third_period_two(self):
        rep = recurrence_test("rational", 2, 10, value="1/3")
        assert rep.statistics["first_return"] == 2 and rep.statistics["period"] == 2
        assert rep.passed

    def test_one_fifth_period_four(self):
        rep = recurrence_test("rational", 4, 10, value="1/5")
        assert rep.statistics["first_return"] == 4 and rep.statistics["period"] == 4

    def test_preperiodic_is_flagged(self):
        rep = recurrence_test("rational", 3, 10, value="1/6")
        assert rep.flags and not rep.checks

    @pytest.mark.parametrize("k, T", [(1, 2), (2, 3), (3, 5), (4, 6), (3, 8), (5, 7)])
    def test_exact_probability_matches_brute_force(self, k, T):
        assert exact_recurrence_probability(k, T) == brute_recurrence_probability(k, T)

    def test_exact_probability_near_baseline(self):
        # self-overlapping words make the exact value a little below T*2^-k
        p = float(exact_recurrence_probability(10, 50))
        assert p == pytest.approx(0.046517, abs=1e-6)
        assert p < 50 * 2**-10

    def test_small_fiq_ensemble(self):
        # T*2^-k = 1/2 is a poor approximation this coarse; only the exact value is a fair target
        rep = recurrence_test("fiq", 3, 4, R=2000, seed=4)
        exact_check = [c for c in rep.checks if "exact" in c["name"]]
        assert exact_check and exact_check[0]["passed"]
        assert rep.statistics["exact_probability"] == float(exact_recurrence_probability(3, 4))

    def test_bad_kind(self):
        with pytest.raises(ValueError):
            recurrence_test("real", 3, 4)


class TestEmergence:
    def test_small_run(self):
        rep = emergence_test([1, 10], 2000, seed=6, depth=12)
        table = {row["n"]: row for row in rep.statistics["table"]}
        assert table[1]["variance"] == pytest.approx(1 / 12, rel=0.15)
        assert table[10]["variance"] == pytest.approx(1 / 120, rel=0.15)
        ratio = table[1]["variance"] / table[10]["variance"]
        assert ratio == pytest.approx(10, rel=0.3)
        assert rep.statistics["log_log_slope"] == pytest.approx(-1, abs=0.15)

    def test_needs_replicas(self):
        with pytest.raises(ValueError):
            emergence_test([1], 1, seed=0)


class TestTruncation:
    def test_halving_loses_fourth_digit(self):
        stats = truncation_unit_dependence_demo(TruncatedReal.from_string("101", 3), "1/2").statistics
        assert stats["required_digits"] == 4
        assert stats["representable"] is False
        assert stats["lost_positions"] == [4]
        assert stats["truncation_error"] == "1/16"

    def test_unit_scale_is_lossless(self):
        stats = truncation_unit_dependence_demo(TruncatedReal.from_string("101", 3), 1).statistics
        assert stats["representable"] is True and stats["lost_positions"] == []
        assert stats["truncation_error"] == "0"

    def test_third_never_terminates(self):
        stats = truncation_unit_dependence_demo(TruncatedReal.from_string("1", 1), "1/3").statistics
        assert stats["required_digits"] == "infinite"
        assert stats["lost_positions"][-1] == "..."
        # 1/6 = 0.0010101...
        assert stats["lost_positions"][:3] == [3, 5, 7]


class TestConfig:
    def test_defaults_filled(self):
        cfg = normalize_config({"name": "truncation"})
        assert cfg["schema"] == CONFIG_SCHEMA
        assert cfg["params"] == {"bits": "101", "n": 3, "scale": "1/2"}
        assert cfg["seed"] == 0 and cfg["workers"] == 1

    @pytest.mark.parametrize(
        "config",
        [
            {"name": "nope"},
            {"name": "truncation", "colour": 1},
            {"name": "truncation", "params": {"bitz": "1"}},
            {"name": "truncation", "tolerances": {"p": 1}},
            {"name": "truncation", "schema": "other/9"},
            {"name": "truncation", "seed": -1},
        ],
    )
    def test_rejected(self, config):
        with pytest.raises(ValueError):
            normalize_config(config)

    def test_echoed_config_replays(self, tmp_path):
        first = run_experiment({"name": "measurement_stability", "seed": 12, "params": {"R": 40}})
        first.write(tmp_path / "a")
        again = run_experiment(json.loads((tmp_path / "a" / "summary.json").read_text())["config"])
        again.write(tmp_path / "b")
        for name in ("results.csv", "summary.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        assert json.loads((tmp_path / "a" / "runtime.json").read_text())["runtime_seconds"] >= 0

    def test_parallel_matches_serial(self):
        params = {"n_values": [1, 5], "R": 60, "depth": 8}
        serial = run_experiment({"name": "emergence", "seed": 2, "params": params})
        parallel = run_experiment({"name": "emergence", "seed": 2, "params": params, "workers": 2})
        assert serial.results_csv() == parallel.results_csv()
        assert serial.report.statistics == parallel.report.statistics
