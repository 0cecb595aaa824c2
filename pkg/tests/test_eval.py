"""Metric oracles and report round-trips."""

from __future__ import annotations

import numpy as np
import pytest

from mspf.evaluate import (
    DEFAULT_BURN_IN,
    coarse_rmse,
    emit_report,
    evaluate_run,
    fine_rmse_per_window,
    indicator_metrics,
    load_report,
)
from mspf.kernels import StreamPurpose, derive_rng
from mspf.types import FilterOutput, GroundTruth


def fake_pair(
    fine: np.ndarray | None,
    coarse: np.ndarray,
    indicators: np.ndarray,
    est_fine: np.ndarray | None = None,
    est_coarse: np.ndarray | None = None,
    est_map: np.ndarray | None = None,
) -> tuple[GroundTruth, FilterOutput]:
    states = (coarse,) if fine is None else (fine, coarse)
    ests = []
    if fine is not None:
        ests.append(fine if est_fine is None else est_fine)
    ests.append(coarse if est_coarse is None else est_coarse)
    D, T = indicators.shape
    truth = GroundTruth(states=states, measurements=states, indicators=indicators)
    out = FilterOutput(
        state_estimates=tuple(ests),
        indicator_map=indicators if est_map is None else est_map,
        indicator_freqs=np.zeros((D, T, 2)),
        ess_trace=tuple(np.ones(s.shape[:2]) for s in states),
    )
    return truth, out


def random_pair(seed_key: int, D=2, T=4, window=3, dims=2):
    rng = derive_rng(800, StreamPurpose.TEST, seed_key)
    fine = rng.standard_normal((D, T * window, dims))
    coarse = rng.standard_normal((D, T, dims))
    est_fine = rng.standard_normal((D, T * window, dims))
    est_coarse = rng.standard_normal((D, T, dims))
    indicators = rng.integers(0, 2, size=(D, T))
    return fake_pair(fine, coarse, indicators, est_fine, est_coarse)


class TestCoarseRmse:
    def test_identical_estimates_give_zero(self):
        truth, out = fake_pair(
            np.ones((2, 6, 2)), np.ones((2, 3, 2)), np.zeros((2, 3), dtype=int)
        )
        np.testing.assert_array_equal(coarse_rmse(truth, out), np.zeros((2, 2)))

    def test_constant_offset(self):
        coarse = np.zeros((2, 5, 3))
        truth, out = fake_pair(
            None, coarse, np.zeros((2, 5), dtype=int), est_coarse=coarse + 0.1
        )
        np.testing.assert_allclose(coarse_rmse(truth, out), np.full((2, 3), 0.1), atol=1e-12)

    def test_loop_oracle(self):
        truth, out = random_pair(1)
        got = coarse_rmse(truth, out)
        tru, est = truth.states[-1], out.state_estimates[-1]
        for d in range(2):
            for n in range(2):
                want = np.sqrt(np.mean([(est[d, t, n] - tru[d, t, n]) ** 2 for t in range(4)]))
                assert got[d, n] == pytest.approx(want, abs=1e-12)

    def test_shape_mismatch(self):
        truth, out = random_pair(2)
        bad = FilterOutput(
            state_estimates=(out.state_estimates[0], out.state_estimates[1][:, :-1]),
            indicator_map=out.indicator_map,
            indicator_freqs=out.indicator_freqs,
            ess_trace=out.ess_trace,
        )
        with pytest.raises(ValueError, match="coarse_rmse"):
            coarse_rmse(truth, bad)


class TestFineRmsePerWindow:
    def test_loop_oracle(self):
        truth, out = random_pair(3)
        got = fine_rmse_per_window(truth, out)
        assert got.shape == (2, 4, 2)
        tru, est = truth.states[0], out.state_estimates[0]
        for d in range(2):
            for w in range(4):
                for n in range(2):
                    sq = [(est[d, w * 3 + s, n] - tru[d, w * 3 + s, n]) ** 2 for s in range(3)]
                    assert got[d, w, n] == pytest.approx(np.sqrt(np.mean(sq)), abs=1e-12)

    def test_single_scale_rejected(self):
        truth, out = fake_pair(None, np.zeros((1, 4, 2)), np.zeros((1, 4), dtype=int))
        with pytest.raises(ValueError, match="two scales"):
            fine_rmse_per_window(truth, out)

    def test_non_nesting_rejected(self):
        truth, out = fake_pair(
            np.zeros((1, 10, 2)), np.zeros((1, 4, 2)), np.zeros((1, 4), dtype=int)
        )
        with pytest.raises(ValueError, match="nest"):
            fine_rmse_per_window(truth, out)


class TestIndicatorMetrics:
    def test_accuracy_counts_after_burn_in(self):
        indicators = np.zeros((1, 100), dtype=int)
        est = indicators.copy()
        est[0, 2] = 1   # inside the burn-in: ignored
        est[0, 40] = 1  # two mistakes among the 95 scored steps
        est[0, 41] = 1
        truth, out = fake_pair(None, np.zeros((1, 100, 1)), indicators, est_map=est)
        accuracy, delays = indicator_metrics(truth, out, burn_in=5)
        assert accuracy[0] == pytest.approx(93 / 95)
        assert delays == ((),)  # constant truth: no switches

    def test_burn_in_zero_scores_everything(self):
        indicators = np.zeros((1, 10), dtype=int)
        est = indicators.copy()
        est[0, 0] = 1
        truth, out = fake_pair(None, np.zeros((1, 10, 1)), indicators, est_map=est)
        accuracy, _ = indicator_metrics(truth, out, burn_in=0)
        assert accuracy[0] == pytest.approx(0.9)

    def test_delays(self):
        indicators = np.repeat([[0, 1, 0]], [4, 4, 4], axis=1)  # switches at steps 5, 9
        est = np.array([[0, 0, 0, 0, 0, 0, 1, 1, 1, 0, 0, 0]])
        truth, out = fake_pair(None, np.zeros((1, 12, 1)), indicators, est_map=est)
        _, delays = indicator_metrics(truth, out, burn_in=0)
        # segment two (steps 5-8) first matches model 1 at step 7: delay 2;
        # segment three (steps 9-12) still reads 1 at step 9, matches at 10
        assert delays == (((5, 2.0), (9, 1.0)),)

    def test_delay_inf_when_segment_never_matches(self):
        indicators = np.repeat([[0, 1, 0]], [4, 4, 4], axis=1)
        est = np.array([[0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]])
        truth, out = fake_pair(None, np.zeros((1, 12, 1)), indicators, est_map=est)
        _, delays = indicator_metrics(truth, out, burn_in=0)
        assert delays == (((5, float("inf")), (9, 0.0)),)

    def test_delay_ignores_estimates_before_the_switch(self):
        indicators = np.repeat([[0, 1]], [6, 6], axis=1)
        early = np.array([[1, 1, 1, 1, 1, 1, 0, 0, 1, 1, 1, 1]])
        late = np.array([[0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1]])
        truth, out = fake_pair(None, np.zeros((1, 12, 1)), indicators, est_map=early)
        _, d_early = indicator_metrics(truth, out, burn_in=0)
        truth, out = fake_pair(None, np.zeros((1, 12, 1)), indicators, est_map=late)
        _, d_late = indicator_metrics(truth, out, burn_in=0)
        assert d_early == d_late == (((7, 2.0),),)

    def test_burn_in_bounds(self):
        truth, out = fake_pair(None, np.zeros((1, 10, 1)), np.zeros((1, 10), dtype=int))
        with pytest.raises(ValueError, match="burn_in"):
            indicator_metrics(truth, out, burn_in=-1)
        with pytest.raises(ValueError, match="burn_in"):
            indicator_metrics(truth, out, burn_in=10)


class TestEvaluateRun:
    def test_bundles_all_metrics(self):
        truth, out = random_pair(4, T=8)
        report = evaluate_run(truth, out, burn_in=2)
        assert report.burn_in == 2
        np.testing.assert_array_equal(report.coarse_rmse, coarse_rmse(truth, out))
        np.testing.assert_array_equal(report.fine_rmse, fine_rmse_per_window(truth, out))
        acc, delays = indicator_metrics(truth, out, burn_in=2)
        np.testing.assert_array_equal(report.indicator_accuracy, acc)
        assert report.switch_delays == delays
        acc_full, _ = indicator_metrics(truth, out, burn_in=0)
        np.testing.assert_array_equal(report.indicator_accuracy_full, acc_full)

    def test_default_burn_in(self):
        truth, out = random_pair(5, T=8)
        assert evaluate_run(truth, out).burn_in == DEFAULT_BURN_IN

    def test_single_scale_has_no_fine_metrics(self):
        truth, out = fake_pair(None, np.zeros((1, 8, 2)), np.zeros((1, 8), dtype=int))
        assert evaluate_run(truth, out, burn_in=1).fine_rmse is None


class TestReportRoundTrip:
    def check_equal(self, a, b):
        np.testing.assert_array_equal(a.coarse_rmse, b.coarse_rmse)
        if a.fine_rmse is None:
            assert b.fine_rmse is None
        else:
            np.testing.assert_array_equal(a.fine_rmse, b.fine_rmse)
        np.testing.assert_array_equal(a.indicator_accuracy, b.indicator_accuracy)
        np.testing.assert_array_equal(a.indicator_accuracy_full, b.indicator_accuracy_full)
        assert a.switch_delays == b.switch_delays
        assert a.burn_in == b.burn_in

    def test_exact_round_trip(self, tmp_path):
        indicators = np.repeat([[0, 1, 0]], [3, 3, 2], axis=1)
        est_map = indicators.copy()
        est_map[0, 3] = 0  # one detection delay of 1
        truth, out = random_pair(6, T=8)
        truth = GroundTruth(
            states=truth.states, measurements=truth.measurements, indicators=np.tile(indicators, (2, 1))
        )
        out = FilterOutput(
            state_estimates=out.state_estimates,
            indicator_map=np.tile(est_map, (2, 1)),
            indicator_freqs=out.indicator_freqs,
            ess_trace=out.ess_trace,
        )
        report = evaluate_run(truth, out, burn_in=3)
        emit_report(report, tmp_path)
        self.check_equal(load_report(tmp_path), report)

    def test_inf_delay_round_trips(self, tmp_path):
        indicators = np.repeat([[0, 1]], [4, 4], axis=1)
        est = np.zeros((1, 8), dtype=int)
        truth, out = fake_pair(None, np.zeros((1, 8, 2)), indicators, est_map=est)
        report = evaluate_run(truth, out, burn_in=0)
        assert report.switch_delays[0][0][1] == float("inf")
        emit_report(report, tmp_path)
        self.check_equal(load_report(tmp_path), report)

    def test_no_fine_file_for_single_scale(self, tmp_path):
        truth, out = fake_pair(None, np.ones((2, 6, 2)), np.zeros((2, 6), dtype=int))
        emit_report(evaluate_run(truth, out, burn_in=1), tmp_path)
        assert not (tmp_path / "fine_rmse.csv").exists()
        assert (tmp_path / "coarse_rmse.csv").exists()
        loaded = load_report(tmp_path)
        assert loaded.fine_rmse is None

    def test_summary_contents(self, tmp_path):
        truth, out = random_pair(7, T=8)
        report = evaluate_run(truth, out, burn_in=4)
        emit_report(report, tmp_path)
        lines = (tmp_path / "summary.txt").read_text().splitlines()
        assert lines[0] == "burn_in 4"
        assert lines[1].startswith("coarse rmse min ")
        assert lines[2].startswith("fine rmse min ")
        tokens = lines[1].split()
        assert float(tokens[3]) == report.coarse_rmse.min()
        assert float(tokens[5]) == report.coarse_rmse.mean()
        assert float(tokens[7]) == report.coarse_rmse.max()

    def test_emitted_files_are_deterministic(self, tmp_path):
        truth, out = random_pair(8, T=8)
        report = evaluate_run(truth, out, burn_in=1)
        emit_report(report, tmp_path / "a")
        emit_report(report, tmp_path / "b")
        for name in ("coarse_rmse.csv", "fine_rmse.csv", "indicator_accuracy.csv",
                     "switch_delays.csv", "summary.txt"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
