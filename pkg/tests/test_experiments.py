import csv
import io
import json
from pathlib import Path

import numpy as np
import pytest

from sidlab import analytics
from sidlab import experiments as ex
from sidlab.cli import main
from sidlab.sid_engine import OutcomeKind, Verdict

DATA = Path(__file__).parent / "data"
TINY = dict(w=96, m=64, n=32, ebn0=(2.0, 3.0, 1.0), n_max=8, blocks=40, seed=11)


def tiny(**kw):
    return ex.ExperimentConfig(**{**TINY, **kw})


class TestConfig:
    @pytest.mark.parametrize(
        "kw",
        [dict(m=60), dict(ebn0=(3, 2, 0.5)), dict(ebn0=(2, 3, 0)), dict(blocks=0), dict(code="ldpc"),
         dict(scenario="detached", m=64), dict(format="xml")],
    )
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            tiny(**kw)

    def test_points(self):
        assert tiny(ebn0=(1.0, 3.0, 0.5)).points() == [1.0, 1.5, 2.0, 2.5, 3.0]
        assert tiny(ebn0=(0.1, 0.3, 0.1)).points() == [0.1, 0.2, 0.3]

    def test_detached_layout(self):
        c = tiny(scenario="detached", m=0, n=96)
        assert c.scheme.tag_bits == 96


class TestCcer:
    def test_noiseless(self):
        records = ex.run_ccer_sweep(tiny(blocks=10, noiseless=True))
        assert all(r.ccer_no_sid == r.ccer_sid == 0 for r in records)
        assert all(r.mean_trials == 0 for r in records)

    def test_deterministic_csv(self):
        a = ex.records_to_csv(ex.run_ccer_sweep(tiny()), ex.CCER_COLUMNS)
        b = ex.records_to_csv(ex.run_ccer_sweep(tiny()), ex.CCER_COLUMNS)
        assert a == b
        assert a != ex.records_to_csv(ex.run_ccer_sweep(tiny(seed=12)), ex.CCER_COLUMNS)

    def test_golden_file(self, tmp_path, capsys):
        out = tmp_path / "ccer.csv"
        rc = main(["ccer", "--w", "96", "--m", "64", "--ebn0", "2:3:1", "--nmax", "8",
                   "--blocks", "40", "--seed", "11", "--out", str(out)])
        assert rc == 0
        assert out.read_text() == (DATA / "ccer_golden.csv").read_text()

    def test_workers_do_not_change_results(self, monkeypatch):
        monkeypatch.setattr(ex, "CHUNK", 7)
        one = ex.run_ccer_sweep(tiny(workers=1))
        two = ex.run_ccer_sweep(tiny(workers=2))
        assert one == two

    def test_complement_and_pairing(self):
        for strategy in ("static", "ber"):
            for r in ex.run_ccer_sweep(tiny(strategy=strategy, ebn0=(1.5, 3.0, 0.5))):
                assert abs(r.ccer_sid_complement - (1 - r.ccer_sid)) <= 1e-15
                assert 0 <= r.ccer_sid <= r.ccer_no_sid <= 1

    def test_blocks_share_noise_between_strategies(self):
        static = ex.run_ccer_sweep(tiny())
        ber = ex.run_ccer_sweep(tiny(strategy="ber"))
        for s, b in zip(static, ber):
            assert s.ccer_no_sid == b.ccer_no_sid and s.decoder_ber == b.decoder_ber

    def test_block_results_consistent(self):
        point = ex.simulate_point(tiny(), 0, 2.0)
        for b in point.blocks:
            if b.kind is OutcomeKind.VERIFIED_FIRST_TRY:
                assert b.trials == 0 and b.verdict_no_sid is b.verdict_sid
            else:
                assert b.verdict_no_sid is Verdict.INCORRECT
            if b.verdict_sid is Verdict.CORRECT and b.kind is OutcomeKind.CORRECTED:
                assert 1 <= b.max_rank <= 8


class TestHistogramAndLvalues:
    def test_noiseless_histogram_empty(self):
        hist = ex.run_histogram(tiny(noiseless=True, blocks=10))
        assert not hist.fraction.any()
        assert hist.first_try == 10 and hist.blocks == 0

    def test_histogram_counts(self):
        cfg = tiny(ebn0=(2.0, 2.0, 1.0), blocks=60)
        point = ex.simulate_point(cfg, 0, 2.0)
        hist = ex.histogram_from_point(point, cfg.w, cfg.n_max)
        corrected = [b for b in point.blocks if b.kind is OutcomeKind.CORRECTED and b.verdict_sid is Verdict.CORRECT]
        assert hist.fraction.sum() * hist.blocks == pytest.approx(len(corrected))
        assert hist.first_try + hist.blocks == 60

    def test_histogram_rows_round_trip(self):
        hist = ex.run_histogram(tiny(ebn0=(2.0, 2.0, 1.0)))
        rows = list(csv.DictReader(io.StringIO(ex.records_to_csv(ex.histogram_records(hist)))))
        back = ex.histogram_from_rows(rows, hist.w)
        assert np.allclose(back.fraction, hist.fraction, rtol=0, atol=0)

    def test_lvalues_target_zero(self):
        assert all(r.lvalues == 0 and r.reached for r in ex.run_lvalues_for_target(tiny(), 0.0))

    def test_lvalues_unreached(self):
        recs = ex.run_lvalues_for_target(tiny(ebn0=(0.0, 0.0, 1.0), n_max=2), 0.99)
        assert recs[0].lvalues == 2 and not recs[0].reached

    def test_lvalues_rejects_target(self):
        point = ex.simulate_point(tiny(blocks=5), 0, 3.0)
        with pytest.raises(ValueError):
            ex.lvalues_from_point(point, 1.0, 8)


class TestTiming:
    def test_detached_never_recomputes(self):
        r = ex.timing_report(tiny(scenario="detached", m=0, n=96), trials=2000)
        assert r.recomputations == 0 and r.comparisons == 2000
        assert r.consistent

    def test_message_ratio(self):
        r = ex.timing_report(ex.ExperimentConfig(m=192, n=128), trials=10_000)
        assert r.expected_ratio == 0.6
        assert abs(r.recompute_ratio - 0.6) <= 0.06
        assert r.consistent
        assert r.recomputations + r.comparisons == r.trials

    def test_sid_mode(self):
        r = ex.timing_report(tiny(ebn0=(2.0, 2.0, 1.0)), mode="sid")
        assert r.mode == "sid" and r.recomputations + r.comparisons <= r.trials + 40
        with pytest.raises(ValueError):
            ex.timing_report(tiny(), mode="nope")


class TestCli:
    def _run(self, capsys, *argv):
        rc = main(list(argv))
        return rc, capsys.readouterr()

    def test_predict(self, capsys):
        rc, out = self._run(capsys, "predict", "--w", "1024", "--ebn0", "3")
        assert rc == 0
        row = next(csv.DictReader(io.StringIO(out.out)))
        assert float(row["x0"]) == pytest.approx(46.81, abs=0.01) and row["lvalues"] == "47"

    def test_predict_coeffs_and_json(self, capsys, tmp_path):
        f = tmp_path / "c.json"
        f.write_text(json.dumps({"KC": -0.0002, "NC": 0.3}))
        rc, out = self._run(capsys, "predict", "--w", "1000", "--ebn0", "3", "--coeffs", str(f), "--format", "json")
        assert rc == 0
        assert json.loads(out.out)["records"][0]["a"] == pytest.approx(0.1)

    def test_minnmax(self, capsys):
        rc, out = self._run(capsys, "minnmax", "--w", "320", "--p", "0.01")
        assert rc == 0 and next(csv.DictReader(io.StringIO(out.out)))["min_nmax"] == "6"

    def test_config_file_and_override(self, capsys, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"w": 96, "m": 64, "ebn0": "2:3:1", "n_max": 8, "blocks": 40, "seed": 99}))
        rc, out = self._run(capsys, "ccer", "--config", str(cfg), "--seed", "11")
        assert rc == 0
        assert out.out == (DATA / "ccer_golden.csv").read_text()

    def test_json_metadata(self, capsys):
        rc, out = self._run(capsys, "ccer", "--w", "96", "--m", "64", "--ebn0", "3", "--nmax", "6",
                            "--blocks", "5", "--format", "json", "--noiseless")
        payload = json.loads(out.out)
        assert rc == 0 and payload["config"]["w"] == 96 and payload["config"]["noiseless"]
        assert payload["records"][0]["ccer_sid"] == 0 and "wall_seconds" in payload["records"][0]

    def test_hist_then_fit(self, capsys, tmp_path):
        out = tmp_path / "h.csv"
        x = np.arange(1, 21)
        rows = [ex.HistogramRow(3.0, int(i), float(0.2 * np.exp(-0.3 * i))) for i in x]
        out.write_text(ex.records_to_csv(rows))
        rc, res = self._run(capsys, "fit", "--input", str(out), "--w", "320")
        row = next(csv.DictReader(io.StringIO(res.out)))
        assert rc == 0 and float(row["a"]) == pytest.approx(0.3) and float(row["k"]) == pytest.approx(0.2)

    def test_timing_and_lvalues(self, capsys):
        rc, out = self._run(capsys, "timing", "--m", "192", "--n", "128", "--trials", "2000")
        assert rc == 0 and next(csv.DictReader(io.StringIO(out.out)))["consistent"] == "True"
        rc, out = self._run(capsys, "lvalues", "--w", "96", "--m", "64", "--ebn0", "3", "--nmax", "6",
                            "--blocks", "10", "--target", "0")
        assert rc == 0 and next(csv.DictReader(io.StringIO(out.out)))["lvalues"] == "0"

    @pytest.mark.parametrize(
        "argv",
        [["ccer", "--m", "100", "--n", "100"], ["ccer", "--ebn0", "3:2:1"], ["minnmax", "--w", "320"],
         ["predict", "--target", "1.5"], ["ccer", "--config", "/nonexistent.json"], ["bogus"],
         ["ccer", "--blocks", "x"]],
    )
    def test_usage_errors(self, capsys, argv):
        code = None
        try:
            code = main(argv)
        except SystemExit as exc:
            code = exc.code
        assert code == 1

    def test_runtime_error(self, capsys, tmp_path):
        bad = tmp_path / "h.csv"
        bad.write_text("ebn0_db,position,fraction\n3.0,1,0.5\n")
        assert main(["fit", "--input", str(bad), "--w", "10"]) == 2
        assert "run failed" in capsys.readouterr().err


@pytest.mark.slow
def test_turbo_sid_gain_at_2_5db():
    r = ex.run_ccer_sweep(ex.ExperimentConfig(code="turbo", ebn0=(2.5, 2.5, 1.0), blocks=300, seed=3))[0]
    assert r.ccer_sid < r.ccer_no_sid


def test_fit_on_simulated_histogram_is_positive():
    hist = ex.run_histogram(ex.ExperimentConfig(ebn0=(3.0, 3.0, 1.0), blocks=300, seed=5))
    k, a = analytics.fit_exponential(hist)
    assert a > 0
