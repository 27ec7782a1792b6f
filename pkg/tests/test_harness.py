import json

import numpy as np
import pytest

from otasense import cli, harness, localization, model
from otasense.errors import HarnessError
from otasense.harness import ExperimentRecord
from otasense.model import SystemConfig


def tiny_base_cfg():
    # small enough that a design solve takes well under a second
    return SystemConfig(M=2, K=3, Na=5, Ns=4, Ntx=2, Nrx=2, T=200, P=1.0,
                        sigma_r2=1.0, sigma_c2=0.5, eta=(0.5, 0.5), scheme="shared")


def make_records():
    return [
        ExperimentRecord("na", 4.0, "shared", 1, "ok", 1.0, 1.1, 0.5,
                         0.7, 0.0, 0.3, (0.1, 0.2), 0.5, 0.9, 0.05, 3.0),
        ExperimentRecord("na", 4.0, "separated", 1, "ok", 2.0, 2.1, 1.0,
                         0.7, 1.0, 0.3, (0.1, 0.2), 0.5, 1.9, 0.02, 2.0),
        ExperimentRecord("na", 6.0, "shared", 2, "failed:InfeasibleError"),
    ]


class TestDeriveCellConfigs:
    def test_shared_split_even(self):
        cfgs = harness.derive_cell_configs(tiny_base_cfg(), "ns", 10)
        assert (cfgs["shared"].Ntx, cfgs["shared"].Nrx) == (5, 5)

    def test_shared_split_odd_remainder_to_rx(self):
        cfgs = harness.derive_cell_configs(tiny_base_cfg(), "ns", 9)
        assert (cfgs["shared"].Ntx, cfgs["shared"].Nrx) == (4, 5)

    def test_separated_split(self):
        cfgs = harness.derive_cell_configs(tiny_base_cfg(), "ns", 10)
        sep = cfgs["separated"]
        assert (sep.Nc, sep.Ntx, sep.Nrx) == (3, 3, 4)
        assert sep.Ns == 10

    def test_eta_rederived_per_scheme(self):
        cfgs = harness.derive_cell_configs(tiny_base_cfg(), "na", 6)
        sh, sep = cfgs["shared"], cfgs["separated"]
        assert sh.eta[0] != sep.eta[0]  # different Ntx
        from otasense.beamform import default_eta
        assert sh.eta[0] == default_eta(sh.Ntx, sh.Nrx, sh.T, sh.P, sh.sigma_r2)

    def test_m_sweep_resizes_eta(self):
        cfgs = harness.derive_cell_configs(tiny_base_cfg(), "m", 5)
        assert cfgs["shared"].M == 5
        assert len(cfgs["shared"].eta) == 5

    def test_unknown_variable(self):
        with pytest.raises(HarnessError):
            harness.derive_cell_configs(tiny_base_cfg(), "q", 3)


class TestRunSweep:
    def test_records_structure_and_pairing(self):
        records = harness.run_sweep(tiny_base_cfg(), "na", [5, 6],
                                    n_realizations=2, seed=1, baselines=True,
                                    n_slots=500, n_samples=10)
        # 2 values x 2 realizations x 2 schemes x (optimized + baseline)
        assert len(records) == 16
        ok = [r for r in records if r.status == "ok"]
        assert ok, "at least some cells must succeed"
        # paired seeds: same realization seed across values and schemes
        seeds = {r.seed for r in records if r.value == 5.0}
        assert seeds == {r.seed for r in records if r.value == 6.0}
        for r in ok:
            assert r.mse_closed == pytest.approx(
                r.misalignment_term + r.radar_leak_term + r.noise_term)
            assert len(r.sensing_mse) == 2
            if not r.scheme.endswith("-as"):
                assert np.isfinite(r.sdr_bound)

    def test_baseline_shares_channels_and_norm(self):
        records = harness.run_sweep(tiny_base_cfg(), "na", [6],
                                    n_realizations=1, seed=3, baselines=True,
                                    n_slots=0, n_samples=10)
        by_scheme = {r.scheme: r for r in records}
        assert set(by_scheme) == {"shared", "shared-as", "separated", "separated-as"}
        # norm matching: noise term is sigma_c2 * tr(A A^H) for both
        for s in ("shared", "separated"):
            if by_scheme[s].status == "ok" and by_scheme[s + "-as"].status == "ok":
                assert by_scheme[s + "-as"].noise_term == pytest.approx(
                    by_scheme[s].noise_term, rel=1e-10)

    def test_failures_recorded_and_sweep_continues(self):
        cfg = tiny_base_cfg()
        records = harness.run_sweep(cfg, "na", [5], n_realizations=1, seed=0,
                                    baselines=False, n_slots=0, n_samples=10,
                                    eta_margin=1e-9)
        assert records
        assert all(r.status.startswith("failed:") for r in records)

    def test_single_scheme_selection(self):
        records = harness.run_sweep(tiny_base_cfg(), "na", [5],
                                    n_realizations=1, seed=2,
                                    schemes=("shared",), baselines=False,
                                    n_slots=0, n_samples=10)
        assert {r.scheme for r in records} == {"shared"}


class TestRunSensingEval:
    def test_separated_on_threshold_shared_within(self):
        records = harness.run_sensing_eval(tiny_base_cfg(), na_values=[5, 6],
                                           ns_values=[4], n_realizations=1,
                                           seed=4, n_samples=10)
        assert len(records) == 6
        for r in records:
            if r.status != "ok":
                continue
            if r.scheme == "separated":
                assert max(r.sensing_mse) == pytest.approx(r.eta, rel=1e-6)
            else:
                assert max(r.sensing_mse) <= r.eta * (1 + 1e-6)
        assert any(r.status == "ok" for r in records)


class TestEmit:
    def test_empty_rejected(self, tmp_path):
        with pytest.raises(HarnessError, match="nonempty"):
            harness.emit([], "csv", tmp_path / "out.csv")

    def test_unknown_format_rejected(self, tmp_path):
        with pytest.raises(HarnessError):
            harness.emit(make_records(), "xml", tmp_path / "out.xml")

    def test_byte_identical_reruns(self, tmp_path):
        for fmt in ("csv", "json"):
            p1 = tmp_path / f"a.{fmt}"
            p2 = tmp_path / f"b.{fmt}"
            harness.emit(make_records(), fmt, p1)
            harness.emit(make_records(), fmt, p2)
            assert p1.read_bytes() == p2.read_bytes()

    def test_wall_time_not_serialized(self, tmp_path):
        path = tmp_path / "r.json"
        harness.emit(make_records(), "json", path)
        assert "wall_time" not in path.read_text()

    def test_json_round_trip(self, tmp_path):
        path = tmp_path / "r.json"
        records = make_records()
        harness.emit(records, "json", path)
        loaded = harness.load_records(path)
        stripped = [ExperimentRecord(**{**r.__dict__, "wall_time": 0.0})
                    for r in harness.sorted_records(records)]
        assert loaded == stripped

    def test_csv_column_order_frozen(self, tmp_path):
        path = tmp_path / "r.csv"
        harness.emit(make_records(), "csv", path)
        header = path.read_text().splitlines()[0]
        assert header == ("sweep_variable,value,scheme,seed,status,mse_closed,"
                          "mse_empirical,mse_normalized,misalignment_term,"
                          "radar_leak_term,noise_term,sensing_mse,eta,sdr_bound,gap")

    def test_rows_sorted(self, tmp_path):
        path = tmp_path / "r.csv"
        harness.emit(list(reversed(make_records())), "csv", path)
        lines = path.read_text().splitlines()[1:]
        assert lines[0].startswith("na,4,separated") or lines[0].startswith("na,4,shared")
        values = [float(l.split(",")[1]) for l in lines]
        assert values == sorted(values)


class TestAggregate:
    def test_mean_over_ok_records(self):
        records = make_records()
        cells = harness.aggregate_mean(records)
        assert ("na", 4.0, "shared", 0.5, 1) in cells
        # the failed record contributes nothing
        assert all(cell[1] != 6.0 for cell in cells)


class TestCli:
    def test_usage_error_exit_code(self, capsys):
        assert cli.main(["sweep", "--var", "bogus"]) == 1

    def test_missing_subcommand_is_usage_error(self):
        assert cli.main([]) == 1

    def test_solve_roundtrip_and_dump(self, tmp_path, capsys):
        cfg = tiny_base_cfg()
        scen = tmp_path / "scen.txt"
        model.save_scenario(scen, cfg, seed=5)
        dump = tmp_path / "prob.txt"
        code = cli.main(["solve", "--scenario", str(scen), "--dump-conic", str(dump)])
        assert code == 0
        out = capsys.readouterr().out
        assert "status: optimal" in out
        assert dump.read_text().startswith("conic-problem v1")

    def test_solve_infeasible_exit_code(self, tmp_path):
        cfg = tiny_base_cfg().replace(M=1, K=1, Na=1, Ns=2, Ntx=1, Nrx=1,
                                      eta=(1e-7,), P=0.01)
        scen = tmp_path / "scen.txt"
        model.save_scenario(scen, cfg, seed=5)
        assert cli.main(["solve", "--scenario", str(scen)]) == 2

    def test_sweep_cli_deterministic(self, tmp_path):
        scen = tmp_path / "scen.txt"
        model.save_scenario(scen, tiny_base_cfg(), seed=9)
        outs = []
        for name in ("r1.csv", "r2.csv"):
            out = tmp_path / name
            code = cli.main(["sweep", "--var", "na", "--values", "5",
                             "--scheme", "shared", "--realizations", "1",
                             "--seed", "9", "--scenario", str(scen),
                             "--out", str(out), "--slots", "200"])
            assert code == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_localize_cli(self, tmp_path):
        out = tmp_path / "loc.csv"
        code = cli.main(["localize", "--seed", "3", "--out", str(out)])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "label,x,y"
        assert lines[1].startswith("truth,")

    def test_sensing_eval_cli(self, tmp_path):
        scen = tmp_path / "scen.txt"
        model.save_scenario(scen, tiny_base_cfg(), seed=1)
        out = tmp_path / "se.json"
        code = cli.main(["sensing-eval", "--na-values", "5", "--scenario",
                         str(scen), "--seed", "1", "--out", str(out),
                         "--format", "json"])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["records"]


class TestLocalizationDemoGeomFile:
    def test_accepts_geometry_path(self, tmp_path):
        geom = localization.make_demo_geometry(n_sensors=4)
        path = tmp_path / "geom.txt"
        localization.save_geometry(path, geom)
        cfg = harness.default_localization_config(geom).replace(
            M=4, T=500, eta=(harness.default_localization_config(geom).eta[0],) * 4)
        res, rows = harness.run_localization_demo(str(path), cfg, -79.5, seed=0)
        assert rows[0][0] == "truth"
