import numpy as np
import pytest

from otasense import harness, localization, model
from otasense.errors import ConfigError, DimensionMismatchError
from otasense.localization import (Geometry, aoa_baseline, beta_hat, demodulate,
                                   local_position, make_demo_geometry, modulate,
                                   phase_delay_matrix, synth_trm, theta_hat)


def tiny_geometry(n_tx=1, n_rx=1, coords=(0.05, 0.15), wavelength=0.2,
                  origins=(0.0,), truth=(5.0, 30.0)):
    return Geometry(sensor_antenna_y=[np.asarray(coords) + y for y in origins],
                    sensor_origin_y=list(origins), n_tx=n_tx, n_rx=n_rx,
                    wavelength=wavelength, target_truth=truth)


class TestGeometry:
    def test_antenna_split(self):
        g = make_demo_geometry()
        assert g.n_sensors == 10
        assert np.allclose(g.tx_coords(3), [6.0, 6.1])
        assert np.allclose(g.rx_coords(3), [6.2, 6.3])

    def test_strictly_increasing_required(self):
        with pytest.raises(ConfigError):
            tiny_geometry(coords=(0.1, 0.1))

    def test_file_round_trip(self, tmp_path):
        g = make_demo_geometry(n_sensors=3)
        path = tmp_path / "geom.txt"
        localization.save_geometry(path, g)
        g2 = localization.load_geometry(path)
        assert g2.n_tx == g.n_tx and g2.n_rx == g.n_rx
        assert g2.wavelength == g.wavelength
        assert g2.target_truth == g.target_truth
        for m in range(3):
            assert np.allclose(g2.sensor_antenna_y[m], g.sensor_antenna_y[m])

    def test_shared_offsets_line(self, tmp_path):
        path = tmp_path / "geom.txt"
        path.write_text("wavelength = 0.2\nn_tx = 1\nn_rx = 1\n"
                        "truth = 1.0, 2.0\nsensors = 0.0, 5.0\n"
                        "offsets = 0.0, 0.1\n")
        g = localization.load_geometry(path)
        assert np.allclose(g.sensor_antenna_y[1], [5.0, 5.1])


class TestPhaseDelay:
    def test_zero_angle_gives_ones(self):
        g = tiny_geometry(n_tx=2, n_rx=2, coords=(0.0, 0.1, 0.2, 0.3))
        assert np.allclose(phase_delay_matrix(g, 0, 0.0), np.ones((2, 2)))

    def test_hand_value_full_turn(self):
        # lambda=0.2, y_tx + y_rx = 0.2, theta=pi/2: exp(-2 pi j) = 1
        g = tiny_geometry(coords=(0.05, 0.15))
        phi = phase_delay_matrix(g, 0, np.pi / 2)
        assert phi.shape == (1, 1)
        assert phi[0, 0] == pytest.approx(1.0, abs=1e-12)

    def test_unit_modulus(self):
        g = make_demo_geometry()
        for theta in (-1.2, -0.3, 0.7):
            assert np.allclose(np.abs(phase_delay_matrix(g, 2, theta)), 1.0)


class TestSynthTrm:
    def test_zero_amplitude(self):
        g = make_demo_geometry()
        assert np.all(synth_trm(g, 0, 0.0, 0.4) == 0)

    def test_unit_amplitude_zero_angle(self):
        g = make_demo_geometry()
        assert np.allclose(synth_trm(g, 0, 1.0, 0.0), np.ones((2, 2)))

    def test_frobenius_norm(self):
        g = make_demo_geometry()
        G = synth_trm(g, 1, 0.3 - 0.4j, 0.2)
        assert np.linalg.norm(G) == pytest.approx(0.5 * np.sqrt(4), rel=1e-12)


class TestBetaHat:
    def test_exact_recovery(self):
        g = make_demo_geometry()
        rng = np.random.default_rng(0)
        W = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        beta = 0.7 - 0.2j
        G = synth_trm(g, 4, beta, 0.3)
        est = beta_hat(G, W, g, 4, 0.3)
        assert abs(est - beta) < 1e-10

    def test_zero_input(self):
        g = make_demo_geometry()
        assert beta_hat(np.zeros((2, 2)), np.eye(2), g, 0, 0.1) == 0

    def test_perturbation_linear(self):
        g = make_demo_geometry()
        rng = np.random.default_rng(1)
        W = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        beta, theta = 1.0 + 0.5j, 0.25
        G = synth_trm(g, 2, beta, theta)
        N = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        errs = []
        for eps in (1e-3, 1e-6):
            est = beta_hat(G + eps * N, W, g, 2, theta)
            errs.append(abs(est - beta))
        assert errs[0] < 10 * 1e-3 and errs[1] < 10 * 1e-6


class TestThetaHat:
    def test_on_grid_exact(self):
        g = make_demo_geometry()
        grid = np.linspace(-1.0, 1.0, 201)
        theta0 = grid[140]
        G = synth_trm(g, 3, 1.0, theta0)
        W = np.eye(2)
        assert theta_hat(G, W, g, 3, grid=grid, refine=False) == pytest.approx(theta0)

    def test_off_grid_refined(self):
        g = make_demo_geometry()
        theta0 = 0.31047
        G = synth_trm(g, 5, 0.8, theta0)
        rng = np.random.default_rng(2)
        W = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        est = theta_hat(G, W, g, 5, refine=True)
        assert abs(est - theta0) < 1e-4

    def test_argmax_contract(self):
        g = make_demo_geometry()
        rng = np.random.default_rng(3)
        G = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        W = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        grid = np.linspace(-1.5, 1.5, 301)
        est = theta_hat(G, W, g, 0, grid=grid, refine=True)
        obj_est = localization.angle_objective(G, W, g, 0, est)[0]
        assert obj_est >= np.max(localization.angle_objective(G, W, g, 0, grid)) - 1e-12

    def test_scale_invariance(self):
        g = make_demo_geometry()
        rng = np.random.default_rng(4)
        G = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        W = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        grid = np.linspace(-1.0, 1.0, 50)
        a = localization.angle_objective(G, W, g, 0, grid)
        b = localization.angle_objective(3.0 * G, W, g, 0, grid)
        assert np.allclose(b, 9.0 * a, rtol=1e-10)

    def test_empty_grid_rejected(self):
        g = make_demo_geometry()
        with pytest.raises(DimensionMismatchError):
            theta_hat(np.eye(2), np.eye(2), g, 0, grid=np.array([]))


class TestLocalPosition:
    def test_boresight(self):
        g = tiny_geometry()
        assert local_position(0.0, 30.0, g, 0) == pytest.approx((0.0, 30.0))

    def test_round_trip_truth(self):
        g = make_demo_geometry()
        xt, yt = 5.0, 30.0
        m = 2
        y0 = g.sensor_origin_y[m]
        theta = np.arctan2(xt, yt - y0)
        d = np.hypot(xt, yt - y0)
        x, y = local_position(theta, d, g, m)
        assert abs(x - xt) < 1e-10 and abs(y - yt) < 1e-10

    def test_broadside(self):
        g = tiny_geometry(origins=(2.0,))
        x, y = local_position(np.pi / 2, 7.0, g, 0)
        assert x == pytest.approx(7.0)
        assert y == pytest.approx(2.0)

    def test_round_trip_across_angle_range(self):
        g = tiny_geometry(origins=(3.0,))
        d = 12.5
        for theta in np.linspace(-np.pi / 2 + 1e-3, np.pi / 2 - 1e-3, 41):
            x, y = local_position(theta, d, g, 0)
            back_theta = np.arctan2(x, y - 3.0)
            back_d = np.hypot(x, y - 3.0)
            assert abs(back_theta - theta) < 1e-10
            assert abs(back_d - d) < 1e-10


class TestModulation:
    def test_reference_maps_to_zero(self):
        assert modulate((5.0, 30.0), 5.0, 30.0) == pytest.approx((0.0, 0.0))

    def test_double_maps_to_one(self):
        assert modulate((10.0, 30.0), 5.0, 30.0)[0] == pytest.approx(1.0)

    def test_mean_recovery_noiseless(self):
        # M sensors reporting the truth exactly: demodulated sum recovers it
        M = 7
        syms = np.array([modulate((5.0, 30.0), 5.0, 30.0) for _ in range(M)])
        received = syms.sum(axis=0)
        out = demodulate(received, 5.0, 30.0, M)
        assert abs(out[0] - 5.0) < 1e-9 and abs(out[1] - 30.0) < 1e-9

    def test_demodulate_averages(self):
        received = np.array([modulate((4.0, 28.0), 5.0, 30.0),
                             modulate((6.0, 32.0), 5.0, 30.0)]).sum(axis=0)
        out = demodulate(received, 5.0, 30.0, 2)
        assert out == pytest.approx((5.0, 30.0))

    def test_positive_references_required(self):
        with pytest.raises(ConfigError):
            modulate((1.0, 1.0), 0.0, 1.0)


class TestAoaBaseline:
    def test_exact_angles_on_grid(self):
        g = make_demo_geometry()
        xt, yt = 5.0, 30.0
        thetas = [np.arctan2(xt, yt - y0) for y0 in g.sensor_origin_y]
        positions = [g.sensor_position(m) for m in range(10)]
        xs = np.arange(4.0, 6.01, 0.25)
        ys = np.arange(29.0, 31.01, 0.25)
        assert (5.0, 30.0) in [(x, y) for x in xs for y in ys]
        est = aoa_baseline(thetas, positions, (xs, ys))
        assert est == pytest.approx((xt, yt))

    def test_single_sensor_rejected(self):
        with pytest.raises(DimensionMismatchError):
            aoa_baseline([0.1], [(0.0, 0.0)], (np.array([1.0]), np.array([2.0])))

    def test_perturbed_angles_near_truth_vs_bruteforce(self):
        # triangulation from near-parallel bearings dilutes angle noise along
        # range, so judge against a metre-scale grid and the brute-force oracle
        g = make_demo_geometry()
        xt, yt = 5.0, 30.0
        positions = [g.sensor_position(m) for m in range(10)]
        xs = np.arange(1.0, 9.0001, 1.0)
        ys = np.arange(25.0, 35.0001, 1.0)
        rng = np.random.default_rng(5)
        errs = []
        for _ in range(10):
            thetas = np.array([np.arctan2(xt, yt - y0) for y0 in g.sensor_origin_y])
            thetas = thetas + 0.01 * rng.standard_normal(10)
            est = aoa_baseline(thetas, positions, (xs, ys))
            best, best_cost = None, np.inf
            for x in xs:
                for y in ys:
                    cost = sum((th - np.arctan2(x - px, y - py)) ** 2
                               for th, (px, py) in zip(thetas, positions))
                    if cost < best_cost:
                        best, best_cost = (x, y), cost
            assert est == pytest.approx(best)
            errs.append(np.hypot(est[0] - xt, est[1] - yt))
        assert np.median(errs) <= np.sqrt(2.0) + 1e-9  # one cell diagonal

    def test_grid_must_exclude_sensors(self):
        with pytest.raises(DimensionMismatchError):
            aoa_baseline([0.1, 0.2], [(0.0, 0.0), (0.0, 2.0)],
                         (np.array([0.0, 1.0]), np.array([0.0, 1.0])))


class TestRunLocalization:
    def test_noiseless_square_pipeline_is_lossless(self):
        # zero noise + Ntx=K exact zero-forcing: the aggregated position is
        # the mean of the per-sensor positions, and both sit on the truth
        geom = make_demo_geometry(n_sensors=4)
        cfg = harness.default_localization_config(geom)
        cfg = cfg.replace(M=4, eta=(cfg.eta[0],) * 4, T=200,
                          sigma_r2=1e-300, sigma_c2=1e-300)
        res = localization.run_localization(cfg, geom, seed=0, beta=1.0,
                                            ideal_statistic=True)
        mean_pos = np.mean([e.position for e in res.estimates], axis=0)
        assert np.allclose(res.aggregated, mean_pos, atol=1e-9)
        for est, th in zip(res.estimates, res.theta_true):
            assert abs(est.theta - th) < 2e-5  # golden-section tolerance
            # amplitude picks up O(d phi/d theta) of the angle tolerance
            assert abs(est.beta - 1.0) < 1e-3

    def test_config_validation(self):
        geom = make_demo_geometry()
        cfg = harness.default_localization_config(geom).replace(K=3)
        with pytest.raises(ConfigError, match="K=2"):
            localization.run_localization(cfg, geom, seed=0)

    def test_demo_runs_and_reports(self):
        geom = make_demo_geometry()
        cfg = harness.default_localization_config(geom)
        res, rows = harness.run_localization_demo(geom, cfg, -79.5, seed=2)
        labels = [r[0] for r in rows]
        assert labels[:3] == ["truth", "aggregated", "aoa"]
        assert len(rows) == 3 + 10
        err = np.hypot(res.aggregated[0] - res.truth[0],
                       res.aggregated[1] - res.truth[1])
        assert err < 0.5
