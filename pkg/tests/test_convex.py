"""Sparse-feedback convex learner tests: projections, steps, bounds, stopping."""

import math

import numpy as np
import pytest

from guidedexperts.convex import (
    Ball,
    DoublingResult,
    LinearLoss,
    LinearStream,
    OcpState,
    OmdState,
    QuadraticLoss,
    QuadraticStream,
    Simplex,
    StoppingTimeExceeded,
    best_in_hindsight,
    doubling_omd_run,
    ocp_step,
    omd_step,
    project,
    project_ball,
    project_simplex,
    run_random_horizon,
    run_sparse_ogd,
    validation_stream,
)
from guidedexperts.harness import sparse_ogd_bound


class TestProjections:
    def test_identity_inside(self):
        p = np.array([0.3, -0.2])
        assert np.allclose(project_ball(p, 1.0), p)
        q = np.array([0.2, 0.8])
        assert np.allclose(project_simplex(q), q)

    def test_ball_radial_scaling(self):
        assert np.allclose(project_ball(np.array([3.0, 4.0]), 1.0), [0.6, 0.8])

    def test_simplex_threshold(self):
        assert np.allclose(project_simplex(np.array([2.0, 0.0])), [1.0, 0.0])

    def test_simplex_against_grid_oracle(self):
        rng = np.random.default_rng(0)
        grid = np.linspace(0.0, 1.0, 2001)
        candidates = np.column_stack([grid, 1.0 - grid])
        for _ in range(20):
            v = rng.uniform(-2, 2, size=2)
            got = project_simplex(v)
            dists = np.sum((candidates - v) ** 2, axis=1)
            best = candidates[np.argmin(dists)]
            assert np.allclose(got, best, atol=1e-3)

    def test_project_dispatch(self):
        assert np.allclose(project(Ball(1.0, 2), np.array([3.0, 4.0])), [0.6, 0.8])
        assert np.allclose(project(Simplex(2), np.array([2.0, 0.0])), [1.0, 0.0])

    def test_diameters(self):
        assert Ball(1.0, 2).diameter == 2.0
        assert Simplex(3).diameter == pytest.approx(math.sqrt(2.0))


class TestLosses:
    def test_linear(self):
        f = LinearLoss((1.0, -2.0))
        w = np.array([0.5, 0.5])
        assert f.value(w) == pytest.approx(-0.5)
        assert np.allclose(f.grad(w), [1.0, -2.0])
        assert f.lipschitz == pytest.approx(math.sqrt(5.0))

    def test_quadratic_gradient_finite_differences(self):
        rng = np.random.default_rng(1)
        f = QuadraticLoss(center=(0.3, -0.1, 0.7), scale=1.7)
        h = 1e-6
        for _ in range(20):
            w = rng.uniform(-1, 1, size=3)
            g = f.grad(w)
            for i in range(3):
                e = np.zeros(3)
                e[i] = h
                num = (f.value(w + e) - f.value(w - e)) / (2 * h)
                assert num == pytest.approx(g[i], rel=1e-6, abs=1e-8)

    def test_stream_interval_values(self):
        rng = np.random.default_rng(2)
        z = rng.uniform(-1, 1, size=(50, 2))
        stream = LinearStream(z)
        w = np.array([0.2, -0.7])
        direct = sum(float(z[t] @ w) for t in range(10, 37))
        assert stream.interval_value(10, 37, w) == pytest.approx(direct, rel=1e-12)
        centers = rng.uniform(-1, 1, size=(50, 2))
        qs = QuadraticStream(centers, scale=0.8)
        direct = sum(qs.loss_at(t).value(w) for t in range(5, 23))
        assert qs.interval_value(5, 23, w) == pytest.approx(direct, rel=1e-10)


class TestOcpStep:
    def test_no_feedback_no_change(self):
        state = OcpState(Ball(1.0, 2), np.array([0.5, 0.0]))
        after = ocp_step(state, np.array([1.0, 0.0]), fed=False)
        assert np.array_equal(after.w, state.w)
        assert after.feed_count == 0

    def test_first_fed_step(self):
        state = OcpState(Ball(1.0, 2), np.array([0.5, 0.0]))
        after = ocp_step(state, np.array([1.0, 0.0]), fed=True)
        assert after.feed_count == 1
        assert after.w[0] == pytest.approx(0.5 - 1.0 / math.sqrt(2.0), rel=1e-12)
        assert after.w[1] == 0.0

    def test_projection_applied(self):
        state = OcpState(Ball(1.0, 2), np.array([-0.9, 0.0]))
        after = ocp_step(state, np.array([1.0, 0.0]), fed=True)
        assert np.linalg.norm(after.w) <= 1.0 + 1e-12

    def test_always_fed_equals_plain_ogd(self):
        # Independent straight-line reimplementation as the oracle.
        rng = np.random.default_rng(3)
        z = rng.uniform(-1, 1, size=(40, 2))
        z /= np.maximum(np.linalg.norm(z, axis=1, keepdims=True), 1.0)
        state = OcpState(Ball(1.0, 2), np.zeros(2))
        for t in range(40):
            state = ocp_step(state, z[t], fed=True)
        w = np.zeros(2)
        for t in range(40):
            w = w - z[t] / math.sqrt(1.0 + (t + 1))
            n = np.linalg.norm(w)
            if n > 1.0:
                w = w / n
        assert np.allclose(state.w, w, atol=1e-12)


class TestOmd:
    def test_entropic_zero_is_uniform(self):
        state = OmdState.fresh(Simplex(3), "entropic", eta=0.7)
        assert np.allclose(state.primal(), [1 / 3] * 3)

    def test_no_feedback_no_change(self):
        state = OmdState.fresh(Simplex(2), "entropic", eta=1.0)
        after = omd_step(state, np.array([1.0, 0.0]), fed=False)
        assert np.array_equal(after.theta, state.theta)

    def test_entropic_link_closed_form(self):
        state = OmdState.fresh(Simplex(2), "entropic", eta=1.0)
        state = omd_step(state, np.array([-1.0, 0.0]), fed=True)  # theta = (1, 0)
        w = state.primal()
        assert w[0] == pytest.approx(math.e / (math.e + 1.0), rel=1e-12)
        assert w[1] == pytest.approx(1.0 / (math.e + 1.0), rel=1e-12)

    def test_entropic_link_matches_grid_argmax(self):
        eta = 0.8
        state = OmdState.fresh(Simplex(2), "entropic", eta=eta)
        state = omd_step(state, np.array([-1.3, 0.4]), fed=True)
        w = state.primal()
        grid = np.linspace(1e-6, 1 - 1e-6, 20001)
        cands = np.column_stack([grid, 1.0 - grid])
        objective = cands @ state.theta - np.array([state.regularizer_value(c) for c in cands])
        best = cands[np.argmax(objective)]
        assert np.allclose(w, best, atol=1e-3)

    def test_euclidean_link_matches_grid_argmax(self):
        eta = 0.6
        state = OmdState.fresh(Ball(1.0, 2), "euclidean", eta=eta)
        state = omd_step(state, np.array([-0.9, -2.0]), fed=True)
        w = state.primal()
        angles = np.linspace(0, 2 * math.pi, 2000, endpoint=False)
        radii = np.linspace(0, 1, 400)
        cands = np.array([[r * math.cos(a), r * math.sin(a)] for a in angles for r in radii])
        objective = cands @ state.theta - 0.5 * np.sum(cands**2, axis=1) / eta
        best = cands[np.argmax(objective)]
        assert np.allclose(w, best, atol=5e-3)

    def test_regularizer_pairing_enforced(self):
        with pytest.raises(ValueError):
            OmdState.fresh(Ball(1.0, 2), "entropic", eta=1.0)
        with pytest.raises(ValueError):
            OmdState.fresh(Simplex(2), "euclidean", eta=1.0)

    def test_regularizer_nonnegative(self):
        state = OmdState.fresh(Simplex(3), "entropic", eta=0.5)
        rng = np.random.default_rng(4)
        for _ in range(50):
            u = project_simplex(rng.uniform(0, 1, size=3))
            assert state.regularizer_value(u) >= -1e-12


class TestBestInHindsight:
    def test_all_zero(self):
        stream = LinearStream(np.zeros((10, 2)))
        _, total = best_in_hindsight(Ball(1.0, 2), stream)
        assert total == 0.0

    def test_ball_constant_direction(self):
        stream = LinearStream(np.tile([1.0, 0.0], (25, 1)))
        u, total = best_in_hindsight(Ball(1.0, 2), stream)
        assert np.allclose(u, [-1.0, 0.0])
        assert total == pytest.approx(-25.0)

    def test_simplex_vertex_enumeration(self):
        rng = np.random.default_rng(5)
        z = rng.uniform(0, 1, size=(30, 3))
        stream = LinearStream(z)
        u, total = best_in_hindsight(Simplex(3), stream)
        sums = z.sum(axis=0)
        assert total == pytest.approx(sums.min())
        assert u[np.argmin(sums)] == 1.0

    def test_quadratic_projected_mean_vs_grid(self):
        rng = np.random.default_rng(6)
        centers = rng.uniform(-2, 2, size=(20, 2))
        stream = QuadraticStream(centers, scale=1.3)
        u, total = best_in_hindsight(Ball(1.0, 2), stream)
        xs = np.linspace(-1, 1, 201)
        best_val = math.inf
        for x in xs:
            for y in xs:
                if x * x + y * y <= 1.0:
                    v = stream.interval_value(0, 20, np.array([x, y]))
                    best_val = min(best_val, v)
        assert total <= best_val + 1e-6
        assert total == pytest.approx(best_val, abs=2e-2 * abs(best_val))


class TestRunSparseOgd:
    def test_alpha_one_matches_manual(self):
        stream = validation_stream(200, seed=9)
        ball = Ball(1.0, 2)
        got = run_sparse_ogd(ball, stream, 1.0, 200, seed=0)
        state = OcpState(ball, np.zeros(2))
        loss = 0.0
        for t in range(200):
            loss += float(stream.z[t] @ state.w)
            state = ocp_step(state, stream.grad(t, state.w), fed=True)
        _, comp = stream.best_in_hindsight(ball, 0, 200)
        assert got == pytest.approx(loss - comp, rel=1e-10)

    def test_bound_holds_small(self):
        stream = validation_stream(2000, seed=10)
        ball = Ball(1.0, 2)
        for alpha in (1.0, 0.25):
            bound = sparse_ogd_bound(ball.diameter, 1.0, 2000, alpha)
            regs = [run_sparse_ogd(ball, stream, alpha, 2000, seed=s) for s in range(20)]
            assert np.mean(regs) <= bound

    def test_invalid_alpha(self):
        stream = validation_stream(10)
        with pytest.raises(ValueError):
            run_sparse_ogd(Ball(1.0, 2), stream, 0.0, 10, seed=0)

    def test_validation_stream_gradient_norms(self):
        stream = validation_stream(500, seed=11)
        assert float(np.linalg.norm(stream.z, axis=1).max()) <= 1.0 + 1e-12


class TestRandomHorizon:
    def test_alpha_one_stops_at_target(self):
        stream = validation_stream(200, seed=12)
        state = OmdState.fresh(Ball(1.0, 2), "euclidean", eta=0.1)
        t_stop, _ = run_random_horizon(state, stream, 1.0, target_feeds=50, seed=0)
        assert t_stop == 50

    def test_stopping_time_negative_binomial_oracle(self):
        # E[T_stop] = M/alpha; the mean over trials within 3 sigma of it.
        M, alpha, trials = 40, 0.5, 400
        stream = validation_stream(math.ceil(100 * M / alpha) + 1, seed=13)
        stops = []
        for s in range(trials):
            state = OmdState.fresh(Ball(1.0, 2), "euclidean", eta=0.1)
            t_stop, _ = run_random_horizon(state, stream, alpha, target_feeds=M, seed=s)
            stops.append(t_stop)
        sigma = math.sqrt(M * (1 - alpha)) / alpha
        assert np.mean(stops) == pytest.approx(M / alpha, abs=3 * sigma / math.sqrt(trials))

    def test_mean_absolute_deviation_bound(self):
        # E|T_stop - M/alpha| <= 14 sqrt(M)/alpha.
        M, alpha, trials = 40, 0.25, 300
        stream = validation_stream(math.ceil(100 * M / alpha) + 1, seed=14)
        devs = []
        for s in range(trials):
            state = OmdState.fresh(Ball(1.0, 2), "euclidean", eta=0.1)
            t_stop, _ = run_random_horizon(state, stream, alpha, target_feeds=M, seed=s)
            devs.append(abs(t_stop - M / alpha))
        assert np.mean(devs) <= 14.0 * math.sqrt(M) / alpha

    def test_regret_bound_random_horizon(self):
        # E[regret] <= R(u)/alpha + eta M L^2 / alpha + 14 L ||S|| sqrt(M)/alpha.
        M, alpha, trials = 50, 0.5, 60
        stream = validation_stream(math.ceil(100 * M / alpha) + 1, seed=15)
        eta = 1.0 / math.sqrt(M)
        L = stream.max_lipschitz()
        regs = []
        r_u = 0.0
        for s in range(trials):
            state = OmdState.fresh(Ball(1.0, 2), "euclidean", eta=eta)
            t_stop, reg = run_random_horizon(state, stream, alpha, target_feeds=M, seed=s)
            u, _ = stream.best_in_hindsight(Ball(1.0, 2), 0, t_stop)
            r_u = max(r_u, state.regularizer_value(u))
            regs.append(reg)
        bound = r_u / alpha + eta * M * L**2 / alpha + 14.0 * L * 2.0 * math.sqrt(M) / alpha
        assert np.mean(regs) <= bound

    def test_stream_too_short(self):
        stream = validation_stream(50, seed=16)
        state = OmdState.fresh(Ball(1.0, 2), "euclidean", eta=0.1)
        with pytest.raises(ValueError):
            run_random_horizon(state, stream, 0.5, target_feeds=40, seed=0)


class TestOmdFixedHorizonBound:
    def test_entropic_simplex(self):
        # E[regret] <= R(u)/alpha + eta T L^2 with L the l-infinity gradient
        # bound paired with the entropic regularizer.
        T, d = 2000, 3
        rng = np.random.default_rng(17)
        z = rng.uniform(0, 1, size=(T, d))
        stream = LinearStream(z)
        eta = 1.0 / math.sqrt(T)
        simplex = Simplex(d)
        for alpha in (1.0, 0.25):
            regs = []
            for s in range(20):
                state = OmdState.fresh(simplex, "entropic", eta=eta)
                gaps = np.random.default_rng(1000 + s)
                loss = 0.0
                for t in range(T):
                    w = state.primal()
                    loss += float(z[t] @ w)
                    if gaps.random() < alpha:
                        state = omd_step(state, stream.grad(t, w), fed=True)
                u, comp = stream.best_in_hindsight(simplex, 0, T)
                regs.append(loss - comp)
            r_u = math.log(d) / eta  # sup of the normalised entropic regularizer
            bound = r_u / alpha + eta * T * 1.0**2
            assert np.mean(regs) <= bound

    def test_euclidean_ball(self):
        T = 2000
        stream = validation_stream(T, seed=18)
        ball = Ball(1.0, 2)
        eta = 1.0 / math.sqrt(T)
        L = stream.max_lipschitz()
        for alpha in (1.0, 0.25):
            regs = []
            for s in range(20):
                state = OmdState.fresh(ball, "euclidean", eta=eta)
                gaps = np.random.default_rng(2000 + s)
                loss = 0.0
                for t in range(T):
                    w = state.primal()
                    loss += float(stream.z[t] @ w)
                    if gaps.random() < alpha:
                        state = omd_step(state, stream.grad(t, w), fed=True)
                u, comp = stream.best_in_hindsight(ball, 0, T)
                regs.append(loss - comp)
            bound = (1.0 / (2 * eta)) / alpha + eta * T * L**2
            assert np.mean(regs) <= bound


class TestLearningRateTail:
    def test_chernoff_tail(self):
        # Pr(eta_t >= sqrt(2/(t alpha))) = Pr(1 + Bin(t, alpha) <= t alpha / 2)
        # <= exp(-t alpha / 12), checked at t*alpha in {24, 48}.
        rng = np.random.default_rng(19)
        for t, alpha in ((240, 0.1), (96, 0.5)):
            draws = 1 + rng.binomial(t, alpha, size=100_000)
            freq = float(np.mean(draws <= t * alpha / 2.0))
            assert freq <= math.exp(-t * alpha / 12.0)


class TestDoubling:
    def test_block_structure_alpha_one(self):
        stream = validation_stream(7, seed=20)
        result = doubling_omd_run(Ball(1.0, 2), stream, 1.0, 7, seed=0)
        assert [b.target_feeds for b in result.blocks] == [1, 2, 4]
        assert [b.feeds for b in result.blocks] == [1, 2, 4]
        assert [b.length for b in result.blocks] == [1, 2, 4]
        assert result.total_feeds == 7

    def test_total_feeds_binomial(self):
        # Total fed steps over the horizon concentrate around alpha * T.
        T, alpha = 4000, 0.3
        stream = validation_stream(T, seed=21)
        feeds = [doubling_omd_run(Ball(1.0, 2), stream, alpha, T, seed=s).total_feeds
                 for s in range(30)]
        sigma = math.sqrt(T * alpha * (1 - alpha))
        assert np.mean(feeds) == pytest.approx(alpha * T, abs=3 * sigma / math.sqrt(30) + 1)

    def test_regret_scaling_with_horizon(self):
        # Global regret of the doubling run grows roughly like sqrt(T).
        alpha = 0.5
        points = []
        for T in [2**k for k in range(9, 14)]:
            stream = validation_stream(T, seed=22)
            regs = [doubling_omd_run(Ball(1.0, 2), stream, alpha, T, seed=s).regret_global
                    for s in range(12)]
            points.append((T, float(np.mean(regs))))
        assert all(v > 0 for _, v in points)
        lx = np.log([p[0] for p in points])
        ly = np.log([p[1] for p in points])
        slope = np.polyfit(lx, ly, 1)[0]
        assert 0.3 <= slope <= 0.7

    def test_blocks_cover_horizon(self):
        stream = validation_stream(500, seed=23)
        result = doubling_omd_run(Ball(1.0, 2), stream, 0.4, 500, seed=1)
        assert sum(b.length for b in result.blocks) == 500
