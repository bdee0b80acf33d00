"""The discrete iterator: single steps, projection, full runs, CSV export."""

import io
import math

import numpy as np
import pytest
from numpy.random import PCG64, Generator, SeedSequence

from mannflow.discrete import (
    DIVERGED,
    ITERATION_CAP,
    RESIDUAL_MET,
    StoppingRule,
    Trajectory,
    config_fingerprint,
    mann_step,
    project_unit,
    run,
    write_trajectory_csv,
)
from mannflow.maps import (
    DomainError,
    benchmark_map,
    constant_map,
    unique_fixed_point_map,
)
from mannflow.schedules import (
    classic_mann_schedule,
    deterministic_error,
    power_schedule,
    theta_at,
    uniform_decay,
    zero_error,
)

BM = benchmark_map()


def seeded_stochastic_run(seed, alpha=1.0, amplitude=0.1, epsilon=1e-4,
                          cap=100_000):
    """One projected run with x0 and noise split from a single seed;
    mirrors the stream layout the bench harness uses."""
    ss = SeedSequence(seed, spawn_key=(0,))
    x0_ss, err_ss = ss.spawn(2)
    x0 = Generator(PCG64(x0_ss)).random()
    error = uniform_decay(amplitude, int(err_ss.generate_state(1, dtype=np.uint64)[0]))
    return run(BM, power_schedule(alpha), error, x0,
               StoppingRule(epsilon, cap), projected=True)


class TestMannStep:
    def test_arithmetic_example(self):
        # f(1/2) = 1 on the benchmark map; (1-.5)*.5 + .5*1 = 0.75
        assert BM(0.5) == 1.0
        assert mann_step(0.5, 0.5, 1.0, 0.0) == 0.75

    def test_fixed_point_is_stationary(self):
        p = 0.6
        for theta in (0.0, 0.25, 0.5, 0.75, 1.0):
            assert mann_step(p, theta, p, 0.0) == pytest.approx(p, abs=1e-15)

    def test_full_step_replaces_iterate(self):
        x0 = 0.137
        assert mann_step(x0, 1.0, BM(x0), 0.0) == BM(x0)

    def test_error_term_added_verbatim(self):
        assert mann_step(0.5, 0.5, 1.0, 0.125) == 0.875
        assert mann_step(0.0, 0.0, 0.0, -3.0) == -3.0  # may leave [0,1]


class TestProjectUnit:
    def test_three_cases(self):
        assert project_unit(-0.5) == 0.0
        assert project_unit(0.3) == 0.3
        assert project_unit(1.2) == 1.0

    def test_boundaries(self):
        assert project_unit(0.0) == 0.0
        assert project_unit(1.0) == 1.0


class TestStoppingRule:
    def test_validation(self):
        with pytest.raises(ValueError):
            StoppingRule(0.0)
        with pytest.raises(ValueError):
            StoppingRule(1e-6, 0)


class TestRun:
    def test_fixed_point_start_costs_zero_steps(self):
        traj = run(BM, power_schedule(1.0), zero_error(), 1.0 / 3.0,
                   StoppingRule(1e-6))
        assert traj.stop_reason == RESIDUAL_MET
        assert traj.iterations_used == 0
        assert traj.iterates == (1.0 / 3.0,)
        assert traj.realized_errors == ()

    def test_constant_map_reached_in_one_step(self):
        # theta_0 = 1 replaces the iterate with f(x0) = c exactly.
        traj = run(constant_map(0.3), power_schedule(1.0), zero_error(), 0.9,
                   StoppingRule(1e-12))
        assert traj.iterates[1] == 0.3
        assert traj.stop_reason == RESIDUAL_MET
        assert traj.iterations_used == 1

    def test_constant_map_product_formula(self):
        # x_n - c = (x0 - c) * prod_{k<n} (1 - theta_k), to 1e-12 for n <= 1000
        for alpha in (0.3, 1.0):
            sched = power_schedule(alpha)
            x0, c = 0.925, 0.2
            traj = run(constant_map(c), sched, zero_error(), x0,
                       StoppingRule(1e-300, 1000))
            prod = 1.0
            for n, x in enumerate(traj.iterates):
                assert x == pytest.approx(c + (x0 - c) * prod, abs=1e-12)
                prod *= 1.0 - theta_at(sched, n)

    def test_stationary_iff_fixed_point_for_power_schedules(self):
        # theta_0 = 1 for every power schedule, so the first update is
        # x_1 = f(x_0): stationary exactly when x_0 is a fixed point.
        theta0 = theta_at(power_schedule(0.7), 0)
        assert theta0 == 1.0
        for x0 in (0.25, 1.0 / 3.0, 0.9):
            x1 = mann_step(x0, theta0, BM(x0), 0.0)
            assert (x1 == x0) == (BM(x0) - x0 == 0.0)
        cm = constant_map(0.25)
        assert mann_step(0.25, theta0, cm(0.25), 0.0) == 0.25
        moving = run(BM, power_schedule(0.7), zero_error(), 0.9,
                     StoppingRule(1e-300, 1))
        assert moving.iterates[1] != moving.iterates[0]

    def test_confinement_without_projection(self):
        # zero error: every step is a convex combination, so no escape
        rng = Generator(PCG64(12345))
        cosine = unique_fixed_point_map()
        for i in range(1000):
            x0 = float(rng.random())
            alpha = float(rng.uniform(0.05, 1.0))
            map_ = BM if i % 2 == 0 else cosine
            traj = run(map_, power_schedule(alpha), zero_error(), x0,
                       StoppingRule(1e-9, 200), projected=False)
            assert traj.stop_reason != DIVERGED
            assert all(0.0 <= x <= 1.0 for x in traj.iterates)

    def test_projected_effective_error_envelope(self):
        amplitude = 0.5  # large enough that the projection clamps often
        traj = run(BM, power_schedule(0.6), uniform_decay(amplitude, 777), 0.5,
                   StoppingRule(1e-300, 3000), projected=True)
        assert traj.stop_reason == ITERATION_CAP
        for n, r in enumerate(traj.realized_errors):
            assert abs(r) <= amplitude / (1.0 + n * n)

    def test_step_difference_decay(self):
        traj = run(BM, power_schedule(0.6), uniform_decay(0.1, 99), 0.37,
                   StoppingRule(1e-300, 20_000), projected=True)
        xs = traj.iterates
        early = max(abs(xs[n + 1] - xs[n]) for n in range(100, 200))
        late = max(abs(xs[n + 1] - xs[n]) for n in range(10_000, 20_000))
        assert late < early

    def test_unprojected_escape_is_diverged(self):
        traj = run(BM, power_schedule(1.0), uniform_decay(5.0, 0), 0.5,
                   StoppingRule(1e-9, 100), projected=False)
        assert traj.stop_reason == DIVERGED
        assert all(0.0 <= x <= 1.0 for x in traj.iterates)
        assert len(traj.realized_errors) == traj.iterations_used

    def test_deterministic_error_can_diverge_immediately(self):
        bad = deterministic_error(lambda n: 5.0)
        traj = run(BM, power_schedule(1.0), bad, 0.5, StoppingRule(1e-9, 10),
                   projected=False)
        assert traj.stop_reason == DIVERGED
        assert traj.iterations_used == 0

    def test_iteration_cap(self):
        traj = run(BM, power_schedule(1.0), zero_error(), 0.9,
                   StoppingRule(1e-300, 50))
        assert traj.stop_reason == ITERATION_CAP
        assert traj.iterations_used == 50
        assert len(traj.iterates) == 51

    def test_trajectory_invariants(self):
        traj = seeded_stochastic_run(11)
        assert traj.iterations_used == len(traj.iterates) - 1
        assert len(traj.realized_errors) == traj.iterations_used
        assert all(0.0 <= x <= 1.0 for x in traj.iterates)
        assert traj.stop_reason == RESIDUAL_MET
        assert abs(BM(traj.last) - traj.last) < 1e-4

    def test_classic_mann_converges_to_cosine_fixed_point(self):
        cosine = unique_fixed_point_map()
        (p,) = cosine.known_fixed_points
        rng = Generator(PCG64(7))
        for _ in range(3):
            traj = run(cosine, classic_mann_schedule(), zero_error(),
                       float(rng.random()), StoppingRule(1e-6, 100_000))
            assert traj.stop_reason == RESIDUAL_MET
            assert abs(traj.last - p) <= 1e-4

    def test_x0_domain_check(self):
        with pytest.raises(DomainError):
            run(BM, power_schedule(1.0), zero_error(), 1.5, StoppingRule(1e-6))

    def test_store_cap_keeps_tail(self):
        traj = run(BM, power_schedule(1.0), zero_error(), 0.9,
                   StoppingRule(1e-300, 500), store_cap=100)
        assert traj.iterations_used == 500
        assert len(traj.iterates) == 100
        assert traj.truncated
        assert traj.first_stored_index == 401


class TestFingerprint:
    def test_stable_for_identical_configs(self):
        a = seeded_stochastic_run(5)
        b = seeded_stochastic_run(5)
        assert a.config_fingerprint == b.config_fingerprint
        assert a.iterates == b.iterates

    def test_sensitive_to_each_ingredient(self):
        stop = StoppingRule(1e-4)
        base = config_fingerprint(BM, power_schedule(1.0), uniform_decay(0.1, 1),
                                  0.5, stop, True)
        assert base != config_fingerprint(BM, power_schedule(0.9),
                                          uniform_decay(0.1, 1), 0.5, stop, True)
        assert base != config_fingerprint(BM, power_schedule(1.0),
                                          uniform_decay(0.1, 2), 0.5, stop, True)
        assert base != config_fingerprint(BM, power_schedule(1.0),
                                          uniform_decay(0.1, 1), 0.6, stop, True)


class TestTrajectoryCsv:
    def test_layout_and_determinism(self):
        traj = seeded_stochastic_run(3)
        sched = power_schedule(1.0)
        buf1, buf2 = io.StringIO(), io.StringIO()
        write_trajectory_csv(traj, BM, sched, buf1, metadata={"seed": 3})
        write_trajectory_csv(traj, BM, sched, buf2, metadata={"seed": 3})
        assert buf1.getvalue() == buf2.getvalue()
        lines = buf1.getvalue().splitlines()
        assert lines[0] == f"# config {traj.config_fingerprint}"
        assert lines[1] == "# seed 3"
        assert lines[2] == "n,x_n,theta_n,r_n,residual"
        rows = [ln.split(",") for ln in lines[3:]]
        assert len(rows) == len(traj.iterates)
        assert rows[0][0] == "0"
        assert float(rows[0][1]) == traj.iterates[0]
        assert float(rows[0][2]) == 1.0  # theta_0
        assert rows[-1][3] == ""  # no error applied after the final iterate
        for row, x in zip(rows, traj.iterates):
            assert float(row[4]) == BM(x) - x

    def test_truncated_run_uses_true_indices(self):
        traj = run(BM, power_schedule(1.0), zero_error(), 0.9,
                   StoppingRule(1e-300, 500), store_cap=100)
        buf = io.StringIO()
        write_trajectory_csv(traj, BM, power_schedule(1.0), buf)
        rows = [ln.split(",") for ln in buf.getvalue().splitlines()[2:]]
        assert rows[0][0] == "401"
        assert rows[-1][0] == "500"


def test_trajectory_is_immutable():
    traj = seeded_stochastic_run(1)
    with pytest.raises(AttributeError):
        traj.iterations_used = 0
    assert isinstance(traj, Trajectory)
