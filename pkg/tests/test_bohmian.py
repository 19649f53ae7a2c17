import math

import numpy as np
import pytest

from nsdisim.bohmian import (advance_walkers, classify, sample_initial,
                             velocity_at, TrajectoryEnsemble)
from nsdisim.errors import OutOfDomainError
from nsdisim.grid import (Grid2D, SplitStepPropagator, WaveFunction2D,
                          build_potential, gaussian_packet, relax_ground_state)
from nsdisim.laser import PulseSpec, field_at


def ks_statistic(samples, x, cell_prob):
    """Two-sample-style KS distance: empirical CDF vs quadrature CDF."""
    cdf_grid = np.cumsum(cell_prob)
    cdf_grid /= cdf_grid[-1]
    edges = x + (x[1] - x[0]) / 2
    emp = np.searchsorted(np.sort(samples), edges, side="right") / len(samples)
    return float(np.max(np.abs(emp - cdf_grid)))


# ---------------------------------------------------------------------------
# sampling

def test_sampler_degenerate_distribution():
    g = Grid2D(10.0, 32)
    vals = np.zeros((32, 32), dtype=np.complex128)
    vals[20, 9] = 1.0
    psi = WaveFunction2D(vals, g, 0.0).normalized()
    ens = sample_initial(psi, 200, seed=3)
    assert np.all(np.abs(ens.positions[:, 0] - g.x[20]) <= g.dx / 2)
    assert np.all(np.abs(ens.positions[:, 1] - g.x[9]) <= g.dx / 2)


def test_sampler_symmetric_mean(small_ground):
    ens = sample_initial(small_ground.psi, 10_000, seed=5)
    s = ens.positions[:, 0] + ens.positions[:, 1]
    assert abs(s.mean()) < 3 * s.std() / math.sqrt(len(s))


def test_sampler_second_moment_matches_quadrature(small_ground, small_grid):
    ens = sample_initial(small_ground.psi, 10_000, seed=6)
    dens = np.abs(small_ground.psi.values) ** 2
    x2_quad = float(np.sum(dens * small_grid.x[:, None] ** 2) * small_grid.dx**2)
    sample = ens.positions[:, 0] ** 2
    se = sample.std() / math.sqrt(len(sample))
    assert abs(sample.mean() - x2_quad) < 3 * se


def test_sampler_marginal_ks(small_ground, small_grid):
    ens = sample_initial(small_ground.psi, 4000, seed=9)
    dens = np.abs(small_ground.psi.values) ** 2
    marginal = dens.sum(axis=1)
    ks = ks_statistic(ens.positions[:, 0], small_grid.x, marginal)
    assert ks < 0.05


def test_sampler_rejects_bad_count(small_ground):
    with pytest.raises(ValueError):
        sample_initial(small_ground.psi, 0, seed=1)


def test_sampler_deterministic(small_ground):
    a = sample_initial(small_ground.psi, 512, seed=123)
    b = sample_initial(small_ground.psi, 512, seed=123)
    assert np.array_equal(a.positions, b.positions)


# ---------------------------------------------------------------------------
# velocities

def test_velocity_zero_for_real_state(small_ground):
    pts = np.array([[0.5, -1.0], [2.0, 2.0], [-3.5, 0.25]])
    v = velocity_at(small_ground.psi, pts)
    assert np.max(np.abs(v)) < 1e-10


def test_velocity_plane_wave():
    g = Grid2D(20.0, 256)
    k1 = 2 * np.pi / g.half_width  # on the momentum lattice: periodic phase
    k2 = -np.pi / g.half_width
    phase = np.exp(1j * (k1 * g.x[:, None] + k2 * g.x[None, :]))
    psi = WaveFunction2D(phase.astype(np.complex128), g, 0.0)
    rng = np.random.default_rng(0)
    pts = rng.uniform(-8, 8, size=(64, 2))
    v = velocity_at(psi, pts)
    assert np.max(np.abs(v[:, 0] - k1)) < 1e-6
    assert np.max(np.abs(v[:, 1] - k2)) < 1e-6


def test_velocity_quadratic_phase():
    g = Grid2D(20.0, 256)
    a = 0.02
    r2 = g.x[:, None] ** 2 + g.x[None, :] ** 2
    psi = WaveFunction2D(np.exp(0.5j * a * r2), g, 0.0)
    rng = np.random.default_rng(1)
    pts = rng.uniform(-10, 10, size=(64, 2))
    v = velocity_at(psi, pts)
    assert np.max(np.abs(v - a * pts)) < 1e-5


def test_velocity_out_of_domain(small_ground):
    with pytest.raises(OutOfDomainError):
        velocity_at(small_ground.psi, (35.0, 0.0))


def test_velocity_clamped_near_nodes():
    g = Grid2D(10.0, 64)
    vals = np.full((64, 64), 1e-16, dtype=np.complex128)
    vals[32, 32] = 1.0  # sharp peak: huge log-derivatives next to it
    psi = WaveFunction2D(vals, g, 0.0)
    v = velocity_at(psi, np.array([[g.x[33], g.x[32]]]), v_cap=10.0)
    assert np.all(np.abs(v) <= 10.0)
    assert np.all(np.isfinite(v))


# ---------------------------------------------------------------------------
# advancing

def test_advance_zero_velocity_field_is_static(small_ground):
    # frozen real state on both ends of the step: velocity field is zero
    ens = sample_initial(small_ground.psi, 300, seed=2)
    start = ens.positions.copy()
    tc = 2 * math.pi / (45.5633526 / 248.0)
    dt = 0.03
    for _ in range(int(round(tc / dt))):
        advance_walkers(ens, small_ground.psi, small_ground.psi, dt)
    assert np.max(np.abs(ens.positions - start)) < 1e-6


def test_advance_field_free_drift_bounded(small_grid, small_potential, small_ground):
    # propagated ground state: residual drift reflects how far the relaxed
    # state is from an exact eigenstate of the discrete stepper (~1e-4/cycle)
    ens = sample_initial(small_ground.psi, 300, seed=2)
    start = ens.positions.copy()
    dt = 0.01
    kern = SplitStepPropagator(small_grid, small_potential, dt, "real")
    vals = small_ground.psi.values.copy()
    tc = 2 * math.pi / (45.5633526 / 248.0)
    t = 0.0
    for _ in range(int(round(tc / dt))):
        new = kern.step_raw(vals, 0.0)
        advance_walkers(ens, WaveFunction2D(vals, small_grid, t),
                        WaveFunction2D(new, small_grid, t + dt), dt)
        vals = new
        t += dt
    assert np.max(np.abs(ens.positions - start)) < 1e-3


def test_advance_rigid_plane_wave_drift():
    g = Grid2D(20.0, 512)
    base = gaussian_packet(g, sigma=3.0)  # smooth base keeps stencil error tiny
    k = 2 * np.pi / g.half_width
    vals = base.values * np.exp(1j * k * g.x[:, None])
    psi = WaveFunction2D(vals, g, 0.0)
    ens = sample_initial(psi, 400, seed=4)
    start = ens.positions.copy()
    dt = 0.05
    n = 20
    for _ in range(n):
        advance_walkers(ens, psi, psi, dt)  # frozen wave: constant velocity
    expected = start + np.array([k * n * dt, 0.0])
    assert np.max(np.abs(ens.positions - expected)) < 1e-6 * n


def test_advance_self_convergence_in_dt(small_grid, small_potential, small_ground):
    pulse = PulseSpec(shape="trapezoid", intensity_w_cm2=1e14, n_cycles=2,
                      ramp_cycles=1)

    def final_positions(dt):
        ens = sample_initial(small_ground.psi, 400, seed=8)
        kern = SplitStepPropagator(small_grid, small_potential, dt, "real")
        vals = small_ground.psi.values.copy()
        n = int(round(pulse.duration / dt))
        t = 0.0
        for _ in range(n):
            new = kern.step_raw(vals, field_at(pulse, t + dt / 2))
            advance_walkers(ens, WaveFunction2D(vals, small_grid, t),
                            WaveFunction2D(new, small_grid, t + dt), dt)
            vals = new
            t += dt
        return ens.positions.copy()

    pos_a = final_positions(0.03)
    pos_b = final_positions(0.015)
    median_shift = np.median(np.abs(pos_a - pos_b))
    assert median_shift < small_grid.dx / 10


def test_advance_flags_dead_walkers(small_grid, small_ground):
    psi_bad = WaveFunction2D(small_ground.psi.values.copy(), small_grid, 0.0)
    psi_bad.values[:, :] = np.nan
    ens = sample_initial(small_ground.psi, 50, seed=10)
    advance_walkers(ens, psi_bad, psi_bad, 0.03)
    assert ens.n_dead == 50
    assert np.all(np.isfinite(ens.positions))  # dead walkers frozen, not NaN


# ---------------------------------------------------------------------------
# classification

def _ensemble_at(positions):
    g = Grid2D(30.0, 64)
    ens = TrajectoryEnsemble(positions=np.asarray(positions, dtype=float),
                             grid=g, seed=0)
    ens.record(0.0)
    return ens


def test_classify_definitions():
    ens = _ensemble_at([[6.0, -7.0], [6.0, 1.0], [1.0, -2.0], [8.0, 9.0]])
    channel, quadrant = classify(ens, threshold=5.0, when=0.0)
    assert list(channel) == ["NSDI", "SI", "bound", "NSDI"]
    assert list(quadrant) == ["Q24", "none", "none", "Q13"]


def test_classify_requires_sampled_time():
    ens = _ensemble_at([[0.0, 0.0]])
    with pytest.raises(ValueError):
        classify(ens, when=1.23)


def test_classify_matches_di_yield():
    # equivariance: the walker NSDI fraction tracks the |Psi|^2 corner
    # probability within binomial error (box chosen so nothing is absorbed)
    from nsdisim.observables import di_yield

    g = Grid2D(60.0, 256)
    pot = build_potential(g)
    psi0 = relax_ground_state(g, dt_imag=0.01, tol=1e-10, pot=pot).psi
    pulse = PulseSpec(shape="trapezoid", intensity_w_cm2=1.2e15, n_cycles=2,
                      ramp_cycles=1)
    dt = 0.03
    t_check = 55.0
    n = int(round(t_check / dt))
    kern = SplitStepPropagator(g, pot, dt, "real")
    ens = sample_initial(psi0, 4000, seed=11)
    vals = psi0.values.copy()
    t = 0.0
    for _ in range(n):
        new = kern.step_raw(vals, field_at(pulse, t + dt / 2))
        advance_walkers(ens, WaveFunction2D(vals, g, t),
                        WaveFunction2D(new, g, t + dt), dt)
        vals = new
        t += dt
    ens.record(t)
    yield_exact = di_yield(WaveFunction2D(vals, g, t))
    channel, _ = classify(ens, threshold=5.0, when=t)
    frac = float(np.mean(channel == "NSDI"))
    se = math.sqrt(yield_exact * (1 - yield_exact) / ens.n_walkers)
    assert abs(frac - yield_exact) < 2 * se


def test_equivariance_ks_through_three_cycles(small_grid, small_potential,
                                              small_ground):
    pulse = PulseSpec(shape="trapezoid", intensity_w_cm2=2e14, n_cycles=6)
    dt = 0.03
    tc = pulse.cycle_period
    n = int(round(3 * tc / dt))
    kern = SplitStepPropagator(small_grid, small_potential, dt, "real")
    ens = sample_initial(small_ground.psi, 10_000, seed=13)
    vals = small_ground.psi.values.copy()
    t = 0.0
    for _ in range(n):
        new = kern.step_raw(vals, field_at(pulse, t + dt / 2))
        advance_walkers(ens, WaveFunction2D(vals, small_grid, t),
                        WaveFunction2D(new, small_grid, t + dt), dt)
        vals = new
        t += dt
    dens = np.abs(vals) ** 2
    for axis in (0, 1):
        marginal = dens.sum(axis=1 - axis)
        ks = ks_statistic(ens.positions[:, axis], small_grid.x, marginal)
        assert ks < 0.08
