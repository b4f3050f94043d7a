import math

import numpy as np
import pytest

from motoo_lab import rng, sim
from motoo_lab.model import Diffusion, Drift, ModelSpec, brownian_model, reference_model

from helpers import constant_model

BACKENDS = ("numba", "numpy")


# --------------------------------------------------------------------------
# primary paths


def test_brownian_path_is_cumulative_sum():
    g = sim.simulate_primary(brownian_model(), 5.0, 0.01, 11)
    assert g.values[0] == 0.0
    np.testing.assert_array_equal(g.values[1:], np.cumsum(g.dW))
    np.testing.assert_array_equal(g.dW, rng.brownian_increments(11, 500, 0.01))


def test_affine_in_driver():
    g = sim.simulate_primary(constant_model(2.0, x0=5.0), 5.0, 0.01, 3)
    np.testing.assert_allclose(g.values, 5.0 + 2.0 * np.concatenate([[0.0], np.cumsum(g.dW)]), rtol=0, atol=1e-12)


def test_grid_invariants():
    g = sim.simulate_primary(reference_model(), 1.0, 0.1, 0, n_paths=3)
    assert g.values.shape == (3, 11) and g.dW.shape == (3, 10)
    assert g.t[0] == 0.0 and g.dt == pytest.approx(0.1)
    assert g.path(2).values.tolist() == g.values[2].tolist()


def test_ensemble_member_equals_single_run():
    ens = sim.simulate_primary(reference_model(), 2.0, 0.01, 77, n_paths=6)
    one = sim.simulate_primary(reference_model(), 2.0, 0.01, 77, n_paths=1, first_path=4)
    assert ens.values[4].tobytes() == one.values.tobytes()


def test_non_finite_state_reports_step():
    spec = ModelSpec(Drift.of("linear", a=-1e5), Diffusion.of("constant", value=1.0), 1.0, 0.0, 1.0, 1.0, 1.0, 1.0)
    with pytest.raises(sim.SimulationError) as info:
        sim.simulate_primary(spec, 100.0, 0.1, 0)
    assert 0 < info.value.step < 1000


def test_argument_errors():
    with pytest.raises(ValueError):
        sim.simulate_primary(brownian_model(), 0.01, 0.1, 0)
    with pytest.raises(ValueError, match="stored-path limit"):
        sim.simulate_primary(brownian_model(), 1e6, 1e-2, 0)
    with pytest.raises(ValueError):
        sim.simulate_sqbessel(0.0, 1.0, 1.0, 0.1, 0)


@pytest.mark.slow
def test_second_moment_bracket():
    # E X(T)^2 lies between x0^2 + (2 inf xf + K1^2) T and x0^2 + (2 rho + K2^2) T
    spec = reference_model()
    T, n = 100.0, 10_000
    x_end = np.empty(n)
    for first in range(0, n, 2000):
        st = sim.coupled_stream(spec, T, 1e-3, 123, n_paths=2000, first_path=first)
        x_end[first : first + 2000] = st.state_end[:, 0]
    z = x_end**2
    se = z.std(ddof=1) / math.sqrt(n)
    lo = spec.x0**2 + (2 * spec.mu * spec.k1_sq + spec.k1_sq) * T
    hi = spec.x0**2 + (2 * spec.rho + spec.k2_sq) * T
    assert lo - 3 * se <= z.mean() <= hi + 3 * se


# --------------------------------------------------------------------------
# coupled triple


def test_coupled_structure():
    spec = reference_model(x0=1.5)
    tr = sim.simulate_coupled(spec, 3.0, 0.01, 9)
    np.testing.assert_array_equal(tr.z, tr.x**2)
    assert tr.z_u[0] - tr.z[0] == 1.0
    assert tr.z_l[0] == tr.z[0] == 2.25
    assert np.all(tr.z_l >= 0) and np.all(tr.z_u >= 0)
    prim = sim.simulate_primary(spec, 3.0, 0.01, 9)
    assert prim.values.tobytes() == tr.x.tobytes()


def test_gamma_at_zero_is_plus_one():
    spec = reference_model(x0=0.0)
    tr = sim.simulate_coupled(spec, 0.1, 0.01, 5)
    dt, dw0 = 0.01, tr.grid.dW[0]
    g1 = spec.diffusion(1.0)
    # X[0] = 0, so the Z-family driver at step 0 is +dW[0]
    expect = 1.0 + (2 * spec.rho + g1 * g1) * dt + 2.0 * g1 * dw0
    assert tr.z_u[1] == pytest.approx(max(expect, 0.0), rel=1e-15)


def test_drift_free_lower_process_tracks_square():
    rms = []
    for dt in (1e-2, 1e-3, 1e-4):
        tr = sim.simulate_coupled(brownian_model(), 1.0, dt, 3, n_paths=50)
        rms.append(float(np.sqrt(np.mean((tr.z - tr.z_l) ** 2))))
    assert rms[0] > rms[1] > rms[2]
    assert rms[2] <= 10 * math.sqrt(1e-4)


def test_ordering_violation_counter():
    tr = sim.simulate_coupled(reference_model(), 2.0, 0.01, 1, n_paths=4)
    assert np.all(tr.ordering_violations(tol=np.inf) == 0)
    direct = ((tr.z_l > tr.z + 0.1) | (tr.z > tr.z_u + 0.1)).sum(axis=1)
    np.testing.assert_array_equal(tr.ordering_violations(), direct)


# --------------------------------------------------------------------------
# time change


@pytest.mark.parametrize("sigma", [1.0, 2.0])
def test_constant_diffusion_clock_is_exact(sigma):
    spec = constant_model(sigma, x0=0.3)
    tr = sim.simulate_coupled(spec, 1.0, 0.01, 2)
    tc = sim.time_change_of(tr.z_l, spec, 0.01)
    np.testing.assert_array_equal(tc.theta, sigma**2 * tc.t)
    np.testing.assert_allclose(tc.tau_of(tc.theta[1:]), tc.theta[1:] / sigma**2, rtol=1e-14)


def test_clock_bounds_and_round_trip():
    spec = reference_model()
    for j in range(5):
        tr = sim.simulate_coupled(spec, 20.0, 0.01, 40, n_paths=1, first_path=j)
        tc = sim.time_change_of(tr.z_l, spec, 0.01)
        assert np.all(spec.k1_sq * tc.t <= tc.theta) and np.all(tc.theta <= spec.k2_sq * tc.t)
        assert np.all(np.diff(tc.theta) > 0)
        assert np.max(np.abs(tc.tau_of(tc.theta) - tc.t)) <= 0.01


def test_time_change_input_checks():
    with pytest.raises(ValueError):
        sim.time_change_of(np.array([1.0, -1.0]), reference_model(), 0.1)


# --------------------------------------------------------------------------
# squared Bessel and U


def test_sqbessel_nonnegative_and_clip_counter():
    g = sim.simulate_sqbessel(0.5, 0.2, 5.0, 0.01, 8, n_paths=20)
    assert np.all(g.values >= 0)
    assert g.clip_count.sum() > 0


def test_sqbessel_mean():
    z = sim.sqbessel_endpoints(1.0, 2.0, 1.0, 1e-3, 21, n_paths=100_000)
    se = z.std(ddof=1) / math.sqrt(z.size)
    assert abs(z.mean() - (2.0 + 1.0)) <= 3 * se


def test_high_dimension_never_clips():
    st = sim.sqbessel_stream(4.0, 1.0, 10.0, 1e-4, 17, n_paths=1000)
    assert st.clips.sum() == 0


def test_u_transform_definition():
    t = np.arange(0, 101) * 0.5
    zt = sim.PathGrid(t, np.full(t.size, 3.0), None, 0)
    u = sim.u_transform(zt, ds=0.01)
    assert u.values[0] == 3.0
    np.testing.assert_allclose(u.values, 3.0 * np.exp(-u.t), rtol=1e-15)
    assert u.t[-1] <= math.log1p(50.0)
    with pytest.raises(ValueError, match="exceeds"):
        sim.u_transform(zt, horizon=5.0)


def test_u_transform_starts_at_x0_sq():
    g = sim.simulate_sqbessel(1.0, 2.5, 10.0, 0.01, 3)
    assert sim.u_transform(g).values[0] == 2.5


def test_u_mean_follows_cir_ode():
    delta, a = 2.0, 1.0
    z = sim.sqbessel_endpoints(delta, a, math.expm1(3.0), 1e-2, 5, n_paths=100_000)
    u = np.exp(-3.0) * z
    se = u.std(ddof=1) / math.sqrt(u.size)
    assert abs(u.mean() - (delta + (a - delta) * math.exp(-3.0))) <= 3 * se


# --------------------------------------------------------------------------
# backends, workers and streams


def _all_kernels(backend, workers=1):
    spec = reference_model(x0=0.5)
    out = {}
    # long enough for every kernel to see many tail draws
    out["long_primary"] = sim.simulate_primary(spec, 100.0, 0.01, 4, n_paths=8, workers=workers, backend=backend).values
    out["primary"] = sim.simulate_primary(spec, 3.0, 0.01, 4, n_paths=5, workers=workers, backend=backend).values
    tr = sim.simulate_coupled(spec, 3.0, 0.01, 4, n_paths=5, workers=workers, backend=backend)
    out["coupled"] = np.stack([tr.z_l, tr.z, tr.z_u])
    out["sq"] = sim.simulate_sqbessel(0.7, 1.0, 3.0, 0.01, 4, n_paths=5, workers=workers, backend=backend).values
    lb = sim.lil_blocks(spec, 100.0, 0.01, 4, n_paths=5, workers=workers, backend=backend)
    out["lil"] = lb.block_max
    st = sim.coupled_stream(spec, 100.0, 0.01, 4, n_paths=5, checkpoints=[10, 50, 100], thresholds=(1, 10),
                            theta_targets=(5.0, 60.0), workers=workers, backend=backend)
    for k in ("occ", "theta_at", "area_at", "ordering_violations", "state_end"):
        out["stream_" + k] = getattr(st, k)
    out["stream_lil"] = st.lil.block_max
    sq = sim.sqbessel_stream(1.0, 1.0, 50.0, 0.01, 4, n_paths=5, thresholds=(1.0,), targets=(1.0, 40.0),
                             workers=workers, backend=backend)
    out["sq_stream"] = np.concatenate([sq.z_end, sq.u_sup, sq.area_at.ravel(), sq.clips])
    return out


def test_gaussian_stream_matches_compiled_generator():
    # 2e5 draws put ~3e4 in the logarithmic tail branch of the inverse CDF
    from numba import njit

    from motoo_lab.sim import _kernels_numba

    @njit
    def draws(key, n, out):
        for k in range(n):
            out[k] = _kernels_numba.normal(key, k)

    key = rng.path_keys(1, 8)[7]
    out = np.empty(200_000)
    draws(key, out.size, out)
    assert out.tobytes() == rng.normals(key, np.arange(out.size, dtype=np.uint64)).tobytes()


def test_gaussian_bump_backends_agree():
    spec = ModelSpec(Drift.of("modulated_rational"), Diffusion.of("gaussian_bump", sigma=1.0, amp=0.5),
                     1.0, 0.0, 1.0, 1.0, 2.25, 0.0)
    a = sim.simulate_coupled(spec, 20.0, 0.01, 3, n_paths=4, backend="numba")
    b = sim.simulate_coupled(spec, 20.0, 0.01, 3, n_paths=4, backend="numpy")
    for name in ("x", "z_l", "z_u"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()


def test_backends_are_bit_identical():
    a, b = _all_kernels("numba"), _all_kernels("numpy")
    for k in a:
        assert np.asarray(a[k]).tobytes() == np.asarray(b[k]).tobytes(), k


def test_worker_count_does_not_change_results():
    a, b = _all_kernels("numba", 1), _all_kernels("numba", 4)
    for k in a:
        assert np.asarray(a[k]).tobytes() == np.asarray(b[k]).tobytes(), k


def test_streams_agree_with_stored_paths():
    spec = reference_model()
    T, dt, seed = 100.0, 0.01, 31
    tr = sim.simulate_coupled(spec, T, dt, seed, n_paths=3)
    st = sim.coupled_stream(spec, T, dt, seed, n_paths=3, checkpoints=[10.0, 100.0], thresholds=(1.0, 10.0))
    np.testing.assert_array_equal(st.state_end, np.stack([tr.x[:, -1], tr.z_l[:, -1], tr.z[:, -1], tr.z_u[:, -1]], 1))
    for j in range(3):
        tc = sim.time_change_of(tr.z_l[j], spec, dt)
        np.testing.assert_allclose(st.theta_at[j], tc.theta[[1000, 10000]], rtol=1e-12)
        for i, c in enumerate((1.0, 10.0)):
            below = tr.z_l[j, :-1] <= c
            assert st.occ[j, i].tolist() == [below[:1000].sum(), below.sum()]
    np.testing.assert_array_equal(st.ordering_violations, tr.ordering_violations(st.ordering_tol))
    sq = sim.simulate_sqbessel(1.0, 1.0, 60.0, 0.01, seed, n_paths=2)
    ss = sim.sqbessel_stream(1.0, 1.0, 60.0, 0.01, seed, n_paths=2)
    np.testing.assert_array_equal(ss.z_end, sq.values[:, -1])
    np.testing.assert_array_equal(ss.clips, sq.clip_count)
    t = sq.t
    k0 = int(math.ceil(16.0 / 0.01 * (1 - 1e-12)))
    s = np.log1p(t[k0:])
    ratio = np.exp(-s) * sq.values[:, k0:] / (2 * np.log(s))
    np.testing.assert_allclose(ss.u_sup, ratio.max(axis=1), rtol=1e-14)
