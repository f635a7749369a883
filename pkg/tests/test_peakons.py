import csv
import math

import numpy as np
import pytest

from dualpairs.peakons import (
    FilamentState,
    FlowSpec,
    KernelSpec,
    SingularState,
    collective_hamiltonian,
    filament_current,
    integrate,
    kernel_eval,
    kernel_grad,
    pair_with_field,
    reparametrize,
    rhs,
    total_momentum,
    write_trajectory_csv,
)


def circle_filament(nodes=24, radius=1.0, alpha=0.8, tangential=0.5):
    ang = 2 * np.pi * np.arange(nodes) / nodes
    q = radius * np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    p = tangential * np.stack([-np.sin(ang), np.cos(ang)], axis=-1)
    return FilamentState(q, p, KernelSpec("gaussian", alpha))


# -- kernels ---------------------------------------------------------------------


def test_exp1d_golden_values():
    k = KernelSpec("exp1d", 1.0)
    assert kernel_eval(k, np.array([0.0])) == 0.5
    assert kernel_eval(k, np.array([math.log(4.0)])) == pytest.approx(1.0 / 8.0, rel=1e-15)
    # the symmetric peakon convention: zero slope at the crest
    assert kernel_grad(k, np.array([0.0]))[0] == 0.0


def test_exp1d_rejects_higher_dim():
    with pytest.raises(ValueError):
        kernel_eval(KernelSpec("exp1d", 1.0), np.zeros((3, 2)))


def test_gaussian_golden_values():
    k = KernelSpec("gaussian", 2.0)
    x = np.zeros((5, 3))
    assert np.array_equal(kernel_eval(k, x), np.ones(5))
    assert np.array_equal(kernel_grad(k, x), np.zeros((5, 3)))
    one = kernel_eval(k, np.array([2.0, 0.0, 0.0]))
    assert one == pytest.approx(math.exp(-0.5), rel=1e-15)


def test_kernel_validation():
    with pytest.raises(ValueError):
        KernelSpec("sinc", 1.0)
    with pytest.raises(ValueError):
        KernelSpec("gaussian", -1.0)


# -- states ----------------------------------------------------------------------


def test_singular_state_shapes_and_defaults():
    st = SingularState(np.array([[0.0], [1.0]]), np.array([[2.0], [3.0]]), KernelSpec("exp1d", 1.0))
    assert st.count == 2 and st.dim == 1
    assert np.array_equal(st.weights, np.ones(2))


def test_singular_state_length_mismatch():
    with pytest.raises(ValueError):
        SingularState(np.zeros((2, 1)), np.zeros((3, 1)), KernelSpec("exp1d", 1.0))


def test_filament_weights_default_to_chain_spacing():
    st = circle_filament(nodes=16)
    assert np.array_equal(st.weights, np.full(16, 1.0 / 16.0))
    assert st.spacing == 1.0 / 16.0


def test_filament_rejects_coincident_nodes():
    q = np.zeros((4, 2))
    p = np.ones((4, 2))
    with pytest.raises(ValueError):
        FilamentState(q, p, KernelSpec("gaussian", 1.0))


def test_filament_nonvanishing_rejects_zero_covector():
    ang = 2 * np.pi * np.arange(6) / 6
    q = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    p = np.ones_like(q)
    p[2] = 0.0
    FilamentState(q, p, KernelSpec("gaussian", 1.0))  # fine without the flag
    with pytest.raises(ValueError):
        FilamentState(q, p, KernelSpec("gaussian", 1.0), nonvanishing=True)


# -- collective dynamics ---------------------------------------------------------


def test_single_peakon_golden_numbers():
    st = SingularState(np.array([[0.0]]), np.array([[2.0]]), KernelSpec("exp1d", 1.0))
    # H = p^2 G(0) / 2 = 4 * 0.5 / 2
    assert collective_hamiltonian(st) == 1.0
    dq, dp = rhs(st)
    assert dq[0, 0] == 1.0  # q-dot = p G(0)
    assert dp[0, 0] == 0.0  # symmetric kernel: no self-force


def test_single_peakon_travels_at_collective_speed():
    st = SingularState(np.array([[0.0]]), np.array([[2.0]]), KernelSpec("exp1d", 1.0))
    traj = integrate(st, FlowSpec("implicit-midpoint", 1e-3, 5000))
    assert abs(traj.q[-1, 0, 0] - 5.0) <= 1e-8
    assert np.abs(traj.p[:, 0, 0] - 2.0).max() <= 1e-12


def test_two_peakon_conservation_short_window():
    st = SingularState(
        np.array([[-1.0], [1.0]]),
        np.array([[1.2], [0.6]]),
        KernelSpec("exp1d", 1.0),
    )
    traj = integrate(st, FlowSpec("implicit-midpoint", 1e-3, 1000))
    h = traj.hamiltonians()
    ptot = traj.total_momenta()
    assert np.abs(h - h[0]).max() / abs(h[0]) <= 1e-10
    assert np.abs(ptot - ptot[0]).max() <= 1e-12


def test_symmetric_peakon_pair_stays_mirror_symmetric():
    st = SingularState(
        np.array([[-2.0], [2.0]]),
        np.array([[0.8], [-0.8]]),
        KernelSpec("exp1d", 1.0),
    )
    traj = integrate(st, FlowSpec("implicit-midpoint", 1e-3, 2000))
    assert np.abs(traj.q[:, 0, 0] + traj.q[:, 1, 0]).max() <= 1e-9
    assert np.abs(traj.p[:, 0, 0] + traj.p[:, 1, 0]).max() <= 1e-12


def test_rhs_weights_enter_pairwise_sums():
    q = np.array([[0.0], [0.5]])
    p = np.array([[1.0], [-0.5]])
    w = np.array([2.0, 3.0])
    st = SingularState(q, p, KernelSpec("exp1d", 1.0), w)
    dq, dp = rhs(st)
    k = KernelSpec("exp1d", 1.0)
    g01 = float(kernel_eval(k, np.array([q[0, 0] - q[1, 0]])))
    expected = p[0, 0] * float(kernel_eval(k, np.array([0.0]))) * w[0] + p[1, 0] * g01 * w[1]
    assert dq[0, 0] == pytest.approx(expected, rel=1e-14)


def test_hamiltonian_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    st = SingularState(rng.normal(size=(4, 2)), rng.normal(size=(4, 2)), KernelSpec("gaussian", 1.3))
    dq, dp = rhs(st)
    eps = 1e-6

    def h_of(q, p):
        return collective_hamiltonian(SingularState(q, p, st.kernel, st.weights))

    for a in range(4):
        for i in range(2):
            qp = st.q.copy(); qp[a, i] += eps
            qm = st.q.copy(); qm[a, i] -= eps
            dh_dq = (h_of(qp, st.p) - h_of(qm, st.p)) / (2 * eps)
            pp = st.p.copy(); pp[a, i] += eps
            pm = st.p.copy(); pm[a, i] -= eps
            dh_dp = (h_of(st.q, pp) - h_of(st.q, pm)) / (2 * eps)
            # Hamilton's equations with the weight-canonical pairing
            assert dq[a, i] * st.weights[a] == pytest.approx(dh_dp * st.weights[a], abs=1e-8)
            assert dp[a, i] * st.weights[a] == pytest.approx(-dh_dq, abs=1e-8)


# -- momentum maps on the singular support ---------------------------------------


def test_pair_with_constant_field_is_total_momentum():
    rng = np.random.default_rng(13)
    st = SingularState(rng.normal(size=(5, 2)), rng.normal(size=(5, 2)), KernelSpec("gaussian", 1.0), rng.uniform(0.5, 2.0, 5))
    value = pair_with_field(st, np.array([1.0, 0.0]))
    assert value == total_momentum(st)[0]


def test_pair_with_zero_covector_vanishes():
    st = SingularState(np.array([[0.3], [0.9]]), np.zeros((2, 1)), KernelSpec("exp1d", 1.0))
    assert pair_with_field(st, lambda x: np.ones_like(x)) == 0.0


def test_filament_current_radial_covector_vanishes():
    ang = 2 * np.pi * np.arange(12) / 12
    q = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    p = q.copy()  # radial: orthogonal to the tangent by symmetry of D_s
    st = FilamentState(q, p, KernelSpec("gaussian", 1.0))
    assert np.abs(filament_current(st)).max() <= 1e-13


def test_filament_current_tangent_magnitude():
    st = circle_filament(nodes=64, tangential=1.0)
    m = filament_current(st)
    # |dQ/ds| = 2 pi on the unit circle, up to the A^-2 stencil error
    assert np.abs(m - 2 * np.pi).max() <= 2 * np.pi * (2 * np.pi / 64) ** 2


def test_reparametrize_is_exact_cyclic_shift():
    st = circle_filament(nodes=10)
    shifted = reparametrize(st, 3)
    assert isinstance(shifted, FilamentState)
    assert np.array_equal(shifted.q, np.roll(st.q, -3, axis=0))
    assert np.array_equal(shifted.p, np.roll(st.p, -3, axis=0))
    # full cycle and zero shift are identities
    assert np.array_equal(reparametrize(st, 10).q, st.q)
    assert np.array_equal(reparametrize(st, 0).q, st.q)


def test_pairing_invariant_under_reparametrize():
    rng = np.random.default_rng(17)
    st = circle_filament(nodes=20)
    for _ in range(20):
        vec = rng.normal(size=2)
        assert pair_with_field(reparametrize(st, 7), vec) == pair_with_field(st, vec)


def test_current_equivariant_under_reparametrize():
    st = circle_filament(nodes=16)
    m = filament_current(st)
    m_shifted = filament_current(reparametrize(st, 5))
    assert np.array_equal(m_shifted, np.roll(m, -5))


def test_filament_current_conservation_along_flow():
    st = circle_filament(nodes=32, tangential=0.4)
    traj = integrate(st, FlowSpec("implicit-midpoint", 0.01, 100))
    drift = traj.jr_drifts()
    assert drift[0] == 0.0
    assert float(np.max(drift)) <= 5e-3  # the A^-2 floor at 32 nodes


def test_point_trajectory_reports_zero_drift():
    st = SingularState(np.array([[0.0]]), np.array([[1.0]]), KernelSpec("exp1d", 1.0))
    traj = integrate(st, FlowSpec("implicit-midpoint", 1e-2, 10))
    assert np.array_equal(traj.jr_drifts(), np.zeros(11))
    with pytest.raises(ValueError):
        traj.filament_currents()


# -- trajectory serialization ----------------------------------------------------


def test_trajectory_csv_schema(tmp_path):
    st = SingularState(
        np.array([[0.0, 0.0], [1.0, 0.5]]),
        np.array([[1.0, 0.0], [0.0, -1.0]]),
        KernelSpec("gaussian", 1.0),
    )
    traj = integrate(st, FlowSpec("implicit-midpoint", 0.125, 4))
    path = tmp_path / "traj.csv"
    write_trajectory_csv(path, traj)
    rows = list(csv.reader(open(path, newline="")))
    assert rows[0] == [
        "t",
        "q_1", "q_2", "q_3", "q_4",
        "p_1", "p_2", "p_3", "p_4",
        "H",
        "Ptot_1", "Ptot_2",
        "jr_drift",
    ]
    assert len(rows) == 1 + 5
    assert rows[1][0] == "0"
    assert float(rows[-1][0]) == pytest.approx(0.5, abs=1e-15)


def test_state_at_round_trips_type():
    st = circle_filament(nodes=8)
    traj = integrate(st, FlowSpec("implicit-midpoint", 0.01, 3))
    again = traj.state_at(2)
    assert isinstance(again, FilamentState)
    assert again.kernel == st.kernel
