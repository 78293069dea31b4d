import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from glocal.errors import DivergenceError, PreconditionError
from glocal.network import benchmark_network
from glocal.simulation import (
    Trajectory,
    hankel_singular_values,
    lyapunov_solve,
    simulate,
    spectral_abscissa,
    write_csv,
)


def _modal_hsv(A, B, C):
    """Gramians by Kronecker vectorization (small Hurwitz A)."""
    n = A.shape[0]
    I = np.eye(n)
    K = np.kron(I, A) + np.kron(A, I)
    Wc = np.linalg.solve(K, -(B @ B.T).ravel()).reshape(n, n)
    Ko = np.kron(I, A.T) + np.kron(A.T, I)
    Wo = np.linalg.solve(Ko, -(C.T @ C).ravel()).reshape(n, n)
    ev = np.linalg.eigvals(Wc @ Wo)
    return np.sort(np.sqrt(np.abs(ev.real)))[::-1]


class TestSimulate:
    def test_scalar_decay(self):
        tr = simulate(np.array([[-1.0]]), x0=[1.0], horizon=1.0, step=1e-3)
        assert abs(tr.final[0] - np.exp(-1)) <= 1e-8

    def test_harmonic_energy(self):
        tr = simulate(np.array([[0.0, 1], [-1, 0]]), x0=[1.0, 0], horizon=10, step=1e-3)
        energy = np.sum(tr.states**2, axis=1)
        assert np.max(np.abs(energy - 1)) <= 1e-8

    def test_fourth_order(self):
        A = np.array([[0.0, 1], [-4, -0.3]])
        x0 = np.array([1.0, 0.0])
        exact = expm(A * 2.0) @ x0
        e1 = np.linalg.norm(simulate(A, x0=x0, horizon=2.0, step=0.02).final - exact)
        e2 = np.linalg.norm(simulate(A, x0=x0, horizon=2.0, step=0.01).final - exact)
        assert 13 < e1 / e2 < 19

    def test_piecewise_constant_input(self):
        A = np.array([[-1.0]])
        B = np.array([[1.0]])
        tr = simulate(A, B, np.array([2.0]), x0=[0.0], horizon=3.0, step=1e-3)
        assert abs(tr.final[0] - 2 * (1 - np.exp(-3))) <= 1e-8
        tr2 = simulate(A, B, lambda t: [2.0], x0=[0.0], horizon=3.0, step=1e-3)
        assert np.allclose(tr.states, tr2.states)

    def test_divergence(self):
        with pytest.raises(DivergenceError) as info:
            simulate(np.array([[800.0]]), x0=[1.0], horizon=10.0, step=0.01)
        assert 0 < info.value.time <= 10

    def test_bad_step(self):
        with pytest.raises(ValueError):
            simulate(np.eye(1), x0=[1.0], horizon=1.0, step=0)

    def test_csv(self, tmp_path):
        tr = Trajectory(np.array([0.0, 0.1]), np.array([[1 / 3], [2 / 3]]), ("a",))
        p = tmp_path / "t.csv"
        write_csv(p, tr)
        lines = p.read_text().splitlines()
        assert lines[0] == "t,a"
        assert float(lines[1].split(",")[1]) == 1 / 3


class TestSpectral:
    def test_negative_identity(self):
        assert spectral_abscissa(-np.eye(3)) == -1

    def test_nilpotent(self):
        assert spectral_abscissa(np.array([[0.0, 1], [0, 0]])) == 0

    def test_benchmark_open_loop(self, bench1):
        assert abs(spectral_abscissa(bench1[0].A)) <= 1e-10

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_sign_matches_boundedness(self, seed):
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((4, 4)) - rng.uniform(-0.5, 2.5) * np.eye(4)
        a = spectral_abscissa(A)
        if abs(a) < 0.2:
            return
        tr = simulate(A, x0=rng.standard_normal(4), horizon=60, step=0.01)
        grows = np.linalg.norm(tr.final) > np.linalg.norm(tr.states[0])
        assert grows == (a > 0)


class TestLyapunov:
    def test_scalar(self):
        assert np.allclose(lyapunov_solve(np.array([[-1.0]]), np.array([[2.0]])), 1)

    def test_identity(self):
        assert np.allclose(lyapunov_solve(-np.eye(3), np.eye(3)), np.eye(3) / 2)

    def test_random_residual(self):
        rng = np.random.default_rng(4)
        A = rng.standard_normal((10, 10))
        A -= (spectral_abscissa(A) + 0.5) * np.eye(10)
        Q = rng.standard_normal((10, 10))
        Q = Q @ Q.T
        X = lyapunov_solve(A, Q)
        assert np.linalg.norm(A @ X + X @ A.T + Q) <= 1e-8 * np.linalg.norm(Q)

    def test_imaginary_axis(self):
        with pytest.raises(PreconditionError):
            lyapunov_solve(np.array([[0.0, 1], [-1, 0]]), np.eye(2))


class TestHankel:
    def test_scalar(self):
        h = hankel_singular_values(np.array([[-1.0]]), np.array([[1.0]]), np.array([[1.0]]))
        assert np.allclose(h.values, [0.5]) and h.n_deflated == 0

    def test_against_modal_formula(self):
        rng = np.random.default_rng(2)
        A = rng.standard_normal((6, 6))
        A -= (spectral_abscissa(A) + 0.3) * np.eye(6)
        B, C = rng.standard_normal((6, 2)), rng.standard_normal((1, 6))
        h = hankel_singular_values(A, B, C)
        ref = _modal_hsv(A, B, C)
        assert np.allclose(h.values[: len(ref)], ref, atol=1e-8)

    def test_deflation_against_stable_subsystem(self):
        # block upper-triangular system with one semistable mode
        rng = np.random.default_rng(5)
        As = -np.diag([1.0, 2.0, 3.0])
        A = np.zeros((4, 4))
        A[:3, :3] = As
        A[:3, 3] = rng.standard_normal(3)
        B = rng.standard_normal((4, 1))
        C = rng.standard_normal((1, 4))
        h = hankel_singular_values(A, B, C)
        assert h.n_deflated == 1
        # stable part: decoupled coordinates z = x_s + X x_u
        X = np.linalg.solve(As, A[:3, 3:])
        Bs = B[:3] + X @ B[3:]
        ref = _modal_hsv(As, Bs, C[:, :3])
        assert np.allclose(h.values, ref, atol=1e-10)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_similarity_invariance(self, seed):
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((5, 5))
        A -= (spectral_abscissa(A) + 0.5) * np.eye(5)
        B, C = rng.standard_normal((5, 1)), rng.standard_normal((1, 5))
        T = rng.standard_normal((5, 5)) + 3 * np.eye(5)
        Ti = np.linalg.inv(T)
        h1 = hankel_singular_values(A, B, C).values
        h2 = hankel_singular_values(T @ A @ Ti, T @ B, C @ Ti).values
        assert np.allclose(h1, h2, atol=1e-8 * max(1, h1[0]))

    def test_all_deflated(self):
        with pytest.raises(PreconditionError):
            hankel_singular_values(np.zeros((2, 2)), np.ones((2, 1)), np.ones((1, 2)))

    def test_benchmark_small(self):
        net, _ = benchmark_network(1)
        h = hankel_singular_values(net.A, net.B_blocks, net.C_blocks)
        assert h.n_deflated == 1
        v = h.deflated_modes[:, 0]
        v = v / v[0]
        assert np.allclose(v, np.tile([1.0, 0.0], 9), atol=1e-8)
        # local modes of every group give 1/(2d)
        for d in (0.4, 0.3, 0.2):
            assert np.min(np.abs(h.values - 1 / (2 * d))) <= 1e-8
