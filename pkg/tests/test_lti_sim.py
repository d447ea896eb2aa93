import numpy as np
import pytest
from scipy.linalg import expm

from hmor.lti_sim import (
    StateSpace,
    discretize_foh,
    frequency_response,
    simulate,
    simulate_with_grad,
)


def random_stable_ss(rng, n, m, p, eig_lo=-3.0, eig_hi=-0.3):
    """Real system with well-separated stable eigenvalues, O(1) scaling."""
    lam = np.sort(rng.uniform(eig_lo, eig_hi, size=n))
    v = rng.normal(size=(n, n)) + 2.0 * np.eye(n)
    a = v @ np.diag(lam) @ np.linalg.inv(v)
    b = rng.normal(size=(n, m))
    c = rng.normal(size=(p, n))
    d = 0.1 * rng.normal(size=(p, m))
    return StateSpace(a=a, b=b, c=c, d=d)


def scalar_segment(a, b, x0, u0, u1, h):
    """Closed form for dx/dt = a x + b u over one linear segment,
    written from the integral directly (independent of the package)."""
    ea = np.exp(a * h)
    c = (u1 - u0) / h
    return ea * x0 + b * ((ea - 1.0) / a * u0 + (ea - 1.0 - a * h) / a**2 * c)


class TestDiscretize:
    def test_integrator_is_trapezoid(self):
        ss = StateSpace(a=[[0.0]], b=[[1.0]], c=[[1.0]], d=[[0.0]])
        h = 0.37
        phi, g0, g1 = discretize_foh(ss, h)
        assert phi[0, 0] == pytest.approx(1.0, rel=1e-14)
        assert g0[0, 0] == pytest.approx(h / 2, rel=1e-13)
        assert g1[0, 0] == pytest.approx(h / 2, rel=1e-13)

    def test_semigroup(self):
        rng = np.random.default_rng(11)
        ss = random_stable_ss(rng, 4, 2, 2)
        h = 0.21
        phi1_, _, _ = discretize_foh(ss, h)
        phi2_, _, _ = discretize_foh(ss, 2 * h)
        assert np.allclose(phi1_ @ phi1_, phi2_, rtol=1e-12, atol=1e-14)

    def test_hold_sum_matches_impulse_area(self):
        # Gamma0 + Gamma1 must equal the zero-order-hold input matrix,
        # computed here from the smaller (n+m) augmented exponential
        rng = np.random.default_rng(5)
        ss = random_stable_ss(rng, 3, 2, 1)
        h = 0.4
        _, g0, g1 = discretize_foh(ss, h)
        n, m = 3, 2
        big = np.zeros((n + m, n + m))
        big[:n, :n] = ss.a * h
        big[:n, n:] = ss.b * h
        zoh = expm(big)[:n, n:]
        assert np.allclose(g0 + g1, zoh, rtol=1e-12, atol=1e-15)

    def test_rejects_bad_dt(self):
        ss = StateSpace(a=[[-1.0]], b=[[1.0]], c=[[1.0]], d=[[0.0]])
        with pytest.raises(ValueError, match="dt"):
            discretize_foh(ss, 0.0)


class TestSimulate:
    def test_scalar_exact_vs_closed_form(self):
        a, b, c, d = -1.7, 0.8, 1.3, 0.2
        ss = StateSpace(a=[[a]], b=[[b]], c=[[c]], d=[[d]])
        rng = np.random.default_rng(2)
        t = np.concatenate([[0.0], np.cumsum(rng.uniform(0.05, 0.4, size=30))])
        u = rng.normal(size=(31, 1))
        x0 = np.array([0.6])
        for path in ("eig", "expm"):
            y = simulate(ss, t, u, x0=x0, path=path)
            x = x0[0]
            expect = [c * x + d * u[0, 0]]
            for k in range(30):
                x = scalar_segment(a, b, x, u[k, 0], u[k + 1, 0], t[k + 1] - t[k])
                expect.append(c * x + d * u[k + 1, 0])
            assert np.allclose(y[:, 0], expect, rtol=1e-12, atol=1e-14)

    def test_paths_agree_on_mimo_system(self):
        rng = np.random.default_rng(31)
        ss = random_stable_ss(rng, 4, 3, 2)
        t = np.concatenate([[0.0], np.cumsum(rng.uniform(0.01, 0.3, size=120))])
        u = rng.normal(size=(121, 3))
        x0 = rng.normal(size=4)
        y1, x1 = simulate(ss, t, u, x0=x0, path="eig", return_states=True)
        y2, x2 = simulate(ss, t, u, x0=x0, path="expm", return_states=True)
        scale = np.max(np.abs(y1))
        assert np.max(np.abs(y1 - y2)) < 1e-11 * scale
        assert np.max(np.abs(x1 - x2)) < 1e-11 * np.max(np.abs(x1))

    def test_complex_pair_eigenvalues(self):
        # oscillatory block exercises the complex eigen arithmetic
        a = np.array([[-0.5, 2.0], [-2.0, -0.5]])
        ss = StateSpace(a=a, b=[[1.0], [0.0]], c=[[0.0, 1.0]], d=[[0.0]])
        rng = np.random.default_rng(8)
        t = np.concatenate([[0.0], np.cumsum(rng.uniform(0.05, 0.2, size=80))])
        u = rng.normal(size=(81, 1))
        y1 = simulate(ss, t, u, path="eig")
        y2 = simulate(ss, t, u, path="expm")
        assert np.allclose(y1, y2, rtol=1e-11, atol=1e-13)

    def test_piecewise_linear_input_reproduced_exactly(self):
        # input linear over the whole horizon: every sample must sit on the
        # continuous solution regardless of the (nonuniform) grid
        rng = np.random.default_rng(17)
        ss = random_stable_ss(rng, 3, 2, 2)
        n, m = 3, 2
        u0 = rng.normal(size=m)
        slope = rng.normal(size=m)
        t = np.concatenate([[0.0], np.cumsum(rng.uniform(0.02, 0.5, size=25))])
        u = u0[None, :] + slope[None, :] * t[:, None]
        y, x = simulate(ss, t, u, return_states=True)
        for k in [1, 7, 19, 25]:
            h = t[k]
            big = np.zeros((n + 2 * m, n + 2 * m))
            big[:n, :n] = ss.a * h
            big[:n, n:n + m] = ss.b * h
            big[n:n + m, n + m:] = np.eye(m) * h
            e = expm(big)
            xk = e[:n, n:n + m] @ u0 + e[:n, n + m:] @ slope
            assert np.allclose(x[k], xk, rtol=1e-11, atol=1e-14)

    def test_defective_matrix_takes_expm_path(self):
        # Jordan block: no usable eigenbasis, auto must fall back and
        # still integrate exactly
        a = np.array([[-1.0, 1.0], [0.0, -1.0]])
        ss = StateSpace(a=a, b=[[0.0], [1.0]], c=[[1.0, 0.0]], d=[[0.0]])
        t = np.linspace(0.0, 3.0, 61)
        u = np.ones((61, 1))
        y = simulate(ss, t, u, path="auto")
        # unit step through the chain: x1(t) = 1 - (1 + t) e^-t
        expect = 1.0 - (1.0 + t) * np.exp(-t)
        assert np.allclose(y[:, 0], expect, rtol=1e-11, atol=1e-13)
        with pytest.raises(ValueError, match="ill-conditioned"):
            simulate(ss, t, u, path="eig")

    def test_input_validation(self):
        ss = StateSpace(a=[[-1.0]], b=[[1.0]], c=[[1.0]], d=[[0.0]])
        with pytest.raises(ValueError, match="increasing"):
            simulate(ss, np.array([0.0, 0.0, 1.0]), np.zeros((3, 1)))
        with pytest.raises(ValueError, match="must be"):
            simulate(ss, np.array([0.0, 1.0]), np.zeros((2, 2)))
        with pytest.raises(ValueError, match="square"):
            StateSpace(a=np.zeros((2, 3)), b=np.zeros((2, 1)),
                       c=np.zeros((1, 2)), d=np.zeros((1, 1)))


class TestGradients:
    def fd_check(self, ss, t, u, target, weight, x0, path, rtol):
        loss, grads, _ = simulate_with_grad(
            ss, t, u, target, weight, x0=x0, path=path
        )

        def loss_at(a, b, c, d):
            ss2 = StateSpace(a=a, b=b, c=c, d=d)
            val, _, _ = simulate_with_grad(
                ss2, t, u, target, weight, x0=x0, path=path
            )
            return val

        h = 1e-6
        mats = {"a": ss.a, "b": ss.b, "c": ss.c, "d": ss.d}
        for name, mat in mats.items():
            g_fd = np.zeros_like(mat)
            for i in range(mat.shape[0]):
                for j in range(mat.shape[1]):
                    bump = np.zeros_like(mat)
                    bump[i, j] = h
                    kw_hi = {k: (v + bump if k == name else v) for k, v in mats.items()}
                    kw_lo = {k: (v - bump if k == name else v) for k, v in mats.items()}
                    g_fd[i, j] = (loss_at(**kw_hi) - loss_at(**kw_lo)) / (2 * h)
            scale = max(np.max(np.abs(g_fd)), 1e-8)
            assert np.allclose(grads[name], g_fd, rtol=rtol, atol=rtol * scale), name

    def test_gradient_matches_fd_eig(self):
        rng = np.random.default_rng(42)
        ss = random_stable_ss(rng, 2, 2, 1)
        t = np.concatenate([[0.0], np.cumsum(rng.uniform(0.05, 0.35, size=40))])
        u = rng.normal(size=(41, 2))
        target = rng.normal(size=(41, 1))
        weight = np.array([1.3])
        x0 = rng.normal(size=2)
        self.fd_check(ss, t, u, target, weight, x0, "eig", 2e-6)

    def test_gradient_matches_fd_eig_complex_pair(self):
        rng = np.random.default_rng(43)
        a = np.array([[-0.4, 1.5], [-1.5, -0.4]])
        ss = StateSpace(a=a, b=rng.normal(size=(2, 2)),
                        c=rng.normal(size=(2, 2)), d=0.1 * rng.normal(size=(2, 2)))
        t = np.concatenate([[0.0], np.cumsum(rng.uniform(0.05, 0.3, size=35))])
        u = rng.normal(size=(36, 2))
        target = rng.normal(size=(36, 2))
        weight = np.array([1.0, 0.6])
        self.fd_check(ss, t, u, target, weight, None, "eig", 2e-6)

    def test_gradient_matches_fd_expm(self):
        rng = np.random.default_rng(44)
        ss = random_stable_ss(rng, 2, 2, 1)
        t = np.concatenate([[0.0], np.cumsum(rng.uniform(0.05, 0.35, size=30))])
        u = rng.normal(size=(31, 2))
        target = rng.normal(size=(31, 1))
        weight = np.array([0.8])
        self.fd_check(ss, t, u, target, weight, None, "expm", 2e-6)

    def test_paths_give_same_gradient(self):
        rng = np.random.default_rng(45)
        ss = random_stable_ss(rng, 3, 2, 2)
        t = np.concatenate([[0.0], np.cumsum(rng.uniform(0.02, 0.25, size=60))])
        u = rng.normal(size=(61, 2))
        target = rng.normal(size=(61, 2))
        weight = np.array([1.0, 2.0])
        l1, g1, _ = simulate_with_grad(ss, t, u, target, weight, path="eig")
        l2, g2, _ = simulate_with_grad(ss, t, u, target, weight, path="expm")
        assert l1 == pytest.approx(l2, rel=1e-12)
        for k in g1:
            scale = max(np.max(np.abs(g1[k])), 1e-12)
            assert np.max(np.abs(g1[k] - g2[k])) < 1e-9 * scale, k

    def test_uniform_grid_gradient(self):
        # all steps share one size: exercises the single-slot bookkeeping
        rng = np.random.default_rng(46)
        ss = random_stable_ss(rng, 2, 1, 1)
        t = np.linspace(0.0, 4.0, 41)
        u = rng.normal(size=(41, 1))
        target = rng.normal(size=(41, 1))
        weight = np.array([1.0])
        self.fd_check(ss, t, u, target, weight, None, "expm", 2e-6)

    def test_overflow_returns_nonfinite_loss(self):
        ss = StateSpace(a=[[1e12]], b=[[1.0]], c=[[1.0]], d=[[0.0]])
        t = np.linspace(0.0, 1e-3, 12)
        u = np.ones((12, 1))
        with np.errstate(over="ignore", invalid="ignore"):
            loss, grads, _ = simulate_with_grad(
                ss, t, u, np.zeros((12, 1)), np.array([1.0])
            )
        assert not np.isfinite(loss)
        assert grads is None


class TestFrequencyResponse:
    def test_scalar_pole(self):
        p, k = 3.0, 2.4
        ss = StateSpace(a=[[-p]], b=[[1.0]], c=[[k]], d=[[0.0]])
        f = np.array([0.0, p / (2 * np.pi), 10.0])
        g = frequency_response(ss, f)
        assert g.shape == (3, 1, 1)
        assert g[0, 0, 0] == pytest.approx(k / p, rel=1e-13)
        # at the corner the magnitude is k/p/sqrt(2)
        assert abs(g[1, 0, 0]) == pytest.approx(k / p / np.sqrt(2), rel=1e-12)

    def test_mimo_against_cramer(self):
        a = np.array([[-1.0, 0.5], [0.0, -2.0]])
        b = np.array([[1.0, 0.0], [0.5, 1.0]])
        c = np.array([[1.0, 1.0]])
        d = np.array([[0.2, 0.0]])
        ss = StateSpace(a=a, b=b, c=c, d=d)
        f = 0.7
        jw = 2j * np.pi * f
        m = jw * np.eye(2) - a
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        minv = np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]) / det
        expect = c @ minv @ b + d
        g = frequency_response(ss, np.array([f]))
        assert np.allclose(g[0], expect, rtol=1e-12)

    def test_feedthrough_at_high_frequency(self):
        ss = StateSpace(a=[[-1.0]], b=[[1.0]], c=[[1.0]], d=[[0.7]])
        g = frequency_response(ss, np.array([1e9]))
        assert abs(g[0, 0, 0] - 0.7) < 1e-8
