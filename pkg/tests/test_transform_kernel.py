import math

import numpy as np
import pytest

from diracspect.cauchy import propagate
from diracspect.core import B, Grid, J, Potential, op_norms
from diracspect.transform_kernel import (TriKernel, apply_transform,
                                         assemble_K, build_P_series, gp_norm)

RNG = np.random.default_rng(31)


def random_potential(k=3, scale=1.2):
    breaks = np.concatenate([[0.0], np.sort(RNG.uniform(0.1, 0.9, k - 1)), [1.0]])
    return Potential.piecewise(breaks, RNG.uniform(-scale, scale, k),
                               RNG.uniform(-scale, scale, k))


def smooth_potential(n_nodes=513):
    xs = np.linspace(0, 1, n_nodes)
    return Potential.sampled(xs, np.sin(2 * np.pi * xs), 0.3 * np.ones(n_nodes))


class TestSeries:
    def test_zero_potential(self):
        res = build_P_series(Potential.zero(), 6, Grid.uniform(32))
        assert np.max(np.abs(res.p_plus.values)) == 0.0
        assert np.max(np.abs(res.p_minus.values)) == 0.0

    def test_first_term_is_bq(self):
        q = random_potential()
        grid = Grid.uniform(64)
        res = build_P_series(q, 1, grid)
        bq = np.einsum("ab,nbc->nac", B, q.matrix_at(grid.nodes))
        n = len(grid)
        for i in range(n):
            for j in range(0, i + 1, 7):
                assert np.allclose(res.p_minus.values[i, j], bq[j], atol=1e-14)
        # independent of x: rows agree where both defined
        assert np.allclose(res.p_minus.values[n - 1, : n // 2],
                           res.p_minus.values[n // 2, : n // 2], atol=1e-14)

    def test_factorial_bound_per_term(self):
        q = random_potential(scale=1.0)
        grid = Grid.uniform(256)
        q_norm = q.lp_norm(q.p_exponent)
        prev = build_P_series(q, 1, grid)
        fact = 1.0
        for n in range(2, 7):
            cur = build_P_series(q, n, grid)
            # isolate the n-th term from the parity sums of two truncations
            if n % 2 == 0:
                term = cur.p_plus.values - prev.p_plus.values
            else:
                term = cur.p_minus.values - prev.p_minus.values
            fact *= (n - 1)
            bound = q_norm ** n / fact
            # row L_p norms (frozen x), trapezoid on the triangle rows
            h = grid.step
            mods = op_norms(term) ** q.p_exponent
            worst = 0.0
            for i in range(1, len(grid)):
                seg = mods[i, : i + 1]
                worst = max(worst, float(
                    np.sum(0.5 * h * (seg[:-1] + seg[1:]))) ** (1 / q.p_exponent))
            assert worst <= bound * 1.02 + 1e-12
            prev = cur

    def test_factorial_decay_of_increments(self):
        q = random_potential(scale=1.0)
        grid = Grid.uniform(128)
        norms = [build_P_series(q, n, grid).last_increment_gp
                 for n in (2, 4, 6, 8)]
        assert norms[0] > norms[1] > norms[2] > norms[3]

    def test_auto_truncation(self):
        res = build_P_series(Potential.constant(0.5), None, Grid.uniform(32))
        assert res.n_terms >= 2
        assert res.last_increment_gp < 1e-10

    def test_requires_uniform_grid(self):
        g = Grid.from_nodes([0, 0.1, 0.6, 1.0])
        with pytest.raises(ValueError):
            build_P_series(Potential.zero(), 2, g)


class TestAssemble:
    def test_zero(self):
        res = build_P_series(Potential.zero(), 3, Grid.uniform(16))
        r, k = assemble_K(res.p_plus, res.p_minus)
        assert np.max(np.abs(r.values)) == 0.0
        assert np.max(np.abs(k.values)) == 0.0

    def test_r_commutes_with_generator(self):
        q = random_potential()
        res = build_P_series(q, 8, Grid.uniform(64))
        r, _ = assemble_K(res.p_plus, res.p_minus)
        comm = np.einsum("ab,ijbc->ijac", B, r.values) \
            - np.einsum("ijab,bc->ijac", r.values, B)
        assert np.max(np.abs(comm)) < 1e-10

    def test_k_from_r_tilde_relation(self):
        # K(x, t) = 1/2 [ R~(x, (x+t)/2) + R~(x, (x-t)/2) J ] with
        # R~(x, s) = R(x, x - s); on the node grid both sides only differ by
        # the interpolation of R at half-arguments
        q = smooth_potential(129)
        grid = Grid.uniform(128)
        res = build_P_series(q, 8, grid)
        r, k = assemble_K(res.p_plus, res.p_minus)
        n = len(grid)
        worst = 0.0
        for i in range(0, n, 8):
            x = grid.nodes[i]
            for j in range(0, i + 1, 8):
                t = grid.nodes[j]
                rt_plus = r.row_interp(i, np.array([x - 0.5 * (x + t)]))[0]
                rt_minus = r.row_interp(i, np.array([x - 0.5 * (x - t)]))[0]
                lhs = 0.5 * (rt_plus + rt_minus @ J)
                worst = max(worst, float(np.max(np.abs(lhs - k.values[i, j]))))
        assert worst < 1e-3


class TestTransform:
    def test_zero_kernel_returns_free(self):
        grid = Grid.uniform(32)
        k = TriKernel(grid, np.zeros((33, 33, 2, 2)))
        c = apply_transform(k, 2.5)
        assert np.allclose(c[:, 0], np.cos(2.5 * grid.nodes), atol=1e-15)
        assert np.allclose(c[:, 1], np.sin(2.5 * grid.nodes), atol=1e-15)

    def test_transmutation_identity_smooth(self):
        q = smooth_potential(513)
        grid = Grid.uniform(512)
        res = build_P_series(q, 8, grid)
        _, k = assemble_K(res.p_plus, res.p_minus)
        lam = math.pi
        c_kernel = apply_transform(k, lam)
        c_ode = propagate(q, lam, grid, rtol=1e-11).c
        assert np.max(np.abs(c_kernel - c_ode)) < 1e-5

    def test_transmutation_identity_piecewise(self):
        q = Potential.constant(1.0)
        grid = Grid.uniform(512)
        res = build_P_series(q, 10, grid)
        _, k = assemble_K(res.p_plus, res.p_minus)
        c_kernel = apply_transform(k, 0.0)
        c_ode = propagate(q, 0.0, grid).c
        assert np.max(np.abs(c_kernel - c_ode)) < 1e-4

    def test_transmutation_residual_shrinks_with_grid(self):
        # for a discontinuous potential the triangle quadrature sees the
        # jump, so refinement must still drive the residual down
        q = Potential.piecewise([0, 0.5, 1], [1.0, 0.0], [0.5, 0.5])
        errs = []
        for m in (128, 256, 512):
            grid = Grid.uniform(m)
            res = build_P_series(q, 10, grid)
            _, k = assemble_K(res.p_plus, res.p_minus)
            c_kernel = apply_transform(k, 0.0)
            c_ode = propagate(q, 0.0, grid).c
            errs.append(np.max(np.abs(c_kernel - c_ode)))
        assert errs[2] < errs[1] < errs[0]


class TestGpNorm:
    def test_first_term_constant_potential(self):
        q = Potential.constant(0.8, 0.6)
        res = build_P_series(q, 1, Grid.uniform(64))
        assert res.p_minus.gp_norm(1.0) == pytest.approx(1.0, abs=1e-12)

    def test_rejects_bad_p(self):
        res = build_P_series(Potential.zero(), 1, Grid.uniform(8))
        with pytest.raises(ValueError):
            gp_norm(res.p_minus, 0.3)

    def test_continuity_in_potential(self):
        # perturbing Q by eps changes the kernel by at most
        # (1 + 2r) e^(2r) * eps * 1.5 in the mixed norm
        base = Potential.constant(0.7, 0.2)
        eps = 0.05
        pert = Potential.constant(0.7 + eps, 0.2)
        grid = Grid.uniform(128)
        _, k0 = assemble_K(*build_P_series(base, 10, grid))
        _, k1 = assemble_K(*build_P_series(pert, 10, grid))
        diff = TriKernel(grid, k1.values - k0.values)
        r = max(base.lp_norm(1.0), pert.lp_norm(1.0))
        bound = (1 + 2 * r) * math.exp(2 * r) * eps * 1.5
        assert diff.gp_norm(1.0) <= bound


def test_kernel_csv(tmp_path):
    res = build_P_series(Potential.constant(1.0), 3, Grid.uniform(4))
    _, k = assemble_K(res.p_plus, res.p_minus)
    path = tmp_path / "k.csv"
    k.to_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "x,t,k11,k12,k21,k22"
    assert len(lines) == 1 + sum(i + 1 for i in range(5))
