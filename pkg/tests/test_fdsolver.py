import math

import numpy as np
import pytest

from s2wb import tolerances as tol
from s2wb.errors import DomainError, NonConvergenceError
from s2wb.fdsolver import (
    concentration_diagnostic,
    gauss_perturbed_boundary,
    hessian_oscillation,
    isotropic_coefficient,
    linearization_fields,
    quadratic_boundary,
    scaling_experiment,
    sigma2_field,
    sin_perturbed_boundary,
    solve_dirichlet,
    superharmonic_fields,
    superharmonicity_residual,
)
from s2wb.grids import (
    PotentialGrid,
    hessian_entries,
    read_s2grid,
    write_s2grid,
)
from s2wb.legendre import TransformConfig, transform_grid
from s2wb.sigma2op import Branch


class TestGridType:
    def test_file_round_trip_exact(self, rng, tmp_path):
        g = PotentialGrid.box(2, 1.5, 7, rng.standard_normal((7, 7)))
        path = tmp_path / "grid.txt"
        write_s2grid(g, path)
        g2 = read_s2grid(path)
        assert np.array_equal(g.values, g2.values)
        assert (g2.n, g2.m, g2.extent) == (2, 7, 1.5)

    def test_header_format(self, rng, tmp_path):
        g = PotentialGrid.box(3, 2.0, 5, rng.standard_normal((5, 5, 5)))
        path = tmp_path / "grid.txt"
        write_s2grid(g, path)
        assert path.read_text().splitlines()[0] == "S2GRID v1 3 5 2.0"

    def test_min_nodes(self):
        with pytest.raises(DomainError):
            PotentialGrid.box(2, 1.0, 4, np.zeros((4, 4)))

    def test_asymmetric_not_writable(self, tmp_path):
        g = PotentialGrid(n=2, m=5, axes=((0.0, 1.0), (-1.0, 1.0)), values=np.zeros((5, 5)))
        with pytest.raises(DomainError):
            write_s2grid(g, tmp_path / "bad.txt")


class TestStencils:
    def test_exact_on_quadratics(self, rng):
        amat = np.array([[1.3, 0.4], [0.4, 0.9]])
        xs = np.linspace(-1, 1, 17)
        mesh = np.meshgrid(xs, xs, indexing="ij")
        x = np.stack(mesh, axis=-1)
        vals = 0.5 * np.einsum("...i,ij,...j->...", x, amat, x)
        ent = hessian_entries(PotentialGrid.box(2, 1.0, 17, vals))
        for (a, b), field in ent.items():
            assert np.abs(field - amat[a, b]).max() <= tol.STENCIL_QUADRATIC_EXACT

    def test_quartic_second_order(self):
        errs = []
        for m in (17, 33, 65):
            xs = np.linspace(-1, 1, m)
            mesh = np.meshgrid(xs, xs, indexing="ij")
            vals = mesh[0] ** 4 + mesh[0] ** 2 * mesh[1] ** 2
            ent = hessian_entries(PotentialGrid.box(2, 1.0, m, vals))
            xi = np.meshgrid(xs[1:-1], xs[1:-1], indexing="ij")
            err = max(
                np.abs(ent[(0, 0)] - (12 * xi[0] ** 2 + 2 * xi[1] ** 2)).max(),
                np.abs(ent[(0, 1)] - 4 * xi[0] * xi[1]).max(),
            )
            errs.append(err)
        order1 = math.log2(errs[0] / errs[1])
        order2 = math.log2(errs[1] / errs[2])
        assert 1.9 <= order1 <= 2.1
        assert 1.9 <= order2 <= 2.1


class TestSolver:
    def test_quadratic_boundary_exact(self):
        grid, report = solve_dirichlet(quadratic_boundary(2), 1.0, 33, 1.0)
        assert report.iterations <= 2
        assert report.final_residual <= 1e-10
        t = isotropic_coefficient(2)
        xs = np.linspace(-1, 1, 33)
        mesh = np.meshgrid(xs, xs, indexing="ij")
        expect = t / 2 * (mesh[0] ** 2 + mesh[1] ** 2)
        assert np.abs(grid.values - expect).max() <= 1e-10

    def test_quadratic_boundary_exact_3d(self):
        grid, report = solve_dirichlet(quadratic_boundary(3), 1.0, 9, 1.0, n=3)
        assert report.iterations <= 2
        assert report.final_residual <= 1e-10

    def test_report_residual_matches_recomputation(self):
        grid, report = solve_dirichlet(sin_perturbed_boundary(2, 1.0, 0.1), 1.0, 33, 1.0)
        ent = hessian_entries(grid)
        recomputed = float(np.abs(sigma2_field(ent, 2) - 1.0).max())
        assert abs(recomputed - report.final_residual) <= tol.REPORT_RESIDUAL_MATCH

    def test_superlinear_decay(self):
        _, report = solve_dirichlet(sin_perturbed_boundary(2, 1.0, 0.1), 1.0, 65, 1.0)
        hist = [r for r in report.residual_history if r > 1e-13]
        ratios = [b / a for a, b in zip(hist, hist[1:])]
        assert len(ratios) >= 2
        assert all(b < a for a, b in zip(ratios, ratios[1:]))
        assert ratios[-1] <= 0.2 * ratios[0]
        assert ratios[-1] <= 1e-2

    def test_branch_reported(self):
        _, report = solve_dirichlet(quadratic_boundary(2), 1.0, 17, 1.0)
        assert report.branch is Branch.POSITIVE_TRACE
        assert report.min_semiconvexity > 0.0

    def test_max_iter_exhaustion(self):
        with pytest.raises(NonConvergenceError) as exc:
            solve_dirichlet(sin_perturbed_boundary(2, 1.0, 0.1), 1.0, 33, 1.0,
                            newton_tol=1e-14, max_iter=1)
        assert len(exc.value.history) >= 1

    def test_manufactured_solution_order(self):
        t = isotropic_coefficient(2)
        amp = 0.05

        def v(x1, x2):
            return t / 2 * (x1 * x1 + x2 * x2) + amp * np.sin(np.pi * x1) * np.sin(np.pi * x2)

        def rhs(x1, x2):
            d11 = t - amp * np.pi ** 2 * np.sin(np.pi * x1) * np.sin(np.pi * x2)
            d22 = d11
            d12 = amp * np.pi ** 2 * np.cos(np.pi * x1) * np.cos(np.pi * x2)
            return d11 * d22 - d12 ** 2

        errs = {}
        for m in (17, 33):
            u, _ = solve_dirichlet(v, 1.0, m, 1.0, rhs=rhs, newton_tol=1e-11)
            xs = np.linspace(-1, 1, m)
            mesh = np.meshgrid(xs, xs, indexing="ij")
            errs[m] = np.abs(u.values - v(*mesh)).max()
        order = math.log2(errs[17] / errs[33])
        assert 1.9 <= order <= 2.1

    def test_linearization_matches_directional_derivative(self, rng):
        u, _ = solve_dirichlet(sin_perturbed_boundary(2, 1.0, 0.1), 1.0, 17, 1.0)
        ent = hessian_entries(u)
        f_fields = linearization_fields(ent, 2)
        xs = np.linspace(-1, 1, 17)
        mesh = np.meshgrid(xs, xs, indexing="ij")
        v = np.sin(np.pi * mesh[0]) * np.sin(2.0 * np.pi * mesh[1])
        s = 1e-6
        ent_up = hessian_entries(u.replace_values(u.values + s * v))
        base = sigma2_field(ent, 2)
        up = sigma2_field(ent_up, 2)
        fd = (up - base) / s
        vent = hessian_entries(PotentialGrid.box(2, 1.0, 17, v))
        assembled = (f_fields[(0, 0)] * vent[(0, 0)] + f_fields[(1, 1)] * vent[(1, 1)]
                     + 2.0 * f_fields[(0, 1)] * vent[(0, 1)])
        dev = np.abs(fd - assembled).max() / (1.0 + np.abs(assembled).max())
        assert dev <= tol.LINEARIZATION_FD_REL

    def test_mmatrix_diagnostic_counts(self):
        _, report = solve_dirichlet(sin_perturbed_boundary(2, 1.0, 0.1), 1.0, 17, 1.0)
        assert report.mmatrix_violations >= 0

    def test_branch_projection_coefficient(self):
        from s2wb.fdsolver import branch_projection_coefficient
        floor = tol.BRANCH_SIGMA1_FLOOR
        for n in (2, 3):
            c = branch_projection_coefficient(0.1, n)
            assert 0.1 + 2.0 * c * n == pytest.approx(floor + 0.01, abs=1e-14)

    def test_below_floor_target_refused(self):
        # sigma_2 = 0.02 target: the solution trace sits below the branch
        # floor, so the solver must refuse rather than cross branches
        from s2wb.errors import BranchLossError

        def rhs(x1, x2):
            return np.full_like(x1, 0.02)

        def bnd(x1, x2):
            return np.sqrt(0.02) / 2 * (x1 * x1 + x2 * x2)

        with pytest.raises((BranchLossError, NonConvergenceError)):
            solve_dirichlet(bnd, 1.0, 17, 1.0, rhs=rhs, max_iter=12)

    def test_cg_linear_path_matches_direct(self):
        # the iterative branch used above the direct-factorization cap
        from s2wb.fdsolver import _harmonic_extension, _solve_linear, assemble_weighted_operator
        m = 17
        ident = {(0, 0): np.ones((m - 2, m - 2)), (1, 1): np.ones((m - 2, m - 2)),
                 (0, 1): np.zeros((m - 2, m - 2))}
        mat = assemble_weighted_operator(ident, 2, m, 2.0 / (m - 1))
        rng = np.random.default_rng(4)
        rhs = rng.standard_normal(m * m)
        direct = _solve_linear(mat, rhs, m)
        iterative = _solve_linear(mat, rhs, tol.LINSOLVE_DIRECT_MAX_M + 1)
        assert np.abs(direct - iterative).max() <= 1e-7 * (1.0 + np.abs(direct).max())


class TestSuperharmonicity:
    def test_quadratic_pipeline_residuals(self):
        # solve -> transform -> superharmonicity on quadratic data: all ~ 0
        cfg = TransformConfig(n=2, K=1.0)
        grid, report = solve_dirichlet(quadratic_boundary(2), 1.0, 33, 1.0)
        assert report.final_residual <= tol.PIPELINE_RESIDUAL
        w = transform_grid(grid, cfg)
        lap, diag = superharmonicity_residual(w, cfg, return_diagnostics=True)
        assert np.abs(lap).max() <= 1e-10
        assert np.abs(np.asarray(diag["a"]) - diag["a"].reshape(-1)[0]).max() <= 1e-10

    def test_proportionality_pointwise(self):
        cfg = TransformConfig(n=2, K=1.0)
        grid, _ = solve_dirichlet(sin_perturbed_boundary(2, 1.0, 0.05), 1.0, 33, 1.0)
        w = transform_grid(grid, cfg)
        lap, diag = superharmonicity_residual(w, cfg, return_diagnostics=True)
        assert diag["proportionality_dev"] <= tol.PROPORTIONALITY_TOL * diag["proportionality_scale"]

    def test_positive_part_shrinks_under_refinement(self):
        cfg = TransformConfig(n=2, K=1.0)
        boundary = sin_perturbed_boundary(2, 1.0, 0.05)
        pos = {}
        for m in (33, 65):
            grid, _ = solve_dirichlet(boundary, 1.0, m, 1.0)
            w = transform_grid(grid, cfg)
            _, diag = superharmonicity_residual(w, cfg, return_diagnostics=True)
            pos[m] = diag["max_positive"]
        assert pos[65] <= pos[33] / 1.8 + 1e-12

    def test_mu_fields_in_range(self):
        cfg = TransformConfig(n=2, K=1.0)
        grid, _ = solve_dirichlet(sin_perturbed_boundary(2, 1.0, 0.1), 1.0, 33, 1.0)
        w = transform_grid(grid, cfg)
        fields = superharmonic_fields(w, cfg)
        assert fields["mu"].min() > 0.0
        assert fields["mu"].max() < 1.0


class TestScalingExperiment:
    def test_quadratic_floor(self):
        res = scaling_experiment(quadratic_boundary(2), [1.0, 2.0], 17, 1.0)
        assert all(r.osc <= 1e-9 for r in res.rows)

    def test_perturbed_decay(self):
        res = scaling_experiment(gauss_perturbed_boundary(2, 0.1), [1.0, 2.0, 4.0], 33, 1.0)
        assert res.strictly_decreasing
        assert res.alpha_hat > 0.0

    def test_refinement_agreement(self):
        oscs = {}
        cfg = TransformConfig(n=2, K=1.0)
        for m in (33, 65):
            grid, _ = solve_dirichlet(gauss_perturbed_boundary(2, 0.1), 1.0, m, 1.0)
            w = transform_grid(grid, cfg)
            oscs[m], _ = hessian_oscillation(w)
        assert abs(oscs[33] - oscs[65]) <= 0.10 * max(oscs.values())

    def test_extents_must_increase(self):
        with pytest.raises(DomainError):
            scaling_experiment(quadratic_boundary(2), [2.0, 1.0], 17, 1.0)

    def test_partial_failure_propagates(self):
        with pytest.raises(NonConvergenceError):
            scaling_experiment(sin_perturbed_boundary(2, 1.0, 0.1), [1.0, 2.0], 17, 1.0,
                               newton_tol=1e-15, max_iter=1)


class TestConcentration:
    def test_constant_field_no_bad_set(self):
        cfg = TransformConfig(n=2, K=1.0)
        grid, _ = solve_dirichlet(quadratic_boundary(2), 1.0, 33, 1.0)
        w = transform_grid(grid, cfg)
        table = concentration_diagnostic(w, cfg, xi=1e-6, levels=2)
        assert len(table) >= 1
        assert all(row["bad_fraction"] == 0.0 for row in table)

    def test_perturbed_reported_not_asserted(self):
        cfg = TransformConfig(n=2, K=1.0)
        grid, _ = solve_dirichlet(sin_perturbed_boundary(2, 1.0, 0.1), 1.0, 33, 1.0)
        w = transform_grid(grid, cfg)
        table = concentration_diagnostic(w, cfg, xi=1e-4, levels=2)
        assert all(0.0 <= row["bad_fraction"] <= 1.0 for row in table)

    def test_truncation_warns(self):
        cfg = TransformConfig(n=2, K=1.0)
        grid, _ = solve_dirichlet(quadratic_boundary(2), 1.0, 17, 1.0)
        w = transform_grid(grid, cfg)
        with pytest.warns(UserWarning):
            concentration_diagnostic(w, cfg, xi=1e-6, levels=6)

    def test_xi_positive(self):
        cfg = TransformConfig(n=2, K=1.0)
        grid, _ = solve_dirichlet(quadratic_boundary(2), 1.0, 17, 1.0)
        w = transform_grid(grid, cfg)
        with pytest.raises(DomainError):
            concentration_diagnostic(w, cfg, xi=0.0, levels=2)
