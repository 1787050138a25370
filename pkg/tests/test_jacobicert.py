import math

import numpy as np
import pytest

from s2wb import tolerances as tol
from s2wb.backend import kernels
from s2wb.errors import DomainError, PreconditionError, SamplerStarvationError
from s2wb.jacobicert import (
    ConstraintSample,
    Jet,
    default_shift,
    det_bound_batch,
    det_lower_bound,
    distinct_triple_sum,
    jacobi_excess,
    min_shift_estimate,
    project_jet,
    q_form_direct,
    q_reduction_eigen,
    qform_slices_batch,
    random_tensor_batch,
    ray_lambda_batch,
    reduction_batch,
    remark_3d,
    sample_constraint,
    sample_lambda_batch,
    superharmonic_form,
    symmetrize_tensor,
    tangency_residual,
)

from conftest import sigma2_doublesum

T3 = 3.0 ** -0.5


class TestSampler:
    def test_every_output_on_manifold_bruteforce(self):
        lams = sample_lambda_batch(4, 1.0, 500, (7,))
        for row in lams[:100]:
            assert abs(sigma2_doublesum(row) - 1.0) <= tol.SAMPLE_SIGMA2_TOL

    def test_floor_respected(self):
        for k_floor in (1.0, 5.0):
            lams = sample_lambda_batch(3, k_floor, 300, (9,))
            assert lams.min() >= -k_floor - tol.SEMICONVEXITY_SLACK

    def test_pinned_family_present(self):
        lams = sample_lambda_batch(3, 1.0, 500, (11,))
        assert (lams == -1.0).any(axis=1).sum() > 0

    def test_remark_point_accepted(self):
        # (2, 2, -3/4) satisfies every sample invariant for K >= 3/4
        for k_floor in (0.75, 1.0, 5.0):
            s = ConstraintSample.from_values([2.0, 2.0, -0.75], k_floor)
            assert s.spectrum.sigma1 == pytest.approx(13 / 4)

    def test_below_floor_rejected(self):
        with pytest.raises(DomainError):
            ConstraintSample.from_values([2.0, 2.0, -0.75], 0.5)

    def test_deterministic(self):
        a = sample_lambda_batch(4, 1.0, 200, (5,))
        b = sample_lambda_batch(4, 1.0, 200, (5,))
        assert np.array_equal(a, b)

    def test_starvation(self):
        with pytest.raises(SamplerStarvationError) as exc:
            sample_lambda_batch(3, 1.0, 100, (1,), lam_max=1e-8, pin_prob=0.0)
        assert exc.value.drawn >= tol.SAMPLER_STARVE_WINDOW

    def test_unbounded_mode(self):
        lams = sample_lambda_batch(3, math.inf, 300, (13,))
        s1 = lams.sum(axis=1)
        assert (s1 > 0).all()
        for row in lams[:50]:
            assert abs(sigma2_doublesum(row) - 1.0) <= tol.SAMPLE_SIGMA2_TOL

    def test_sample_constraint_objects(self):
        samples = sample_constraint(3, 1.0, 50, seed=3)
        assert len(samples) == 50
        assert all(s.J == default_shift(3, 1.0) for s in samples)
        assert all(s.delta == 1.0 + s.epsilon for s in samples)

    def test_ray_family(self):
        lams = ray_lambda_batch(4, 32)
        e = kernels.esp_batch(lams)
        assert np.abs(e[:, 2] - 1.0).max() <= 1e-12
        assert lams[:, 0].max() == pytest.approx(1e6)


class TestProjection:
    def test_idempotent(self, rng):
        s = ConstraintSample.from_values([2.0, 2.0, -0.75], 1.0)
        jet = project_jet(s, rng.standard_normal((3, 3, 3)))
        again = project_jet(s, jet.tensor)
        dev = np.abs(again.tensor - jet.tensor).max()
        assert dev <= tol.PROJECTION_IDEMPOTENT * (1.0 + np.abs(jet.tensor).max())

    def test_f_aligned_violation_projected(self):
        s = ConstraintSample.from_values([2.0, 2.0, -0.75], 1.0)
        f = s.f
        raw = np.zeros((3, 3, 3))
        for i in range(3):
            for k in range(3):
                raw[i, i, k] = f[i]
        jet = project_jet(s, symmetrize_tensor(raw))
        res = np.abs(tangency_residual(f[None], jet.tensor[None])).max()
        assert res <= 1e-12 * (1.0 + np.abs(f).max() * np.abs(jet.tensor).max())

    def test_random_raw_satisfies_invariants(self, rng):
        for n in (2, 4, 6):
            lam = sample_lambda_batch(n, 1.0, 4, (n,))[0]
            s = ConstraintSample.from_values(lam, 1.0)
            jet = project_jet(s, rng.standard_normal((n, n, n)))
            c = jet.tensor
            assert np.array_equal(c, c.transpose(1, 0, 2))
            assert np.array_equal(c, c.transpose(0, 2, 1))

    def test_projection_is_frobenius_minimal(self, rng):
        # the correction must lie in the span of the constraint normals
        s = ConstraintSample.from_values([2.0, 2.0, -0.75], 1.0)
        raw = symmetrize_tensor(rng.standard_normal((3, 3, 3)))
        jet = project_jet(s, raw)
        delta = raw - jet.tensor
        # any tangent symmetric tensor must be Frobenius-orthogonal to delta
        probe = project_jet(s, rng.standard_normal((3, 3, 3))).tensor
        inner = float((delta * probe).sum())
        assert abs(inner) <= 1e-10 * (1.0 + np.abs(delta).max() * np.abs(probe).max())

    def test_symmetry_required(self):
        s = ConstraintSample.from_values([2.0, 2.0, -0.75], 1.0)
        bad = np.zeros((3, 3, 3))
        bad[0, 1, 2] = 1.0
        with pytest.raises(DomainError):
            Jet(sample=s, tensor=bad)


class TestQForm:
    def sample(self):
        return ConstraintSample.from_values([2.0, 2.0, -0.75], 1.0)

    def tangent(self, s, rng):
        f = s.f
        t = rng.standard_normal(s.n)
        return t - (t @ f) / (f @ f) * f

    def test_zero_vector(self):
        assert q_form_direct(self.sample(), 0, np.zeros(3)) == 0.0

    def test_orthogonal_to_EL_gives_3t2(self, rng):
        # Q = 3|t|^2 when t is perpendicular to both E and L; needs n >= 4
        # for the orthogonal complement inside the tangent space to be nonzero
        n = 5
        lam = sample_lambda_batch(n, 1.0, 1, (421,))[0]
        s = ConstraintSample.from_values(lam, 1.0)
        red = q_reduction_eigen(s, 1)
        ortho = []
        for v in (s.f, red.E, red.L):
            w = v.astype(float).copy()
            for b in ortho:
                w -= (w @ b) * b
            norm = np.linalg.norm(w)
            if norm > 1e-10:
                ortho.append(w / norm)
        for _ in range(10):
            t = rng.standard_normal(n)
            for b in ortho:
                t = t - (t @ b) * b
            assert np.linalg.norm(t) > 1e-9
            got = q_form_direct(s, 1, t)
            assert got == pytest.approx(3.0 * float(t @ t), rel=1e-9)

    def test_nonnegative_on_tangents(self, rng):
        s = self.sample()
        for i in range(3):
            for _ in range(50):
                t = self.tangent(s, rng)
                assert q_form_direct(s, i, t) >= -1e-12 * (1.0 + t @ t)

    def test_precondition(self, rng):
        s = self.sample()
        with pytest.raises(PreconditionError):
            q_form_direct(s, 0, s.f)

    def test_cross_check_with_reduction(self, rng):
        s = self.sample()
        for i in range(3):
            red = q_reduction_eigen(s, i)
            for _ in range(20):
                t = self.tangent(s, rng)
                direct = q_form_direct(s, i, t)
                via = 3.0 * (t @ t) - 2.0 * (red.E @ t) ** 2 - red.eta * (red.L @ t) ** 2
                assert direct == pytest.approx(via, rel=1e-10, abs=1e-10)
                lo = min(red.xi_min, 3.0) * (t @ t)
                hi = max(red.xi_max, 3.0) * (t @ t)
                assert lo - 1e-9 * (1 + t @ t) <= direct <= hi + 1e-9 * (1 + t @ t)


class TestQReduction:
    def test_symmetric_point_closed_forms(self):
        # lam = (t, t, t): |Df|^2 = 4, |E|^2 = 2/3, L = 0, eigenvalues {5/3, 3} at J=0
        s = ConstraintSample.from_values([T3, T3, T3], 1.0, shift=0.0, epsilon=1 / 3)
        red = q_reduction_eigen(s, 0)
        assert s.df_sq == pytest.approx(4.0, abs=1e-12)
        assert red.normE2 == pytest.approx(2 / 3, abs=1e-12)
        assert red.normL2 == pytest.approx(0.0, abs=1e-12)
        assert red.EdotL == pytest.approx(0.0, abs=1e-12)
        assert red.eta == pytest.approx(17 / 9, abs=1e-12)
        assert sorted((red.xi_min, red.xi_max)) == pytest.approx([5 / 3, 3.0], abs=1e-10)

    def test_gram_bounds(self):
        # |E|^2 < 1 and |L|^2 < 1 on the constraint set
        for n in (2, 3, 5):
            lams = sample_lambda_batch(n, 1.0, 300, (n + 40,))
            red = reduction_batch(lams, default_shift(n, 1.0), 4 / 3)
            assert red["normE2"].max() < 1.0
            assert red["normL2"].max() < 1.0

    def test_trace_chain_positive(self):
        # tr > 3 - delta f_i/(s1+J) > 0 for delta <= 1.5, J >= 0
        for delta in (1.0, 4 / 3, 1.5):
            lams = sample_lambda_batch(4, 5.0, 500, (77,))
            red = reduction_batch(lams, 0.0, delta)
            chain = 3.0 - delta * red["f"] / red["s1"][:, None]
            assert (red["trQ"] > chain - 1e-12).all()
            assert chain.min() > 0.0

    def test_projected_form_oracle_full_matrix(self, rng):
        # independent verification against the numpy-assembled projected form
        for n in (3, 4, 6):
            lams = sample_lambda_batch(n, 1.0, 20, (n + 50,))
            shift = default_shift(n, 1.0)
            for row in lams[:6]:
                s = ConstraintSample.from_values(row, 1.0, shift=shift)
                f = s.f
                proj = np.eye(n) - np.outer(f, f) / (f @ f)
                for i in range(n):
                    red = q_reduction_eigen(s, i)
                    e_i = np.zeros(n)
                    e_i[i] = 1.0
                    amat = 3.0 * np.eye(n) - 2.0 * np.outer(e_i, e_i) - red.eta * np.ones((n, n))
                    full = proj @ amat @ proj
                    # restriction to span{E, L} via an orthonormal basis
                    basis = []
                    for v in (red.E, red.L):
                        w = v.copy()
                        for b in basis:
                            w -= (w @ b) * b
                        nw = np.linalg.norm(w)
                        if nw > 1e-8:
                            basis.append(w / nw)
                    sub = np.array([[b1 @ full @ b2 for b2 in basis] for b1 in basis])
                    eig = np.sort(np.linalg.eigvalsh(sub))
                    if len(basis) == 2:
                        got = np.sort([red.xi_min, red.xi_max])
                        np.testing.assert_allclose(got, eig, atol=tol.REDUCTION_ORACLE_TOL * (1 + np.abs(eig).max()))
                    else:
                        assert min(red.xi_min, red.xi_max) == pytest.approx(eig[0], abs=1e-8) or \
                            max(red.xi_min, red.xi_max) == pytest.approx(eig[0], abs=1e-8)

    def test_positive_definite_when_tr_det_positive(self, rng):
        # tr > 0 and det > 0 certify the full projected form is PSD
        n = 5
        lams = sample_lambda_batch(n, 5.0, 50, (99,))
        shift = default_shift(n, 5.0)
        for row in lams[:10]:
            s = ConstraintSample.from_values(row, 5.0, shift=shift)
            f = s.f
            proj = np.eye(n) - np.outer(f, f) / (f @ f)
            for i in range(n):
                red = q_reduction_eigen(s, i)
                assert red.trQ > 0 and red.detQ > 0
                e_i = np.zeros(n)
                e_i[i] = 1.0
                amat = 3.0 * np.eye(n) - 2.0 * np.outer(e_i, e_i) - red.eta * np.ones((n, n))
                full = proj @ amat @ proj
                evals = np.linalg.eigvalsh(full)
                assert evals.min() >= -1e-9

    def test_batch_oracle_matches(self):
        lams = sample_lambda_batch(4, 1.0, 2000, (123,))
        red = reduction_batch(lams, default_shift(4, 1.0), 4 / 3)
        assert np.abs(red["trQ"] - red["tr_oracle"]).max() <= tol.REDUCTION_ORACLE_TOL * (1 + np.abs(red["trQ"]).max())
        assert np.abs(red["detQ"] - red["det_oracle"]).max() <= tol.REDUCTION_ORACLE_TOL * (1 + np.abs(red["detQ"]).max())

    def test_n2_rank1_case(self):
        # n = 2: E and L are parallel; the phantom eigenvalue is 3
        s = ConstraintSample.from_values([2.0, 0.5], 1.0)
        red = q_reduction_eigen(s, 0)
        assert red.xi_max == pytest.approx(3.0, abs=1e-9) or red.xi_min == pytest.approx(3.0, abs=1e-9)


class TestDetLowerBound:
    def test_nonnegative_lambda_case(self):
        # rhs >= 8 when lam_i >= 0 (and n >= 3 keeps every term nonnegative)
        lams = sample_lambda_batch(3, 1.0, 500, (31,))
        shift = default_shift(3, 1.0)
        red = reduction_batch(lams, shift, 4 / 3)
        lhs, rhs = det_bound_batch(lams, shift, red["detQ"])
        mask = lams >= 0.0
        assert rhs[mask].min() >= 8.0 - 1e-9

    def test_remark_point(self):
        s = ConstraintSample.from_values([2.0, 2.0, -0.75], 0.75, shift=default_shift(3, 0.75))
        lhs, rhs = det_lower_bound(s, 2)
        assert rhs > 0.0
        assert lhs >= rhs - tol.DET_BOUND_SLACK * (1.0 + abs(lhs))

    def test_bound_holds_on_batches(self):
        for n, k_floor in ((2, 1.0), (4, 5.0), (6, 10.0)):
            lams = sample_lambda_batch(n, k_floor, 2000, (n + 60,))
            shift = default_shift(n, k_floor)
            red = reduction_batch(lams, shift, 4 / 3)
            lhs, rhs = det_bound_batch(lams, shift, red["detQ"])
            assert (lhs >= rhs - tol.DET_BOUND_SLACK * (1.0 + np.abs(lhs))).all()
            assert rhs.min() > 0.0

    def test_delta_precondition(self):
        s = ConstraintSample.from_values([2.0, 2.0, -0.75], 1.0, epsilon=0.2)
        with pytest.raises(PreconditionError):
            det_lower_bound(s, 0)

    def test_det_from_independent_char_poly(self):
        # det of the 2x2 equals the product of the restriction eigenvalues
        s = ConstraintSample.from_values([2.0, 2.0, -0.75], 1.0)
        for i in range(3):
            red = q_reduction_eigen(s, i)
            assert red.xi_min * red.xi_max == pytest.approx(red.detQ, rel=1e-9)


class TestExcess:
    def test_zero_tensor(self):
        s = ConstraintSample.from_values([2.0, 2.0, -0.75], 1.0)
        jet = Jet(sample=s, tensor=np.zeros((3, 3, 3)))
        assert jacobi_excess(jet) == 0.0
        assert superharmonic_form(jet) == 0.0

    def test_certificate_on_batches(self, rng):
        for n in (2, 3, 4, 6):
            for k_floor in (1.0, 10.0):
                lams = sample_lambda_batch(n, k_floor, 2000, (n * 7 + int(k_floor),))
                shift = default_shift(n, k_floor)
                raw = random_tensor_batch(rng, 2000, n)
                s1 = lams.sum(axis=1)
                f = s1[:, None] - lams
                c = kernels.tangency_project(f, raw)
                excess = kernels.excess_batch(lams, c, shift, 4 / 3)
                assert excess.min() >= tol.EXCESS_FLOOR

    def test_decomposition_identity(self, rng):
        # (s1 + J) excess = 6 sum_{i>j>k} c^2 + sum_i Q_i(t_i)
        n = 4
        lams = sample_lambda_batch(n, 1.0, 200, (71,))
        shift = default_shift(n, 1.0)
        raw = random_tensor_batch(rng, 200, n)
        f = lams.sum(axis=1)[:, None] - lams
        c = kernels.tangency_project(f, raw)
        excess = kernels.excess_batch(lams, c, shift, 4 / 3)
        qdir, _, _ = qform_slices_batch(lams, c, shift, 4 / 3)
        lhs = (lams.sum(axis=1) + shift) * excess
        rhs = 6.0 * distinct_triple_sum(c) + qdir.sum(axis=1)
        dev = np.abs(lhs - rhs) / (1.0 + np.abs(lhs) + np.abs(rhs))
        assert dev.max() <= tol.DECOMPOSITION_IDENTITY

    def test_regrouping_identity_exact(self, rng):
        # 6 sum_{i>j>k} + 3 sum_{i != j} + sum_i = full sum over all indices
        for n in (3, 5):
            c = random_tensor_batch(rng, 50, n)
            full = (c * c).sum(axis=(1, 2, 3))
            idx = np.arange(n)
            diag_slices = c[:, idx, idx, :]
            paired = (diag_slices ** 2).sum(axis=(1, 2)) - (c[:, idx, idx, idx] ** 2).sum(axis=1)
            pure = (c[:, idx, idx, idx] ** 2).sum(axis=1)
            lhs = 6.0 * distinct_triple_sum(c) + 3.0 * paired + pure
            dev = np.abs(lhs - full) / (1.0 + np.abs(full))
            assert dev.max() <= tol.REGROUP_IDENTITY

    def test_superharmonic_identity_and_sign(self, rng):
        s = ConstraintSample.from_values([2.0, 2.0, -0.75], 1.0)
        for _ in range(25):
            jet = project_jet(s, rng.standard_normal((3, 3, 3)))
            ex = jacobi_excess(jet)
            sh = superharmonic_form(jet)
            expect = -(1.0 / 3.0) * (s.sigma1 + s.J) ** (-1.0 / 3.0) * ex
            assert abs(sh - expect) <= tol.SUPERHARMONIC_IDENTITY * (1.0 + abs(expect))
            assert sh <= 1e-9
            if ex > 0:
                assert sh < 0

    def test_unshifted_3d(self, rng):
        # the certificate holds at J = 0 in three dimensions, no floor
        lams = sample_lambda_batch(3, math.inf, 3000, (303,))
        raw = random_tensor_batch(rng, 3000, 3)
        f = lams.sum(axis=1)[:, None] - lams
        c = kernels.tangency_project(f, raw)
        excess = kernels.excess_batch(lams, c, 0.0, 4 / 3)
        assert excess.min() >= tol.EXCESS_FLOOR


class TestRemark3d:
    def test_worked_example(self):
        lam3, ratio = remark_3d(2.0, 2.0)
        assert lam3 == pytest.approx(-0.75, abs=1e-14)
        assert ratio == pytest.approx(13 / 3, abs=1e-12)
        assert ratio > 3.0

    def test_asymptotic_sharpness(self):
        _, ratio = remark_3d(1e3, 1e3)
        assert 0.0 < ratio - 3.0 < 1e-5

    def test_substitution_oracle(self, rng):
        for _ in range(200):
            l2 = math.exp(rng.uniform(-2, 3))
            l1 = l2 * math.exp(rng.uniform(0, 3))
            if l1 * l2 <= 1.0 + 1e-9:
                continue
            lam3, ratio = remark_3d(l1, l2)
            assert abs(sigma2_doublesum([l1, l2, lam3]) - 1.0) <= 1e-12 * (1.0 + l1 * l2)
            assert ratio > 3.0
            assert ratio >= -1.0 + 4.0 * l1 * l2 / (l1 * l2 - 1.0) - 1e-12 * ratio

    def test_preconditions(self):
        with pytest.raises(PreconditionError):
            remark_3d(0.5, 0.5)
        with pytest.raises(PreconditionError):
            remark_3d(1.0, 2.0)


class TestShiftDiagnostics:
    def test_min_shift_estimate_geometry(self):
        lams = sample_lambda_batch(3, 1.0, 2000, (17,))
        est = min_shift_estimate(lams, 4 / 3, default_shift(3, 1.0))
        assert est is not None
        assert 0.0 <= est <= default_shift(3, 1.0)

    def test_probe_reports_only(self):
        # J = 0 with n >= 4: any det <= 0 found is reported, never asserted
        lams = sample_lambda_batch(5, 10.0, 5000, (19,))
        red = reduction_batch(lams, 0.0, 4 / 3)
        count = int((red["detQ"] <= 0.0).sum())
        assert count >= 0  # informational
