import numpy as np
import pytest
from scipy.stats import ks_2samp

from momentfusion.errors import DimensionMismatch, RankDeficient
from momentfusion.grassmann import (MeasurementEnsemble, Projector,
                                    as_generator, e_matrix, haar_frame_batch,
                                    haar_sample, projector_from_measurement)


class TestProjectorFromMeasurement:
    def test_coordinate_row(self):
        P = projector_from_measurement(np.array([[1.0, 0.0, 0.0]]))
        assert np.allclose(P.entries, np.diag([1.0, 0.0, 0.0]))

    def test_diagonal_sum_row(self):
        # row space of [1 1 0] projects onto (e1+e2)/sqrt(2)
        P = projector_from_measurement(np.array([[1.0, 1.0, 0.0]]))
        expect = 0.5 * np.array([[1, 1, 0], [1, 1, 0], [0, 0, 0.0]])
        assert np.allclose(P.entries, expect, atol=1e-14)

    def test_coordinate_pair(self):
        Q = np.hstack([np.eye(2), np.zeros((2, 2))])
        P = projector_from_measurement(Q)
        assert np.allclose(P.entries, np.diag([1.0, 1.0, 0.0, 0.0]))

    def test_rank_deficient_raises(self):
        with pytest.raises(RankDeficient):
            projector_from_measurement(np.array([[1.0, 0, 0], [2.0, 0, 0]]))


class TestProjectorInvariants:
    def test_validation_rejects_non_idempotent(self):
        with pytest.raises(DimensionMismatch):
            Projector(3, 1, np.diag([0.5, 0.5, 0.0]))

    def test_validation_rejects_wrong_trace(self):
        with pytest.raises(DimensionMismatch):
            Projector(3, 2, np.diag([1.0, 0.0, 0.0]))

    def test_json_round_trip(self):
        P = haar_sample(4, 2, 5)
        again = Projector.from_json_dict(P.to_json_dict())
        assert np.array_equal(P.entries, again.entries)


class TestHaarSampling:
    def test_sample_is_projector(self):
        P = haar_sample(5, 2, 0)
        assert abs(np.trace(P.entries) - 2) <= 1e-10
        assert np.linalg.norm(P.entries @ P.entries - P.entries) <= 1e-10

    def test_mean_projector(self):
        # E[P] = (k/d) I by orthogonal invariance
        d, k, n = 4, 2, 10**5
        V = haar_frame_batch(d, k, n, as_generator(1))
        mean = np.einsum("nik,njk->ij", V, V) / n
        assert np.max(np.abs(mean - (k / d) * np.eye(d))) <= 5e-3

    def test_pairing_mean(self):
        d, k, n = 4, 2, 10**5
        V = haar_frame_batch(d, k, n, as_generator(2))
        vals = np.einsum("nk,nk->n", V[:, 0], V[:, 0])  # <P, e1 e1*>
        est, se = vals.mean(), vals.std(ddof=1) / np.sqrt(n)
        assert abs(est - k / d) <= 3 * se

    def test_orthogonal_invariance_ks(self):
        # <UPU*, M> must be distributed like <P, M> for fixed orthogonal U
        d, k, n = 4, 2, 10**4
        gen = as_generator(3)
        M = e_matrix(gen.standard_normal(d), gen.standard_normal(d))
        U = np.linalg.qr(gen.standard_normal((d, d)))[0]
        V = haar_frame_batch(d, k, n, gen)
        base = np.einsum("nik,ij,njk->n", V, M, V)
        conj = np.einsum("nik,ij,njk->n", V, U.T @ M @ U, V)
        assert ks_2samp(base, conj).pvalue > 0.01


class TestEMatrix:
    def test_rank_one_case(self):
        e1 = np.eye(3)[0]
        assert np.allclose(e_matrix(e1, e1), np.outer(e1, e1))

    def test_trace_identities(self):
        gen = as_generator(4)
        x, y = gen.standard_normal(5), gen.standard_normal(5)
        E = e_matrix(x, y)
        assert abs(np.trace(E) - x @ y) <= 1e-12
        expect = 0.5 * ((x @ y)**2 + (x @ x) * (y @ y))
        assert abs(np.trace(E @ E) - expect) <= 1e-10

    def test_symmetry_and_bilinearity(self):
        gen = as_generator(5)
        x, y, z = (gen.standard_normal(4) for _ in range(3))
        assert np.array_equal(e_matrix(x, y), e_matrix(y, x))
        assert np.allclose(e_matrix(x + 2 * z, y),
                           e_matrix(x, y) + 2 * e_matrix(z, y))

    def test_projector_pairing(self):
        gen = as_generator(6)
        P = haar_sample(5, 2, gen)
        x, y = gen.standard_normal(5), gen.standard_normal(5)
        assert abs(np.sum(P.entries * e_matrix(x, y)) - (P.entries @ x) @ y) <= 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            e_matrix(np.ones(3), np.ones(4))


class TestMeasurementEnsemble:
    def test_rejects_rank_deficient_member(self):
        with pytest.raises(RankDeficient):
            MeasurementEnsemble(3, 2, (np.array([[1.0, 0, 0], [1.0, 0, 0]]),))

    def test_projectors_and_json(self):
        Q = np.array([[1.0, 0, 0], [0, 1.0, 0]])
        ens = MeasurementEnsemble(3, 2, (Q,))
        assert np.allclose(ens.projectors()[0].entries, np.diag([1.0, 1, 0]))
        again = MeasurementEnsemble.from_json_dict(ens.to_json_dict())
        assert np.array_equal(again.matrices[0], Q)
