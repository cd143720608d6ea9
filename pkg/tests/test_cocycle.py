import itertools
import math

import numpy as np
import pytest

from ergopt.cocycle import (
    CertificateError,
    OneStepCocycle,
    ScaledMatrix,
    WindowedCocycle,
    conjugate,
    domination_report,
    extremal_defect,
    identity_cocycle,
    jsr_bracket,
    lyap_vector_periodic,
    periodic_product,
    product,
    sigma_n,
    spectrum_approx,
    subradius_bracket,
)
from ergopt.matgeo import SpdPoint, ThetaSet, majorization_slack
from ergopt.symdyn import Necklace, SymbolicSystem

PHI = (1.0 + math.sqrt(5.0)) / 2.0
FULL1 = SymbolicSystem.full_shift(1)
FULL2 = SymbolicSystem.full_shift(2)

FIB = OneStepCocycle(np.array([[[1.0, 1.0], [0.0, 1.0]],
                               [[1.0, 0.0], [1.0, 1.0]]]), FULL2)
DIAG = OneStepCocycle(np.array([np.diag([2.0, 0.5]),
                                np.diag([3.0, 1.0 / 3.0])]), FULL2)


def single(mat) -> OneStepCocycle:
    return OneStepCocycle(np.array([mat]), FULL1)


class TestProduct:
    def test_empty_word(self):
        p = product(FIB, ())
        assert np.allclose(p.toarray(), np.eye(2))
        assert p.log_scale == 0.0

    def test_left_multiplication_order(self):
        # the later step multiplies from the left
        assert np.allclose(product(FIB, (0, 1)).toarray(), [[1.0, 1.0], [1.0, 2.0]])

    def test_power(self):
        A = np.array([[1.0, 1.0], [0.0, 1.0]])
        assert np.allclose(product(single(A), (0,) * 5).toarray(),
                           np.linalg.matrix_power(A, 5))

    def test_inadmissible_raises(self):
        sft = SymbolicSystem.from_forbidden(2, [(1, 1)])
        F = OneStepCocycle(FIB.matrices, sft)
        with pytest.raises(ValueError):
            product(F, (1, 1, 0))


class TestSigmaN:
    def test_identity(self):
        logs = sigma_n(identity_cocycle(2, 2), 3)
        assert logs.shape == (8, 2)
        assert np.abs(logs).max() == 0.0

    def test_single_diag(self):
        logs = sigma_n(single(np.diag([2.0, 0.5])), 3)
        assert np.allclose(logs, [[3 * math.log(2), -3 * math.log(2)]])

    def test_fib_depth_two(self):
        logs = sigma_n(FIB, 2)
        target = 2 * math.log(PHI)
        assert logs.shape == (4, 2)
        assert np.isclose(logs[:, 0], target).any()
        # determinant-one products: rows sum to zero
        assert np.abs(logs.sum(axis=1)).max() < 1e-12

    def test_subadditive_on_concatenation(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            w = tuple(int(x) for x in rng.integers(0, 2, 5))
            v = tuple(int(x) for x in rng.integers(0, 2, 4))
            slack = majorization_slack(
                product(FIB, w).cartan().values + product(FIB, v).cartan().values,
                product(FIB, w + v).cartan().values)
            assert slack >= -1e-9


class TestLyapunovVectors:
    def test_single_diag(self):
        got = lyap_vector_periodic(single(np.diag([2.0, 0.5])), Necklace((0,)))
        assert np.allclose(got.values, [math.log(2), -math.log(2)])

    def test_diag_pair_alternating(self):
        got = lyap_vector_periodic(DIAG, Necklace((0, 1)))
        assert np.allclose(got.values, [0.5 * math.log(6), -0.5 * math.log(6)])

    def test_identity(self):
        got = lyap_vector_periodic(identity_cocycle(2, 3), Necklace((0, 1)))
        assert np.abs(got.values).max() == 0.0

    def test_matches_long_cartan_average(self):
        # (1/q) jordan of the period product against (1/n) cartan at n = 64 q
        rng = np.random.default_rng(21)
        F = OneStepCocycle(rng.uniform(0.5, 1.5, (2, 2, 2)), FULL2)
        for neck in (Necklace((0,)), Necklace((0, 1))):
            lam = lyap_vector_periodic(F, neck).values
            q = neck.period
            block = periodic_product(F, neck)
            acc = ScaledMatrix.identity(2)
            for _ in range(64):
                acc = block @ acc
            direct = acc.cartan().values / (64 * q)
            assert majorization_slack(direct, lam) >= -1e-9
            assert np.abs(direct - lam).max() < 0.05


class TestJsrBracket:
    def test_single_matrix(self):
        A = np.array([[1.0, 1.0], [0.0, 1.0]])
        br = jsr_bracket(single(A), 1)
        assert br.lower == pytest.approx(1.0)
        assert br.upper == pytest.approx(PHI)  # operator norm at depth one

    def test_fib_pair(self):
        br = jsr_bracket(FIB, 12)
        assert str(br.witness) == "01"
        assert br.upper - br.lower <= 1e-3
        assert br.lower <= PHI + 1e-9 <= br.upper + 2e-9

    def test_commuting_diag(self):
        F = OneStepCocycle(np.array([np.diag([2.0, 1.0]), np.diag([1.0, 2.0])]),
                           FULL2)
        br = jsr_bracket(F, 4)
        assert br.lower == pytest.approx(2.0)
        assert br.upper == pytest.approx(2.0)

    def test_brute_force_oracle(self):
        # independent enumeration of every product of length <= 8
        best = 0.0
        for q in range(1, 9):
            for word in itertools.product((0, 1), repeat=q):
                m = np.eye(2)
                for s in word:
                    m = FIB.matrices[s] @ m
                best = max(best, max(np.abs(np.linalg.eigvals(m))) ** (1.0 / q))
        br = jsr_bracket(FIB, 8)
        assert br.lower == pytest.approx(best, abs=1e-12)


class TestSubradius:
    def test_single_matrix(self):
        br = subradius_bracket(single(np.diag([2.0, 0.5])), 3)
        assert br.upper == pytest.approx(2.0)

    def test_identity_cocycle(self):
        br = subradius_bracket(identity_cocycle(2, 2), 3)
        assert br.lower == pytest.approx(1.0)
        assert br.upper == pytest.approx(1.0)

    def test_swap_pair(self):
        F = OneStepCocycle(np.array([np.diag([2.0, 0.5]), np.diag([0.5, 2.0])]),
                           FULL2)
        br = subradius_bracket(F, 4)
        assert br.upper <= 1.0 + 1e-12
        assert str(br.witness) == "01"
        assert br.one_sided_reliable


class TestDomination:
    def test_diag_pair_dominated(self):
        rep = domination_report(DIAG, [4, 8])
        assert rep.verdict(1) == "dominated"
        assert rep.rates.min() >= 2 * math.log(2) - 1e-12
        assert rep.theta.indices == frozenset()

    def test_identity_undominated(self):
        rep = domination_report(identity_cocycle(2, 2), [4, 8])
        assert rep.verdict(1) == "undominated"
        assert rep.theta.indices == {1}

    def test_scaled_rotation_undominated(self):
        rot = 2.0 * np.array([[0.0, -1.0], [1.0, 0.0]])
        F = OneStepCocycle(np.array([rot, 2.0 * np.eye(2)]), FULL2)
        rep = domination_report(F, [4, 8])
        assert rep.verdict(1) == "undominated"


class TestSpectrumApprox:
    def test_single_matrix_point(self):
        sa = spectrum_approx(single(np.diag([2.0, 0.5])), 3, 8,
                             ThetaSet.empty(2), 16)
        assert sa.gap <= 1e-12
        for c, bound in sa.inner_support.items():
            expect = math.log(2) * c[0] - math.log(2) * c[1]
            assert bound == pytest.approx(expect, abs=1e-12)

    def test_diag_pair_segment(self):
        rep = domination_report(DIAG, [4, 8])
        sa = spectrum_approx(DIAG, 6, 12, rep.theta)
        pts = sorted({(round(float(v.values[0]), 9), round(float(v.values[1]), 9))
                      for v, _ in sa.lplus_samples})
        assert pts[0] == (round(math.log(2), 9), round(-math.log(2), 9))
        assert pts[-1] == (round(math.log(3), 9), round(-math.log(3), 9))
        assert sa.gap <= 0.05

    def test_identity_all_zero(self):
        sa = spectrum_approx(identity_cocycle(2, 2), 2, 4, ThetaSet.full(2), 8)
        assert sa.gap == pytest.approx(0.0, abs=1e-12)

    def test_inconsistent_theta_raises(self):
        # a parabolic generator puts a Lyapunov vector on the chamber wall,
        # which the plain (Theta empty) finite-depth hull cannot cover
        pair = OneStepCocycle(np.array([[[1.0, 1.0], [0.0, 1.0]],
                                        [[2.0, 0.0], [2.0, 2.0]]]), FULL2)
        with pytest.raises(CertificateError):
            spectrum_approx(pair, 6, 12, ThetaSet.empty(2))
        sa = spectrum_approx(pair, 6, 12, ThetaSet.full(2))
        assert sa.gap >= 0.0


class TestConjugation:
    def test_identity_conjugation(self):
        H = {(0,): np.eye(2), (1,): np.eye(2)}
        G = conjugate(FIB, H, 1)
        assert isinstance(G, WindowedCocycle)
        assert G.window == 2
        assert np.allclose(G.generator((0, 1)), FIB.matrices[0])

    def test_constant_similarity(self):
        P = np.array([[2.0, 1.0], [1.0, 1.0]])
        A = np.array([[1.5, 0.3], [0.2, 0.8]])
        G = conjugate(single(A), {(): P}, 0)
        expect = np.linalg.inv(P) @ A @ P
        assert np.allclose(G.generator((0,)), expect)
        assert np.allclose(periodic_product(G, Necklace((0,))).jordan().values,
                           lyap_vector_periodic(single(A), Necklace((0,))).values)

    def test_bracket_overlap_random_window(self):
        rng = np.random.default_rng(12)
        H = {w: np.eye(2) + 0.4 * rng.standard_normal((2, 2))
             for w in [(0, 0), (0, 1), (1, 0), (1, 1)]}
        G = conjugate(FIB, H, 2)
        brF, brG = jsr_bracket(FIB, 8), jsr_bracket(G, 8)
        assert max(brF.lower, brG.lower) <= min(brF.upper, brG.upper) + 1e-9
        for neck in (Necklace((0,)), Necklace((0, 1)), Necklace((0, 0, 1))):
            assert np.allclose(periodic_product(G, neck).jordan().values,
                               periodic_product(FIB, neck).jordan().values,
                               atol=1e-8)


class TestExtremalDefect:
    def test_identity(self):
        got = extremal_defect(identity_cocycle(2, 2),
                              {(): SpdPoint.identity(2)}, 0.0)
        assert got == pytest.approx(0.0, abs=1e-12)

    def test_diag_attained(self):
        got = extremal_defect(single(np.diag([2.0, 0.5])),
                              {(): SpdPoint.identity(2)}, math.log(2))
        assert got == pytest.approx(0.0, abs=1e-12)

    def test_shear_euclidean_not_extremal(self):
        got = extremal_defect(single(np.array([[1.0, 1.0], [0.0, 1.0]])),
                              {(): SpdPoint.identity(2)}, 0.0)
        assert got == pytest.approx(math.log(PHI))


class TestScaledMatrix:
    def test_wrap_normalizes(self):
        m = ScaledMatrix.wrap(np.array([[100.0, 0.0], [0.0, 1.0]]))
        assert np.abs(m.matrix).max() == 1.0
        assert m.log_scale == pytest.approx(math.log(100.0))
        assert m.log_abs_det == pytest.approx(math.log(100.0))

    def test_long_product_no_overflow(self):
        A = ScaledMatrix.wrap(np.diag([1e3, 1e-3]))
        acc = ScaledMatrix.identity(2)
        for _ in range(200):
            acc = A @ acc
        logs = acc.cartan().values
        assert np.allclose(logs, [200 * math.log(1e3), -200 * math.log(1e3)])

    def test_json_loader(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text('{"dim": 2, "matrices": [[[1, 1], [0, 1]]],'
                        ' "forbidden": []}')
        F = OneStepCocycle.from_json(str(path))
        assert F.dim == 2 and F.base.alphabet_size == 1
