import math
from fractions import Fraction

import numpy as np
import pytest

from ergopt.birkhoff import (
    ContextError,
    Observable,
    SubactionDivergenceError,
    beta_bracket,
    best_periodic,
    birkhoff_sum,
    envelope_upper,
    fit_subaction,
    maximizing_set,
    periodic_average,
    smooth,
    subaction_iterate,
)
from ergopt.symdyn import CirclePoint, Necklace, SymbolicSystem, enumerate_necklaces

FULL2 = SymbolicSystem.full_shift(2)
COS = Observable.builtin("cos_angle")
DIGIT = Observable.builtin("digit")


class TestBirkhoffSum:
    def test_constant(self):
        c = Observable.constant(2.5, FULL2)
        assert birkhoff_sum(c, (0, 1, 0, 1, 1), 4) == pytest.approx(10.0)

    def test_cos_third(self):
        # cos(2pi/3) + cos(4pi/3) = -1
        got = birkhoff_sum(COS, CirclePoint(Fraction(1, 3)), 2)
        assert got == pytest.approx(-1.0)

    def test_digit_count(self):
        assert birkhoff_sum(DIGIT, (0, 1, 1, 0), 3) == 2.0

    def test_short_word_raises(self):
        with pytest.raises(ContextError):
            birkhoff_sum(DIGIT, (0, 1), 3)

    def test_kind_mismatch(self):
        with pytest.raises(TypeError):
            birkhoff_sum(COS, (0, 1, 0), 2)


class TestObservableWindow:
    def test_locally_constant_ignores_extensions(self):
        # spot check: the value depends only on the declared window
        rng = np.random.default_rng(14)
        for name in ("digit", "digit_product"):
            f = Observable.builtin(name)
            for _ in range(50):
                w = tuple(int(x) for x in rng.integers(0, 2, f.window))
                ext1 = w + tuple(int(x) for x in rng.integers(0, 2, 5))
                ext2 = w + tuple(int(x) for x in rng.integers(0, 2, 8))
                assert f.fn(ext1) == f.fn(ext2) == f.fn(w)

    def test_table_covers_all_windows(self):
        with pytest.raises(ValueError):
            Observable.from_table({(0, 0): 1.0, (0, 1): 2.0}, FULL2)

    def test_table_infers_alphabet(self):
        f = Observable.from_table({"0": 1.0, "1": 2.0, "2": 3.0})
        assert f.system.alphabet_size == 3


class TestPeriodicAverage:
    def test_cos_fixed_point(self):
        assert periodic_average(COS, Necklace((0,))) == 1.0

    def test_cos_period_two(self):
        assert periodic_average(COS, Necklace((0, 1))) == pytest.approx(-0.5)

    def test_constant(self):
        c = Observable.constant(3.25, FULL2)
        assert periodic_average(c, Necklace((0, 1, 1))) == pytest.approx(3.25)


class TestBetaBracket:
    def test_cos_bracket(self):
        br = beta_bracket(COS, 8, 12)
        assert br.lower == 1.0
        assert str(br.lower_witness) == "0"
        assert 0.0 <= br.upper - 1.0 <= 0.05

    def test_constant_tight(self):
        br = beta_bracket(Observable.constant(-1.5, FULL2), 3, 6)
        assert br.lower == pytest.approx(-1.5)
        assert br.upper == pytest.approx(-1.5)

    def test_digit_depth_one(self):
        br = beta_bracket(DIGIT, 1, 1)
        assert br.lower == br.upper == 1.0
        assert str(br.lower_witness) == "1"

    def test_sandwich_random(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            table = {w: float(rng.normal())
                     for w in [(0, 0), (0, 1), (1, 0), (1, 1)]}
            f = Observable.from_table(table, FULL2)
            br = beta_bracket(f, 6, 14)
            assert br.lower <= br.upper + 1e-12

    def test_envelope_doubling_monotone(self):
        rng = np.random.default_rng(5)
        table = {w: float(rng.normal()) for w in [(0,), (1,)]}
        f = Observable.from_table(table, FULL2)
        for depth in (3, 5, 7):
            assert envelope_upper(f, 2 * depth) <= envelope_upper(f, depth) + 1e-12


class TestSmooth:
    def test_identity(self):
        assert smooth(DIGIT, 1) is DIGIT

    def test_two_step_digit(self):
        g = smooth(DIGIT, 2)
        assert g.window == 2
        vals = {w: g.fn(w) for w in [(0, 0), (0, 1), (1, 0), (1, 1)]}
        assert vals == {(0, 0): 0.0, (0, 1): 0.5, (1, 0): 0.5, (1, 1): 1.0}
        assert envelope_upper(g, 1) == pytest.approx(1.0)

    def test_constant_unchanged(self):
        c = Observable.constant(2.0, FULL2)
        g = smooth(c, 4)
        assert periodic_average(g, Necklace((0, 1))) == pytest.approx(2.0)

    def test_cohomology_invariance(self):
        rng = np.random.default_rng(2)
        table = {w: float(rng.normal()) for w in [(0, 0), (0, 1), (1, 0), (1, 1)]}
        f = Observable.from_table(table, FULL2)
        g = smooth(f, 3)
        brf, brg = beta_bracket(f, 6, 12), beta_bracket(g, 6, 12)
        assert brg.lower == pytest.approx(brf.lower, abs=1e-12)
        assert brg.upper <= brf.upper + 1e-9

    def test_circle_smooth(self):
        g = smooth(COS, 2)
        t = CirclePoint(Fraction(1, 3))
        expect = 0.5 * birkhoff_sum(COS, t, 2)
        assert float(g.fn(t.double)) == pytest.approx(expect)


class TestSubaction:
    def test_constant_zero_defect(self):
        c = Observable.constant(1.0, FULL2)
        table = subaction_iterate(c, 1.0, 2, 10)
        assert table.defect == pytest.approx(0.0, abs=1e-15)
        assert all(v == 0.0 for v in table.values.values())

    def test_digit_exact(self):
        table = subaction_iterate(DIGIT, 1.0, 2, 20)
        assert table.defect <= 1e-12

    def test_divergence_below_maximum(self):
        with pytest.raises(SubactionDivergenceError):
            subaction_iterate(DIGIT, 0.9, 2, 20)

    def test_alpha_beta_duality(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            table = {w: float(rng.normal())
                     for w in [(0, 0), (0, 1), (1, 0), (1, 1)]}
            f = Observable.from_table(table, FULL2)
            direct = min(periodic_average(f, w)
                         for w in enumerate_necklaces(FULL2, 6))
            assert -best_periodic(-f, 6)[0] == pytest.approx(direct, abs=1e-12)

    def test_fit_certificate(self):
        rng = np.random.default_rng(17)
        table = {w: float(rng.normal()) for w in [(0, 0), (0, 1), (1, 0), (1, 1)]}
        f = Observable.from_table(table, FULL2)
        fitted = fit_subaction(f, 3, max_period=6, depth=12)
        assert fitted.defect <= 1e-10
        lower, _ = best_periodic(f, 6)
        assert fitted.certificate_upper_bound() >= lower - 1e-9
        assert fitted.certificate_upper_bound() <= envelope_upper(f, 14) + 1e-9


class TestMaximizingSet:
    def test_digit_contains_ones(self):
        table = subaction_iterate(DIGIT, 1.0, 1, 20)
        got = maximizing_set(DIGIT, table, 1e-9)
        assert (1, 1) in got
        assert (0, 0) not in got

    def test_constant_everything(self):
        c = Observable.constant(0.5, FULL2)
        table = subaction_iterate(c, 0.5, 1, 5)
        assert len(maximizing_set(c, table, 1e-9)) == 4

    def test_discretized_cos(self):
        # windowed version of the angle cosine: the fixed point 0 maximizes
        table = {}
        for w in [(0, 0, 0), (0, 0, 1), (0, 1, 0), (0, 1, 1),
                  (1, 0, 0), (1, 0, 1), (1, 1, 0), (1, 1, 1)]:
            t = sum(s / 2.0 ** (i + 1) for i, s in enumerate(w))
            table[w] = math.cos(2 * math.pi * t)
        f = Observable.from_table(table, FULL2)
        fitted = fit_subaction(f, 4, max_period=6, depth=12)
        got = maximizing_set(f, fitted, 1e-6)
        assert (0, 0, 0, 0, 0) in got
        assert (1, 0, 1, 0, 1) not in got

    def test_defect_precondition(self):
        from ergopt.birkhoff import SubactionTable

        bad = SubactionTable({(0,): 0.0, (1,): 0.0}, 1, 0.5, 1.0, FULL2)
        with pytest.raises(ValueError):
            maximizing_set(DIGIT, bad, 1e-9)
