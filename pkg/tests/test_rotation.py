import cmath
import csv
import math

import numpy as np
import pytest

from ergopt.birkhoff import Observable
from ergopt.rotation import (
    ConvexApprox,
    VectorObservable,
    fish_approx,
    fish_observable,
    homoclinic_sum,
    rotation_inner,
    rotation_outer,
    unit_directions,
    write_support_csv,
    write_vertices_csv,
)
from ergopt.symdyn import Necklace, SymbolicSystem

FULL2 = SymbolicSystem.full_shift(2)


class TestRotationInner:
    def test_fish_period_one(self):
        inner = rotation_inner(fish_observable(), 1)
        assert len(inner) == 1
        v, w = inner[0]
        assert np.allclose(v, [1.0, 0.0]) and str(w) == "0"

    def test_fish_period_two(self):
        inner = rotation_inner(fish_observable(), 2)
        points = {(round(float(v[0]), 9), round(float(v[1]), 9)) for v, _ in inner}
        assert (1.0, 0.0) in points
        assert (-0.5, 0.0) in points
        witnesses = {str(w) for _, w in inner}
        assert "01" in witnesses

    def test_constant_single_vertex(self):
        f = VectorObservable((Observable.constant(2.0, FULL2),
                              Observable.constant(-1.0, FULL2)))
        inner = rotation_inner(f, 4)
        assert len(inner) == 1
        assert np.allclose(inner[0][0], [2.0, -1.0])


class TestRotationOuter:
    def test_constant_exact(self):
        f = VectorObservable((Observable.constant(2.0, FULL2),
                              Observable.constant(-1.0, FULL2)))
        outer = rotation_outer(f, 6, 8)
        for c, bound in outer.items():
            assert bound == pytest.approx(2.0 * c[0] - 1.0 * c[1], abs=1e-12)

    def test_fish_directional_bounds(self):
        outer = rotation_outer(fish_observable(), 10, 4)
        dirs = list(outer)
        east = outer[dirs[0]]   # direction (1, 0)
        west = outer[dirs[2]]   # direction (-1, 0)
        assert 1.0 <= east <= 1.05
        assert 0.5 <= west <= 0.6

    def test_direction_validation(self):
        with pytest.raises(ValueError):
            rotation_outer(fish_observable(), 5, 3)
        with pytest.raises(ValueError):
            unit_directions(5, 16)


class TestFishApprox:
    def test_inner_in_outer_and_sturmian(self):
        approx = fish_approx(8, 12)
        assert all(approx.sturmian)
        pts = np.array([v for v, _ in approx.inner_vertices])
        for c, bound in approx.outer_support.items():
            assert float((pts @ np.asarray(c)).max()) <= bound + 1e-9

    def test_gap_decreases_with_depth(self):
        gaps = [fish_approx(8, depth).hausdorff_gap for depth in (8, 10, 12)]
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] < 0.2

    def test_conjugation_symmetry(self):
        approx = fish_approx(7, 10)
        pts = np.array([v for v, _ in approx.inner_vertices])
        f = fish_observable()
        for v, w in approx.inner_vertices:
            mirrored = np.array([v[0], -v[1]])
            assert np.abs(pts - mirrored).max(axis=1).min() < 1e-12
            comp = Necklace.from_word(tuple(1 - s for s in w.symbols))
            assert np.allclose(f.periodic_average(comp), mirrored, atol=1e-12)

    def test_inner_outer_invariant_enforced(self):
        inner = [(np.array([5.0, 0.0]), Necklace((0,)))]
        outer = {(1.0, 0.0): 1.0}
        with pytest.raises(ValueError):
            ConvexApprox.build(inner, outer, 4)


class TestHomoclinicSum:
    def test_first_terms(self):
        h1 = homoclinic_sum(1)
        assert h1.partial_sum == pytest.approx(-2.0 + 0.0j)
        assert h1.tail_bound == pytest.approx(math.pi)
        h2 = homoclinic_sum(2)
        assert h2.partial_sum == pytest.approx(-3.0 + 1.0j)

    def test_certificate_at_thirty(self):
        h = homoclinic_sum(30)
        assert h.partial_sum.imag > 2.3
        assert h.tail_bound < 1e-8
        assert h.nonzero

    def test_partial_sums_match_series(self):
        # independent recomputation straight from the definition
        total = sum(cmath.exp(2j * cmath.pi / 2 ** n) - 1 for n in range(1, 13))
        assert homoclinic_sum(12).partial_sum == pytest.approx(total)

    def test_not_certified_at_one(self):
        assert not homoclinic_sum(1).nonzero


class TestCsv:
    def test_roundtrip(self, tmp_path):
        approx = fish_approx(4, 8, directions=8)
        vpath = tmp_path / "v.csv"
        spath = tmp_path / "s.csv"
        write_vertices_csv(approx, str(vpath))
        write_support_csv(approx, str(spath))
        rows = list(csv.DictReader(vpath.open()))
        assert len(rows) == len(approx.inner_vertices)
        assert rows[0]["sturmian"] in ("true", "false")
        srows = list(csv.DictReader(spath.open()))
        assert len(srows) == 8
        bounds = [float(r["bound"]) for r in srows]
        assert bounds == [approx.outer_support[c] for c in approx.outer_support]


class TestOtherDimensions:
    def test_scalar_interval(self):
        f = VectorObservable((Observable.builtin("digit"),))
        inner = rotation_inner(f, 4)
        vals = sorted(float(v[0]) for v, _ in inner)
        assert vals == [0.0, 1.0]

    def test_three_components_support_reduction(self):
        rng = np.random.default_rng(8)
        comps = tuple(Observable.from_table(
            {w: float(rng.normal()) for w in [(0,), (1,)]}, FULL2)
            for _ in range(3))
        f = VectorObservable(comps)
        inner = rotation_inner(f, 4)
        outer = rotation_outer(f, 8, 32)
        pts = np.array([v for v, _ in inner])
        for c, bound in outer.items():
            assert float((pts @ np.asarray(c)).max()) <= bound + 1e-9

    def test_fibonacci_sphere_unit(self):
        dirs = unit_directions(3, 50)
        assert dirs.shape == (50, 3)
        assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0)


def test_scaling_translation_equivariance():
    rng = np.random.default_rng(4)
    table = [{w: float(rng.normal()) for w in [(0, 0), (0, 1), (1, 0), (1, 1)]}
             for _ in range(2)]
    f = VectorObservable(tuple(Observable.from_table(t, FULL2) for t in table))
    a, b = 1.7, np.array([0.3, -2.0])
    scaled = VectorObservable(tuple(
        Observable.locally_constant(lambda w, t=t, i=i: a * t[tuple(w[:2])] + b[i],
                                    2, FULL2)
        for i, t in enumerate(table)))
    inner = rotation_inner(f, 5)
    inner_s = rotation_inner(scaled, 5)
    assert len(inner) == len(inner_s)
    for (v, w), (vs, ws) in zip(inner, inner_s):
        assert w == ws
        assert np.allclose(a * v + b, vs, atol=1e-12)
    outer = rotation_outer(f, 6, 8)
    outer_s = rotation_outer(scaled, 6, 8)
    for c in outer:
        assert outer_s[c] == pytest.approx(a * outer[c] + float(np.dot(c, b)),
                                           abs=1e-9)
