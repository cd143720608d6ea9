import numpy as np
import pytest

import ergopt._kernels_py as pyk
from ergopt import kernels

try:
    import ergopt._kernels as ck
except ImportError:
    ck = None

needs_compiled = pytest.mark.skipif(ck is None, reason="compiled kernels absent")


def spd_batch(rng, count, d, floor=0.3):
    g = rng.standard_normal((count, d, d))
    return np.ascontiguousarray(g @ np.swapaxes(g, 1, 2) + floor * np.eye(d))


class TestPythonBackend:
    def test_enum_identity(self):
        mats = np.array([np.eye(2)] * 2)
        out = pyk.enum_product_cartan(mats, None, 5)
        assert out.shape == (32, 2)
        assert np.abs(out).max() == 0.0

    def test_enum_matches_direct_products(self):
        rng = np.random.default_rng(1)
        mats = rng.uniform(0.5, 1.5, (2, 2, 2))
        out = pyk.enum_product_cartan(mats, None, 6)
        import itertools

        for row, word in zip(out, itertools.product((0, 1), repeat=6)):
            m = np.eye(2)
            for s in word:
                m = mats[s] @ m
            sv = np.linalg.svd(m, compute_uv=False)
            assert np.allclose(row, np.log(sv), atol=1e-10)

    def test_logdet_route_extreme_products(self):
        # the smallest singular value of a strongly dominated product keeps
        # relative accuracy thanks to the determinant accumulation
        mats = np.array([np.diag([4.0, 0.25]), np.diag([8.0, 0.125])])
        out = pyk.enum_product_cartan(mats, None, 20)
        total = out.sum(axis=1)
        assert np.abs(total).max() < 1e-9  # determinant-one products

    def test_scan_matches_enum(self):
        rng = np.random.default_rng(2)
        mats = rng.uniform(0.5, 1.5, (2, 2, 2))
        top, bot = pyk.scan_norm_extremes(mats, None, 7)
        for m in range(1, 8):
            logs = pyk.enum_product_cartan(mats, None, m)
            assert top[m - 1] == pytest.approx(logs[:, 0].max())
            assert bot[m - 1] == pytest.approx(logs[:, -1].min())

    def test_midpoint_is_geometric_mean(self):
        rng = np.random.default_rng(3)
        p = spd_batch(rng, 30, 3)
        q = spd_batch(rng, 30, 3)
        mid = pyk.midpoint_batch(p, q)
        # the geometric mean m solves m p^(-1) m = q
        back = mid @ np.linalg.inv(p) @ mid
        assert np.abs(back - q).max() < 1e-8

    def test_sqrt_polar_factorizes(self):
        rng = np.random.default_rng(4)
        m = rng.standard_normal((20, 2, 2))
        a = pyk.sqrt_polar_batch(m)
        gram = a @ np.swapaxes(a, 1, 2)
        target = pyk.spd_power_batch(m @ np.swapaxes(m, 1, 2), 0.5)
        assert np.abs(gram - target).max() < 1e-9

    def test_spd_halves(self):
        rng = np.random.default_rng(5)
        f = rng.standard_normal((10, 3, 3)) + 2 * np.eye(3)
        sqrt, isqrt = pyk.spd_halves_from_factor(f)
        p = f @ np.swapaxes(f, 1, 2)
        assert np.abs(sqrt @ sqrt - p).max() < 1e-9
        assert np.abs(sqrt @ isqrt - np.eye(3)).max() < 1e-9

    def test_indefinite_rejected(self):
        with pytest.raises(pyk.IndefiniteMatrixError):
            pyk.spd_power_batch(np.array([np.diag([1.0, -1.0])]), 0.5)


@needs_compiled
class TestBackendAgreement:
    @pytest.mark.parametrize("d", [2, 3, 4])
    @pytest.mark.parametrize("n", [1, 3, 7])
    def test_enum(self, d, n):
        rng = np.random.default_rng(10 * d + n)
        mats = np.ascontiguousarray(rng.standard_normal((2, d, d)) + 2 * np.eye(d))
        a = ck.enum_product_cartan(mats, None, n)
        b = pyk.enum_product_cartan(mats, None, n)
        assert a.shape == b.shape
        assert np.abs(a - b).max() < 1e-10

    def test_enum_sft(self):
        rng = np.random.default_rng(6)
        mats = np.ascontiguousarray(rng.uniform(0.5, 1.5, (3, 2, 2)))
        trans = np.array([[1, 1, 0], [1, 0, 1], [1, 1, 1]], dtype=bool)
        a = ck.enum_product_cartan(mats, trans, 6)
        b = pyk.enum_product_cartan(mats, trans, 6)
        assert a.shape == b.shape
        assert np.abs(a - b).max() < 1e-10

    def test_scan(self):
        rng = np.random.default_rng(7)
        mats = np.ascontiguousarray(rng.uniform(0.5, 1.5, (2, 3, 3)) + np.eye(3))
        ta, tb = ck.scan_norm_extremes(mats, None, 8)
        pa, pb = pyk.scan_norm_extremes(mats, None, 8)
        assert np.abs(ta - pa).max() < 1e-10
        assert np.abs(tb - pb).max() < 1e-10

    @pytest.mark.parametrize("d", [2, 3])
    def test_midpoints(self, d):
        rng = np.random.default_rng(8)
        p = spd_batch(rng, 200, d, floor=0.5)
        q = spd_batch(rng, 200, d, floor=0.5)
        a = ck.midpoint_batch(p, q)
        b = pyk.midpoint_batch(p, q)
        assert np.abs(a - b).max() / np.abs(b).max() < 1e-10

    def test_dispatch_handles_readonly(self):
        mats = np.array([np.eye(2)] * 2)
        mats.setflags(write=False)
        out = kernels.enum_product_cartan(mats, None, 3)
        assert out.shape == (8, 2)


def test_backend_name():
    assert kernels.backend_name() in ("compiled", "python")
