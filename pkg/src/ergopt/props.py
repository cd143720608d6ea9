"""Seeded randomized property suites.

Each suite draws reproducible random instances and records the worst slack
or worst error of a family of mathematical identities and inequalities.
The suites back both the pytest property tests and the `props` CLI command
(whose JSON output is byte-identical across runs with the same seed).

Random matrices follow one convention everywhere: i.i.d. standard normal
entries, redrawn while |det| < 1e-6.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import birkhoff as bk
from . import rotation as rot
from .adapt import (
    conjugated_cocycle,
    level_contraction_slack,
    midpoint_recursion_levels,
)
from .cocycle import (
    OneStepCocycle,
    conjugate,
    domination_report,
    jsr_bracket,
    lyap_vector_periodic,
    periodic_product,
    product,
    sigma_n,
    spectrum_approx,
)
from .matgeo import (
    SpdPoint,
    ThetaSet,
    act,
    cartan,
    geodesic,
    jordan,
    majorization_slack,
    midpoint,
    opposition,
    theta_supports,
    vdist,
)
from .symdyn import (
    Necklace,
    SymbolicSystem,
    enumerate_necklaces,
    orbit_angles,
    random_admissible_words,
    sturmian_word,
)

DET_REJECT = 1e-6


@dataclass(frozen=True)
class PropertyResult:
    """Outcome of one property family.

    kind "slack": passes when worst >= -tolerance (majorization slacks).
    kind "error": passes when worst <= tolerance (absolute deviations).
    """

    name: str
    cases: int
    worst: float
    tolerance: float
    kind: str

    @property
    def passed(self) -> bool:
        if self.kind == "slack":
            return self.worst >= -self.tolerance
        return self.worst <= self.tolerance

    def as_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out


def random_invertible(rng: np.random.Generator, d: int) -> np.ndarray:
    while True:
        g = rng.standard_normal((d, d))
        if abs(np.linalg.det(g)) >= DET_REJECT:
            return g


# -- matrix geometry -----------------------------------------------------------


def matgeo_suite(seed: int, cases: int = 1000, dims=(2, 3)) -> list[PropertyResult]:
    """Projection and SPD-manifold identities on random matrices."""
    rng = np.random.default_rng(seed)
    slacks = {"cartan_subadditivity": 0.0, "cartan_majorizes_jordan": 0.0,
              "vdist_triangle": 0.0, "busemann_midpoint_contraction": 0.0}
    errors = {"cartan_jordan_squared_relation": 0.0,
              "jordan_cyclic_invariance": 0.0, "vdist_identity_base": 0.0,
              "vdist_action_invariance": 0.0, "vdist_zero_selfdistance": 0.0,
              "vdist_opposition_symmetry": 0.0, "geodesic_law": 0.0}
    total = 0
    for d in dims:
        o = SpdPoint.identity(d)
        for _ in range(cases):
            total += 1
            g = random_invertible(rng, d)
            h = random_invertible(rng, d)
            cg, chh = cartan(g).values, cartan(h).values
            slacks["cartan_subadditivity"] = min(
                slacks["cartan_subadditivity"],
                majorization_slack(cg + chh, cartan(g @ h).values))
            slacks["cartan_majorizes_jordan"] = min(
                slacks["cartan_majorizes_jordan"],
                majorization_slack(cg, jordan(g).values))
            errors["cartan_jordan_squared_relation"] = max(
                errors["cartan_jordan_squared_relation"],
                float(np.abs(cg - 0.5 * jordan(g @ g.T).values).max()))
            errors["jordan_cyclic_invariance"] = max(
                errors["jordan_cyclic_invariance"],
                float(np.abs(jordan(g @ h).values - jordan(h @ g).values).max()))
            a, b, c = (random_invertible(rng, d) for _ in range(3))
            p, q, r = act(a, o), act(b, o), act(c, o)
            dpq = vdist(p, q).values
            errors["vdist_identity_base"] = max(
                errors["vdist_identity_base"],
                float(np.abs(vdist(o, q).values - cartan(q.matrix).values).max()))
            errors["vdist_action_invariance"] = max(
                errors["vdist_action_invariance"],
                float(np.abs(vdist(act(g, p), act(g, q)).values - dpq).max()))
            errors["vdist_zero_selfdistance"] = max(
                errors["vdist_zero_selfdistance"],
                float(np.abs(vdist(p, p).values).max()))
            errors["vdist_opposition_symmetry"] = max(
                errors["vdist_opposition_symmetry"],
                float(np.abs(vdist(q, p).values - opposition(dpq).values).max()))
            slacks["vdist_triangle"] = min(
                slacks["vdist_triangle"],
                majorization_slack(dpq + vdist(q, r).values, vdist(p, r).values))
            slacks["busemann_midpoint_contraction"] = min(
                slacks["busemann_midpoint_contraction"],
                majorization_slack(0.5 * dpq,
                                   vdist(midpoint(r, p), midpoint(r, q)).values))
            t, s = sorted(rng.uniform(0.0, 1.0, 2))
            errors["geodesic_law"] = max(
                errors["geodesic_law"],
                float(np.abs(vdist(geodesic(p, q, t), geodesic(p, q, s)).values
                             - (s - t) * dpq).max()))
    # majorization slacks are pinned at 1e-9; equality families involving a
    # formed Gram matrix are limited by its representation accuracy on this
    # unbounded-condition ensemble and get 1e-8
    error_tols = {"cartan_jordan_squared_relation": 1e-9,
                  "jordan_cyclic_invariance": 1e-9,
                  "vdist_identity_base": 1e-8,
                  "vdist_action_invariance": 1e-8,
                  "vdist_zero_selfdistance": 1e-9,
                  "vdist_opposition_symmetry": 1e-8,
                  "geodesic_law": 1e-8}
    out = [PropertyResult(n, total, v, 1e-9, "slack") for n, v in slacks.items()]
    out += [PropertyResult(n, total, v, error_tols[n], "error")
            for n, v in errors.items()]
    return out


# -- symbolic dynamics -----------------------------------------------------------


def symdyn_suite(seed: int) -> list[PropertyResult]:
    """Counting, orbit and balance checks (exhaustive, seed unused)."""
    full2 = SymbolicSystem.full_shift(2)
    expected = [2, 1, 2, 3, 6, 9, 18, 30]
    necks = enumerate_necklaces(full2, 8)
    got = [sum(1 for n in necks if n.period == q) for q in range(1, 9)]
    count_err = float(max(abs(a - b) for a, b in zip(got, expected)))

    orbit_err = 0.0
    for neck in necks:
        pts = {c.t for c in orbit_angles(neck)}
        doubled = {(2 * t) % 1 for t in pts}
        orbit_err = max(orbit_err, 0.0 if doubled == pts else 1.0)

    balance_err = 0.0
    checked = 0
    for q in range(1, 13):
        for p in range(0, q + 1):
            if np.gcd(p, q) != 1:
                continue
            checked += 1
            w = sturmian_word(p, q).symbols * 3
            for length in range(1, q + 1):
                sums = [sum(w[i:i + length]) for i in range(2 * q)]
                balance_err = max(balance_err, max(sums) - min(sums) - 1.0)
    return [
        PropertyResult("necklace_count_formula", 8, count_err, 0.0, "error"),
        PropertyResult("orbit_doubling_invariance", len(necks), orbit_err, 0.0, "error"),
        PropertyResult("sturmian_balance", checked, balance_err, 0.0, "error"),
    ]


# -- scalar Birkhoff optimization -------------------------------------------------


def _random_table_observable(rng: np.random.Generator, system: SymbolicSystem,
                             window: int) -> bk.Observable:
    from .symdyn import word_matrix

    words = word_matrix(system, window)
    table = {tuple(int(s) for s in row): float(rng.normal()) for row in words}
    return bk.Observable.from_table(table, system)


def birkhoff_suite(seed: int, cases: int = 40) -> list[PropertyResult]:
    """Bracket, envelope, cohomology, subaction and duality checks."""
    rng = np.random.default_rng(seed)
    full2 = SymbolicSystem.full_shift(2)
    sandwich = 0.0
    monotone = 0.0
    cohom_lower = 0.0
    cohom_upper = 0.0
    duality = 0.0
    certificate = 0.0
    for _ in range(cases):
        window = int(rng.integers(1, 4))
        f = _random_table_observable(rng, full2, window)
        br = bk.beta_bracket(f, 6, 14)
        sandwich = min(sandwich, br.upper - br.lower)
        for depth in (3, 5, 7):
            monotone = max(monotone, bk.envelope_upper(f, 2 * depth)
                           - bk.envelope_upper(f, depth) - 0.0)
        n = int(rng.integers(2, 5))
        g = bk.smooth(f, n)
        brg = bk.beta_bracket(g, 6, 14)
        cohom_lower = max(cohom_lower, abs(brg.lower - br.lower))
        cohom_upper = max(cohom_upper, brg.upper - br.upper)
        neg = bk.best_periodic(-f, 6)[0]
        direct_min = min(bk.periodic_average(f, w)
                         for w in enumerate_necklaces(full2, 6))
        duality = max(duality, abs(-neg - direct_min))
        table = bk.fit_subaction(f, window + 1, max_period=6, depth=12, iters=80)
        certificate = max(certificate, table.defect)
        certificate = max(certificate, br.lower - table.certificate_upper_bound())
    return [
        PropertyResult("bracket_sandwich", cases, sandwich, 1e-12, "slack"),
        PropertyResult("envelope_doubling_monotone", 3 * cases, monotone, 1e-12, "error"),
        PropertyResult("cohomology_lower_invariance", cases, cohom_lower, 1e-9, "error"),
        PropertyResult("cohomology_upper_interleave", cases, cohom_upper, 1e-9, "error"),
        PropertyResult("alpha_beta_duality", cases, duality, 1e-12, "error"),
        PropertyResult("subaction_certificate", cases, certificate, 1e-9, "error"),
    ]


# -- rotation sets ----------------------------------------------------------------


def rotation_suite(seed: int, cases: int = 12) -> list[PropertyResult]:
    """Inner/outer consistency, fish symmetry, monotonicity, equivariance."""
    rng = np.random.default_rng(seed)
    full2 = SymbolicSystem.full_shift(2)
    approx = rot.fish_approx(6, 10)
    pts = np.array([v for v, _ in approx.inner_vertices])
    inner_outer = 0.0
    for c, bound in approx.outer_support.items():
        inner_outer = min(inner_outer, bound - float((pts @ np.asarray(c)).max()))

    symmetry = 0.0
    for v, w in approx.inner_vertices:
        comp = Necklace.from_word(tuple(1 - s for s in w.symbols))
        mirrored = rot.fish_observable().periodic_average(comp)
        symmetry = max(symmetry, float(np.abs(mirrored - np.array([v[0], -v[1]])).max()))
        dists = np.abs(pts - np.array([v[0], -v[1]])).max(axis=1)
        symmetry = max(symmetry, float(dists.min()))

    monotone = 0.0
    equivariance = 0.0
    for _ in range(cases):
        comps = tuple(_random_table_observable(rng, full2, 2) for _ in range(2))
        f = rot.VectorObservable(comps)
        out1 = rot.rotation_outer(f, 5, 8)
        out2 = rot.rotation_outer(f, 10, 8)
        for c in out1:
            monotone = max(monotone, out2[c] - out1[c])
        a = float(rng.uniform(0.5, 2.0))
        b = rng.normal(size=2)
        scaled = rot.VectorObservable(tuple(
            bk.Observable.locally_constant(
                lambda w, fn=comp.fn, i=i: a * fn(w) + b[i], 2, full2)
            for i, comp in enumerate(comps)))
        inner_f = rot.rotation_inner(f, 5)
        inner_s = rot.rotation_inner(scaled, 5)
        for (v, w), (vs, ws) in zip(inner_f, inner_s):
            equivariance = max(equivariance, float(np.abs(a * v + b - vs).max()))
            equivariance = max(equivariance, 0.0 if w == ws else 1.0)
        out_s = rot.rotation_outer(scaled, 5, 8)
        for c in out1:
            expect = a * out1[c] + float(np.asarray(c) @ b)
            equivariance = max(equivariance, abs(out_s[c] - expect))
    return [
        PropertyResult("fish_inner_in_outer", len(approx.outer_support),
                       inner_outer, 1e-9, "slack"),
        PropertyResult("fish_conjugation_symmetry", len(approx.inner_vertices),
                       symmetry, 1e-12, "error"),
        PropertyResult("outer_doubling_monotone", 8 * cases, monotone, 1e-12, "error"),
        PropertyResult("affine_equivariance", cases, equivariance, 1e-9, "error"),
    ]


# -- cocycles ---------------------------------------------------------------------


def _random_cocycle(rng: np.random.Generator, k: int, d: int,
                    positive: bool = False) -> OneStepCocycle:
    mats = []
    for _ in range(k):
        if positive:
            mats.append(rng.uniform(0.5, 1.5, size=(d, d)))
        else:
            mats.append(random_invertible(rng, d))
    return OneStepCocycle(np.array(mats), SymbolicSystem.full_shift(k))


def cocycle_suite(seed: int, cases: int = 20) -> list[PropertyResult]:
    """Subadditivity, bracket order, spectra membership, conjugation, sums."""
    rng = np.random.default_rng(seed)
    full2 = SymbolicSystem.full_shift(2)
    subadd = 0.0
    bracket_order = 0.0
    det_sum = 0.0
    conj_jordan = 0.0
    conj_overlap = 0.0
    for _ in range(cases):
        F = _random_cocycle(rng, 2, 2)
        w = tuple(int(x) for x in rng.integers(0, 2, size=6))
        v = tuple(int(x) for x in rng.integers(0, 2, size=5))
        subadd = min(subadd, majorization_slack(
            product(F, w).cartan().values + product(F, v).cartan().values,
            product(F, w + v).cartan().values))
        lowers, uppers = [], []
        for depth in (2, 4, 6):
            br = jsr_bracket(F, depth)
            lowers.append(br.lower)
            uppers.append(br.upper)
            bracket_order = max(bracket_order, br.lower - br.upper)
        bracket_order = max(bracket_order,
                            max(lowers[i] - lowers[i + 1] for i in range(2)),
                            max(uppers[i + 1] - uppers[i] for i in range(2)))
        # unit-determinant normalization; chamber sums must vanish
        mats = F.matrices / np.abs(np.linalg.det(F.matrices))[:, None, None] ** 0.5
        Fu = OneStepCocycle(mats, full2)
        det_sum = max(det_sum, float(np.abs(sigma_n(Fu, 6).sum(axis=1)).max()))
        det_sum = max(det_sum, float(np.abs(
            lyap_vector_periodic(Fu, Necklace((0, 1))).values.sum())))
        H = {ww: random_invertible(rng, 2)
             for ww in [(0,), (1,)]}
        G = conjugate(F, H, 1)
        for neck in (Necklace((0,)), Necklace((0, 1)), Necklace((0, 1, 1))):
            conj_jordan = max(conj_jordan, float(np.abs(
                periodic_product(G, neck).jordan().values
                - periodic_product(F, neck).jordan().values).max()))
        brF, brG = jsr_bracket(F, 6), jsr_bracket(G, 6)
        conj_overlap = max(conj_overlap,
                           max(brF.lower, brG.lower) - min(brF.upper, brG.upper))

    # attained Lyapunov vectors against outer hulls: exact through the
    # symmetrized hull (depth divisible by all periods), and through the
    # plain hull for commuting (diagonal) cocycles
    Fpos = _random_cocycle(rng, 2, 2, positive=True)
    sa = spectrum_approx(Fpos, 4, 12, ThetaSet.full(2), 16)
    lplus_member = 0.0
    pts = np.array([v.values for v, _ in sa.lplus_samples])
    for c, bound in sa.outer_support.items():
        lplus_member = min(lplus_member,
                           bound - float(theta_supports(pts, sa.theta, c).max()))
    Fdiag = OneStepCocycle(
        np.array([np.diag(np.sort(rng.uniform(0.5, 3.0, 2))[::-1]) for _ in range(2)]),
        full2)
    rep_d = domination_report(Fdiag, (6, 12))
    sd = spectrum_approx(Fdiag, 4, 12, rep_d.theta, 16)
    pts_d = np.array([v.values for v, _ in sd.lplus_samples])
    for c, bound in sd.outer_support.items():
        lplus_member = min(lplus_member,
                           bound - float(theta_supports(pts_d, sd.theta, c).max()))
    morse_monotone = 0.0
    sa5 = spectrum_approx(Fpos, 4, 5, ThetaSet.full(2), 16)
    sa10 = spectrum_approx(Fpos, 4, 10, ThetaSet.full(2), 16)
    for c in sa5.outer_support:
        morse_monotone = max(morse_monotone,
                             sa10.outer_support[c] - sa5.outer_support[c])
    return [
        PropertyResult("product_cartan_subadditivity", cases, subadd, 1e-9, "slack"),
        PropertyResult("jsr_bracket_order", 3 * cases, bracket_order, 1e-9, "error"),
        PropertyResult("unit_det_sum_rule", cases, det_sum, 1e-9, "error"),
        PropertyResult("conjugation_jordan_invariance", 3 * cases, conj_jordan,
                       1e-8, "error"),
        PropertyResult("conjugation_bracket_overlap", cases, conj_overlap,
                       1e-6, "error"),
        PropertyResult("lyap_vectors_in_outer", len(sa.outer_support)
                       + len(sd.outer_support), lplus_member, 1e-9, "slack"),
        PropertyResult("morse_outer_doubling_monotone", len(sa5.outer_support),
                       morse_monotone, 1e-9, "error"),
    ]


# -- adapted metrics ----------------------------------------------------------------


def adapt_suite(seed: int, sample_words: int = 60) -> list[PropertyResult]:
    """Telescoping contraction, proof identity, consistency and conservation."""
    rng = np.random.default_rng(seed)
    F = _random_cocycle(rng, 2, 2, positive=True)
    k = 3
    levels = midpoint_recursion_levels(F, k)
    res = conjugated_cocycle(F, levels[-1])
    words = random_admissible_words(F.base, (1 << k) + 8, sample_words, rng)

    telescoping = 0.0
    for j in range(k):
        for w in words:
            telescoping = min(telescoping,
                              level_contraction_slack(F, levels, j, tuple(w)))

    from .adapt import oba_sides

    identity_err = 0.0
    idx = res.G.indexer
    for w in words:
        lhs, _ = oba_sides(F, res.phi, tuple(w))
        row = res.sigma1_G[idx.rank(tuple(int(s) for s in w[:res.G.window]))]
        identity_err = max(identity_err, float(np.abs(lhs - 2.0 * row).max()))

    brF = jsr_bracket(F, 4)
    brG = jsr_bracket(res.G, 4)
    consistency = max(max(brF.lower, brG.lower) - min(brF.upper, brG.upper), 0.0)

    mats = F.matrices / np.abs(np.linalg.det(F.matrices))[:, None, None] ** 0.5
    Fu = OneStepCocycle(mats, F.base)
    resu = conjugated_cocycle(Fu, midpoint_recursion_levels(Fu, 2)[-1])
    sum_err = float(np.abs(resu.sigma1_G.sum(axis=1)).max())

    return [
        PropertyResult("level_telescoping_contraction", k * sample_words,
                       telescoping, 1e-8, "slack"),
        PropertyResult("distance_equals_conjugated_spectrum", sample_words,
                       identity_err, 1e-9, "error"),
        PropertyResult("conjugation_bracket_consistency", 1, consistency,
                       1e-6, "error"),
        PropertyResult("unit_det_sigma1_sum_conservation", 1, sum_err,
                       1e-9, "error"),
        PropertyResult("oba_certificate_slack", res.sigma1_G.shape[0],
                       res.oba_slack, 1e-8, "slack"),
    ]


# -- aggregation --------------------------------------------------------------------


SUITES = (
    ("symdyn", symdyn_suite),
    ("matgeo", matgeo_suite),
    ("birkhoff", birkhoff_suite),
    ("rotation", rotation_suite),
    ("cocycle", cocycle_suite),
    ("adapt", adapt_suite),
)


def run_all(seed: int) -> dict:
    """Run every suite with per-suite seeds derived from `seed`."""
    children = np.random.SeedSequence(seed).spawn(len(SUITES))
    suites = []
    all_passed = True
    for (name, fn), child in zip(SUITES, children):
        sub_seed = int(child.generate_state(1)[0])
        results = fn(sub_seed)
        passed = all(r.passed for r in results)
        all_passed = all_passed and passed
        suites.append({
            "name": name,
            "seed": sub_seed,
            "passed": passed,
            "properties": [r.as_dict() for r in results],
        })
    return {"seed": seed, "all_passed": all_passed, "suites": suites}
