"""Jet arithmetic against sympy composition and evaluation oracles."""

from fractions import Fraction

import numpy as np
import pytest
import sympy as sp

from embedflow import (
    MODE_EXACT,
    MODE_FLOAT,
    ConjugateSymmetryError,
    MultiIndex,
    PolyJet,
    QQi,
    RealPairing,
    complexify,
    compose,
    jacobian_apply,
    jet_distance,
    multiindices,
    permute_jet,
    realify,
)


def _sympy_vec(jet: PolyJet, xs):
    out = [sp.Integer(0)] * jet.dim
    for (j, m), c in jet.coeffs.items():
        if isinstance(c, QQi):
            cc = sp.Rational(c.re.numerator, c.re.denominator) + sp.I * sp.Rational(
                c.im.numerator, c.im.denominator
            )
        else:
            # exact binary expansions keep the oracle arithmetic rational
            cc = sp.Rational(complex(c).real) + sp.I * sp.Rational(complex(c).imag)
        term = cc
        for i, e in enumerate(m):
            term *= xs[i] ** e
        out[j] += term
    return out


def _random_jet(rng, n, degree, mode=MODE_FLOAT, density=0.4, min_deg=1):
    terms = []
    for r in range(min_deg, degree + 1):
        for m in multiindices(n, r):
            for j in range(n):
                if rng.random() < density:
                    if mode == MODE_EXACT:
                        c = QQi(Fraction(int(rng.integers(-3, 4)), 2),
                                Fraction(int(rng.integers(-3, 4)), 3))
                    else:
                        c = complex(rng.uniform(-1, 1), rng.uniform(-1, 1))
                    if c:
                        terms.append((j, m, c))
    return PolyJet.build(n, degree, mode, terms, tol=0.0)


def test_multiindex_basics():
    m = MultiIndex((2, 0, 1))
    assert m.degree == 3
    assert m.plus(MultiIndex.unit(3, 1)) == (2, 1, 1)
    assert m.minus_unit(0) == (1, 0, 1)
    with pytest.raises(ValueError):
        m.minus_unit(1)
    assert MultiIndex.zeros(2) == (0, 0)


def test_multiindices_counts_and_order():
    ms = list(multiindices(3, 4))
    assert len(ms) == 15  # C(4+2, 2)
    assert len(set(ms)) == 15
    assert all(sum(m) == 4 for m in ms)


def test_build_validates_degree_and_dim():
    with pytest.raises(ValueError):
        PolyJet.build(2, 3, MODE_FLOAT, [(0, MultiIndex((4, 0)), 1.0)])
    with pytest.raises(ValueError):
        PolyJet.build(2, 3, MODE_FLOAT, [(2, MultiIndex((1, 0)), 1.0)])


def test_exact_mode_rejects_floats():
    from embedflow import ExactnessError

    with pytest.raises((TypeError, ExactnessError)):
        PolyJet.build(1, 2, MODE_EXACT, [(0, MultiIndex((2,)), 0.5)])


def test_add_scale_evaluate_match_numpy():
    rng = np.random.default_rng(11)
    f = _random_jet(rng, 3, 4)
    g = _random_jet(rng, 3, 4)
    pt = (0.3 + 0.1j, -0.2, 0.15j)
    lhs = (f + g.scale(2.5)).evaluate(pt)
    want = [a + 2.5 * b for a, b in zip(f.evaluate(pt), g.evaluate(pt))]
    assert lhs == pytest.approx(want)


def test_compose_matches_sympy():
    rng = np.random.default_rng(5)
    xs = sp.symbols("x0 x1")
    for _ in range(3):
        f = _random_jet(rng, 2, 4, density=0.5)
        g = _random_jet(rng, 2, 4, density=0.5)
        h = compose(f, g)
        fs, gs = _sympy_vec(f, xs), _sympy_vec(g, xs)
        for j in range(2):
            full = sp.expand(fs[j].subs(dict(zip(xs, gs)), simultaneous=True))
            got = sp.expand(_sympy_vec(h, xs)[j])
            # compare after truncating the oracle to total degree 4
            poly = sp.Poly(full, *xs)
            trunc = sum(
                c * xs[0] ** m[0] * xs[1] ** m[1]
                for m, c in poly.terms()
                if sum(m) <= 4
            )
            diff = sp.expand(trunc - got)
            worst = max(
                (abs(complex(c)) for c in sp.Poly(diff, *xs).coeffs()),
                default=0.0,
            )
            assert worst < 1e-12


def test_jacobian_apply_matches_sympy():
    rng = np.random.default_rng(6)
    xs = sp.symbols("x0 x1 x2")
    g = _random_jet(rng, 3, 3, density=0.5)
    w = _random_jet(rng, 3, 3, density=0.5)
    got = jacobian_apply(g, w)
    gs, ws = _sympy_vec(g, xs), _sympy_vec(w, xs)
    for j in range(3):
        want = sp.expand(sum(sp.diff(gs[j], xs[i]) * ws[i] for i in range(3)))
        poly = sp.Poly(want, *xs)
        trunc = sum(
            c * xs[0] ** m[0] * xs[1] ** m[1] * xs[2] ** m[2]
            for m, c in poly.terms()
            if sum(m) <= 3
        )
        diff = sp.expand(trunc - sp.expand(_sympy_vec(got, xs)[j]))
        worst = max(
            (abs(complex(c)) for c in sp.Poly(diff, *xs).coeffs()),
            default=0.0,
        )
        assert worst < 1e-12


def test_compose_exact_stays_exact():
    f = PolyJet.build(1, 4, MODE_EXACT, [(0, MultiIndex((2,)), QQi(Fraction(1, 3)))])
    g = PolyJet.build(
        1, 4, MODE_EXACT,
        [(0, MultiIndex((1,)), QQi(2)), (0, MultiIndex((2,)), QQi(1))],
    )
    h = compose(f, g)
    # (2x + x^2)^2 / 3 = (4x^2 + 4x^3 + x^4) / 3
    assert h.coeffs[(0, (2,))] == QQi(Fraction(4, 3))
    assert h.coeffs[(0, (3,))] == QQi(Fraction(4, 3))
    assert h.coeffs[(0, (4,))] == QQi(Fraction(1, 3))


def test_jet_distance_and_truncate():
    f = PolyJet.build(2, 3, MODE_FLOAT, [(0, MultiIndex((1, 1)), 2.0),
                                         (1, MultiIndex((0, 3)), -1.0)])
    g = PolyJet.build(2, 3, MODE_FLOAT, [(0, MultiIndex((1, 1)), 2.5)])
    assert jet_distance(f, g) == pytest.approx(1.0)
    assert jet_distance(f.truncate(2), g.truncate(2)) == pytest.approx(0.5)
    assert f.degree_slice(3).support() == {(1, (0, 3))}


def test_complexify_realify_roundtrip():
    rng = np.random.default_rng(9)
    pairing = RealPairing(4, ((1, 2),))
    for _ in range(5):
        f = _random_jet(rng, 4, 3, density=0.4)
        # strip imaginary parts: the real form must be real
        f = PolyJet.build(
            4, 3, MODE_FLOAT,
            [(j, MultiIndex(m), complex(c).real) for (j, m), c in f.coeffs.items()],
            tol=0.0,
        )
        z = complexify(f, pairing)
        back = realify(z, pairing)
        assert jet_distance(back, f) < 1e-12


def test_complexify_evaluation_identity():
    # f(x) evaluated at a real point equals the complexified jet pushed
    # through the coordinate change z = x1 + i x2, zbar = x1 - i x2.
    f = PolyJet.build(
        2, 2, MODE_FLOAT,
        [(0, MultiIndex((2, 0)), 1.0), (0, MultiIndex((0, 2)), 1.0),
         (1, MultiIndex((1, 1)), 2.0)],
    )
    pairing = RealPairing(2, ((0, 1),))
    zf = complexify(f, pairing)
    x = (0.3, -0.7)
    z = complex(x[0], x[1])
    vz = zf.evaluate((z, z.conjugate()))
    vx = f.evaluate(x)
    assert vz[0] == pytest.approx(complex(vx[0], vx[1]))
    assert vz[1] == pytest.approx(complex(vx[0], -vx[1]))


def test_realify_rejects_asymmetric():
    pairing = RealPairing(2, ((0, 1),))
    bad = PolyJet.build(2, 2, MODE_FLOAT, [(0, MultiIndex((2, 0)), 1.0)])
    with pytest.raises(ConjugateSymmetryError):
        realify(bad, pairing)


def test_permute_jet_is_coordinate_change():
    rng = np.random.default_rng(13)
    f = _random_jet(rng, 3, 3)
    perm = (2, 0, 1)  # new i reads old perm[i]
    g = permute_jet(f, perm)
    pt = (0.2, -0.3, 0.5)
    moved = tuple(pt[perm[i]] for i in range(3))
    got = g.evaluate(moved)
    want = f.evaluate(pt)
    assert got == pytest.approx(tuple(want[perm[i]] for i in range(3)))
