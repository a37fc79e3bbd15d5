"""Distinguished normal forms of hyperbolic jets.

A germ F(x) = Ax + f(x) with hyperbolic A is conjugated, degree by degree,
to G(y) = Ay + g(y) where g keeps only map-resonant monomials
(lambda_j = lambda^m).  At each degree k the substitution x = y + h_k(y)
must satisfy

    h_k(Ay) - A h_k(y) = rhs_k(y) - g_k(y),

so g_k takes the resonant coefficients of rhs_k verbatim and h_k solves
the rest.  For triangular A the monomial basis makes this a triangular
system: couplings only join equal-eigenvalue coordinates, so the resonant
and nonresonant slices never mix, and within a row the cross terms of
(Ay)^sigma only reach lexicographically earlier monomials.  The solve
walks rows in coordinate order and monomials in reverse lexicographic
order, carrying the cross terms in an accumulator.

Divisors lambda^sigma - lambda_j that vanish exactly mark resonance; in
float mode a nonresonant divisor below tolerance aborts with
:class:`NearResonanceError` rather than dividing.
"""

from __future__ import annotations

from dataclasses import dataclass

from .jets import (
    MODE_EXACT,
    MultiIndex,
    PolyJet,
    _poly_mul,
    compose,
    jet_distance,
    lex_sort_key,
    multiindices,
)
from .scalars import EigenScalar, ExactnessError, QQi
from .spectral import BlockMatrix, TriangularLinear, is_hyperbolic

__all__ = [
    "GermSpec",
    "NormalFormResult",
    "NearResonanceError",
    "homological_solve",
    "distinguished_normal_form",
]

_TOL = 1e-9


class NearResonanceError(ArithmeticError):
    """A nonresonant divisor fell below tolerance in float mode."""

    def __init__(self, target: int, exponent, divisor):
        self.target = target
        self.exponent = MultiIndex(exponent)
        self.divisor = complex(divisor)
        super().__init__(
            f"near-resonant divisor {self.divisor:.3e} at component "
            f"{target}, exponent {tuple(exponent)}"
        )


@dataclass(frozen=True)
class GermSpec:
    """Hyperbolic jet F = Ax + f(x) in complexified coordinates.

    ``nonlinear`` is O(|x|^2) and truncated at ``degree``; its mode
    ("float" or "exact") is the coefficient mode of the whole germ.
    """

    linear: BlockMatrix
    nonlinear: PolyJet
    degree: int

    def __post_init__(self):
        if self.nonlinear.dim != self.linear.dim:
            raise ValueError("linear and nonlinear dimensions differ")
        if self.nonlinear.degree != self.degree:
            raise ValueError("nonlinear jet truncation must match degree")
        if self.nonlinear.coeffs and self.nonlinear.min_degree() < 2:
            raise ValueError("nonlinear part must vanish to second order")
        if self.degree < 1:
            raise ValueError("degree must be positive")
        if not is_hyperbolic(self.linear):
            raise ValueError("linear part must be hyperbolic")

    @property
    def dim(self) -> int:
        return self.linear.dim

    @property
    def mode(self) -> str:
        return self.nonlinear.mode

    def map_jet(self) -> PolyJet:
        """Full jet A x + f(x)."""
        tri = self.linear.triangular()
        return tri.linear_jet(self.degree, self.mode) + self.nonlinear


@dataclass(frozen=True)
class NormalFormResult:
    """Distinguished normal form G, the normalization h, and diagnostics.

    ``diagnostics`` holds one (degree, resonant_terms, solved_terms,
    min_divisor) row per degree; ``residual`` is the float conjugacy
    defect of F(y + h(y)) = G(y) + h(G(y)) over the full truncation.
    """

    germ: GermSpec
    transform: PolyJet
    residual: float
    diagnostics: tuple


def _as_triangular(linear) -> TriangularLinear:
    if isinstance(linear, TriangularLinear):
        return linear
    if isinstance(linear, BlockMatrix):
        return linear.triangular()
    raise TypeError("expected a BlockMatrix or TriangularLinear")


def _power(lam, m):
    """lambda^m over whichever scalar ring ``lam`` lives in."""
    prod = None
    for e, l in zip(m, lam):
        if e:
            p = l**e
            prod = p if prod is None else prod * p
    return prod


def _power_diff(lam, j, m):
    return _power(lam, m) - lam[j]


def _cast_mode(c, mode):
    if mode == MODE_EXACT:
        if isinstance(c, QQi):
            return c
        raise ExactnessError("exact mode needs Gaussian-rational couplings")
    return complex(c)


class _Divisors:
    """Resonance tests and divisors lambda^m - lambda_j for one linear part.

    Classification uses the exact eigen data whenever available; the
    divisor values used for division live in the jet's coefficient mode.
    """

    def __init__(self, tri: TriangularLinear, mode: str, tol: float):
        self.tri = tri
        self.tol = tol
        self.mode = mode
        self.exact_eigen = tri.eigen.exact
        exact_diag = all(isinstance(d, QQi) for d in tri.diag)
        if mode == MODE_EXACT:
            if not exact_diag:
                raise ExactnessError(
                    "exact mode needs Gaussian-rational eigenvalues; "
                    "rerun in float mode"
                )
            self.lam = list(tri.diag)
        else:
            self.lam = [complex(d) for d in tri.diag]
        self.lam_exact = list(tri.diag) if exact_diag else None

    def divisor(self, j: int, m: MultiIndex):
        return _power_diff(self.lam, j, m)

    def is_resonant(self, j: int, m: MultiIndex) -> bool:
        if self.exact_eigen:
            total = EigenScalar.zero()
            for e, mu in zip(m, self.tri.eigen.entries):
                if e:
                    total = total + mu.scaled(e)
            return (total - self.tri.eigen.entries[j]).two_pi_integer() is not None
        if self.lam_exact is not None:
            return not bool(_power_diff(self.lam_exact, j, m))
        d = self.divisor(j, m)
        return abs(d) <= self.tol * max(1.0, abs(self.lam[j]))


def _homological_rows(tri, rhs, k, tol):
    """Row-by-row accumulator solve; returns (h, g, min divisor)."""
    mode = rhs.mode
    n = tri.dim
    div = _Divisors(tri, mode, tol)
    order = sorted(multiindices(n, k), key=lex_sort_key, reverse=True)
    a_components = None
    nil = [(i, kk, _cast_mode(c, mode)) for i, kk, c in tri.nil]

    def cross_terms(sigma):
        """(Ay)^sigma minus its leading term, as {exponent: coeff}."""
        nonlocal a_components
        if tri.is_diagonal:
            return {}
        if a_components is None:
            lin = tri.linear_jet(1, mode)
            a_components = [lin.component(i) for i in range(n)]
        prod = {MultiIndex.zeros(n): _one(mode)}
        for i, e in enumerate(sigma):
            for _ in range(e):
                prod = _poly_mul(prod, a_components[i], k, mode, 0.0)
        out = dict(prod)
        sigma = MultiIndex(sigma)
        lead = _power(div.lam, sigma)
        rest = out[sigma] - lead
        if _nonzero(rest, mode):
            out[sigma] = rest
        else:
            out.pop(sigma, None)
        return out

    h: dict = {}
    g: dict = {}
    min_div = None
    for j in range(n):
        acc = {m: c for m, c in rhs.component(j).items() if m.degree == k}
        for i, kk, c in nil:
            if i != j:
                continue
            for (jj, m), hc in h.items():
                if jj == kk:
                    prev = acc.get(m)
                    val = c * hc if prev is None else prev + c * hc
                    if _nonzero(val, mode):
                        acc[m] = val
                    else:
                        acc.pop(m, None)
        for sigma in order:
            val = acc.get(sigma)
            if val is None or not _nonzero(val, mode):
                continue
            if div.is_resonant(j, sigma):
                g[(j, sigma)] = val
                continue
            d = div.divisor(j, sigma)
            mag = abs(complex(d))
            min_div = mag if min_div is None else min(min_div, mag)
            if mode != MODE_EXACT and mag < max(tol, 1e-9):
                raise NearResonanceError(j, sigma, d)
            coef = val / d
            h[(j, sigma)] = coef
            for m, w in cross_terms(sigma).items():
                if m == sigma:
                    continue
                prev = acc.get(m)
                delta = coef * w
                val2 = -delta if prev is None else prev - delta
                if _nonzero(val2, mode):
                    acc[m] = val2
                else:
                    acc.pop(m, None)
    return h, g, min_div


def _one(mode):
    return QQi(1) if mode == MODE_EXACT else (1.0 + 0.0j)


def _nonzero(c, mode):
    return bool(c) if mode == MODE_EXACT else abs(c) > 0.0


def homological_solve(linear, rhs: PolyJet, k: int, tol: float = _TOL):
    """Split a homogeneous degree-k jet into (h_k, g_k).

    g_k collects the resonant coefficients of ``rhs``; h_k satisfies
    h_k(Ay) - A h_k(y) = rhs - g_k and is supported on nonresonant
    monomials only.
    """
    if k < 2:
        raise ValueError("homological degrees start at 2")
    if rhs.coeffs and not (rhs.min_degree() == rhs.max_degree() == k):
        raise ValueError(f"right-hand side must be homogeneous of degree {k}")
    tri = _as_triangular(linear)
    if rhs.dim != tri.dim:
        raise ValueError("dimension mismatch")
    h, g, _ = _homological_rows(tri, rhs, k, tol)
    h_jet = PolyJet.build(
        rhs.dim, rhs.degree, rhs.mode, [(j, m, c) for (j, m), c in h.items()]
    )
    g_jet = PolyJet.build(
        rhs.dim, rhs.degree, rhs.mode, [(j, m, c) for (j, m), c in g.items()]
    )
    return h_jet, g_jet


def distinguished_normal_form(germ: GermSpec, tol: float = _TOL) -> NormalFormResult:
    """Normalize a hyperbolic germ degree by degree.

    Returns the normal form G (resonant nonlinearity only), the
    normalization jet h with x = y + h(y), and per-degree diagnostics.
    Raises :class:`NearResonanceError` when a float-mode divisor is too
    small to divide honestly.
    """
    tri = germ.linear.triangular()
    n, N, mode = germ.dim, germ.degree, germ.mode
    F = germ.map_jet()
    identity = PolyJet.identity(n, N, mode)
    h_acc = PolyJet.zero(n, N, mode)
    g_acc = PolyJet.zero(n, N, mode)
    lin = tri.linear_jet(N, mode)
    diagnostics = []
    for k in range(2, N + 1):
        lhs = compose(F, identity + h_acc, degree=k)
        rhs = compose(identity + h_acc, lin + g_acc, degree=k)
        defect = (lhs - rhs).degree_slice(k)
        h_map, g_map, min_div = _homological_rows(tri, defect, k, tol)
        h_k = PolyJet.build(n, N, mode, [(j, m, c) for (j, m), c in h_map.items()])
        g_k = PolyJet.build(n, N, mode, [(j, m, c) for (j, m), c in g_map.items()])
        h_acc = h_acc + h_k
        g_acc = g_acc + g_k
        diagnostics.append((k, len(g_map), len(h_map), min_div))
    G = GermSpec(germ.linear, g_acc, N)
    lhs = compose(F, identity + h_acc, degree=N)
    rhs = compose(identity + h_acc, lin + g_acc, degree=N)
    residual = jet_distance(lhs, rhs)
    return NormalFormResult(G, h_acc, residual, tuple(diagnostics))
