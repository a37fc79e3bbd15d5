"""Truncated multivariate polynomial jets and jet algebra.

A jet is a polynomial self-map of R^n (or C^n) stored sparsely as
``{(component, exponent): coefficient}`` and truncated at a fixed total
degree.  Coefficients are machine complex numbers in ``float`` mode and
Gaussian rationals (or Laurent polynomials in pi) in ``exact`` mode.

The composition and Jacobian operations here are the workhorses of the
normalization and embedding recursions; ``complexify``/``realify`` move a
real jet to coordinates in which a rotation-block linear part becomes
diagonal, by conjugating with z = x_i + i*x_{i+1} on each designated pair.

Jets are value objects: no operation mutates its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

from .scalars import ExactnessError, PiPoly, QQi

__all__ = [
    "MODE_FLOAT",
    "MODE_EXACT",
    "ZERO_TOL",
    "ConjugateSymmetryError",
    "MultiIndex",
    "PolyJet",
    "RealPairing",
    "compose",
    "jacobian_apply",
    "lex_compare",
    "lex_sort_key",
    "multiindices",
    "complexify",
    "realify",
    "permute_jet",
    "jet_distance",
]

MODE_FLOAT = "float"
MODE_EXACT = "exact"

# Coefficients with |c| below this are dropped when assembling float jets.
ZERO_TOL = 1e-12


class ConjugateSymmetryError(ValueError):
    """A jet expected to realify had a conjugate-symmetry violation."""


class MultiIndex(tuple):
    """Exponent vector of a monomial y^m; immutable, totally ordered by lex."""

    def __new__(cls, entries):
        entries = tuple(int(e) for e in entries)
        if any(e < 0 for e in entries):
            raise ValueError("multi-index entries must be nonnegative")
        return super().__new__(cls, entries)

    @property
    def degree(self) -> int:
        return sum(self)

    def plus(self, other) -> "MultiIndex":
        return MultiIndex(a + b for a, b in zip(self, other))

    def minus_unit(self, i: int) -> "MultiIndex":
        if self[i] == 0:
            raise ValueError("exponent underflow")
        return MultiIndex(
            e - 1 if k == i else e for k, e in enumerate(self)
        )

    @staticmethod
    def unit(n: int, i: int) -> "MultiIndex":
        return MultiIndex(1 if k == i else 0 for k in range(n))

    @staticmethod
    def zeros(n: int) -> "MultiIndex":
        return MultiIndex((0,) * n)


def lex_compare(m1, m2) -> int:
    """-1 if m1 precedes m2, +1 if it follows, 0 if equal.

    A multi-index precedes another when, at the first position where they
    differ, it has the *larger* entry; so for n = 2, degree 2 the order is
    (2,0), (1,1), (0,2).
    """
    if len(m1) != len(m2):
        raise ValueError("multi-index dimensions differ")
    for a, b in zip(m1, m2):
        if a != b:
            return -1 if a > b else 1
    return 0


def lex_sort_key(m) -> tuple:
    """Sort key under which sorted() lists multi-indices in lex order."""
    return tuple(-e for e in m)


def multiindices(n: int, degree: int):
    """All multi-indices of the given total degree, in lex order."""
    if n == 0:
        if degree == 0:
            yield MultiIndex(())
        return
    # Compositions of `degree` into n parts, first coordinate descending.
    for bars in combinations(range(degree + n - 1), n - 1):
        parts = []
        prev = -1
        for b in bars:
            parts.append(b - prev - 1)
            prev = b
        parts.append(degree + n - 2 - prev)
        yield MultiIndex(parts)


def _all_multiindices(n, lo, hi):
    for d in range(lo, hi + 1):
        yield from multiindices(n, d)


def _coerce_scalar(c, mode):
    if mode == MODE_FLOAT:
        if isinstance(c, (QQi, PiPoly)):
            return complex(c)
        return complex(c)
    if isinstance(c, (QQi, PiPoly)):
        return c
    if isinstance(c, (int, Fraction)):
        return QQi(c)
    raise ExactnessError(
        f"cannot store {type(c).__name__} in an exact jet; use float mode"
    )


def _scalar_zero(c, mode, tol):
    if mode == MODE_FLOAT:
        return abs(c) <= tol
    return not c


@dataclass(frozen=True)
class PolyJet:
    """Sparse polynomial jet: coefficients of y^m e_j up to a total degree."""

    dim: int
    degree: int
    mode: str
    coeffs: dict

    @staticmethod
    def build(dim, degree, mode, terms, tol=ZERO_TOL) -> "PolyJet":
        """Assemble a jet from ``(j, exponents, coefficient)`` terms.

        Terms beyond the truncation degree are rejected; zero coefficients
        (within ``tol`` in float mode, exactly otherwise) are dropped.
        """
        coeffs = {}
        for j, m, c in terms:
            j = int(j)
            m = m if isinstance(m, MultiIndex) else MultiIndex(m)
            if not 0 <= j < dim:
                raise ValueError(f"component {j} out of range for dim {dim}")
            if len(m) != dim:
                raise ValueError("multi-index dimension mismatch")
            if m.degree > degree:
                raise ValueError(
                    f"term of degree {m.degree} exceeds truncation {degree}"
                )
            c = _coerce_scalar(c, mode)
            key = (j, m)
            if key in coeffs:
                c = coeffs[key] + c
            coeffs[key] = c
        coeffs = {
            k: c for k, c in coeffs.items() if not _scalar_zero(c, mode, tol)
        }
        return PolyJet(dim, degree, mode, coeffs)

    @staticmethod
    def zero(dim, degree, mode=MODE_FLOAT) -> "PolyJet":
        return PolyJet(dim, degree, mode, {})

    @staticmethod
    def identity(dim, degree, mode=MODE_FLOAT) -> "PolyJet":
        one = 1.0 + 0.0j if mode == MODE_FLOAT else QQi(1)
        return PolyJet(
            dim,
            degree,
            mode,
            {(j, MultiIndex.unit(dim, j)): one for j in range(dim)},
        )

    @staticmethod
    def from_linear(matrix, degree, mode=MODE_FLOAT, tol=ZERO_TOL) -> "PolyJet":
        """Jet of the linear map y -> M y given a dense row-major matrix."""
        n = len(matrix)
        terms = []
        for j in range(n):
            row = matrix[j]
            if len(row) != n:
                raise ValueError("linear part must be square")
            for k in range(n):
                terms.append((j, MultiIndex.unit(n, k), row[k]))
        return PolyJet.build(n, degree, mode, terms, tol)

    # -- simple views ----------------------------------------------------

    def component(self, j) -> dict:
        return {m: c for (jj, m), c in self.coeffs.items() if jj == j}

    def degree_slice(self, k) -> "PolyJet":
        return PolyJet(
            self.dim,
            self.degree,
            self.mode,
            {key: c for key, c in self.coeffs.items() if key[1].degree == k},
        )

    def truncate(self, n) -> "PolyJet":
        return PolyJet(
            self.dim,
            n,
            self.mode,
            {key: c for key, c in self.coeffs.items() if key[1].degree <= n},
        )

    def max_degree(self) -> int:
        return max((m.degree for (_, m) in self.coeffs), default=0)

    def min_degree(self) -> int:
        return min((m.degree for (_, m) in self.coeffs), default=0)

    def support(self):
        return set(self.coeffs)

    def linear_matrix(self):
        """Dense (complex) matrix of the degree-1 part."""
        out = [[0j] * self.dim for _ in range(self.dim)]
        for (j, m), c in self.coeffs.items():
            if m.degree == 1:
                k = next(i for i, e in enumerate(m) if e)
                out[j][k] = complex(c)
        return out

    def max_abs(self) -> float:
        return max((abs(complex(c)) for c in self.coeffs.values()), default=0.0)

    def to_float(self) -> "PolyJet":
        if self.mode == MODE_FLOAT:
            return self
        return PolyJet(
            self.dim,
            self.degree,
            MODE_FLOAT,
            {key: complex(c) for key, c in self.coeffs.items()},
        )

    # -- arithmetic ------------------------------------------------------

    def _check_compatible(self, other):
        if self.dim != other.dim:
            raise ValueError("jet dimensions differ")
        if self.mode != other.mode:
            raise ValueError("jet coefficient modes differ")

    def __add__(self, other):
        self._check_compatible(other)
        degree = min(self.degree, other.degree)
        out = {k: c for k, c in self.coeffs.items() if k[1].degree <= degree}
        for k, c in other.coeffs.items():
            if k[1].degree > degree:
                continue
            s = out.get(k)
            s = c if s is None else s + c
            if _scalar_zero(s, self.mode, ZERO_TOL):
                out.pop(k, None)
            else:
                out[k] = s
        return PolyJet(self.dim, degree, self.mode, out)

    def __neg__(self):
        return PolyJet(
            self.dim, self.degree, self.mode,
            {k: -c for k, c in self.coeffs.items()},
        )

    def __sub__(self, other):
        return self + (-other)

    def scale(self, a) -> "PolyJet":
        a = _coerce_scalar(a, self.mode)
        if _scalar_zero(a, self.mode, 0.0):
            return PolyJet.zero(self.dim, self.degree, self.mode)
        return PolyJet(
            self.dim, self.degree, self.mode,
            {k: c * a for k, c in self.coeffs.items()},
        )

    def evaluate(self, point):
        """Numeric evaluation at a point (complex arithmetic)."""
        if len(point) != self.dim:
            raise ValueError("point dimension mismatch")
        out = [0j] * self.dim
        for (j, m), c in self.coeffs.items():
            v = complex(c)
            for x, e in zip(point, m):
                if e:
                    v *= complex(x) ** e
            out[j] += v
        return out


def jet_distance(f: PolyJet, g: PolyJet) -> float:
    """Max coefficient distance, comparing over the common truncation."""
    degree = min(f.degree, g.degree)
    keys = {k for k in f.coeffs if k[1].degree <= degree}
    keys |= {k for k in g.coeffs if k[1].degree <= degree}
    worst = 0.0
    for k in keys:
        a = complex(f.coeffs.get(k, 0))
        b = complex(g.coeffs.get(k, 0))
        worst = max(worst, abs(a - b))
    return worst


# -- scalar polynomials (single-component helpers) -----------------------


def _poly_mul(p, q, limit, mode, tol):
    out = {}
    for m1, c1 in p.items():
        d1 = m1.degree
        for m2, c2 in q.items():
            if d1 + m2.degree > limit:
                continue
            m = m1.plus(m2)
            s = out.get(m)
            s = c1 * c2 if s is None else s + c1 * c2
            out[m] = s
    return {m: c for m, c in out.items() if not _scalar_zero(c, mode, tol)}


def compose(f: PolyJet, g: PolyJet, degree=None, tol=ZERO_TOL) -> PolyJet:
    """Jet of f(g(y)), truncated at ``degree``.

    ``g`` must fix the origin (no constant term); otherwise the truncated
    composition would not be well defined degree by degree.
    """
    f._check_compatible(g)
    if degree is None:
        degree = min(f.degree, g.degree)
    n = f.dim
    mode = f.mode
    zero_mi = MultiIndex.zeros(n)
    for j in range(n):
        if (j, zero_mi) in g.coeffs:
            raise ValueError("composition target must fix the origin")

    components = [g.component(i) for i in range(n)]
    one = 1.0 + 0.0j if mode == MODE_FLOAT else QQi(1)
    powers = [[{zero_mi: one}] for _ in range(n)]

    def power(i, k):
        cache = powers[i]
        while len(cache) <= k:
            cache.append(
                _poly_mul(cache[-1], components[i], degree, mode, tol)
            )
        return cache[k]

    out = {}
    for (j, m), c in f.coeffs.items():
        if m.degree > degree:
            continue
        term = {zero_mi: one}
        for i, e in enumerate(m):
            if not e:
                continue
            term = _poly_mul(term, power(i, e), degree, mode, tol)
            if not term:
                break
        for mm, cc in term.items():
            key = (j, mm)
            s = out.get(key)
            v = c * cc
            out[key] = v if s is None else s + v
    out = {k: c for k, c in out.items() if not _scalar_zero(c, mode, tol)}
    return PolyJet(n, degree, mode, out)


def jacobian_apply(g: PolyJet, w: PolyJet, degree=None, tol=ZERO_TOL) -> PolyJet:
    """Jet of Dg(y) * w(y), truncated at ``degree``."""
    g._check_compatible(w)
    if degree is None:
        degree = min(g.degree, w.degree)
    n = g.dim
    mode = g.mode
    w_components = [w.component(s) for s in range(n)]
    out = {}
    for (j, m), c in g.coeffs.items():
        for s, e in enumerate(m):
            if not e:
                continue
            base = {m.minus_unit(s): c * e}
            prod = _poly_mul(base, w_components[s], degree, mode, tol)
            for mm, cc in prod.items():
                key = (j, mm)
                prev = out.get(key)
                out[key] = cc if prev is None else prev + cc
    out = {k: c for k, c in out.items() if not _scalar_zero(c, mode, tol)}
    return PolyJet(n, degree, mode, out)


# -- real/complex coordinate changes --------------------------------------


@dataclass(frozen=True)
class RealPairing:
    """Which coordinate pairs (i, i+1) carry a complex structure z = x_i + i*x_{i+1}.

    Unpaired coordinates stay real.  Pairs must be disjoint and each pair
    contiguous; the set of paired plus real indices covers 0..dim-1.
    """

    dim: int
    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        seen = set()
        for i, k in self.pairs:
            if k != i + 1:
                raise ValueError("pairs must be contiguous (i, i+1)")
            if not 0 <= i < k < self.dim:
                raise ValueError("pair out of range")
            if i in seen or k in seen:
                raise ValueError("pairs must be disjoint")
            seen.add(i)
            seen.add(k)

    @property
    def real_indices(self) -> tuple[int, ...]:
        paired = {i for pair in self.pairs for i in pair}
        return tuple(i for i in range(self.dim) if i not in paired)

    @property
    def trivial(self) -> bool:
        return not self.pairs


def _pairing_jets(pairing: RealPairing, degree, mode):
    n = pairing.dim
    if mode == MODE_FLOAT:
        one, img, half = 1.0 + 0j, 1j, 0.5 + 0j
    else:
        one, img, half = QQi(1), QQi(0, 1), QQi(Fraction(1, 2))
    fw = []   # new-from-old:  z_i = x_i + i x_{i+1}
    bw = []   # old-from-new:  x_i = (z + zbar)/2
    for i in pairing.real_indices:
        u = MultiIndex.unit(n, i)
        fw.append((i, u, one))
        bw.append((i, u, one))
    for i, k in pairing.pairs:
        ui, uk = MultiIndex.unit(n, i), MultiIndex.unit(n, k)
        fw.append((i, ui, one))
        fw.append((i, uk, img))
        fw.append((k, ui, one))
        fw.append((k, uk, -img))
        bw.append((i, ui, half))
        bw.append((i, uk, half))
        bw.append((k, ui, -img * half))
        bw.append((k, uk, img * half))
    forward = PolyJet.build(n, degree, mode, fw, tol=0.0)
    backward = PolyJet.build(n, degree, mode, bw, tol=0.0)
    return forward, backward


def _imag_violation(jet: PolyJet) -> float:
    worst = 0.0
    for c in jet.coeffs.values():
        if isinstance(c, QQi):
            worst = max(worst, abs(float(c.im)))
        elif isinstance(c, PiPoly):
            worst = max(worst, sum(abs(float(q.im)) for q in c.terms.values()))
        else:
            worst = max(worst, abs(c.imag))
    return worst


def _drop_imag(jet: PolyJet) -> PolyJet:
    out = {}
    for k, c in jet.coeffs.items():
        if isinstance(c, QQi):
            c = QQi(c.re)
        elif isinstance(c, PiPoly):
            c = PiPoly({e: QQi(q.re) for e, q in c.terms.items()})
        else:
            c = complex(c.real, 0.0)
        keep = bool(c) if jet.mode == MODE_EXACT else abs(c) > 0.0
        if keep:
            out[k] = c
    return PolyJet(jet.dim, jet.degree, jet.mode, out)


def complexify(f: PolyJet, pairing: RealPairing, tol=1e-9) -> PolyJet:
    """Conjugate a real-coefficient jet into paired complex coordinates.

    On each pair the new coordinates are z = x_i + i*x_{i+1} and its
    conjugate; a rotation block [[a, b], [-b, a]] becomes
    diag(a - i*b, a + i*b).
    """
    if pairing.dim != f.dim:
        raise ValueError("pairing dimension mismatch")
    if _imag_violation(f) > tol:
        raise ValueError("complexify expects a real-coefficient jet")
    if pairing.trivial:
        return f
    forward, backward = _pairing_jets(pairing, f.degree, f.mode)
    return compose(forward, compose(f, backward, f.degree), f.degree)


def realify(f: PolyJet, pairing: RealPairing, tol=1e-9) -> PolyJet:
    """Inverse of :func:`complexify`; checks conjugate symmetry.

    The imaginary residue of the back-transformed jet must vanish (within
    ``tol`` in float mode, exactly in exact mode) or the input was not the
    complexification of a real jet.
    """
    if pairing.dim != f.dim:
        raise ValueError("pairing dimension mismatch")
    if pairing.trivial:
        out = f
    else:
        forward, backward = _pairing_jets(pairing, f.degree, f.mode)
        out = compose(backward, compose(f, forward, f.degree), f.degree)
    bad = _imag_violation(out)
    limit = 0.0 if f.mode == MODE_EXACT else tol
    if bad > limit:
        raise ConjugateSymmetryError(
            f"conjugate symmetry violated: imaginary residue {bad:.3e}"
        )
    return _drop_imag(out)


def permute_jet(f: PolyJet, perm) -> PolyJet:
    """Conjugate a jet by the coordinate relabeling new_i = old_{perm[i]}."""
    n = f.dim
    perm = tuple(perm)
    if sorted(perm) != list(range(n)):
        raise ValueError("not a permutation")
    inv = [0] * n
    for i, p in enumerate(perm):
        inv[p] = i
    out = {}
    for (j, m), c in f.coeffs.items():
        mm = MultiIndex(m[perm[i]] for i in range(n))
        out[(inv[j], mm)] = c
    return PolyJet(n, f.degree, f.mode, out)
