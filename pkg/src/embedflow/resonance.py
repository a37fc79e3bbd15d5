"""Resonance enumeration for map and field eigenvalues.

With map eigenvalues lambda = e^mu, a coordinate j and exponent m
(|m| >= 2) form

* a map resonance when lambda_j = lambda^m,
* a field resonance when mu_j = <m, mu>,
* a weak resonance when mu_j - <m, mu> = 2*pi*i*l for some integer l != 0.

Map resonances are exactly the union of field and weak ones once the
logarithm branch mu is fixed.  In exact mode (``EigenScalar`` data) the
tests reduce to integer arithmetic; in float mode a relative tolerance is
used and near misses inside (tol, 100*tol] are reported so borderline
spectra are never classified silently.

Also exposed: the spectra of the degree-r homological operators
h |-> A h - h(A .) (map side, eigenvalues lambda_j - lambda^m) and
h |-> Dh . B - B h (field side, eigenvalues <m, mu> - mu_j).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .jets import MultiIndex, multiindices
from .scalars import EigenScalar
from .spectral import EigenData

__all__ = [
    "ResonanceReport",
    "map_resonances",
    "field_resonances",
    "operator_L_map_spectrum",
    "operator_L_field_spectrum",
]

_TOL = 1e-9
_NEAR_FACTOR = 100.0
_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ResonanceReport:
    """Resonances up to total degree ``degree`` for ``dim`` coordinates.

    Entries use 0-based coordinate indices; ``near`` lists float-mode near
    misses (j, m, distance) that fell inside (tol, 100*tol].
    """

    dim: int
    degree: int
    map_resonant: tuple = ()
    field_resonant: tuple = ()
    weak: tuple = ()
    near: tuple = ()

    def map_set(self) -> frozenset:
        return frozenset(self.map_resonant)

    def field_set(self) -> frozenset:
        return frozenset(self.field_resonant)

    def weak_set(self) -> frozenset:
        return frozenset((j, m) for j, m, _ in self.weak)

    def weak_shift(self, j: int, m: MultiIndex):
        for jj, mm, l in self.weak:
            if jj == j and mm == m:
                return l
        return None

    def combined_set(self) -> frozenset:
        """Field plus weak supports: the map-resonant set for mu = log lambda."""
        return self.field_set() | self.weak_set()


def _delta_exact(mu, j: int, m) -> EigenScalar:
    """<m, mu> - mu_j over exact eigen data."""
    total = EigenScalar.zero()
    for k, e in zip(m, mu):
        if k:
            total = total + e.scaled(k)
    return total - mu[j]


def _delta_float(mu, j: int, m) -> complex:
    return sum(k * v for k, v in zip(m, mu) if k) - mu[j]


def _pairs(dim: int, degree: int):
    for j in range(dim):
        for r in range(2, degree + 1):
            for m in multiindices(dim, r):
                yield j, m


def map_resonances(eigen: EigenData, degree: int, tol: float = _TOL) -> ResonanceReport:
    """All (j, m) with lambda_j = lambda^m and 2 <= |m| <= degree."""
    if degree < 2:
        raise ValueError("degree must be at least 2")
    found, near = [], []
    if eigen.exact:
        for j, m in _pairs(len(eigen), degree):
            if _delta_exact(eigen.entries, j, m).two_pi_integer() is not None:
                found.append((j, m))
    else:
        lam = eigen.lambda_complex()
        for j, m in _pairs(len(eigen), degree):
            prod = 1.0 + 0.0j
            for k, v in zip(m, lam):
                if k:
                    prod *= v**k
            dist = abs(prod - lam[j])
            cut = tol * max(1.0, abs(lam[j]))
            if dist <= cut:
                found.append((j, m))
            elif dist <= _NEAR_FACTOR * cut:
                near.append((j, m, dist))
    return ResonanceReport(
        len(eigen), degree, map_resonant=tuple(found), near=tuple(near)
    )


def field_resonances(eigen: EigenData, degree: int, tol: float = _TOL) -> ResonanceReport:
    """Field-resonant (j, m) and weak (j, m, l) with mu_j - <m, mu> = 2*pi*i*l."""
    if degree < 2:
        raise ValueError("degree must be at least 2")
    resonant, weak, near = [], [], []
    if eigen.exact:
        for j, m in _pairs(len(eigen), degree):
            l = _delta_exact(eigen.entries, j, m).two_pi_integer()
            if l is None:
                continue
            if l == 0:
                resonant.append((j, m))
            else:
                # two_pi_integer saw <m,mu> - mu_j; the witness flips sign.
                weak.append((j, m, -l))
    else:
        mu = eigen.mu_complex()
        for j, m in _pairs(len(eigen), degree):
            d = _delta_float(mu, j, m)
            l = round(d.imag / _TWO_PI)
            dist = math.hypot(d.real, d.imag - _TWO_PI * l)
            if dist <= tol:
                if l == 0:
                    resonant.append((j, m))
                else:
                    weak.append((j, m, -l))
            elif dist <= _NEAR_FACTOR * tol:
                near.append((j, m, dist))
    return ResonanceReport(
        len(eigen),
        degree,
        field_resonant=tuple(resonant),
        weak=tuple(weak),
        near=tuple(near),
    )


def operator_L_map_spectrum(eigen: EigenData, r: int) -> tuple[complex, ...]:
    """Multiset { lambda_j - lambda^m : |m| = r } of the degree-r map operator.

    Values are exact differences converted to complex when the map
    eigenvalues are Gaussian rational, so resonant entries are exactly 0.
    """
    if r < 2:
        raise ValueError("degree must be at least 2")
    n = len(eigen)
    exact = eigen.lambda_exact()
    out = []
    if exact is not None:
        for j in range(n):
            for m in multiindices(n, r):
                out.append(complex(exact[j] - _power_product(exact, m)))
    else:
        lam = eigen.lambda_complex()
        for j in range(n):
            for m in multiindices(n, r):
                out.append(lam[j] - _power_product(lam, m))
    return tuple(out)


def operator_L_field_spectrum(eigen: EigenData, r: int) -> tuple[complex, ...]:
    """Multiset { <m, mu> - mu_j : |m| = r } of the degree-r field operator."""
    if r < 2:
        raise ValueError("degree must be at least 2")
    n = len(eigen)
    out = []
    if eigen.exact:
        for j in range(n):
            for m in multiindices(n, r):
                out.append(complex(_delta_exact(eigen.entries, j, m)))
    else:
        mu = eigen.mu_complex()
        for j in range(n):
            for m in multiindices(n, r):
                out.append(_delta_float(mu, j, m))
    return tuple(out)


def _power_product(values, m):
    prod = None
    for k, v in zip(m, values):
        if k:
            p = v**k
            prod = p if prod is None else prod * p
    return prod
