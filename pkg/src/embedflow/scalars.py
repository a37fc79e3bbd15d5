"""Exact scalar arithmetic underpinning resonance tests and flow coefficients.

Three small scalar domains cover everything the library needs beyond machine
complex numbers:

``QQi``
    Gaussian rationals a + b*i with exact :class:`fractions.Fraction` parts.
``PiPoly``
    Laurent polynomials in pi with ``QQi`` coefficients.  Time-one integrals
    over weakly resonant directions produce exact 1/(2*pi*l) factors, which
    live here.
``EigenScalar``
    Exact logarithms of eigenvalues, of the form

        rat + sum_p c_p * ln(p) + i * pi * q

    with ``rat``, ``c_p`` and ``q`` rational and ``p`` prime.  Q-linear
    independence of {1, ln 2, ln 3, ...} and transcendence of pi make the
    zero test exact, which turns resonance detection into integer
    arithmetic.

All values are immutable and hashable; every operation is a pure function,
so instances can be shared freely across threads.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction

__all__ = [
    "ExactnessError",
    "QQi",
    "PiPoly",
    "EigenScalar",
    "factor_positive_rational",
]


class ExactnessError(ArithmeticError):
    """An exact-mode computation left the supported scalar ring."""


def _fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    raise TypeError(f"expected a rational, got {type(x).__name__}")


class QQi:
    """Gaussian rational a + b*i with exact Fraction parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        object.__setattr__(self, "re", _fraction(re))
        object.__setattr__(self, "im", _fraction(im))

    def __setattr__(self, name, value):
        raise AttributeError("QQi is immutable")

    @staticmethod
    def coerce(x) -> "QQi":
        if isinstance(x, QQi):
            return x
        if isinstance(x, (int, Fraction)):
            return QQi(x)
        raise TypeError(f"cannot coerce {type(x).__name__} to QQi")

    def __add__(self, other):
        try:
            other = QQi.coerce(other)
        except TypeError:
            return NotImplemented
        return QQi(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __sub__(self, other):
        try:
            other = QQi.coerce(other)
        except TypeError:
            return NotImplemented
        return QQi(self.re - other.re, self.im - other.im)

    def __rsub__(self, other):
        try:
            other = QQi.coerce(other)
        except TypeError:
            return NotImplemented
        return other - self

    def __neg__(self):
        return QQi(-self.re, -self.im)

    def __mul__(self, other):
        try:
            other = QQi.coerce(other)
        except TypeError:
            return NotImplemented
        return QQi(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        try:
            other = QQi.coerce(other)
        except TypeError:
            return NotImplemented
        d = other.re * other.re + other.im * other.im
        if d == 0:
            raise ZeroDivisionError("division by zero QQi")
        return QQi(
            (self.re * other.re + self.im * other.im) / d,
            (self.im * other.re - self.re * other.im) / d,
        )

    def __rtruediv__(self, other):
        try:
            other = QQi.coerce(other)
        except TypeError:
            return NotImplemented
        return other / self

    def __pow__(self, n: int):
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            return QQi(1) / self ** (-n)
        out = QQi(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def conjugate(self) -> "QQi":
        return QQi(self.re, -self.im)

    def __bool__(self) -> bool:
        return bool(self.re) or bool(self.im)

    def __eq__(self, other):
        try:
            other = QQi.coerce(other)
        except TypeError:
            return NotImplemented
        return self.re == other.re and self.im == other.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __complex__(self) -> complex:
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        if not self.im:
            return f"QQi({self.re})"
        return f"QQi({self.re}, {self.im})"


_QQI_ZERO = QQi(0)
_QQI_ONE = QQi(1)


class PiPoly:
    """Laurent polynomial sum_e c_e * pi**e with QQi coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        clean = {}
        if terms:
            for e, c in terms.items():
                c = QQi.coerce(c)
                if c:
                    clean[int(e)] = c
        object.__setattr__(self, "terms", clean)

    def __setattr__(self, name, value):
        raise AttributeError("PiPoly is immutable")

    @staticmethod
    def coerce(x) -> "PiPoly":
        if isinstance(x, PiPoly):
            return x
        if isinstance(x, (int, Fraction, QQi)):
            return PiPoly({0: QQi.coerce(x)})
        raise TypeError(f"cannot coerce {type(x).__name__} to PiPoly")

    @staticmethod
    def monomial(coeff, power: int = 0) -> "PiPoly":
        return PiPoly({power: QQi.coerce(coeff)})

    def __add__(self, other):
        try:
            other = PiPoly.coerce(other)
        except TypeError:
            return NotImplemented
        out = dict(self.terms)
        for e, c in other.terms.items():
            s = out.get(e, _QQI_ZERO) + c
            if s:
                out[e] = s
            else:
                out.pop(e, None)
        return PiPoly(out)

    __radd__ = __add__

    def __sub__(self, other):
        try:
            other = PiPoly.coerce(other)
        except TypeError:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        try:
            other = PiPoly.coerce(other)
        except TypeError:
            return NotImplemented
        return other - self

    def __neg__(self):
        return PiPoly({e: -c for e, c in self.terms.items()})

    def __mul__(self, other):
        try:
            other = PiPoly.coerce(other)
        except TypeError:
            return NotImplemented
        out: dict[int, QQi] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = e1 + e2
                s = out.get(e, _QQI_ZERO) + c1 * c2
                if s:
                    out[e] = s
                else:
                    out.pop(e, None)
        return PiPoly(out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, PiPoly):
            if len(other.terms) != 1:
                raise ExactnessError("PiPoly division only by monomials")
            (e, c), = other.terms.items()
            return PiPoly({ee - e: cc / c for ee, cc in self.terms.items()})
        if isinstance(other, (int, Fraction, QQi)):
            c = QQi.coerce(other)
            return PiPoly({e: cc / c for e, cc in self.terms.items()})
        return NotImplemented

    def __bool__(self):
        return bool(self.terms)

    def __eq__(self, other):
        try:
            other = PiPoly.coerce(other)
        except TypeError:
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def as_qqi(self):
        """Return the QQi value if no pi powers are present, else None."""
        if not self.terms:
            return _QQI_ZERO
        if set(self.terms) == {0}:
            return self.terms[0]
        return None

    def __complex__(self) -> complex:
        return sum(
            (complex(c) * math.pi**e for e, c in self.terms.items()),
            complex(0),
        )

    def __repr__(self):
        if not self.terms:
            return "PiPoly(0)"
        parts = [f"pi^{e}*({c!r})" for e, c in sorted(self.terms.items())]
        return "PiPoly(" + " + ".join(parts) + ")"


def factor_positive_rational(q: Fraction) -> tuple[tuple[int, int], ...]:
    """Factor a positive rational into ((prime, exponent), ...), sorted."""
    q = _fraction(q)
    if q <= 0:
        raise ValueError("factorization needs a positive rational")
    out: dict[int, int] = {}
    for value, sign in ((q.numerator, 1), (q.denominator, -1)):
        n = value
        p = 2
        while p * p <= n:
            while n % p == 0:
                out[p] = out.get(p, 0) + sign
                n //= p
            p += 1 if p == 2 else 2
        if n > 1:
            out[n] = out.get(n, 0) + sign
    return tuple(sorted((p, e) for p, e in out.items() if e))


@dataclass(frozen=True)
class EigenScalar:
    """Exact value rat + sum_p logs[p]*ln(p) + i*pi*pi_part.

    Used for logarithms of eigenvalues (and their integer combinations),
    where exactness of the zero test decides resonance.  ``logs`` is a
    sorted tuple of (prime, Fraction) pairs with nonzero coefficients.
    """

    rat: Fraction
    logs: tuple[tuple[int, Fraction], ...]
    pi_part: Fraction

    @staticmethod
    def zero() -> "EigenScalar":
        return EigenScalar(Fraction(0), (), Fraction(0))

    @staticmethod
    def from_parts(rat=0, log_of=1, pi_part=0) -> "EigenScalar":
        """Build rat + ln(log_of) + i*pi*pi_part with rational inputs."""
        log_of = _fraction(log_of)
        logs = tuple(
            (p, Fraction(e)) for p, e in factor_positive_rational(log_of)
        )
        return EigenScalar(_fraction(rat), logs, _fraction(pi_part))

    @staticmethod
    def from_signed_rational(lam) -> "EigenScalar":
        """Exact logarithm (principal) of a nonzero rational: ln|lam| + i*pi*[lam<0]."""
        lam = _fraction(lam)
        if lam == 0:
            raise ValueError("log of zero")
        return EigenScalar.from_parts(0, abs(lam), 0 if lam > 0 else 1)

    def _log_dict(self) -> dict[int, Fraction]:
        return dict(self.logs)

    def __add__(self, other):
        if not isinstance(other, EigenScalar):
            return NotImplemented
        logs = self._log_dict()
        for p, c in other.logs:
            s = logs.get(p, Fraction(0)) + c
            if s:
                logs[p] = s
            else:
                logs.pop(p, None)
        return EigenScalar(
            self.rat + other.rat,
            tuple(sorted(logs.items())),
            self.pi_part + other.pi_part,
        )

    def __sub__(self, other):
        if not isinstance(other, EigenScalar):
            return NotImplemented
        return self + (-other)

    def __neg__(self):
        return EigenScalar(
            -self.rat, tuple((p, -c) for p, c in self.logs), -self.pi_part
        )

    def scaled(self, k) -> "EigenScalar":
        k = _fraction(k)
        if not k:
            return EigenScalar.zero()
        return EigenScalar(
            self.rat * k,
            tuple((p, c * k) for p, c in self.logs),
            self.pi_part * k,
        )

    def conjugate(self) -> "EigenScalar":
        return EigenScalar(self.rat, self.logs, -self.pi_part)

    def shifted_2pii(self, l: int) -> "EigenScalar":
        """Add 2*pi*i*l (a branch shift of the exponential)."""
        return EigenScalar(self.rat, self.logs, self.pi_part + 2 * l)

    @property
    def real_is_zero(self) -> bool:
        return self.rat == 0 and not self.logs

    @property
    def is_zero(self) -> bool:
        return self.real_is_zero and self.pi_part == 0

    def two_pi_integer(self):
        """If the value equals 2*pi*i*l with integer l, return l, else None."""
        if not self.real_is_zero:
            return None
        half = self.pi_part / 2
        if half.denominator != 1:
            return None
        return int(half)

    def exp_exact(self):
        """exp(self) as a QQi, or None when that value is irrational."""
        if self.rat != 0:
            return None
        mod = Fraction(1)
        for p, c in self.logs:
            if c.denominator != 1:
                return None
            mod *= Fraction(p) ** c
        q = self.pi_part % 2
        if q == 0:
            return QQi(mod)
        if q == 1:
            return QQi(-mod)
        if q == Fraction(1, 2):
            return QQi(0, mod)
        if q == Fraction(3, 2):
            return QQi(0, -mod)
        return None

    def __complex__(self) -> complex:
        re = float(self.rat) + sum(float(c) * math.log(p) for p, c in self.logs)
        return complex(re, math.pi * float(self.pi_part))

    def exp_complex(self) -> complex:
        exact = self.exp_exact()
        if exact is not None:
            return complex(exact)
        return cmath.exp(complex(self))

    def __repr__(self):
        bits = []
        if self.rat:
            bits.append(str(self.rat))
        for p, c in self.logs:
            bits.append(f"{c}*ln{p}")
        if self.pi_part:
            bits.append(f"{self.pi_part}*i*pi")
        return "EigenScalar(" + (" + ".join(bits) or "0") + ")"
