"""
Rational transfer-function algebra with pure delays.

Polynomials are numpy coefficient arrays in ascending powers of s
(``coeffs[k]`` multiplies ``s**k``). Every RationalTransferFunction is kept
in canonical form: monic denominator, exact-zero leading coefficients
trimmed, common factors of s cancelled. Multiplication, division and
addition additionally cancel whole polynomial factors that divide each
other, which keeps the interconnection chains at their structural degree.

Delays are carried as a separate field and evaluated exactly; nothing in
this module approximates them except ``pade`` when asked to.
"""
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from math import factorial
from typing import Literal

import numpy as np
import numpy.typing as npt
from numpy.polynomial import polynomial as P

from app.core.exceptions import (
    DelayMismatch,
    ImproperTransferFunction,
    NoConvergence,
    NonInvertibleDelay,
    PoleOnAxis,
    ZeroNumerator,
)


Polynomial = npt.NDArray[np.float64]

# Tolerance for negligible constant terms (common factors of s), relative to
# the largest coefficient
COEFF_TOL = 1e-12
# Cancellation in a sum below this multiple of eps times the operand
# magnitudes is rounding and becomes an exact zero
SUM_ROUNDING = 1024.0
# Per-coefficient backward error accepted for exact factor cancellation
FACTOR_TOL = 1e-9
# Half-width of the band around the imaginary axis classified as marginal
EPS_STAB = 1e-9

ABERTH_MAX_ITER = 500
ABERTH_STEP_TOL = 1e-12

_EPS = np.finfo(float).eps


def make_polynomial(coeffs) -> Polynomial:
    """Return a float coefficient array (ascending powers) without exact-zero leading terms."""
    c = np.atleast_1d(np.asarray(coeffs, dtype=float)).copy()
    if c.ndim != 1 or c.size == 0:
        raise ValueError("polynomial coefficients must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(c)):
        raise ValueError("polynomial coefficients must be finite")
    nonzero = np.flatnonzero(c)
    if nonzero.size == 0:
        return np.zeros(1)
    return c[: nonzero[-1] + 1]


def _padded(p: Polynomial, n: int) -> Polynomial:
    out = np.zeros(n)
    out[: p.size] = p
    return out


def poly_sum(p: Polynomial, q: Polynomial, magnitude: Polynomial | None = None) -> Polynomial:
    """
    p + q with rounding-level cancellation flushed to exact zeros.

    The threshold is taken per coefficient from the operand magnitudes, so a
    small coefficient that is genuinely part of a wide-range polynomial
    survives. When p and q are products, pass the sum of the absolute-value
    products as ``magnitude``.
    """
    n = max(p.size, q.size)
    a = _padded(p, n)
    b = _padded(q, n)
    if magnitude is None:
        magnitude = np.abs(a) + np.abs(b)
    total = a + b
    total[np.abs(total) <= SUM_ROUNDING * _EPS * _padded(magnitude, n)] = 0.0
    return make_polynomial(total)


def _cross_sum(p1: Polynomial, q1: Polynomial, p2: Polynomial, q2: Polynomial) -> Polynomial:
    """p1 q1 + p2 q2, rounding measured against |p1| |q1| + |p2| |q2|."""
    magnitude = P.polyadd(P.polymul(np.abs(p1), np.abs(q1)), P.polymul(np.abs(p2), np.abs(q2)))
    return poly_sum(P.polymul(p1, q1), P.polymul(p2, q2), magnitude)


def _is_zero(p: Polynomial) -> bool:
    return p.size == 1 and p[0] == 0.0


def _degree(p: Polynomial) -> int:
    return p.size - 1


def _proportional(p: Polynomial, q: Polynomial) -> bool:
    """True when p and q agree coefficient by coefficient up to rounding (both monic)."""
    if p.size != q.size:
        return False
    return bool(np.all(np.abs(p - q) <= SUM_ROUNDING * _EPS * (np.abs(p) + np.abs(q))))


def _exact_quotient(p: Polynomial, q: Polynomial) -> Polynomial | None:
    """Return p / q when q (degree >= 1) divides p with negligible remainder."""
    if _degree(q) < 1 or _degree(p) < _degree(q) or _is_zero(p):
        return None
    quo = make_polynomial(P.polydiv(p, q)[0])
    # backward error of quo * q against p, scaled per coefficient
    product = P.polymul(quo, q)
    if product.size != p.size:
        return None
    scale = np.abs(p) + P.polymul(np.abs(quo), np.abs(q))
    if np.all(np.abs(p - product) <= FACTOR_TOL * scale):
        return quo
    return None


def _cancel_pair(num: Polynomial, den: Polynomial) -> tuple[Polynomial, Polynomial]:
    quo = _exact_quotient(num, den)
    if quo is not None:
        return quo, np.ones(1)
    quo = _exact_quotient(den, num)
    if quo is not None:
        return np.ones(1), quo
    return num, den


def _canonical(num, den, delay: float) -> tuple[Polynomial, Polynomial, float]:
    num = make_polynomial(num)
    den = make_polynomial(den)
    if _is_zero(den):
        raise ZeroNumerator("transfer function denominator is identically zero")
    if _is_zero(num):
        return np.zeros(1), np.ones(1), 0.0

    # common factors of s: both constant terms negligible
    while num.size > 1 and den.size > 1:
        if abs(num[0]) < COEFF_TOL * np.max(np.abs(num)) and abs(den[0]) < COEFF_TOL * np.max(
            np.abs(den)
        ):
            num = num[1:]
            den = den[1:]
        else:
            break

    lead = den[-1]
    return num / lead, den / lead, float(delay)


@dataclass(frozen=True, eq=False)
class RationalTransferFunction:
    """num(s)/den(s) * exp(-s*delay), canonical after construction."""

    num: Polynomial
    den: Polynomial
    delay: float = 0.0

    def __post_init__(self):
        if self.delay < 0 or not np.isfinite(self.delay):
            raise NonInvertibleDelay(f"delay must be finite and >= 0, got {self.delay}")
        num, den, delay = _canonical(self.num, self.den, self.delay)
        num.setflags(write=False)
        den.setflags(write=False)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)
        object.__setattr__(self, "delay", delay)

    # -- properties ---------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return _is_zero(self.num)

    @property
    def num_degree(self) -> int:
        return _degree(self.num)

    @property
    def den_degree(self) -> int:
        return _degree(self.den)

    @property
    def relative_degree(self) -> int:
        return self.den_degree - self.num_degree

    @property
    def is_proper(self) -> bool:
        return self.num_degree <= self.den_degree

    def with_delay(self, delay: float) -> "RationalTransferFunction":
        return RationalTransferFunction(self.num, self.den, delay)

    # -- evaluation ---------------------------------------------------------

    def evaluate(self, omega: float) -> complex:
        return evaluate_at_frequency(self, omega)

    def response(self, omegas) -> npt.NDArray[np.complex128]:
        """Vectorized frequency response; NaN where the denominator vanishes."""
        w = np.asarray(omegas, dtype=float)
        s = 1j * w
        d = P.polyval(s, self.den)
        n = P.polyval(s, self.num)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = n / d * np.exp(-s * self.delay)
        return np.where(np.abs(d) < 1e-300, np.nan + 0j, out)

    def dc_gain(self) -> float:
        """Value at s = 0 (rational part); infinite when a pole sits at the origin."""
        d0 = self.den[0]
        if d0 == 0.0:
            return float("inf") if self.num[0] != 0.0 else float("nan")
        return float(self.num[0] / d0)

    def poles(self) -> list[complex]:
        return find_roots(self.den) if self.den_degree >= 1 else []

    def zeros(self) -> list[complex]:
        return find_roots(self.num) if self.num_degree >= 1 else []

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        return rational_arithmetic(self, as_tf(other), "add")

    __radd__ = __add__

    def __sub__(self, other):
        return rational_arithmetic(self, as_tf(other), "sub")

    def __rsub__(self, other):
        return rational_arithmetic(as_tf(other), self, "sub")

    def __mul__(self, other):
        return rational_arithmetic(self, as_tf(other), "mul")

    __rmul__ = __mul__

    def __truediv__(self, other):
        return rational_arithmetic(self, as_tf(other), "div")

    def __rtruediv__(self, other):
        return rational_arithmetic(as_tf(other), self, "div")

    def __neg__(self):
        return RationalTransferFunction(-self.num, self.den, self.delay)

    def inv(self) -> "RationalTransferFunction":
        return rational_arithmetic(self, None, "inv")

    def coefficients_close(self, other: "RationalTransferFunction", rtol: float = 1e-9) -> bool:
        """Coefficient-wise comparison of canonical forms."""
        if self.num.size != other.num.size or self.den.size != other.den.size:
            return False
        if abs(self.delay - other.delay) > 1e-15:
            return False
        for a, b in ((self.num, other.num), (self.den, other.den)):
            scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-300)
            if np.max(np.abs(a - b)) > rtol * scale:
                return False
        return True

    def __repr__(self) -> str:
        num = ", ".join(f"{c:.6g}" for c in self.num)
        den = ", ".join(f"{c:.6g}" for c in self.den)
        tail = f", delay={self.delay:g}" if self.delay else ""
        return f"RationalTransferFunction(num=[{num}], den=[{den}]{tail})"


def tf(num, den=(1.0,), delay: float = 0.0) -> RationalTransferFunction:
    """Shorthand constructor, coefficients in ascending powers of s."""
    return RationalTransferFunction(np.asarray(num, dtype=float), np.asarray(den, dtype=float), delay)


def gain(k: float) -> RationalTransferFunction:
    return tf([k])


def as_tf(value) -> RationalTransferFunction:
    if isinstance(value, RationalTransferFunction):
        return value
    if np.isscalar(value):
        return gain(float(value))
    raise TypeError(f"cannot interpret {type(value).__name__} as a transfer function")


# ---------------------------------------------------------------------------
# arithmetic

ArithmeticOp = Literal["add", "sub", "mul", "div", "inv"]


def _multiply(nums: list[Polynomial], dens: list[Polynomial], delay: float) -> RationalTransferFunction:
    nums = list(nums)
    dens = list(dens)
    for i in range(len(nums)):
        for j in range(len(dens)):
            nums[i], dens[j] = _cancel_pair(nums[i], dens[j])
    num = np.ones(1)
    for p in nums:
        num = P.polymul(num, p)
    den = np.ones(1)
    for q in dens:
        den = P.polymul(den, q)
    return RationalTransferFunction(num, den, delay)


def _add(a: RationalTransferFunction, b: RationalTransferFunction) -> RationalTransferFunction:
    if a.is_zero:
        return b
    if b.is_zero:
        return a
    if abs(a.delay - b.delay) > 1e-15:
        raise DelayMismatch(f"cannot add delays {a.delay} and {b.delay}")
    if _proportional(a.den, b.den):
        return RationalTransferFunction(poly_sum(a.num, b.num), a.den, a.delay)
    quo = _exact_quotient(a.den, b.den)
    if quo is not None:
        return RationalTransferFunction(_cross_sum(a.num, np.ones(1), b.num, quo), a.den, a.delay)
    quo = _exact_quotient(b.den, a.den)
    if quo is not None:
        return RationalTransferFunction(_cross_sum(a.num, quo, b.num, np.ones(1)), b.den, a.delay)
    num = _cross_sum(a.num, b.den, b.num, a.den)
    return RationalTransferFunction(num, P.polymul(a.den, b.den), a.delay)


def rational_arithmetic(
    a: RationalTransferFunction,
    b: RationalTransferFunction | None,
    op: ArithmeticOp,
) -> RationalTransferFunction:
    """
    Exact-coefficient arithmetic on rational transfer functions.

    Raises:
        DelayMismatch: add/sub with unequal delays
        NonInvertibleDelay: inverse of a delayed function, or a division whose
            result would need a negative delay
        ZeroNumerator: inverse of, or division by, the zero function
    """
    if op == "inv":
        if a.is_zero:
            raise ZeroNumerator("cannot invert the zero transfer function")
        if a.delay != 0.0:
            raise NonInvertibleDelay(f"cannot invert a transfer function with delay {a.delay}")
        return RationalTransferFunction(a.den, a.num, 0.0)

    if b is None:
        raise ValueError(f"operation {op!r} needs two operands")

    if op == "add":
        return _add(a, b)
    if op == "sub":
        return _add(a, -b)
    if op == "mul":
        if a.is_zero or b.is_zero:
            return gain(0.0)
        return _multiply([a.num, b.num], [a.den, b.den], a.delay + b.delay)
    if op == "div":
        if b.is_zero:
            raise ZeroNumerator("division by the zero transfer function")
        delay = a.delay - b.delay
        if delay < -1e-15:
            raise NonInvertibleDelay(f"division would produce negative delay {delay}")
        if a.is_zero:
            return gain(0.0)
        return _multiply([a.num, b.den], [a.den, b.num], max(delay, 0.0))
    raise ValueError(f"unknown operation {op!r}")


# ---------------------------------------------------------------------------
# frequency evaluation


def evaluate_at_frequency(g: RationalTransferFunction, omega: float) -> complex:
    """num(jw)/den(jw) * exp(-jw*delay), delay evaluated exactly."""
    s = 1j * float(omega)
    d = complex(P.polyval(s, g.den))
    if abs(d) < 1e-300:
        raise PoleOnAxis(f"pole on the imaginary axis at omega={omega}")
    n = complex(P.polyval(s, g.num))
    return n / d * complex(np.exp(-s * g.delay))


# ---------------------------------------------------------------------------
# roots


def _newton_polygon_guesses(c: Polynomial) -> npt.NDArray[np.complex128]:
    """Initial Aberth guesses on circles whose radii come from the Newton polygon."""
    n = _degree(c)
    pts = [(k, np.log(abs(c[k]))) for k in range(n + 1) if c[k] != 0.0]
    hull: list[tuple[int, float]] = []
    for pt in pts:
        while len(hull) >= 2:
            (ox, oy), (ax, ay) = hull[-2], hull[-1]
            cross = (ax - ox) * (pt[1] - oy) - (ay - oy) * (pt[0] - ox)
            if cross >= 0:
                hull.pop()
            else:
                break
        hull.append(pt)

    guesses = []
    sigma = 0.7
    for seg, ((k0, l0), (k1, l1)) in enumerate(zip(hull[:-1], hull[1:], strict=True)):
        count = k1 - k0
        radius = np.exp((l0 - l1) / count)
        for j in range(count):
            angle = 2.0 * np.pi * j / count + 2.0 * np.pi * seg / n + sigma
            guesses.append(radius * np.exp(1j * angle))

    if len(guesses) != n:
        radius = 1.0 + np.max(np.abs(c[:-1] / c[-1]))
        guesses = [radius * np.exp(1j * (2.0 * np.pi * j / n + sigma)) for j in range(n)]
    return np.asarray(guesses, dtype=complex)


def _pair_conjugates(z: npt.NDArray[np.complex128]) -> list[complex]:
    thr = 1e-7 * np.maximum(1.0, np.abs(z))
    roots = z.copy()
    real = np.abs(roots.imag) <= thr
    roots[real] = roots[real].real
    upper = [i for i in range(roots.size) if not real[i] and roots[i].imag > 0]
    lower = [i for i in range(roots.size) if not real[i] and roots[i].imag < 0]
    for i in upper:
        if not lower:
            roots[i] = roots[i].real
            continue
        j = min(lower, key=lambda k: abs(roots[k] - np.conj(roots[i])))
        lower.remove(j)
        re = 0.5 * (roots[i].real + roots[j].real)
        im = 0.5 * (roots[i].imag - roots[j].imag)
        roots[i] = complex(re, im)
        roots[j] = complex(re, -im)
    for j in lower:
        roots[j] = roots[j].real
    return sorted((complex(r) for r in roots), key=lambda r: (r.real, r.imag))


def find_roots(p) -> list[complex]:
    """
    All complex roots of a real polynomial, with multiplicity.

    Aberth-Ehrlich simultaneous iteration. A root is accepted when its step
    falls below 1e-12 (relative) or its residual reaches rounding level, the
    latter being what multiple roots converge to.

    Raises:
        NoConvergence: iteration cap reached
    """
    c = make_polynomial(p)
    n = _degree(c)
    if n < 1:
        raise ValueError("find_roots needs a polynomial of degree >= 1")

    scale = np.max(np.abs(c))
    k = 0
    while k < n and abs(c[k]) < COEFF_TOL * scale:
        k += 1
    roots: list[complex] = [0j] * k
    c = c[k:]
    m = _degree(c)
    if m == 0:
        return roots
    if m == 1:
        return sorted(roots + [complex(-c[0] / c[1])], key=lambda r: (r.real, r.imag))

    z = _newton_polygon_guesses(c)
    dc = P.polyder(c)
    abs_c = np.abs(c)
    done = np.zeros(m, dtype=bool)
    for _ in range(ABERTH_MAX_ITER):
        pz = P.polyval(z, c)
        dpz = P.polyval(z, dc)
        at_rounding = np.abs(pz) <= 8.0 * _EPS * P.polyval(np.abs(z), abs_c)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dpz != 0, pz / dpz, 0.0)
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, 1.0)
            inv = 1.0 / diff
        np.fill_diagonal(inv, 0.0)
        step = ratio / (1.0 - ratio * inv.sum(axis=1))
        step = np.where(np.isfinite(step), step, 0.0)
        step[done | at_rounding] = 0.0
        z = z - step
        done |= at_rounding | (np.abs(step) <= ABERTH_STEP_TOL * np.maximum(1.0, np.abs(z)))
        if done.all():
            break
    else:
        raise NoConvergence(f"Aberth iteration did not converge in {ABERTH_MAX_ITER} steps (degree {m})")

    return sorted(roots + _pair_conjugates(z), key=lambda r: (r.real, r.imag))


# ---------------------------------------------------------------------------
# stability


class Stability(str, Enum):
    STABLE = "stable"
    MARGINAL = "marginal"
    UNSTABLE = "unstable"


@dataclass(frozen=True)
class StabilityClass:
    verdict: Stability
    worst_pole_real_part: float
    minimum_phase: bool
    poles: list[complex] = field(default_factory=list)
    zeros: list[complex] = field(default_factory=list)


def classify_stability(g: RationalTransferFunction) -> StabilityClass:
    """
    Classify the poles of the rational part (the delay is ignored here).

    stable: every pole strictly left of -EPS_STAB; marginal: a pole within
    EPS_STAB of the axis and none to the right; unstable otherwise.
    """
    poles = g.poles()
    zeros = g.zeros()
    worst = max((r.real for r in poles), default=float("-inf"))
    if worst > EPS_STAB:
        verdict = Stability.UNSTABLE
    elif worst >= -EPS_STAB:
        verdict = Stability.MARGINAL
    else:
        verdict = Stability.STABLE
    minimum_phase = all(r.real <= EPS_STAB for r in zeros)
    return StabilityClass(verdict, worst, minimum_phase, poles, zeros)


# ---------------------------------------------------------------------------
# delay approximation


def pade(delay: float, order: int) -> RationalTransferFunction:
    """Diagonal Pade approximant of exp(-s*delay)."""
    if delay < 0:
        raise NonInvertibleDelay("Pade approximation needs a nonnegative delay")
    if delay == 0.0:
        return gain(1.0)
    n = int(order)
    num = np.empty(n + 1)
    den = np.empty(n + 1)
    for k in range(n + 1):
        c = factorial(2 * n - k) * factorial(n) / (factorial(2 * n) * factorial(k) * factorial(n - k))
        num[k] = c * (-delay) ** k
        den[k] = c * delay**k
    return RationalTransferFunction(num, den, 0.0)


# ---------------------------------------------------------------------------
# discretization


@dataclass(frozen=True, eq=False)
class DiscreteTransferFunction:
    """num_z(z^-1)/den_z(z^-1) * z^-delay_steps, den_z[0] == 1."""

    num_z: Polynomial
    den_z: Polynomial
    sample_period: float
    delay_steps: int = 0

    def evaluate(self, omega: float) -> complex:
        zinv = np.exp(-1j * omega * self.sample_period)
        n = P.polyval(zinv, self.num_z)
        d = P.polyval(zinv, self.den_z)
        return complex(n / d * zinv**self.delay_steps)

    def poles(self) -> list[complex]:
        # den(z^-1) * z^n is a polynomial in z with the coefficients reversed
        if self.den_z.size < 2:
            return []
        return find_roots(self.den_z[::-1])

    def dc_gain(self) -> float:
        return float(np.sum(self.num_z) / np.sum(self.den_z))

    def runner(self) -> "DiscreteFilterState":
        return DiscreteFilterState(self)


def discretize_tustin(
    g: RationalTransferFunction,
    dt: float,
    prewarp_omega: float | None = None,
) -> DiscreteTransferFunction:
    """
    Bilinear substitution s <- c (1 - z^-1)/(1 + z^-1), c = 2/dt.

    With ``prewarp_omega`` the constant becomes w / tan(w dt / 2) so the
    discrete response matches the continuous one exactly at that frequency.

    Raises:
        ImproperTransferFunction: deg(num) > deg(den)
    """
    if dt <= 0:
        raise ValueError("sample period must be positive")
    if not g.is_proper:
        raise ImproperTransferFunction(
            f"cannot discretize improper transfer function (num degree {g.num_degree} > den degree {g.den_degree})"
        )
    c = 2.0 / dt
    if prewarp_omega is not None:
        c = prewarp_omega / np.tan(prewarp_omega * dt / 2.0)

    n = g.den_degree
    b = np.zeros(n + 1)
    b[: g.num.size] = g.num
    minus = np.array([1.0, -1.0])
    plus = np.array([1.0, 1.0])

    num_z = np.zeros(n + 1)
    den_z = np.zeros(n + 1)
    for k in range(n + 1):
        basis = P.polymul(P.polypow(minus, k), P.polypow(plus, n - k)) * c**k
        basis = np.pad(basis, (0, n + 1 - basis.size))
        num_z += b[k] * basis
        den_z += g.den[k] * basis

    lead = den_z[0]
    num_z = num_z / lead
    den_z = den_z / lead
    num_z.setflags(write=False)
    den_z.setflags(write=False)
    return DiscreteTransferFunction(num_z, den_z, float(dt), int(round(g.delay / dt)))


class DiscreteFilterState:
    """
    Mutable runner for a DiscreteTransferFunction (direct form II transposed).

    Single owner; one ``step`` per sample.
    """

    __slots__ = ("_a", "_b", "_line", "_z")

    def __init__(self, dtf: DiscreteTransferFunction):
        self._z: list[float] = []
        self._load(dtf)
        self._line: deque[float] = deque([0.0] * dtf.delay_steps)

    def _load(self, dtf: DiscreteTransferFunction) -> None:
        order = max(dtf.num_z.size, dtf.den_z.size)
        b = np.zeros(order)
        a = np.zeros(order)
        b[: dtf.num_z.size] = dtf.num_z
        a[: dtf.den_z.size] = dtf.den_z
        self._b = [float(x) for x in b]
        self._a = [float(x) for x in a]
        if len(self._z) != order - 1:
            self._z = [0.0] * (order - 1)

    def retune(self, dtf: DiscreteTransferFunction) -> None:
        """Swap coefficients, keeping internal state when the order is unchanged."""
        self._load(dtf)

    def reset(self) -> None:
        self._z = [0.0] * len(self._z)
        self._line = deque([0.0] * len(self._line))

    def step(self, x: float) -> float:
        if self._line:
            self._line.append(x)
            x = self._line.popleft()
        b, a, z = self._b, self._a, self._z
        y = b[0] * x + (z[0] if z else 0.0)
        last = len(z) - 1
        for i in range(last):
            z[i] = b[i + 1] * x - a[i + 1] * y + z[i + 1]
        if z:
            z[last] = b[last + 1] * x - a[last + 1] * y
        return y
