"""
Frequency-domain verdicts.

Compliances are evaluated on the imaginary axis with exact delay phase.
Passivity of a compliance is checked as Im C(jw) <= 0, which is the phase
band [-180, 0] degrees without any branch ambiguity. Coupled stability with
a human impedance uses the characteristic function

    chi(s) = D(s) + P_h(s) N(s) e^{-sT},   C7 = N/D e^{-sT},
    P_h(s) = J_h s^2 + B_h s + K_h

whose right-half-plane zeros are counted either by root finding (rational
C7) or by the argument principle along the imaginary axis (delayed C7).
Zeros at the origin shared by D and P_h N are the free rigid-body mode of
the coupled pair and are excluded from the verdict.
"""
import math
from typing import Literal, Protocol

import numpy as np
import numpy.typing as npt
import pandas as pd
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq

from app.core.config import settings
from app.core.exceptions import ConfigValidationError
from app.core.logging import get_logger
from app.schemas.analysis import PassivityViolation, StabilityReport
from app.schemas.sim import HumanModel
from app.services.interconnect import PointwiseCompliance, SystemChain
from app.services.tf_core import (
    EPS_STAB,
    RationalTransferFunction,
    find_roots,
    make_polynomial,
    pade,
)


logger = get_logger(__name__)

BODE_COLUMNS = ["freq_hz", "mag_db", "phase_deg"]
PASSIVITY_TOL = 1e-9

CoupledMethod = Literal["auto", "roots", "nyquist", "pade"]


class FrequencyResponse(Protocol):
    def response(self, omegas) -> npt.NDArray[np.complex128]: ...


def log_grid(omega_min: float, omega_max: float, points_per_decade: int) -> npt.NDArray[np.float64]:
    decades = math.log10(omega_max / omega_min)
    n = max(2, int(math.ceil(decades * points_per_decade)) + 1)
    return np.logspace(math.log10(omega_min), math.log10(omega_max), n)


def _unwrap_deg(phase_rad: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    out = np.full(phase_rad.shape, np.nan)
    ok = np.isfinite(phase_rad)
    out[ok] = np.degrees(np.unwrap(phase_rad[ok]))
    return out


def bode_table(g: FrequencyResponse, fmin_hz: float, fmax_hz: float, points: int) -> pd.DataFrame:
    """
    Log-spaced Bode table with columns freq_hz, mag_db, phase_deg.

    The delay phase is added after unwrapping the rational part. Rows on a
    pole carry NaN and are skipped by the unwrap.
    """
    if not (0 < fmin_hz < fmax_hz):
        raise ConfigValidationError("bode range needs 0 < fmin < fmax")
    if points < 2:
        raise ConfigValidationError("bode table needs at least 2 points")

    freqs = np.logspace(math.log10(fmin_hz), math.log10(fmax_hz), points)
    omegas = 2.0 * math.pi * freqs
    if isinstance(g, RationalTransferFunction):
        base, delay = g.with_delay(0.0), g.delay
    elif isinstance(g, PointwiseCompliance):
        base, delay = g.rational, g.delay
    else:
        base, delay = g, 0.0
    resp = base.response(omegas)

    with np.errstate(divide="ignore"):
        mag_db = 20.0 * np.log10(np.abs(resp))
    phase = _unwrap_deg(np.angle(resp)) - np.degrees(omegas * delay)
    return pd.DataFrame({"freq_hz": freqs, "mag_db": mag_db, "phase_deg": phase}, columns=BODE_COLUMNS)


def passivity_phase_check(g: FrequencyResponse, grid=None) -> list[PassivityViolation]:
    """
    Intervals where a compliance leaves the passive phase band [-180, 0] degrees.

    Args:
        g: compliance (position per torque)
        grid: angular frequencies; defaults to 1e-2..1e4 rad/s

    Returns:
        One PassivityViolation per contiguous run of offending grid points;
        an empty list means passive on the grid.
    """
    if grid is None:
        grid = log_grid(1e-2, 1e4, settings.passivity_points_per_decade)
    omegas = np.asarray(grid, dtype=float)
    resp = g.response(omegas)
    bad = np.isfinite(resp) & (resp.imag > PASSIVITY_TOL * np.abs(resp))

    violations: list[PassivityViolation] = []
    i = 0
    while i < omegas.size:
        if not bad[i]:
            i += 1
            continue
        j = i
        while j + 1 < omegas.size and bad[j + 1]:
            j += 1
        # principal phase in (0, 180); a dip below -180 shows up near +180
        phases = np.degrees(np.angle(resp[i : j + 1]))
        worst = float(phases[np.argmax(resp[i : j + 1].imag / np.abs(resp[i : j + 1]))])
        violations.append(
            PassivityViolation(omega_start=float(omegas[i]), omega_end=float(omegas[j]), worst_phase_deg=worst)
        )
        i = j + 1
    return violations


def amplification_ratio(chain: SystemChain) -> RationalTransferFunction:
    """C6 / C5, the torque amplification of the operator."""
    return chain.c6 / chain.c5


def dc_gain(g: RationalTransferFunction) -> float:
    """Static gain; falls back to |g(j 1e-3)| when g has a pole at the origin."""
    value = g.dc_gain()
    if math.isfinite(value):
        return value
    return float(abs(g.evaluate(1e-3)))


def _crossings(values: npt.NDArray[np.float64]) -> npt.NDArray[np.intp]:
    ok = np.isfinite(values[:-1]) & np.isfinite(values[1:])
    return np.nonzero(ok & (np.sign(values[:-1]) != np.sign(values[1:])))[0]


def _at(loop: FrequencyResponse, w: float) -> complex:
    return complex(loop.response(np.array([w]))[0])


def _gain_crossovers(loop: FrequencyResponse, omegas: npt.NDArray[np.float64]) -> list[tuple[float, float]]:
    """(crossover frequency, phase margin) for every unity-gain crossing."""
    with np.errstate(divide="ignore"):
        lm = np.log(np.abs(loop.response(omegas)))
    out = []
    for i in _crossings(lm):
        wc = brentq(lambda w: math.log(abs(_at(loop, w))), omegas[i], omegas[i + 1], xtol=1e-12 * omegas[i + 1])
        ang = math.degrees(np.angle(_at(loop, wc)))
        out.append((float(wc), (ang + 360.0) % 360.0 - 180.0))
    return out


def loop_margins(loop: FrequencyResponse, grid=None) -> tuple[list[float], float | None, float | None]:
    """
    Gain crossovers, worst phase margin and worst gain margin of a loop gain.

    Returns:
        (crossover_freqs, phase_margin_deg, gain_margin_db); margins are None
        when the corresponding crossover does not exist.
    """
    if grid is None:
        grid = log_grid(settings.nyquist_omega_min, settings.nyquist_omega_max, settings.nyquist_points_per_decade)
    omegas = np.asarray(grid, dtype=float)
    crossings = _gain_crossovers(loop, omegas)

    resp = loop.response(omegas)
    gains = []
    for i in _crossings(resp.imag):
        if resp.real[i] >= 0 and resp.real[i + 1] >= 0:
            continue
        w180 = brentq(lambda w: _at(loop, w).imag, omegas[i], omegas[i + 1], xtol=1e-12 * omegas[i + 1])
        value = _at(loop, w180)
        if value.real < 0:
            gains.append(-20.0 * math.log10(abs(value)))

    pm = min(m for _, m in crossings) if crossings else None
    gm = min(gains) if gains else None
    return [w for w, _ in crossings], pm, gm


def phase_margin(loop: FrequencyResponse, grid=None) -> tuple[float | None, float | None]:
    """(phase margin in degrees, crossover frequency) of the lowest-margin crossover."""
    if grid is None:
        grid = log_grid(settings.nyquist_omega_min, settings.nyquist_omega_max, settings.nyquist_points_per_decade)
    crossings = _gain_crossovers(loop, np.asarray(grid, dtype=float))
    if not crossings:
        return None, None
    wc, pm = min(crossings, key=lambda c: c[1])
    return pm, wc


def human_polynomial(human: HumanModel | None) -> npt.NDArray[np.float64]:
    """P_h(s) = J_h s^2 + B_h s + K_h for the fields the human kind uses."""
    if human is None or human.kind == "none":
        return np.zeros(1)
    if human.kind == "spring":
        return make_polynomial([human.K_h])
    if human.kind == "inertia":
        return make_polynomial([0.0, 0.0, human.J_h])
    if human.kind == "spring-damper":
        return make_polynomial([human.K_h, human.B_h])
    raise ConfigValidationError(f"human kind {human.kind!r} has no impedance for coupled stability")


def _negligible_constant(p: npt.NDArray[np.float64]) -> bool:
    scale = np.max(np.abs(p))
    return scale == 0.0 or abs(p[0]) <= 1e-12 * scale


def _strip_origin(d: npt.NDArray[np.float64], m: npt.NDArray[np.float64]) -> tuple[np.ndarray, np.ndarray, int]:
    """Remove zeros at s = 0 common to D and M (rigid-body mode)."""
    k = 0
    while d.size > 1 and _negligible_constant(d) and _negligible_constant(m):
        d = d[1:]
        if m.size > 1:
            m = m[1:]
        k += 1
    return d, m, k


def _count_rhp_roots(d: np.ndarray, m: np.ndarray) -> tuple[int, float]:
    chi = make_polynomial(P.polyadd(d, m))
    if chi.size < 2:
        return 0, float("-inf")
    roots = find_roots(chi)
    worst = max(r.real for r in roots)
    return sum(1 for r in roots if r.real > EPS_STAB), worst


def _count_argument_principle(d: np.ndarray, m: np.ndarray, delay: float, omegas: np.ndarray) -> float:
    """
    RHP zero count n_R = (n - 2 dArg / pi) / 2 from the phase change of chi
    along w in [0, inf). The stretch beyond the grid is closed analytically
    with the phase of the leading term.
    """
    if delay == 0.0:
        chi = make_polynomial(P.polyadd(d, m))
        n, lead = chi.size - 1, chi[-1]

        def evaluate(s):
            return P.polyval(s, chi)
    else:
        n, lead = d.size - 1, d[-1]

        def evaluate(s):
            return P.polyval(s, d) + P.polyval(s, m) * np.exp(-s * delay)

    w = omegas if abs(evaluate(0j)) == 0.0 else np.concatenate(([0.0], omegas))
    phase = np.unwrap(np.angle(evaluate(1j * w)))
    asymptote = n * math.pi / 2.0 + (0.0 if lead > 0 else math.pi)
    tail = (asymptote - phase[-1] + math.pi) % (2.0 * math.pi) - math.pi
    total = phase[-1] + tail - phase[0]
    return (n - 2.0 * total / math.pi) / 2.0


def coupled_stability_margin(
    c7_realized: RationalTransferFunction,
    human: HumanModel | None,
    method: CoupledMethod = "auto",
    grid=None,
) -> StabilityReport:
    """
    Stability of the exoskeleton compliance C7 terminated by a human impedance.

    Args:
        c7_realized: exoskeleton compliance at the cuff (may carry a delay)
        human: operator model; None or kind "none" leaves the cuff free
        method: "roots" root-solves the characteristic polynomial (delay-free
            C7 only), "nyquist" counts by the argument principle with exact
            delay, "pade" replaces the delay by a third-order Pade
            approximant, "auto" picks roots without delay and nyquist with
        grid: angular frequencies for the argument principle and margins

    Returns:
        StabilityReport
    """
    warnings: list[str] = []
    ph = human_polynomial(human)
    delay = c7_realized.delay
    if method == "auto":
        method = "nyquist" if delay > 0 else "roots"
    if method == "roots" and delay > 0:
        raise ConfigValidationError("roots method needs a delay-free compliance")

    num, den = np.asarray(c7_realized.num), np.asarray(c7_realized.den)
    if method == "pade":
        approx = c7_realized.with_delay(0.0) * pade(delay, 3)
        num, den, delay = np.asarray(approx.num), np.asarray(approx.den), 0.0

    d, m, n0 = _strip_origin(make_polynomial(den), make_polynomial(P.polymul(ph, num)))

    if grid is None:
        grid = log_grid(settings.nyquist_omega_min, settings.nyquist_omega_max, settings.nyquist_points_per_decade)
    omegas = np.asarray(grid, dtype=float)

    if method == "nyquist":
        advanced = delay > 0 and (m.size > d.size or (m.size == d.size and abs(m[-1]) >= abs(d[-1])))
        if advanced:
            warnings.append("delayed term dominates D at high frequency: infinitely many unstable zeros")
            rhp = 1
        else:
            count = _count_argument_principle(d, m, delay, omegas)
            dense = np.logspace(math.log10(omegas[0]), math.log10(omegas[-1]), 2 * omegas.size - 1)
            recount = _count_argument_principle(d, m, delay, dense)
            if abs(count - round(count)) > 0.1 or round(count) != round(recount):
                warnings.append(f"grid resolution: RHP count {count:.3f} vs {recount:.3f} on doubled grid")
                logger.warning("analysis.grid_resolution", count=count, recount=recount)
            rhp = max(int(round(max(count, recount))), 0)
        verdict = "unstable" if rhp > 0 else "stable"
    else:
        rhp, worst = _count_rhp_roots(d, m)
        if rhp > 0:
            verdict = "unstable"
        elif worst >= -EPS_STAB:
            verdict = "marginal"
        else:
            verdict = "stable"

    if ph.size == 1 and ph[0] == 0.0:
        crossovers, pm, gm = [], None, None
    else:
        loop = RationalTransferFunction(ph, np.ones(1)) * c7_realized
        crossovers, pm, gm = loop_margins(loop, omegas)

    report = StabilityReport(
        verdict=verdict,
        rhp_zeros=rhp,
        crossover_freqs=crossovers,
        phase_margin_deg=pm,
        gain_margin_db=gm,
        margins_negative=(pm is not None and pm < 0) or (gm is not None and gm < 0),
        passivity_violations=passivity_phase_check(c7_realized),
        warnings=warnings,
    )
    logger.debug(
        "analysis.coupled_stability",
        kind=None if human is None else human.kind,
        method=method,
        verdict=verdict,
        rigid_body_zeros=n0,
        phase_margin_deg=pm,
    )
    return report


def _is_unstable(c7: RationalTransferFunction, human: HumanModel, method: CoupledMethod) -> bool:
    return coupled_stability_margin(c7, human, method=method).verdict == "unstable"


def critical_spring_stiffness(
    c7: RationalTransferFunction,
    k_min: float = 1.0,
    k_max: float = 1e8,
    method: CoupledMethod = "auto",
    rtol: float = 1e-3,
) -> float | None:
    """Smallest destabilizing spring-human stiffness in [k_min, k_max], or None."""

    def unstable(k: float) -> bool:
        return _is_unstable(c7, HumanModel(kind="spring", K_h=k), method)

    return _first_transition(unstable, k_min, k_max, rtol, increasing=True)


def critical_inertia(
    c7: RationalTransferFunction,
    j_min: float = 1e-5,
    j_max: float = 10.0,
    method: CoupledMethod = "auto",
    rtol: float = 1e-3,
) -> float | None:
    """Largest destabilizing pure-inertia human in [j_min, j_max], or None."""

    def unstable(j: float) -> bool:
        return _is_unstable(c7, HumanModel(kind="inertia", J_h=j), method)

    return _first_transition(unstable, j_min, j_max, rtol, increasing=False)


def _first_transition(unstable, lo: float, hi: float, rtol: float, increasing: bool) -> float | None:
    """
    Scan a log grid from one end and bisect the first stable/unstable boundary.

    increasing=True scans upward from lo; otherwise downward from hi.
    """
    grid = np.logspace(math.log10(lo), math.log10(hi), 41)
    if not increasing:
        grid = grid[::-1]
    previous = float(grid[0])
    if unstable(previous):
        return previous
    for value in grid[1:]:
        if unstable(float(value)):
            a, b = previous, float(value)
            while abs(b - a) > rtol * max(abs(a), abs(b)):
                mid = math.sqrt(a * b)
                if unstable(mid):
                    b = mid
                else:
                    a = mid
            return b
        previous = float(value)
    return None


def amplification_bandwidth(ratio: FrequencyResponse, alpha: float, grid=None, band: float = 0.1) -> float | None:
    """First frequency where |C6/C5| leaves alpha * (1 +/- band), or None."""
    if grid is None:
        grid = log_grid(1e-2, 1e4, settings.passivity_points_per_decade)
    omegas = np.asarray(grid, dtype=float)

    def excess(w) -> npt.NDArray[np.float64]:
        return np.abs(np.abs(ratio.response(np.atleast_1d(w))) - alpha) - band * alpha

    values = excess(omegas)
    outside = np.nonzero(values > 0)[0]
    if outside.size == 0:
        return None
    i = outside[0]
    if i == 0:
        return float(omegas[0])
    return float(brentq(lambda w: float(excess(w)[0]), omegas[i - 1], omegas[i]))
