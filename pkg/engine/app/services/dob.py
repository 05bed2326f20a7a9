"""
Transmission disturbance observer.

The observer inverts the autonomous motor model

    J_m theta_m'' + B_m theta_m' = tau_s + tau_m + delta_f

through the Q filter, so the estimate is

    delta_hat = Q (J_m s^2 + B_m s) theta_m - Q (tau_s + tau_m)

Both blocks are proper and are realized as Tustin filters; theta_m is never
differentiated sample by sample.
"""
import math
from dataclasses import dataclass

from scipy.optimize import brentq

from app.core.config import settings
from app.core.exceptions import ImproperTransferFunction, NoCrossover
from app.core.logging import get_logger
from app.schemas.dob import QFilter
from app.services.analysis import phase_margin
from app.services.tf_core import (
    DiscreteFilterState,
    RationalTransferFunction,
    discretize_tustin,
    gain,
    pade,
    tf,
)


logger = get_logger(__name__)


def q_transfer_function(q: QFilter) -> RationalTransferFunction:
    w = q.omega_q
    return tf([w * w], [w * w, 2.0 * q.zeta_q * w, 1.0])


def dob_loop_gain(q: QFilter, T: float) -> RationalTransferFunction:
    """
    Net feedback gain Q/(1-Q) of the observer loop, with delay T attached.

    For the second-order Q this simplifies to wq^2 / (s (s + 2 zq wq)).
    """
    qs = q_transfer_function(q)
    return (qs / (gain(1.0) - qs)).with_delay(T)


def closed_loop_q(q: QFilter, T: float, pade_order: int | None = None) -> RationalTransferFunction:
    """
    Disturbance-to-estimate response Q / (1 - Q + Q e^{-sT}) of the loop that
    feeds back the undelayed command. The delay is Pade-approximated.
    """
    order = settings.pade_order if pade_order is None else pade_order
    qs = q_transfer_function(q)
    delayed = qs * pade(T, order)
    return qs / (gain(1.0) - qs + delayed)


@dataclass(frozen=True)
class DobMargin:
    phase_margin_deg: float
    crossover_omega: float
    critical_omega_q: float


def _margin_for(omega_q: float, zeta_q: float, T: float) -> float:
    pm, _ = phase_margin(dob_loop_gain(QFilter(omega_q=omega_q, zeta_q=zeta_q), T))
    if pm is None:
        raise NoCrossover(f"DOB loop gain never crosses unity for omega_q={omega_q}")
    return pm


def dob_stability_margin(q: QFilter, T: float) -> DobMargin:
    """
    Phase margin of the delayed observer loop and the cutoff where it reaches zero.

    The critical cutoff is found by bracketing and bisection over omega_q at
    fixed zeta_q; the margin is checked to decrease across the bracket.

    Raises:
        NoCrossover: the loop gain never reaches unity
    """
    pm, wc = phase_margin(dob_loop_gain(q, T))
    if pm is None or wc is None:
        raise NoCrossover("DOB loop gain never crosses unity")

    if T <= 0:
        return DobMargin(pm, wc, math.inf)

    lo = q.omega_q
    while _margin_for(lo, q.zeta_q, T) <= 0:
        lo /= 2.0
    hi = 2.0 * lo
    while _margin_for(hi, q.zeta_q, T) > 0:
        hi *= 2.0

    samples = [_margin_for(w, q.zeta_q, T) for w in (lo, 0.5 * (lo + hi), hi)]
    if not (samples[0] > samples[1] > samples[2]):
        raise NoCrossover(f"DOB margin is not monotone over [{lo:g}, {hi:g}] rad/s")

    critical = brentq(lambda w: _margin_for(w, q.zeta_q, T), lo, hi, xtol=1e-9 * hi)
    logger.debug("dob.critical_cutoff", T=T, zeta_q=q.zeta_q, critical_omega_q=critical)
    return DobMargin(pm, wc, float(critical))


class DobState:
    """
    Runtime observer. Single owner; call ``update`` once per control period.

    ``tau_m_applied`` is the torque the plant was driven with over the period
    that ends at the current sample. The sampled theta_m and tau_s are
    averaged with their previous samples so all three inputs describe the
    same interval; a held motor torque acting on the motor inertia then
    leaves the estimate exactly at zero.

    Args:
        J_m, B_m: nominal motor model
        q: Q filter
        dt: control period
        saturation: bound on |delta_hat|
    """

    def __init__(self, J_m: float, B_m: float, q: QFilter, dt: float, saturation: float):
        qs = q_transfer_function(q)
        if qs.relative_degree < 2:
            raise ImproperTransferFunction("Q needs relative degree >= 2 to invert the motor model")
        self.q = q
        self.dt = dt
        self.saturation = saturation
        self.delta_hat = 0.0
        self._qs = qs
        self._theta_prev = 0.0
        self._tau_s_prev = 0.0
        self._inverse_filter = DiscreteFilterState(self._inverse_model(J_m, B_m))
        self._torque_filter = DiscreteFilterState(discretize_tustin(qs, dt))

    def _inverse_model(self, J_m: float, B_m: float):
        return discretize_tustin(self._qs * tf([0.0, B_m, J_m]), self.dt)

    def retune(self, J_m: float, B_m: float) -> None:
        """Swap in a rescheduled motor model without resetting filter state."""
        self._inverse_filter.retune(self._inverse_model(J_m, B_m))

    def reset(self) -> None:
        self._inverse_filter.reset()
        self._torque_filter.reset()
        self._theta_prev = 0.0
        self._tau_s_prev = 0.0
        self.delta_hat = 0.0

    def update(self, theta_m: float, tau_s: float, tau_m_applied: float, freeze: bool = False) -> float:
        theta_mid = 0.5 * (theta_m + self._theta_prev)
        tau_s_mid = 0.5 * (tau_s + self._tau_s_prev)
        self._theta_prev = theta_m
        self._tau_s_prev = tau_s
        raw = self._inverse_filter.step(theta_mid) - self._torque_filter.step(tau_s_mid + tau_m_applied)
        if not freeze:
            self.delta_hat = min(max(raw, -self.saturation), self.saturation)
        return self.delta_hat


def dob_update(
    state: DobState,
    theta_m: float,
    tau_s: float,
    tau_m_applied: float,
    dt: float,
) -> tuple[DobState, float]:
    """One observer sample; ``dt`` must equal the period the filters were built for."""
    if abs(dt - state.dt) > 1e-12 * state.dt:
        raise ValueError(f"observer built for dt={state.dt}, called with dt={dt}")
    delta_hat = state.update(theta_m, tau_s, tau_m_applied)
    return state, delta_hat
