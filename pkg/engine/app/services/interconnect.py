"""
Compliance-pair interconnections and the seven-system exoskeleton chain.

A CompliancePair (C, H) maps the external torque and the motor torque to
the same output position. The four interconnection rules combine a pair
with a physical element (parallel, series) or with a feedback law
(virtual parallel for position feedback, virtual series for torque
feedback). The chain applies them in order:

    S1 motor                     S5 = Parallel(S4, joint inertia)
    S2 + motor position loop     S6 + cuff torque feedback
    S3 + spring torque feedback  S7 = Series(S6, cuff spring)
    S4 = Series(S3, SEA spring)
"""
from dataclasses import dataclass
from typing import Literal

import numpy as np
import numpy.typing as npt

from app.core.config import settings
from app.core.exceptions import NonInvertibleDelay
from app.core.logging import get_logger
from app.schemas.plant import PlantParams
from app.services.tf_core import RationalTransferFunction, gain, pade, tf


logger = get_logger(__name__)

ChainMode = Literal["nominal", "realized"]


@dataclass(frozen=True)
class CompliancePair:
    """(external compliance, motor compliance) sharing one output position."""

    external: RationalTransferFunction
    motor: RationalTransferFunction
    label: str = ""


@dataclass(frozen=True)
class PointwiseCompliance:
    """
    Rational part times exp(-s*delay) where delay may be negative.

    Only evaluated on the imaginary axis; never root-solved.
    """

    rational: RationalTransferFunction
    delay: float

    def evaluate(self, omega: float) -> complex:
        return self.rational.evaluate(omega) * complex(np.exp(-1j * omega * self.delay))

    def response(self, omegas) -> npt.NDArray[np.complex128]:
        w = np.asarray(omegas, dtype=float)
        return self.rational.response(w) * np.exp(-1j * w * self.delay)


@dataclass(frozen=True)
class SystemChain:
    s1: CompliancePair
    s2: CompliancePair
    s3: CompliancePair
    s4: CompliancePair
    s5: CompliancePair
    s6: CompliancePair
    s7: CompliancePair
    s5_hat: CompliancePair
    mode: ChainMode = "nominal"

    @property
    def c4(self) -> RationalTransferFunction:
        return self.s4.external

    @property
    def c5(self) -> RationalTransferFunction:
        return self.s5.external

    @property
    def h5(self) -> RationalTransferFunction:
        return self.s5.motor

    @property
    def c6(self) -> RationalTransferFunction:
        return self.s6.external

    @property
    def c7(self) -> RationalTransferFunction:
        return self.s7.external


def parallel_interconnect(s1: CompliancePair, c2: RationalTransferFunction, label: str = "") -> CompliancePair:
    """
    Attach a compliance in parallel (both deflect together).

    external = [C1^-1 + C2^-1]^-1, motor = external * C1^-1 * H1.

    Raises:
        ZeroNumerator: C1 or C2 identically zero
    """
    inv_c1 = s1.external.inv()
    external = (inv_c1 + c2.inv()).inv()
    motor = external * inv_c1 * s1.motor
    return CompliancePair(external, motor, label)


def series_interconnect(s1: CompliancePair, c2: RationalTransferFunction, label: str = "") -> CompliancePair:
    """
    Attach a compliance in series (torques equal, deflections add).

    Raises:
        DelayMismatch: C1 and C2 carry different delays
    """
    return CompliancePair(s1.external + c2, s1.motor, label)


def virtual_parallel(
    s1: CompliancePair,
    g: RationalTransferFunction,
    analysis_only: bool = False,
) -> RationalTransferFunction | PointwiseCompliance:
    """
    Equivalent parallel compliance of position feedback tau_m = G * theta.

    Returns C' = -C1 / (H1 G). When H1 carries a delay the result needs a
    negative delay; with ``analysis_only`` a PointwiseCompliance is returned
    instead of raising.

    Raises:
        ZeroNumerator: H1 * G identically zero
        NonInvertibleDelay: H1 delayed and analysis_only is False

    Examples:
        >>> c = tf([1.0], [0.0, 0.0, 1.0])
        >>> virtual_parallel(CompliancePair(c, c), gain(-25.0)).dc_gain()
        0.04
    """
    loop = s1.motor * g
    try:
        return -(s1.external / loop)
    except NonInvertibleDelay:
        if not analysis_only:
            raise
        rational = -(s1.external / loop.with_delay(0.0))
        return PointwiseCompliance(rational, -loop.delay)


def virtual_series(s1: CompliancePair, g: RationalTransferFunction) -> RationalTransferFunction:
    """Equivalent series compliance of torque feedback tau_m = G * tau_ext: C' = G * H1."""
    return g * s1.motor


def motor_compliance(J: float, B: float) -> RationalTransferFunction:
    """1 / (J s^2 + B s)."""
    return tf([1.0], [0.0, B, J])


def build_system_chain(
    p: PlantParams,
    g_theta: RationalTransferFunction,
    g_s: RationalTransferFunction,
    g_c: RationalTransferFunction,
    virtual_motor: tuple[float, float],
    mode: ChainMode = "nominal",
    dt_ctrl: float = 0.0,
    pade_order: int | None = None,
) -> SystemChain:
    """
    Build S1..S7 and the virtual target S5_hat.

    Args:
        p: plant parameters
        g_theta: motor position feedback (tau_m per theta_m)
        g_s: spring torque feedback (tau_m per tau_s)
        g_c: cuff torque feedback including G_v (tau_m per tau_c)
        virtual_motor: (J_hat, B_hat)
        mode: "nominal" drops the control delay; "realized" approximates
            exp(-s (T + dt_ctrl/2)) by a Pade approximant inside H1 so the
            delay can sit inside the feedback loops
        dt_ctrl: controller period (realized mode, zero-order-hold half sample)
        pade_order: defaults to settings.pade_order

    Returns:
        SystemChain
    """
    c1 = motor_compliance(p.J_m, p.B_m)
    if mode == "realized":
        order = settings.pade_order if pade_order is None else pade_order
        h1 = c1 * pade(p.T + dt_ctrl / 2.0, order)
    else:
        h1 = c1
    s1 = CompliancePair(c1, h1, "S1")

    if g_theta.is_zero:
        s2 = CompliancePair(s1.external, s1.motor, "S2")
    else:
        s2 = parallel_interconnect(s1, virtual_parallel(s1, g_theta), "S2")

    s3 = series_interconnect(s2, virtual_series(s2, g_s), "S3")
    s4 = series_interconnect(s3, gain(1.0 / p.K_s), "S4")
    s5 = parallel_interconnect(s4, tf([1.0], [0.0, 0.0, p.J_j]), "S5")
    s6 = series_interconnect(s5, virtual_series(s5, g_c), "S6")
    s7 = series_interconnect(s6, gain(1.0 / p.K_c), "S7")

    j_hat, b_hat = virtual_motor
    c5_hat = motor_compliance(j_hat, b_hat)
    s5_hat = CompliancePair(c5_hat, c5_hat, "S5_hat")

    logger.debug(
        "interconnect.chain_built",
        mode=mode,
        c5_degree=(s5.external.num_degree, s5.external.den_degree),
        c7_degree=(s7.external.num_degree, s7.external.den_degree),
    )
    return SystemChain(s1, s2, s3, s4, s5, s6, s7, s5_hat, mode)
