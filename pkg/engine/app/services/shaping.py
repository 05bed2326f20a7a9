"""
Double compliance shaping: desired compliance shapes to controller gains.

The inner loop shapes the SEA + joint into a virtual motor 1/(J_hat s^2 + B_hat s);
the outer loop treats that virtual motor plus the cuff spring as a second
SEA (the meta-SEA) and amplifies the operator torque by alpha through cuff
torque feedback. G_v maps motor torque onto the virtual motor.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from app.core.exceptions import DegenerateShape
from app.core.logging import get_logger
from app.schemas.config import JacobianPoint
from app.schemas.design import ComplianceShape, DesignSpec, MetaGains, SeaGains
from app.schemas.plant import PlantParams
from app.services.interconnect import ChainMode, SystemChain, build_system_chain
from app.services.tf_core import RationalTransferFunction, gain, tf


logger = get_logger(__name__)

# Guidance threshold for J_hat relative to the joint inertia
VIRTUAL_INERTIA_RATIO = 10.0


def nominal_c4(shape: ComplianceShape, K_s: float) -> RationalTransferFunction:
    """(s^2 + Btilde2 s + Ktilde2) / (K_s (s^2 + Btilde1 s + Ktilde1))."""
    return tf(
        [shape.Ktilde2, shape.Btilde2, 1.0],
        [K_s * shape.Ktilde1, K_s * shape.Btilde1, K_s],
    )


def total_compliance_c5(shape: ComplianceShape, p: PlantParams) -> RationalTransferFunction:
    """Shaped C4 in parallel with the joint inertia: N / (K_s D + J_j s^2 N)."""
    n = np.array([shape.Ktilde2, shape.Btilde2, 1.0])
    d = np.array([shape.Ktilde1, shape.Btilde1, 1.0]) * p.K_s
    den = np.zeros(5)
    den[:3] += d
    den[2:] += p.J_j * n
    return tf(n, den)


def extract_sea_gains(shape: ComplianceShape, p: PlantParams) -> SeaGains:
    """
    Gains that make the inner SEA loop realize a biquadratic compliance shape.

    Deflection form:
        K1 = J_m Ktilde1            B1 = J_m Btilde1 - B_m
        K2 = J_m (Ktilde2 - Ktilde1) - K_s
        B2 = J_m (Btilde2 - Btilde1)
    Torque form divides the spring gains by K_s.

    Negative damping gains are returned with a warning.

    Examples:
        >>> plant = PlantParams(J_m=1, B_m=6, K_s=500, J_j=0.15, K_c=300)
        >>> shape = ComplianceShape(Ktilde1=0, Btilde1=10, Ktilde2=250, Btilde2=31.6228)
        >>> extract_sea_gains(shape, plant).K2_tau
        -0.5
    """
    K1 = p.J_m * shape.Ktilde1
    B1 = p.J_m * shape.Btilde1 - p.B_m
    K2_theta = p.J_m * (shape.Ktilde2 - shape.Ktilde1) - p.K_s
    B2_theta = p.J_m * (shape.Btilde2 - shape.Btilde1)

    warnings = []
    if B1 < 0:
        warnings.append(f"negative motor damping gain B1={B1:.6g} (B_m exceeds J_m*Btilde1)")
    if B2_theta < 0:
        warnings.append(f"negative spring damping gain B2={B2_theta:.6g}")
    for message in warnings:
        logger.warning("shaping.negative_gain", detail=message)

    return SeaGains(
        K1=K1,
        B1=B1,
        K2_theta=K2_theta,
        B2_theta=B2_theta,
        K2_tau=K2_theta / p.K_s,
        B2_tau=B2_theta / p.K_s,
        warnings=warnings,
    )


def virtual_motor_shape(spec: DesignSpec, p: PlantParams) -> ComplianceShape:
    """C4 shape whose parallel combination with the joint approximates the virtual motor."""
    k2 = p.K_s / spec.J_hat
    return ComplianceShape(
        Ktilde1=0.0,
        Btilde1=spec.B_hat / spec.J_hat,
        Ktilde2=k2,
        Btilde2=2.0 * spec.zeta * math.sqrt(k2),
    )


def design_meta_gains(spec: DesignSpec, p: PlantParams) -> MetaGains:
    """K2_hat = alpha - 1, B2_hat = (2 zeta_hat sqrt(K_c J_hat alpha) - B_hat) / K_c."""
    k2_hat = spec.alpha - 1.0
    b2_hat = (2.0 * spec.zeta_hat * math.sqrt(p.K_c * spec.J_hat * spec.alpha) - spec.B_hat) / p.K_c
    warnings = []
    if b2_hat < 0:
        warnings.append(f"negative cuff damping gain B2_hat={b2_hat:.6g} (virtual motor underdamped against cuff)")
        logger.warning("shaping.negative_gain", detail=warnings[-1])
    return MetaGains(K2_hat=k2_hat, B2_hat=b2_hat, warnings=warnings)


def second_order_lowpass(omega: float, zeta: float) -> RationalTransferFunction:
    return tf([omega * omega], [omega * omega, 2.0 * zeta * omega, 1.0])


def derivative_filter(omega_d: float) -> RationalTransferFunction:
    """First-order low-pass applied to every realized derivative term."""
    return tf([omega_d], [omega_d, 1.0])


def build_gv(
    spec: DesignSpec,
    p: PlantParams,
    shape: ComplianceShape,
) -> tuple[RationalTransferFunction, RationalTransferFunction]:
    """
    Virtual-motor compensator G_v, nominal and causal.

        G_v = (J_m/J_hat) [1 + (J_j/K_s) s (s^2 + Btilde2 s + Ktilde2)/(s + Btilde1)]

    The causal form low-passes only the improper second term.

    Raises:
        DegenerateShape: Ktilde1 != 0
    """
    if shape.Ktilde1 != 0.0:
        raise DegenerateShape(f"G_v realization needs Ktilde1 = 0, got {shape.Ktilde1}")

    static = gain(p.J_m / spec.J_hat)
    k = p.J_m / spec.J_hat * p.J_j / p.K_s
    dynamic = tf([0.0, k * shape.Ktilde2, k * shape.Btilde2, k], [shape.Btilde1, 1.0])

    gv_nominal = static + dynamic
    gv_causal = static + dynamic * second_order_lowpass(spec.filter_omega, spec.filter_zeta)
    return gv_nominal, gv_causal


def nominal_c7(spec: DesignSpec, p: PlantParams) -> RationalTransferFunction:
    """(s^2 + 2 zeta_hat w s + w^2) / (K_c (s^2 + B_hat/J_hat s)), w^2 = alpha K_c / J_hat."""
    w2 = spec.alpha * p.K_c / spec.J_hat
    return tf(
        [w2, 2.0 * spec.zeta_hat * math.sqrt(w2), 1.0],
        [0.0, p.K_c * spec.B_hat / spec.J_hat, p.K_c],
    )


@dataclass(frozen=True)
class ControllerBundle:
    """Everything the simulator and the analyses need from one design."""

    spec: DesignSpec
    plant: PlantParams
    sea: SeaGains
    meta: MetaGains
    gv_nominal: RationalTransferFunction
    gv_causal: RationalTransferFunction
    shape_c4: ComplianceShape
    nominal_c7: RationalTransferFunction
    warnings: list[str] = field(default_factory=list)

    def feedbacks(
        self,
        mode: ChainMode = "nominal",
        derivative_cutoff_hz: float = 200.0,
    ) -> tuple[RationalTransferFunction, RationalTransferFunction, RationalTransferFunction]:
        """
        (G_theta, G_s, G_c) for chain construction.

        Nominal mode uses pure derivatives and G_v nominal; realized mode
        filters every derivative and uses G_v causal.
        """
        s = tf([0.0, 1.0])
        if mode == "realized":
            s = s * derivative_filter(2.0 * math.pi * derivative_cutoff_hz)
            gv = self.gv_causal
        else:
            gv = self.gv_nominal
        sea, meta = self.sea, self.meta
        g_theta = -(sea.K1 + sea.B1 * s)
        g_s = sea.K2_tau + sea.B2_tau * s
        g_c = gv * (meta.K2_hat + meta.B2_hat * s)
        return g_theta, g_s, g_c

    def chain(
        self,
        mode: ChainMode = "nominal",
        dt_ctrl: float = 0.0,
        derivative_cutoff_hz: float = 200.0,
        pade_order: int | None = None,
    ) -> SystemChain:
        g_theta, g_s, g_c = self.feedbacks(mode, derivative_cutoff_hz)
        return build_system_chain(
            self.plant,
            g_theta,
            g_s,
            g_c,
            (self.spec.J_hat, self.spec.B_hat),
            mode=mode,
            dt_ctrl=dt_ctrl,
            pade_order=pade_order,
        )


def virtual_inertia_warning(spec: DesignSpec, p: PlantParams) -> str | None:
    if spec.J_hat >= VIRTUAL_INERTIA_RATIO * p.J_j:
        return None
    return (
        f"J_hat={spec.J_hat:g} is below {VIRTUAL_INERTIA_RATIO:g}*J_j={VIRTUAL_INERTIA_RATIO * p.J_j:g}; "
        "the virtual motor approximation degrades"
    )


def double_compliance_design(spec: DesignSpec, p: PlantParams) -> ControllerBundle:
    """
    Full design pass: nominal C7, meta gains, C4 shape, SEA gains, G_v.
    """
    warnings: list[str] = []
    inertia_warning = virtual_inertia_warning(spec, p)
    if inertia_warning is not None:
        warnings.append(inertia_warning)
        logger.warning("shaping.virtual_inertia_small", J_hat=spec.J_hat, J_j=p.J_j)

    c7 = nominal_c7(spec, p)
    meta = design_meta_gains(spec, p)
    shape = virtual_motor_shape(spec, p)
    sea = extract_sea_gains(shape, p)
    gv_nominal, gv_causal = build_gv(spec, p, shape)

    warnings.extend(sea.warnings)
    warnings.extend(meta.warnings)

    logger.info(
        "shaping.design_complete",
        alpha=spec.alpha,
        k2_hat=meta.K2_hat,
        b2_hat=meta.B2_hat,
        k2_tau=sea.K2_tau,
        b2_tau=sea.B2_tau,
    )
    return ControllerBundle(
        spec=spec,
        plant=p,
        sea=sea,
        meta=meta,
        gv_nominal=gv_nominal,
        gv_causal=gv_causal,
        shape_c4=shape,
        nominal_c7=c7,
        warnings=warnings,
    )


def schedule_gains(bundle_spec: DesignSpec, p: PlantParams, jacobian_scale: float) -> ControllerBundle:
    """Re-derive the bundle for the plant reflected through a transmission ratio."""
    return double_compliance_design(bundle_spec, p.scaled(jacobian_scale))


def jacobian_scale_at(table: list[JacobianPoint] | None, angle: float) -> float:
    """Piecewise-linear reflection ratio at a joint angle, clamped at the table ends."""
    if not table:
        return 1.0
    angles = [row.angle_rad for row in table]
    scales = [row.scale for row in table]
    return float(np.interp(angle, angles, scales))
