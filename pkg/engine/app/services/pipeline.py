"""
Command orchestration: config ingestion, design/bode/simulate/sweep/dob-check.

Every command is a pure function of the loaded config plus its options; the
summary embeds a digest of the validated config so outputs stay traceable.
"""
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import pandas as pd
from pydantic import BaseModel, ValidationError

from app import __version__
from app.core.exceptions import ConfigParseError, ConfigValidationError, NoCrossover, UnknownMetric, UnknownParam
from app.core.logging import get_logger
from app.schemas.analysis import StabilityReport
from app.schemas.config import ProjectConfig
from app.schemas.sim import HumanModel, Scenario
from app.schemas.summary import DiscreteCoefficients, GainsFile, RunSummary, TfCoefficients
from app.services.analysis import (
    amplification_bandwidth,
    amplification_ratio,
    bode_table,
    coupled_stability_margin,
    critical_inertia,
    critical_spring_stiffness,
    dc_gain,
    passivity_phase_check,
)
from app.services.dob import dob_loop_gain, dob_stability_margin, q_transfer_function
from app.services.interconnect import ChainMode, SystemChain
from app.services.shaping import ControllerBundle, double_compliance_design, virtual_inertia_warning
from app.services.sim import SimTrace, run_coupled_human, run_dob_hysteresis_test, run_free, run_locked_output
from app.services.tf_core import RationalTransferFunction, discretize_tustin, tf


logger = get_logger(__name__)

BodeSystem = Literal["C4", "C5", "C6", "C7", "ratio", "Gv", "L_dob"]
SWEEP_METRICS = ("dc_amplification", "phase_margin", "critical_Kh", "critical_Jh", "loop_area", "critical_omega_q")

DESIGN_FILE = "gains.json"
SUMMARY_FILE = "summary.json"


@dataclass(frozen=True)
class LoadedConfig:
    config: ProjectConfig
    digest: str
    applied_defaults: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def config_digest(config: ProjectConfig) -> str:
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _applied_defaults(model: BaseModel, prefix: str = "") -> list[str]:
    out = []
    for name in type(model).model_fields:
        value = getattr(model, name)
        path = f"{prefix}{name}"
        if isinstance(value, BaseModel):
            out.extend(_applied_defaults(value, path + "."))
        elif name not in model.model_fields_set:
            out.append(path)
    return out


def _format_validation_error(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err["loc"])
        parts.append(f"{loc}: {err['msg']}" if loc else err["msg"])
    return "; ".join(parts)


def validate_config(raw: dict) -> LoadedConfig:
    """
    Validate a raw config mapping.

    Raises:
        ConfigValidationError: naming the violated invariant
    """
    try:
        config = ProjectConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigValidationError(_format_validation_error(exc)) from exc

    inertia_warning = virtual_inertia_warning(config.design, config.plant)
    warnings = [] if inertia_warning is None else [inertia_warning]
    applied = _applied_defaults(config)
    return LoadedConfig(config, config_digest(config), applied, warnings)


def load_config(path) -> LoadedConfig:
    """
    Read and validate a JSON project config; defaults applied and recorded.

    Raises:
        ConfigParseError: not valid JSON (line and column attached)
        ConfigValidationError: parsed but invalid
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigParseError(f"{path}: {exc.strerror or exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"{path}: {exc.msg} at line {exc.lineno} column {exc.colno}", exc.lineno, exc.colno) from exc
    if not isinstance(raw, dict):
        raise ConfigValidationError("config root must be an object")
    loaded = validate_config(raw)
    for message in loaded.warnings:
        logger.warning("cli.config_warning", detail=message)
    logger.info("cli.config_loaded", path=str(path), digest=loaded.digest[:12], defaults=len(loaded.applied_defaults))
    return loaded


def _finite(value: float | None) -> float | None:
    if value is None or not math.isfinite(value):
        return None
    return float(value)


def _tf_record(g: RationalTransferFunction) -> TfCoefficients:
    return TfCoefficients(num=[float(c) for c in g.num], den=[float(c) for c in g.den], delay=g.delay)


def _discrete_record(g: RationalTransferFunction, dt: float) -> DiscreteCoefficients:
    d = discretize_tustin(g, dt)
    return DiscreteCoefficients(
        num_z=[float(c) for c in d.num_z],
        den_z=[float(c) for c in d.den_z],
        sample_period=d.sample_period,
        delay_steps=d.delay_steps,
    )


def _summary(loaded: LoadedConfig, command: str, **kwargs) -> RunSummary:
    return RunSummary(
        tool_version=__version__,
        command=command,
        config_digest=loaded.digest,
        applied_defaults=loaded.applied_defaults,
        warnings=list(dict.fromkeys(loaded.warnings + kwargs.pop("warnings", []))),
        **kwargs,
    )


def write_summary(summary: RunSummary, out_dir) -> Path:
    path = Path(out_dir) / SUMMARY_FILE
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(summary.model_dump_json(indent=2), encoding="utf-8")
    return path


def design_bundle(config: ProjectConfig) -> ControllerBundle:
    return double_compliance_design(config.design, config.plant)


def realized_chain(bundle: ControllerBundle, config: ProjectConfig) -> SystemChain:
    return bundle.chain("realized", dt_ctrl=config.sim.dt_ctrl, derivative_cutoff_hz=config.sim.derivative_cutoff_hz)


def build_gains_file(bundle: ControllerBundle, config: ProjectConfig) -> GainsFile:
    dt = config.sim.dt_ctrl
    g_theta, g_s, g_c = bundle.feedbacks("realized", config.sim.derivative_cutoff_hz)
    q = q_transfer_function(config.dob.q_filter())
    plant = config.plant
    return GainsFile(
        sea=bundle.sea,
        meta=bundle.meta,
        gv_nominal=_tf_record(bundle.gv_nominal),
        gv_causal=_tf_record(bundle.gv_causal),
        q_filter=_tf_record(q),
        dt_ctrl=dt,
        discrete={
            "g_theta": _discrete_record(g_theta, dt),
            "g_s": _discrete_record(g_s, dt),
            "g_c": _discrete_record(g_c, dt),
            "q": _discrete_record(q, dt),
            "q_inverse_motor": _discrete_record(q * tf([0.0, plant.B_m, plant.J_m]), dt),
        },
    )


def cmd_design(loaded: LoadedConfig, out_dir=None) -> tuple[GainsFile, RunSummary]:
    """Run the design flow; write gains.json and summary.json when out_dir is given."""
    config = loaded.config
    bundle = design_bundle(config)
    gains = build_gains_file(bundle, config)

    nominal = bundle.chain("nominal")
    realized = realized_chain(bundle, config)
    ratio = amplification_ratio(nominal)
    realized_violations = passivity_phase_check(realized.c7)
    metrics: dict[str, float | None] = {
        "dc_amplification": _finite(dc_gain(ratio)),
        "amplification_bandwidth": _finite(amplification_bandwidth(amplification_ratio(realized), config.design.alpha)),
        "nominal_c7_violations": float(len(passivity_phase_check(bundle.nominal_c7))),
        "realized_c7_violations": float(len(realized_violations)),
        "realized_passivity_onset": realized_violations[0].omega_start if realized_violations else None,
    }
    try:
        margin = dob_stability_margin(config.dob.q_filter(), config.plant.T)
        metrics["dob_phase_margin_deg"] = _finite(margin.phase_margin_deg)
        metrics["critical_omega_q"] = _finite(margin.critical_omega_q)
    except NoCrossover:
        metrics["dob_phase_margin_deg"] = None

    stability: dict[str, StabilityReport] = {}
    if config.human is not None and config.human.kind != "prescribed-motion":
        stability["realized_c7"] = coupled_stability_margin(realized.c7, config.human)

    summary = _summary(loaded, "design", gains=gains, metrics=metrics, stability=stability, warnings=bundle.warnings)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / DESIGN_FILE).write_text(gains.model_dump_json(indent=2), encoding="utf-8")
        write_summary(summary, out)
    logger.info("cli.design_complete", dc_amplification=metrics["dc_amplification"])
    return gains, summary


def select_system(loaded: LoadedConfig, system: BodeSystem, mode: ChainMode):
    config = loaded.config
    bundle = design_bundle(config)
    if system == "Gv":
        return bundle.gv_causal if mode == "realized" else bundle.gv_nominal
    if system == "L_dob":
        return dob_loop_gain(config.dob.q_filter(), config.plant.T if mode == "realized" else 0.0)
    chain = realized_chain(bundle, config) if mode == "realized" else bundle.chain("nominal")
    if system == "ratio":
        return amplification_ratio(chain)
    return {"C4": chain.c4, "C5": chain.c5, "C6": chain.c6, "C7": chain.c7}[system]


def cmd_bode(
    loaded: LoadedConfig,
    system: BodeSystem,
    fmin: float,
    fmax: float,
    points: int,
    mode: ChainMode = "nominal",
    out_path=None,
) -> pd.DataFrame:
    """Bode table of one system of the chain, optionally written as CSV."""
    table = bode_table(select_system(loaded, system, mode), fmin, fmax, points)
    if out_path is not None:
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(out_path, index=False, float_format="%.17g")
    return table


def _simulate_scenario(config: ProjectConfig, scenario: Scenario) -> tuple[SimTrace, dict[str, float | None]]:
    sim = config.sim
    if scenario == "dob-hysteresis":
        q = config.dob.q_filter()
        off = run_dob_hysteresis_test(
            config.plant, sim.friction, q, sim, sim.position_amplitude, sim.position_freq, False, config.dob
        )
        on = run_dob_hysteresis_test(
            config.plant, sim.friction, q, sim, sim.position_amplitude, sim.position_freq, True, config.dob
        )
        area_off, area_on = off.metrics["loop_area"], on.metrics["loop_area"]
        ratio = area_on / area_off if area_off else None
        return on, {"loop_area_dob_off": area_off, "loop_area_dob_on": area_on, "loop_area_ratio": ratio}

    bundle = design_bundle(config)
    dob = config.dob if config.dob.enabled else None
    if scenario == "locked-output":
        trace = run_locked_output(bundle, config.plant, sim, dob=dob, jacobian_table=config.jacobian_table)
        return trace, dict(trace.metrics)
    if scenario == "coupled-human":
        if config.human is None:
            raise ConfigValidationError("coupled-human scenario needs a human model")
        trace = run_coupled_human(bundle, config.plant, config.human, sim, dob=dob, jacobian_table=config.jacobian_table)
        metrics = dict(trace.metrics)
        metrics["unstable"] = 1.0 if trace.verdict == "unstable" else 0.0
        return trace, metrics
    trace = run_free(bundle, config.plant, sim, dob=dob, jacobian_table=config.jacobian_table)
    return trace, {}


def cmd_simulate(loaded: LoadedConfig, scenario: Scenario | None = None, out_dir=None) -> tuple[SimTrace, RunSummary]:
    """Run one scenario; write trace.csv and summary.json when out_dir is given."""
    config = loaded.config
    scenario = scenario or config.sim.scenario
    trace, metrics = _simulate_scenario(config, scenario)
    notes = [f"scenario={scenario}", f"samples={len(trace.frame)}"]
    if trace.verdict is not None:
        notes.append(f"verdict={trace.verdict}")
    summary = _summary(loaded, "simulate", metrics={k: _finite(v) for k, v in metrics.items()}, notes=notes)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        trace.to_csv(out / "trace.csv")
        write_summary(summary, out)
    logger.info("cli.simulate_complete", scenario=scenario, samples=len(trace.frame))
    return trace, summary


def _set_path(raw: dict, dotted: str, value) -> dict:
    node = raw
    keys = dotted.split(".")
    for key in keys[:-1]:
        if not isinstance(node, dict) or key not in node or not isinstance(node[key], dict):
            raise UnknownParam(f"parameter path {dotted!r} does not resolve")
        node = node[key]
    if not isinstance(node, dict) or keys[-1] not in node:
        raise UnknownParam(f"parameter path {dotted!r} does not resolve")
    node[keys[-1]] = value
    return raw


def _coupled_human(config: ProjectConfig) -> HumanModel:
    if config.human is None:
        return HumanModel(kind="spring", K_h=10.0 * config.plant.K_c)
    return config.human


def evaluate_metric(config: ProjectConfig, metric: str) -> float | None:
    if metric == "critical_omega_q":
        return dob_stability_margin(config.dob.q_filter(), config.plant.T).critical_omega_q
    if metric == "loop_area":
        sim = config.sim
        trace = run_dob_hysteresis_test(
            config.plant,
            sim.friction,
            config.dob.q_filter(),
            sim,
            sim.position_amplitude,
            sim.position_freq,
            config.dob.enabled,
            config.dob,
        )
        return trace.metrics["loop_area"]

    bundle = design_bundle(config)
    if metric == "dc_amplification":
        return dc_gain(amplification_ratio(bundle.chain("nominal")))
    c7 = realized_chain(bundle, config).c7
    if metric == "phase_margin":
        return coupled_stability_margin(c7, _coupled_human(config)).phase_margin_deg
    if metric == "critical_Kh":
        return critical_spring_stiffness(c7)
    if metric == "critical_Jh":
        return critical_inertia(c7)
    raise UnknownMetric(f"unknown metric {metric!r}; expected one of {', '.join(SWEEP_METRICS)}")


def cmd_sweep(loaded: LoadedConfig, param: str, values: list[float], metric: str, out_path=None) -> pd.DataFrame:
    """
    Evaluate one metric per value of a dotted config parameter.

    Raises:
        ConfigValidationError: empty values, or a value breaks an invariant
        UnknownParam: the path does not resolve
        UnknownMetric: metric not supported
    """
    if metric not in SWEEP_METRICS:
        raise UnknownMetric(f"unknown metric {metric!r}; expected one of {', '.join(SWEEP_METRICS)}")
    if not values:
        raise ConfigValidationError("values must be nonempty")

    base = loaded.config.model_dump(mode="json")
    rows = []
    for value in values:
        raw = _set_path(json.loads(json.dumps(base)), param, value)
        config = validate_config(raw).config
        result = evaluate_metric(config, metric)
        rows.append({param: value, metric: math.nan if result is None else result})
        logger.debug("cli.sweep_point", param=param, value=value, metric=metric, result=result)

    table = pd.DataFrame(rows, columns=[param, metric])
    if out_path is not None:
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(out_path, index=False, float_format="%.17g")
    return table


def cmd_dob_check(loaded: LoadedConfig, out_dir=None) -> RunSummary:
    """Observer loop margin at the configured cutoff and the delay-limited critical cutoff."""
    config = loaded.config
    margin = dob_stability_margin(config.dob.q_filter(), config.plant.T)
    metrics = {
        "dob_phase_margin_deg": _finite(margin.phase_margin_deg),
        "dob_crossover_omega": _finite(margin.crossover_omega),
        "critical_omega_q": _finite(margin.critical_omega_q),
        "omega_q": config.dob.omega_q,
    }
    warnings = []
    if margin.phase_margin_deg < 30.0:
        warnings.append(f"observer phase margin {margin.phase_margin_deg:.1f} deg is below 30 deg")
    summary = _summary(loaded, "dob-check", metrics=metrics, warnings=warnings)
    if out_dir is not None:
        write_summary(summary, out_dir)
    return summary
