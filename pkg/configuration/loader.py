"""Sectioned key-value config grammar for models, scenarios and lab constraints.

Files are read with ``configparser`` (strict, no interpolation, case-sensitive keys)
and validated by the pydantic types. Every problem is reported as a
``ConfigParseError`` pointing at the offending line.
"""
import configparser
import logging
import math
import re
from typing import Any, Callable, Dict, List, Optional, Tuple

from pydantic import ValidationError

from models.control import ControllerConfig, PidConfig
from models.errors import ConfigParseError
from models.network import (
    FluidProperties,
    HeatExchanger,
    NetworkModel,
    PeltierUnit,
    PipeSegment,
    SupplyPlant,
    ThermalMass,
    ValveModel,
)
from models.scenario import ExperimentScenario, OccupancyWindow, PhaseInterval, Profile
from models.similitude import LabConstraints, NondimBase, ThermalMassConstraint

logger = logging.getLogger("dhn_similitude")

Parser = Callable[[str], Any]


def _float(raw: str) -> float:
    value = float(raw.strip())
    if math.isnan(value):
        raise ValueError("nan is not allowed")
    return value


def _int(raw: str) -> int:
    return int(raw.strip())


def _str(raw: str) -> str:
    value = raw.strip()
    if not value:
        raise ValueError("empty value")
    return value


def _bool(raw: str) -> bool:
    value = raw.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _range(raw: str) -> Tuple[float, float]:
    parts = raw.split()
    if len(parts) != 2:
        raise ValueError("expected two numbers 'low high'")
    return _float(parts[0]), _float(parts[1])


def _rows(raw: str, width: int) -> List[Tuple[float, ...]]:
    rows = []
    for chunk in raw.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split()
        if len(parts) != width:
            raise ValueError(f"expected {width} numbers per entry, got {chunk!r}")
        rows.append(tuple(_float(p) for p in parts))
    return rows


def _profile(raw: str) -> List[Tuple[float, float]]:
    return _rows(raw, 2)


def _windows(raw: str) -> List[Tuple[float, ...]]:
    return _rows(raw, 4)


def _phases(raw: str) -> List[Tuple[str, float, float]]:
    phases = []
    for chunk in raw.split(";"):
        parts = chunk.split()
        if not parts:
            continue
        if len(parts) != 3:
            raise ValueError(f"expected 'label start end', got {chunk.strip()!r}")
        phases.append((parts[0], _float(parts[1]), _float(parts[2])))
    return phases


MODEL_SECTIONS: Dict[str, Dict[str, Parser]] = {
    "fluid": {"rho": _float, "cp": _float},
    "plant": {
        "supply_temp_Ts": _float,
        "initial_mass_flow_mdotI": _float,
        "pump_pressure_rise": _float,
        "heater_hAs": _float,
        "outlet_node": _str,
        "inlet_node": _str,
    },
    "network": {"design_ambient": _float, "reference_diameter": _float},
    "segment": {
        "length_l": _float,
        "diameter_D": _float,
        "loss_coeff_k_tot": _float,
        "conductive_hAs": _float,
        "upstream_node": _str,
        "downstream_node": _str,
    },
    "valve": {
        "split_node": _str,
        "merge_node": _str,
        "user_branch_k_range": _range,
        "bypass_branch_k_range": _range,
        "characteristic": _str,
    },
    "heat_exchanger": {
        "convective_hAs_HX": _float,
        "loss_coeff_k_HX": _float,
        "volume": _float,
        "upstream_node": _str,
        "downstream_node": _str,
        "thermal_mass": _str,
        "diameter_D": _float,
    },
    "thermal_mass": {
        "heat_capacity_C": _float,
        "volume": _float,
        "hAs_actual": _float,
        "hAs_simulated": _float,
        "setpoint_Tset": _float,
        "peltier_max_power": _float,
        "peltier_power_setpoint": _float,
        "peltier_tracking_time_constant": _float,
    },
}

_PID_KEYS: Dict[str, Parser] = {
    "kp": _float,
    "ki": _float,
    "kd": _float,
    "sample_time": _float,
    "u_min": _float,
    "u_max": _float,
    "anti_windup": _bool,
}

SCENARIO_SECTIONS: Dict[str, Dict[str, Parser]] = {
    "scenario": {
        "duration": _float,
        "ambient_profile": _profile,
        "ambient_to_emulate": _profile,
        "supply_profile": _profile,
        "phase_labels": _phases,
        "temperature_ratio_kT": _float,
        "output_interval": _float,
        "dt": _float,
        "subsegments": _int,
        "steady_band": _float,
        "steady_window": _float,
    },
    "occupancy": {"windows": _windows},
    "controller": {**_PID_KEYS, "autotune": _bool},
    "valve_positions": {},
    "initial_temperatures": {},
    "full_scale_setpoints": {},
}

# Sections whose keys are free-form component ids mapped to numbers.
_OPEN_SECTIONS = {"valve_positions", "initial_temperatures", "full_scale_setpoints"}

_MASS_CONSTRAINT_KEYS: Dict[str, Parser] = {
    "setpoint_Tset": _float,
    "heat_capacity_C": _float,
    "hAs_actual": _float,
    "hx_hAs": _float,
    "max_power": _float,
    "volume": _float,
}

CONSTRAINT_SECTIONS: Dict[str, Dict[str, Parser]] = {
    "base": {"rho": _float, "mdot_I": _float, "T_s": _float, "D": _float},
    "lab": {"cp": _float, "design_ambient": _float, "pump_pressure_rise": _float, "heater_hAs": _float,
            "segment_length_range": _range, "segment_hAs_range": _range},
    "thermal_mass_defaults": _MASS_CONSTRAINT_KEYS,
    "thermal_mass": _MASS_CONSTRAINT_KEYS,
}

_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([^=:\s#;][^=:]*?)\s*[=:]")


class _ParsedConfig:
    """configparser result plus the line index used for diagnostics."""

    def __init__(self, text: str, grammar: Dict[str, Dict[str, Parser]]):
        self.grammar = grammar
        self.section_lines: Dict[str, int] = {}
        self.key_lines: Dict[Tuple[str, str], int] = {}
        self._index_lines(text)

        self.parser = configparser.ConfigParser(interpolation=None, strict=True)
        self.parser.optionxform = str
        try:
            self.parser.read_string(text)
        except configparser.MissingSectionHeaderError as e:
            raise ConfigParseError("missing section header", line=e.lineno)
        except configparser.DuplicateSectionError as e:
            raise ConfigParseError(f"duplicate section [{e.section}]", line=e.lineno)
        except configparser.DuplicateOptionError as e:
            raise ConfigParseError("duplicate key", line=e.lineno, section=e.section, field=e.option)
        except configparser.ParsingError as e:
            lineno = e.errors[0][0] if e.errors else None
            raise ConfigParseError("malformed line", line=lineno)

        self.sections: List[Tuple[str, Optional[str], str]] = []
        for name in self.parser.sections():
            kind, _, ident = name.partition(" ")
            ident = ident.strip() or None
            if kind not in grammar:
                raise ConfigParseError(f"unknown section [{name}]", line=self.section_lines.get(name))
            self.sections.append((kind, ident, name))

    def _index_lines(self, text: str) -> None:
        current = None
        for lineno, line in enumerate(text.splitlines(), start=1):
            header = _SECTION_RE.match(line)
            if header:
                current = header.group(1).strip()
                self.section_lines.setdefault(current, lineno)
                continue
            key = _KEY_RE.match(line)
            if key and current is not None and not line[:1].isspace():
                self.key_lines.setdefault((current, key.group(1).strip()), lineno)

    def line_of(self, section: str, key: Optional[str] = None) -> Optional[int]:
        if key is not None and (section, key) in self.key_lines:
            return self.key_lines[(section, key)]
        return self.section_lines.get(section)

    def values(self, kind: str, name: str) -> Dict[str, Any]:
        allowed = self.grammar[kind]
        parsed: Dict[str, Any] = {}
        for key, raw in self.parser.items(name):
            if kind in _OPEN_SECTIONS:
                parser = _float
            elif key in allowed:
                parser = allowed[key]
            else:
                raise ConfigParseError("unknown key", line=self.line_of(name, key), section=name, field=key)
            try:
                parsed[key] = parser(raw)
            except ValueError as e:
                raise ConfigParseError(str(e), line=self.line_of(name, key), section=name, field=key)
        return parsed

    def of_kind(self, kind: str) -> List[Tuple[Optional[str], str]]:
        return [(ident, name) for k, ident, name in self.sections if k == kind]

    def single(self, kind: str, required: bool = True) -> Optional[Dict[str, Any]]:
        matches = self.of_kind(kind)
        if not matches:
            if required:
                raise ConfigParseError(f"missing section [{kind}]")
            return None
        ident, name = matches[0]
        if ident is not None:
            raise ConfigParseError(f"section [{kind}] takes no id", line=self.line_of(name))
        return self.values(kind, name)


def _build(parsed: _ParsedConfig, section: str, factory: Callable[..., Any], **fields: Any) -> Any:
    try:
        return factory(**fields)
    except ValidationError as e:
        first = e.errors()[0]
        field = str(first["loc"][0]) if first.get("loc") else None
        raise ConfigParseError(first["msg"], line=parsed.line_of(section, field), section=section, field=field)


def _require_id(kind: str, ident: Optional[str], parsed: _ParsedConfig, name: str) -> str:
    if ident is None:
        raise ConfigParseError(f"section [{kind}] needs an id", line=parsed.line_of(name))
    return ident


def load_model(config_text: str) -> NetworkModel:
    parsed = _ParsedConfig(config_text, MODEL_SECTIONS)

    fluid = _build(parsed, "fluid", FluidProperties, **parsed.single("fluid"))
    plant = _build(parsed, "plant", SupplyPlant, **parsed.single("plant"))
    network = parsed.single("network", required=False) or {}

    segments = []
    for ident, name in parsed.of_kind("segment"):
        values = parsed.values("segment", name)
        segments.append(_build(parsed, name, PipeSegment, id=_require_id("segment", ident, parsed, name), **values))
    if not segments:
        raise ConfigParseError("at least one segment is required")

    valves = []
    for ident, name in parsed.of_kind("valve"):
        values = parsed.values("valve", name)
        valves.append(_build(parsed, name, ValveModel, id=_require_id("valve", ident, parsed, name), **values))

    exchangers = []
    for ident, name in parsed.of_kind("heat_exchanger"):
        values = parsed.values("heat_exchanger", name)
        exchangers.append(
            _build(parsed, name, HeatExchanger, id=_require_id("heat_exchanger", ident, parsed, name), **values)
        )

    masses = []
    for ident, name in parsed.of_kind("thermal_mass"):
        values = parsed.values("thermal_mass", name)
        peltier_fields = {
            key[len("peltier_"):]: values.pop(key) for key in list(values) if key.startswith("peltier_")
        }
        if "power_setpoint" in peltier_fields:
            peltier_fields["power_setpoint_Qpelt"] = peltier_fields.pop("power_setpoint")
        peltier = _build(parsed, name, PeltierUnit, **peltier_fields) if peltier_fields else None
        masses.append(
            _build(
                parsed, name, ThermalMass,
                id=_require_id("thermal_mass", ident, parsed, name), peltier=peltier, **values,
            )
        )

    model = _build(
        parsed, "network", NetworkModel,
        fluid=fluid, plant=plant, segments=segments, valves=valves,
        heat_exchangers=exchangers, thermal_masses=masses, **network,
    )
    logger.debug(f"Loaded model with {len(segments)} segments and {len(valves)} valves")
    return model


def _fmt(value: float) -> str:
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return repr(float(value))


def _fmt_rows(rows) -> str:
    return "; ".join(" ".join(_fmt(v) for v in row) for row in rows)


def _section(lines: List[str], header: str, items: List[Tuple[str, str]]) -> None:
    lines.append(f"[{header}]")
    lines.extend(f"{key} = {value}" for key, value in items)
    lines.append("")


def save_model(model: NetworkModel) -> str:
    lines: List[str] = []
    _section(lines, "fluid", [("rho", _fmt(model.fluid.rho)), ("cp", _fmt(model.fluid.cp))])
    plant = model.plant
    _section(lines, "plant", [
        ("supply_temp_Ts", _fmt(plant.supply_temp_Ts)),
        ("initial_mass_flow_mdotI", _fmt(plant.initial_mass_flow_mdotI)),
        ("pump_pressure_rise", _fmt(plant.pump_pressure_rise)),
        ("heater_hAs", _fmt(plant.heater_hAs)),
        ("outlet_node", plant.outlet_node),
        ("inlet_node", plant.inlet_node),
    ])
    network_items = [("design_ambient", _fmt(model.design_ambient))]
    if model.reference_diameter is not None:
        network_items.append(("reference_diameter", _fmt(model.reference_diameter)))
    _section(lines, "network", network_items)

    for seg in model.segments:
        _section(lines, f"segment {seg.id}", [
            ("length_l", _fmt(seg.length_l)),
            ("diameter_D", _fmt(seg.diameter_D)),
            ("loss_coeff_k_tot", _fmt(seg.loss_coeff_k_tot)),
            ("conductive_hAs", _fmt(seg.conductive_hAs)),
            ("upstream_node", seg.upstream_node),
            ("downstream_node", seg.downstream_node),
        ])
    for valve in model.valves:
        _section(lines, f"valve {valve.id}", [
            ("split_node", valve.split_node),
            ("merge_node", valve.merge_node),
            ("user_branch_k_range", " ".join(_fmt(v) for v in valve.user_branch_k_range)),
            ("bypass_branch_k_range", " ".join(_fmt(v) for v in valve.bypass_branch_k_range)),
            ("characteristic", valve.characteristic.value),
        ])
    for hx in model.heat_exchangers:
        items = [
            ("convective_hAs_HX", _fmt(hx.convective_hAs_HX)),
            ("loss_coeff_k_HX", _fmt(hx.loss_coeff_k_HX)),
            ("volume", _fmt(hx.volume)),
            ("upstream_node", hx.upstream_node),
            ("downstream_node", hx.downstream_node),
            ("thermal_mass", hx.thermal_mass),
        ]
        if hx.diameter_D is not None:
            items.append(("diameter_D", _fmt(hx.diameter_D)))
        _section(lines, f"heat_exchanger {hx.id}", items)
    for tm in model.thermal_masses:
        items = [
            ("heat_capacity_C", _fmt(tm.heat_capacity_C)),
            ("volume", _fmt(tm.volume)),
            ("hAs_actual", _fmt(tm.hAs_actual)),
            ("setpoint_Tset", _fmt(tm.setpoint_Tset)),
        ]
        if tm.hAs_simulated is not None:
            items.append(("hAs_simulated", _fmt(tm.hAs_simulated)))
        if tm.peltier is not None:
            items += [
                ("peltier_max_power", _fmt(tm.peltier.max_power)),
                ("peltier_power_setpoint", _fmt(tm.peltier.power_setpoint_Qpelt)),
                ("peltier_tracking_time_constant", _fmt(tm.peltier.tracking_time_constant)),
            ]
        _section(lines, f"thermal_mass {tm.id}", items)
    return "\n".join(lines)


def load_scenario(config_text: str) -> ExperimentScenario:
    parsed = _ParsedConfig(config_text, SCENARIO_SECTIONS)
    values = parsed.single("scenario")
    if "duration" not in values:
        raise ConfigParseError("duration is required", line=parsed.line_of("scenario"), section="scenario")

    fields: Dict[str, Any] = {}
    for key, value in values.items():
        if key in ("ambient_profile", "ambient_to_emulate", "supply_profile"):
            fields[key] = _build(parsed, "scenario", Profile, points=value)
        elif key == "phase_labels":
            fields[key] = [
                _build(parsed, "scenario", PhaseInterval, label=label, start=start, end=end)
                for label, start, end in value
            ]
        else:
            fields[key] = value

    windows: Dict[str, List[OccupancyWindow]] = {}
    for ident, name in parsed.of_kind("occupancy"):
        tm_id = _require_id("occupancy", ident, parsed, name)
        rows = parsed.values("occupancy", name).get("windows", [])
        windows[tm_id] = [
            OccupancyWindow(start=s, end=e, heating_setpoint=h, cooling_setpoint=c) for s, e, h, c in rows
        ]
    fields["occupancy_windows"] = windows

    controllers = parsed.of_kind("controller")
    if controllers:
        shared: Dict[str, Any] = {}
        per_mass: Dict[str, PidConfig] = {}
        autotune = False
        for ident, name in controllers:
            ctrl_values = parsed.values("controller", name)
            if ident is None:
                autotune = ctrl_values.pop("autotune", False)
                shared = ctrl_values
        pid = _build(parsed, "controller", PidConfig, **shared)
        for ident, name in controllers:
            if ident is not None:
                ctrl_values = parsed.values("controller", name)
                ctrl_values.pop("autotune", None)
                per_mass[ident] = _build(parsed, name, PidConfig, **{**pid.model_dump(), **ctrl_values})
        fields["controller_config"] = ControllerConfig(pid=pid, per_mass=per_mass, autotune=autotune)

    for open_section in _OPEN_SECTIONS:
        content = parsed.single(open_section, required=False)
        if content is not None:
            fields[open_section] = content

    return _build(parsed, "scenario", ExperimentScenario, **fields)


def save_scenario(scenario: ExperimentScenario) -> str:
    lines: List[str] = []
    items = [
        ("duration", _fmt(scenario.duration)),
        ("ambient_profile", _fmt_rows(scenario.ambient_profile.points)),
    ]
    if scenario.ambient_to_emulate is not None:
        items.append(("ambient_to_emulate", _fmt_rows(scenario.ambient_to_emulate.points)))
    if scenario.supply_profile is not None:
        items.append(("supply_profile", _fmt_rows(scenario.supply_profile.points)))
    if scenario.phase_labels:
        items.append(("phase_labels", "; ".join(
            f"{p.label.value} {_fmt(p.start)} {_fmt(p.end)}" for p in scenario.phase_labels
        )))
    if scenario.temperature_ratio_kT is not None:
        items.append(("temperature_ratio_kT", _fmt(scenario.temperature_ratio_kT)))
    items.append(("output_interval", _fmt(scenario.output_interval)))
    if scenario.dt is not None:
        items.append(("dt", _fmt(scenario.dt)))
    items += [
        ("subsegments", str(scenario.subsegments)),
        ("steady_band", _fmt(scenario.steady_band)),
        ("steady_window", _fmt(scenario.steady_window)),
    ]
    _section(lines, "scenario", items)

    for tm_id, windows in scenario.occupancy_windows.items():
        rows = [(w.start, w.end, w.heating_setpoint, w.cooling_setpoint) for w in windows]
        _section(lines, f"occupancy {tm_id}", [("windows", _fmt_rows(rows))])

    if scenario.controller_config is not None:
        ctrl = scenario.controller_config
        _section(lines, "controller", _pid_items(ctrl.pid) + [("autotune", str(ctrl.autotune).lower())])
        for tm_id, pid in ctrl.per_mass.items():
            _section(lines, f"controller {tm_id}", _pid_items(pid))

    for open_section in sorted(_OPEN_SECTIONS):
        content = getattr(scenario, open_section)
        if content:
            _section(lines, open_section, [(k, _fmt(v)) for k, v in content.items()])
    return "\n".join(lines)


def _pid_items(pid: PidConfig) -> List[Tuple[str, str]]:
    return [
        ("kp", _fmt(pid.kp)),
        ("ki", _fmt(pid.ki)),
        ("kd", _fmt(pid.kd)),
        ("sample_time", _fmt(pid.sample_time)),
        ("u_min", _fmt(pid.u_min)),
        ("u_max", _fmt(pid.u_max)),
        ("anti_windup", str(pid.anti_windup).lower()),
    ]


def load_lab_constraints(config_text: str) -> LabConstraints:
    parsed = _ParsedConfig(config_text, CONSTRAINT_SECTIONS)
    base = _build(parsed, "base", NondimBase, **parsed.single("base"))
    lab = parsed.single("lab", required=False) or {}
    defaults_values = parsed.single("thermal_mass_defaults", required=False) or {}
    defaults = _build(parsed, "thermal_mass_defaults", ThermalMassConstraint, **defaults_values)
    masses = {}
    for ident, name in parsed.of_kind("thermal_mass"):
        tm_id = _require_id("thermal_mass", ident, parsed, name)
        masses[tm_id] = _build(parsed, name, ThermalMassConstraint, **parsed.values("thermal_mass", name))
    return _build(parsed, "lab", LabConstraints, base=base, defaults=defaults, thermal_masses=masses, **lab)


def apply_overrides(config_text: str, overrides: List[str],
                    grammar: Dict[str, Dict[str, Parser]]) -> str:
    """Apply ``section.key=value`` overrides and return the re-emitted config text.

    The result goes back through the same loader, so overrides obey the file grammar.
    """
    if not overrides:
        return config_text
    parsed = _ParsedConfig(config_text, grammar)
    for override in overrides:
        target, sep, value = override.partition("=")
        section, dot, key = target.strip().rpartition(".")
        if not sep or not dot:
            raise ConfigParseError(f"override {override!r} must look like section.key=value")
        section = section.strip()
        key = key.strip()
        if not parsed.parser.has_section(section):
            raise ConfigParseError("override references a missing section", section=section, field=key)
        kind = section.partition(" ")[0]
        if kind not in _OPEN_SECTIONS and key not in grammar[kind]:
            raise ConfigParseError("override references an unknown key", section=section, field=key)
        if kind in _OPEN_SECTIONS and not parsed.parser.has_option(section, key):
            raise ConfigParseError("override references an unknown key", section=section, field=key)
        parsed.parser.set(section, key, value.strip())
        logger.info(f"Override applied: [{section}] {key} = {value.strip()}")

    lines: List[str] = []
    for name in parsed.parser.sections():
        _section(lines, name, list(parsed.parser.items(name)))
    return "\n".join(lines)
