"""Scenario file handling: TOML parsing, serialization and sweep overrides.

A scenario file mirrors MidcScenario table-for-table.  Converter tables may
give either the calibration inputs (rated point, angles, reactances; the
transformer ratios are then solved so the rated point is hit exactly) or
the full explicit parameter set, which is what the serializer emits.
"""

from __future__ import annotations

import copy
import math
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import dc_link as dcl
from .constants import S_BASE_MVA
from .droop import DroopSettings
from .errors import ScenarioParseError
from .events import BlockFault, CoefficientUpdate, FrequencyStep, LoadShed
from .grid import SubsystemParams
from .sim import CoordinatorConfig, LineConfig, MidcScenario, SimConfig

_EVENT_TYPES = ("block", "frequency_step", "set_coefficient", "load_shed")


def bundled_scenario_path(name):
    """Path of one of the scenario files shipped with the package."""
    p = Path(__file__).parent / "scenarios" / name
    if not p.exists():
        raise FileNotFoundError(f"no bundled scenario named {name!r}")
    return p


def bundled_scenarios():
    return sorted(p.name for p in
                  (Path(__file__).parent / "scenarios").glob("*.toml"))


class _Table:
    """Typed, path-aware access to one TOML table."""

    def __init__(self, data, path):
        if not isinstance(data, dict):
            raise ScenarioParseError(path, "expected a table")
        self.data = data
        self.path = path
        self.seen = set()

    def get(self, key, kind, default=None, required=False):
        if key not in self.data:
            if required:
                raise ScenarioParseError(f"{self.path}.{key}",
                                         "required field missing")
            self.seen.add(key)
            return default
        self.seen.add(key)
        val = self.data[key]
        if kind is float and isinstance(val, int) and not isinstance(val, bool):
            val = float(val)
        if not isinstance(val, kind) or (kind is not bool and isinstance(val, bool)):
            want = kind.__name__ if isinstance(kind, type) \
                else " or ".join(k.__name__ for k in kind)
            raise ScenarioParseError(
                f"{self.path}.{key}",
                f"expected {want}, got {type(val).__name__}")
        return val

    def sub(self, key, required=False):
        if key not in self.data:
            if required:
                raise ScenarioParseError(f"{self.path}.{key}",
                                         "required table missing")
            self.seen.add(key)
            return None
        self.seen.add(key)
        return _Table(self.data[key], f"{self.path}.{key}")

    def check_unknown(self):
        unknown = set(self.data) - self.seen
        if unknown:
            key = sorted(unknown)[0]
            raise ScenarioParseError(f"{self.path}.{key}", "unknown field")


def _built(tab, factory, **kwargs):
    """Run a dataclass constructor, mapping ValueError to the table path."""
    try:
        return factory(**kwargs)
    except ValueError as exc:
        raise ScenarioParseError(tab.path, str(exc)) from exc


def _parse_subsystem(tab, default_s_base):
    f_nom = tab.get("f_nominal_hz", float, 50.0)
    band = tab.get("f_band_hz", float, 0.5)
    omega_n = 2.0 * math.pi * f_nom
    params = _built(
        tab, SubsystemParams,
        inertia_h=tab.get("inertia_h", float, required=True),
        damping_d=tab.get("damping_d", float, 1.0),
        k_gov=tab.get("k_gov", float, required=True),
        t_gov=tab.get("t_gov", float, 5.0),
        omega_nominal=omega_n,
        omega_min=2.0 * math.pi * (f_nom - band),
        omega_max=2.0 * math.pi * (f_nom + band),
        s_base=tab.get("s_base_mva", float, default_s_base),
    )
    tab.check_unknown()
    return params


def _parse_converter(tab):
    if "k_t_inv" in tab.data:  # explicit form, all fields verbatim
        params = _built(
            tab, dcl.ConverterParams,
            n_poles=tab.get("n_poles", int, required=True),
            n_bridges=tab.get("n_bridges", int, required=True),
            x_c_rect=tab.get("x_c_rect", float, required=True),
            x_c_inv=tab.get("x_c_inv", float, required=True),
            r_dc=tab.get("r_dc", float, required=True),
            k_t_rect=tab.get("k_t_rect", float, required=True),
            k_t_inv=tab.get("k_t_inv", float, required=True),
            v_ac_rect=tab.get("v_ac_rect", float, required=True),
            v_ac_inv=tab.get("v_ac_inv", float, required=True),
            gamma_ref=tab.get("gamma_ref", float, required=True),
            alpha_min=tab.get("alpha_min", float, required=True),
            alpha_max=tab.get("alpha_max", float, required=True),
            p_rated=tab.get("p_rated", float, required=True),
            i_rated=tab.get("i_rated", float, required=True),
            v_rated=tab.get("v_rated", float, required=True),
            k_max=tab.get("k_max", float, 1.1),
            t_dc=tab.get("t_dc", float, 0.1),
        )
    else:
        params = _built(
            tab, dcl.calibrate_converter,
            p_rated=tab.get("p_rated_mw", float, required=True),
            v_rated=tab.get("v_rated_kv", float, 600.0),
            gamma_deg=tab.get("gamma_deg", float, 18.0),
            alpha_rated_deg=tab.get("alpha_rated_deg", float, 15.0),
            x_c=tab.get("x_c_ohm", float, 12.0),
            r_dc=tab.get("r_dc_ohm", float, 5.0),
            v_ac=tab.get("v_ac_kv", float, 230.0),
            n_poles=tab.get("n_poles", int, 1),
            n_bridges=tab.get("n_bridges", int, 2),
            k_max=tab.get("k_max", float, 1.1),
            t_dc=tab.get("t_dc", float, 0.1),
            alpha_min_deg=tab.get("alpha_min_deg", float, 5.0),
            alpha_max_deg=tab.get("alpha_max_deg", float, 30.0),
        )
    tab.check_unknown()
    return params


def _parse_droop(tab, converter, s_base):
    p_nominal = tab.get("p_nominal_pu", float, None)
    if p_nominal is None:
        p_nominal = tab.get("p_nominal_mw", float,
                            converter.p_rated) / s_base
    f_nom = tab.get("f_nominal_hz", float, 50.0)
    settings = _built(
        tab, DroopSettings,
        k_droop=tab.get("k_droop", float, 0.0),
        p_nominal=p_nominal,
        omega_nominal=2.0 * math.pi * f_nom,
        p_ceiling=tab.get("p_ceiling_pu", float,
                          converter.k_max * converter.p_rated / s_base),
        deadband=tab.get("deadband_pu", float, 0.0004),
        armed=tab.get("armed", bool, False),
        signal_delay=tab.get("signal_delay", float, 0.05),
    )
    tab.check_unknown()
    return settings


def _line_index(names, ref, path):
    if isinstance(ref, str):
        if ref not in names:
            raise ScenarioParseError(path, f"unknown line name {ref!r}")
        return names.index(ref)
    if isinstance(ref, int) and not isinstance(ref, bool):
        if not 1 <= ref <= len(names):
            raise ScenarioParseError(path, f"line index {ref} out of range")
        return ref - 1
    raise ScenarioParseError(path, "line must be a name or a 1-based index")


def _parse_event(tab, names):
    kind = tab.get("type", str, required=True)
    t = tab.get("time", float, required=True)
    if kind not in _EVENT_TYPES:
        raise ScenarioParseError(f"{tab.path}.type",
                                 f"unknown event type {kind!r}")
    if kind == "block":
        ev = BlockFault(time=t, line=_line_index(
            names, tab.get("line", (str, int), required=True),
            f"{tab.path}.line"))
    elif kind == "frequency_step":
        ev = FrequencyStep(
            time=t,
            line=_line_index(names, tab.get("line", (str, int), required=True),
                             f"{tab.path}.line"),
            f_from=tab.get("f_from_hz", float, 50.0),
            f_to=tab.get("f_to_hz", float, required=True))
    elif kind == "set_coefficient":
        ev = CoefficientUpdate(
            time=t,
            line=_line_index(names, tab.get("line", (str, int), required=True),
                             f"{tab.path}.line"),
            k_droop=tab.get("k_droop", float, required=True))
    else:
        ev = LoadShed(time=t, amount=tab.get("amount_pu", float, required=True))
    tab.check_unknown()
    return ev


def build_scenario(doc):
    """Construct a MidcScenario from a parsed TOML document."""
    top = _Table(doc, "scenario")
    s_base = top.get("s_base_mva", float, S_BASE_MVA)

    sim_tab = top.sub("sim", required=True)
    sim_cfg = _built(
        sim_tab, SimConfig,
        t_end=sim_tab.get("t_end", float, required=True),
        dt=sim_tab.get("dt", float, 1e-3),
        decimation=sim_tab.get("decimation", int, 10),
    )
    sim_tab.check_unknown()

    recv = _parse_subsystem(top.sub("receiving", required=True), s_base)

    coord_tab = top.sub("coordinator")
    if coord_tab is None:
        coord = CoordinatorConfig(enabled=False)
    else:
        coord = _built(
            coord_tab, CoordinatorConfig,
            enabled=coord_tab.get("enabled", bool, True),
            mode=coord_tab.get("mode", str, "optimize"),
            detect_threshold=coord_tab.get("detect_threshold", float, 0.1),
            detect_hold=coord_tab.get("detect_hold", float, 0.02),
            latency=coord_tab.get("latency", float, 0.2),
            comm_delay=coord_tab.get("comm_delay", float, 0.1),
            penalty_m=coord_tab.get("penalty_m", float, 1e6),
        )
        coord_tab.check_unknown()

    raw_lines = doc.get("lines")
    top.seen.add("lines")
    if not isinstance(raw_lines, list) or not raw_lines:
        raise ScenarioParseError("scenario.lines",
                                 "need at least one [[lines]] table")
    lines = []
    for i, raw in enumerate(raw_lines):
        tab = _Table(raw, f"lines[{i + 1}]")
        name = tab.get("name", str, f"hvdc{i + 1}")
        conv = _parse_converter(tab.sub("converter", required=True))
        droop = _parse_droop(tab.sub("droop", required=True), conv, s_base)
        sending = _parse_subsystem(tab.sub("sending", required=True), s_base)
        tab.check_unknown()
        lines.append(LineConfig(name=name, converter=conv, droop=droop,
                                sending=sending))
    names = [l.name for l in lines]

    events = []
    raw_events = doc.get("events", [])
    top.seen.add("events")
    if not isinstance(raw_events, list):
        raise ScenarioParseError("scenario.events",
                                 "expected an array of [[events]] tables")
    for i, raw in enumerate(raw_events):
        events.append(_parse_event(_Table(raw, f"events[{i + 1}]"), names))
    top.check_unknown()

    try:
        return MidcScenario(lines=tuple(lines), receiving=recv, sim=sim_cfg,
                            events=tuple(events), coordinator=coord,
                            s_base=s_base)
    except ValueError as exc:
        raise ScenarioParseError("scenario", str(exc)) from exc


def parse_scenario(text):
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioParseError("scenario", f"invalid TOML: {exc}") from exc
    return build_scenario(doc)


def load_scenario(path):
    return parse_scenario(Path(path).read_text())


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(float(v))
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    raise TypeError(f"cannot serialize {type(v).__name__}")


def _emit(out, table):
    for k, v in table.items():
        out.append(f"{k} = {_toml_value(v)}")


def _subsystem_doc(p):
    return {
        "inertia_h": p.inertia_h, "damping_d": p.damping_d,
        "k_gov": p.k_gov, "t_gov": p.t_gov,
        "f_nominal_hz": p.omega_nominal / (2.0 * math.pi),
        "f_band_hz": (p.omega_max - p.omega_nominal) / (2.0 * math.pi),
        "s_base_mva": p.s_base,
    }


def dumps_scenario(scn):
    """Serialize a scenario to TOML (explicit converter form)."""
    out = []
    _emit(out, {"s_base_mva": scn.s_base})
    out.append("\n[sim]")
    _emit(out, {"t_end": scn.sim.t_end, "dt": scn.sim.dt,
                "decimation": scn.sim.decimation})
    out.append("\n[receiving]")
    _emit(out, _subsystem_doc(scn.receiving))
    out.append("\n[coordinator]")
    cc = scn.coordinator
    _emit(out, {"enabled": cc.enabled, "mode": cc.mode,
                "detect_threshold": cc.detect_threshold,
                "detect_hold": cc.detect_hold, "latency": cc.latency,
                "comm_delay": cc.comm_delay, "penalty_m": cc.penalty_m})
    for lc in scn.lines:
        out.append("\n[[lines]]")
        _emit(out, {"name": lc.name})
        out.append("[lines.converter]")
        cp = lc.converter
        _emit(out, {
            "n_poles": cp.n_poles, "n_bridges": cp.n_bridges,
            "x_c_rect": cp.x_c_rect, "x_c_inv": cp.x_c_inv, "r_dc": cp.r_dc,
            "k_t_rect": cp.k_t_rect, "k_t_inv": cp.k_t_inv,
            "v_ac_rect": cp.v_ac_rect, "v_ac_inv": cp.v_ac_inv,
            "gamma_ref": cp.gamma_ref, "alpha_min": cp.alpha_min,
            "alpha_max": cp.alpha_max, "p_rated": cp.p_rated,
            "i_rated": cp.i_rated, "v_rated": cp.v_rated,
            "k_max": cp.k_max, "t_dc": cp.t_dc,
        })
        out.append("[lines.droop]")
        ds = lc.droop
        _emit(out, {
            "k_droop": ds.k_droop, "p_nominal_pu": ds.p_nominal,
            "f_nominal_hz": ds.omega_nominal / (2.0 * math.pi),
            "p_ceiling_pu": ds.p_ceiling, "deadband_pu": ds.deadband,
            "armed": ds.armed, "signal_delay": ds.signal_delay,
        })
        out.append("[lines.sending]")
        _emit(out, _subsystem_doc(lc.sending))
    for ev in scn.events:
        out.append("\n[[events]]")
        if isinstance(ev, BlockFault):
            _emit(out, {"type": "block", "time": ev.time,
                        "line": scn.lines[ev.line].name})
        elif isinstance(ev, FrequencyStep):
            _emit(out, {"type": "frequency_step", "time": ev.time,
                        "line": scn.lines[ev.line].name,
                        "f_from_hz": ev.f_from, "f_to_hz": ev.f_to})
        elif isinstance(ev, CoefficientUpdate):
            _emit(out, {"type": "set_coefficient", "time": ev.time,
                        "line": scn.lines[ev.line].name,
                        "k_droop": ev.k_droop})
        elif isinstance(ev, LoadShed):
            _emit(out, {"type": "load_shed", "time": ev.time,
                        "amount_pu": ev.amount})
    return "\n".join(out) + "\n"


def apply_override(doc, path, value):
    """Set one numeric field in a parsed scenario document, in place.

    Paths address either the scalar tables (``sim.dt``, ``receiving.k_gov``,
    ``coordinator.latency``), one line (``lines[2].droop.k_droop``, 1-based),
    or all lines at once (``droop.k_droop``, ``converter.k_max``,
    ``sending.k_gov``).  For an all-lines path, ``value`` may be a list with
    one entry per line.
    """
    parts = path.split(".")
    head = parts[0]

    def set_leaf(table, keys, val, where):
        for k in keys[:-1]:
            table = table.setdefault(k, {})
            if not isinstance(table, dict):
                raise ScenarioParseError(where, f"{k} is not a table")
        if not isinstance(val, (int, float)) or isinstance(val, bool):
            raise ScenarioParseError(where, "override value must be numeric")
        table[keys[-1]] = val

    if head in ("sim", "receiving", "coordinator"):
        if len(parts) < 2:
            raise ScenarioParseError(path, "path too short")
        if isinstance(value, list):
            raise ScenarioParseError(path, "per-line values need a line path")
        set_leaf(doc.setdefault(head, {}), parts[1:], value, path)
        return
    if head.startswith("lines[") and head.endswith("]"):
        idx = int(head[6:-1]) - 1
        lines = doc.get("lines", [])
        if not 0 <= idx < len(lines):
            raise ScenarioParseError(path, f"line index {idx + 1} out of range")
        if isinstance(value, list):
            raise ScenarioParseError(path, "single line takes a scalar value")
        set_leaf(lines[idx], parts[1:], value, path)
        return
    if head in ("droop", "converter", "sending"):
        lines = doc.get("lines", [])
        if not lines:
            raise ScenarioParseError(path, "scenario has no lines")
        values = value if isinstance(value, list) else [value] * len(lines)
        if len(values) != len(lines):
            raise ScenarioParseError(
                path, f"expected {len(lines)} per-line values, got {len(values)}")
        for line, val in zip(lines, values):
            set_leaf(line, parts, val, path)
        return
    raise ScenarioParseError(path, "unrecognized parameter path")


def load_document(path):
    """Raw TOML document of a scenario file, for sweep overrides."""
    try:
        doc = tomllib.loads(Path(path).read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioParseError("scenario", f"invalid TOML: {exc}") from exc
    return doc


def copy_document(doc):
    return copy.deepcopy(doc)
