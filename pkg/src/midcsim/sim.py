"""Deterministic fixed-step simulation of a multi-infeed HVDC system.

Composes the DC-link, droop, grid and coordinator layers into one closed
loop: classic fourth-order explicit integration of every subsystem and
link state, events snapped to step boundaries, and a decimated trace of
every plotted quantity.  Identical scenarios produce bit-identical traces.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from . import dc_link as dcl
from . import droop as drp
from . import grid as grd
from .constants import S_BASE_MVA
from .coordinator import (
    BlockDetector,
    OptimizationInput,
    dispatch_coefficients,
    optimize_droop,
)
from .errors import BadIndexError, DcSolveError, NonFiniteError
from .events import BlockFault, CoefficientUpdate, FrequencyStep, LoadShed

log = logging.getLogger(__name__)

_K_XC = 3.0 / math.pi


@dataclass(frozen=True)
class CoordinatorConfig:
    """Detection, optimization-latency and dispatch settings."""

    enabled: bool = False
    mode: str = "optimize"        # "optimize" or "fixed" (arm current gains)
    detect_threshold: float = 0.1
    detect_hold: float = 0.02
    latency: float = 0.2          # detection -> dispatch delay, s
    comm_delay: float = 0.1       # dispatch -> controllers delay, s
    penalty_m: float = 1e6

    def __post_init__(self):
        if self.mode not in ("optimize", "fixed"):
            raise ValueError("mode must be 'optimize' or 'fixed'")
        if self.detect_threshold <= 0.0 or self.detect_hold < 0.0:
            raise ValueError("bad detector settings")
        if self.latency < 0.0 or self.comm_delay < 0.0:
            raise ValueError("delays must be >= 0")


@dataclass(frozen=True)
class SimConfig:
    t_end: float
    dt: float = 1e-3
    decimation: int = 10

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be > 0")
        if self.t_end <= self.dt:
            raise ValueError("t_end must exceed dt")
        if self.decimation < 1:
            raise ValueError("decimation must be >= 1")


@dataclass(frozen=True)
class LineConfig:
    """One HVDC line: converter data, droop controller, sending-end grid."""

    name: str
    converter: dcl.ConverterParams
    droop: drp.DroopSettings
    sending: grd.SubsystemParams


@dataclass(frozen=True)
class MidcScenario:
    lines: tuple
    receiving: grd.SubsystemParams
    sim: SimConfig
    events: tuple = ()
    coordinator: CoordinatorConfig = CoordinatorConfig()
    s_base: float = S_BASE_MVA

    def __post_init__(self):
        if len(self.lines) < 1:
            raise ValueError("need at least one line")
        names = [l.name for l in self.lines]
        if len(set(names)) != len(names):
            raise ValueError("line names must be unique")
        for ev in self.events:
            if not 0.0 <= ev.time <= self.sim.t_end:
                raise ValueError(
                    f"event at t={ev.time} outside [0, {self.sim.t_end}]")
            line = getattr(ev, "line", None)
            if line is not None and not 0 <= line < len(self.lines):
                raise BadIndexError(f"event line index {line} out of range")
        if self.s_base <= 0.0:
            raise ValueError("s_base must be > 0")


def inject_frequency_step(scenario, line, t, f_from, f_to):
    """Add an open-loop frequency-signal step to one line's controller."""
    if not 0 <= line < len(scenario.lines):
        raise BadIndexError(f"line index {line} out of range")
    if not 0.0 <= t < scenario.sim.t_end:
        raise ValueError("step time must lie inside the simulation window")
    ev = FrequencyStep(time=t, line=line, f_from=f_from, f_to=f_to)
    return replace(scenario, events=scenario.events + (ev,))


@dataclass
class SimulationTrace:
    """Decimated time series of one run plus the coordinator's event log."""

    time: np.ndarray
    omega: dict                    # subsystem name -> rad/s series
    omega_nominal: dict            # subsystem name -> rad/s
    lines: dict                    # line name -> {p_dc, p_order, i_d, v_d_inv, alpha}
    shed: np.ndarray               # cumulative p.u.
    events: list                   # (applied time, event)
    line_names: tuple
    blocked_lines: tuple           # line indices blocked during the run
    pre_fault_power: np.ndarray    # scheduled p.u. per line
    band: tuple                    # receiving-end (omega_min, omega_max) rad/s
    fault: object = None
    optimization: object = None
    detection_time: float = None
    dispatch_time: float = None    # detection + latency + comm_delay
    survivor_lines: tuple = ()
    metrics: dict = None

    def subsystem_names(self):
        return list(self.omega.keys())

    def csv_header(self):
        cols = ["time"]
        cols += [f"{name}.omega" for name in self.omega]
        for name in self.line_names:
            cols += [f"{name}.{q}"
                     for q in ("p_dc", "p_order", "i_d", "v_d_inv", "alpha")]
        return ",".join(cols)

    def to_csv(self, path):
        cols = [self.time]
        cols += [self.omega[name] for name in self.omega]
        for name in self.line_names:
            ser = self.lines[name]
            cols += [ser[q]
                     for q in ("p_dc", "p_order", "i_d", "v_d_inv", "alpha")]
        data = np.column_stack(cols)
        np.savetxt(path, data, fmt="%.12g", delimiter=",",
                   header=self.csv_header(), comments="")


def compute_metrics(trace):
    """Summary metrics of one trace, recomputable from its series.

    Settling is measured from the last applied event (or the trace start)
    to the final entry into a +/-0.02 Hz band around the settled value; the
    settled value itself is the mean of the last tenth of the window.  The
    inter-subsystem spread compares settled per-unit frequencies and skips
    the sending ends of blocked lines (they are decoupled from the
    receiving end once their line is gone).
    """
    if len(trace.time) == 0:
        raise ValueError("empty trace")
    t = trace.time
    f_re = trace.omega["re"] / (2.0 * math.pi)
    f_nom = trace.omega_nominal["re"] / (2.0 * math.pi)
    tail = max(1, len(t) // 10)
    f_ss = float(np.mean(f_re[-tail:]))

    t_ref = max((te for te, _ in trace.events), default=float(t[0]))
    band_hz = 0.02
    after = t >= t_ref
    outside = np.abs(f_re - f_ss) > band_hz
    idx = np.nonzero(outside & after)[0]
    if idx.size == 0:
        settling = 0.0
    elif idx[-1] + 1 >= len(t):
        settling = None  # never settles inside the window
    else:
        settling = float(t[idx[-1] + 1] - t_ref)

    blocked = set(trace.blocked_lines)
    devs = []
    for j, name in enumerate(trace.omega):
        if name != "re" and (j - 1) in blocked:
            continue
        w = trace.omega[name]
        wn = trace.omega_nominal[name]
        devs.append(float(np.mean(w[-tail:])) / wn - 1.0)
    spread = max(devs) - min(devs) if len(devs) > 1 else 0.0

    lo, hi = trace.band
    w_re = trace.omega["re"]
    return {
        "frequency_nadir_hz": float(np.min(f_re)),
        "steady_state_deviation_hz": f_ss - f_nom,
        "settling_time_s": settling,
        "frequency_spread_pu": spread,
        "total_shed_pu": float(trace.shed[-1]),
        "band_violation": bool(np.any((w_re < lo) | (w_re > hi))),
        "steady_within_band": bool(lo <= np.mean(w_re[-tail:]) <= hi),
    }


class _Engine:
    """Single-run integrator; owns all mutable state for one scenario."""

    def __init__(self, scn):
        self.scn = scn
        self.m = len(scn.lines)
        self.dt = scn.sim.dt
        self.n_steps = int(round(scn.sim.t_end / scn.sim.dt))

        subs = [scn.receiving] + [l.sending for l in scn.lines]
        self.h = np.array([s.inertia_h for s in subs])
        self.damp = np.array([s.damping_d for s in subs])
        self.kgov = np.array([s.k_gov for s in subs])
        self.tgov = np.array([s.t_gov for s in subs])
        self.wnom = np.array([s.omega_nominal for s in subs])
        self.base_ratio = np.array([scn.s_base / s.s_base for s in subs])

        self.t_dc = np.array([l.converter.t_dc for l in scn.lines])
        self.p_sched = np.array([l.droop.p_nominal for l in scn.lines])
        self.settings = [l.droop for l in scn.lines]
        self.delay_steps = [int(round(s.signal_delay / self.dt))
                            for s in self.settings]
        self.blocked = np.zeros(self.m, dtype=bool)
        self.live = np.ones(self.m)
        self.override = [None] * self.m
        self.shed_total = 0.0
        self.frozen_order = self.p_sched.copy()
        self._last_orders = self.p_sched.copy()

        self.queue = []
        self._seq = 0
        for ev in scn.events:
            self._push(ev)

        cc = scn.coordinator
        self.detector = (BlockDetector(self.m, self.dt, cc.detect_threshold,
                                       cc.detect_hold)
                         if cc.enabled else None)
        self.fault = None
        self.optimization = None
        self.detection_time = None
        self.dispatch_time = None
        self.survivors = ()

        self.applied = []
        self.blocked_log = []

    def _push(self, ev):
        heapq.heappush(self.queue, (ev.time, self._seq, ev))
        self._seq += 1

    def _apply(self, ev, t, y):
        if isinstance(ev, BlockFault):
            if not self.blocked[ev.line]:
                self.blocked[ev.line] = True
                self.live[ev.line] = 0.0
                self.frozen_order[ev.line] = self._last_orders[ev.line]
                y[2 * self.m + 2 + ev.line] = 0.0
                self.blocked_log.append(ev.line)
        elif isinstance(ev, FrequencyStep):
            self.override[ev.line] = 2.0 * math.pi * ev.f_to
        elif isinstance(ev, CoefficientUpdate):
            self.settings[ev.line] = drp.update_coefficient(
                self.settings[ev.line], ev.k_droop)
        elif isinstance(ev, LoadShed):
            self.shed_total += ev.amount
        else:
            raise TypeError(f"unknown event type {type(ev).__name__}")
        self.applied.append((t, ev))

    def _coordinate(self, t, delivered):
        """Feed the detector; on detection, schedule the dispatch."""
        fault = self.detector.update(t, delivered)
        if fault is None:
            return
        self.fault = fault
        self.detection_time = fault.detection_time
        cc = self.scn.coordinator
        self.dispatch_time = fault.detection_time + cc.latency + cc.comm_delay
        survivors = [i for i in range(self.m)
                     if i != fault.line_index and not self.blocked[i]]
        self.survivors = tuple(survivors)
        if not survivors:
            log.warning("block detected at t=%.3f s but no line survives", t)
            return
        log.info("block of line %d detected at t=%.3f s, p_loss=%.4f p.u.",
                 fault.line_index, t, fault.p_loss)
        dispatch_at = fault.detection_time + cc.latency
        if cc.mode == "optimize":
            inp = self._optimization_input(fault, survivors)
            self.optimization = optimize_droop(inp)
            events = dispatch_coefficients(self.optimization, cc.comm_delay,
                                           now=dispatch_at, lines=survivors)
        else:
            events = [CoefficientUpdate(time=dispatch_at + cc.comm_delay,
                                        line=i,
                                        k_droop=self.settings[i].k_droop)
                      for i in survivors]
        for ev in events:
            self._push(ev)

    def _optimization_input(self, fault, survivors):
        scn = self.scn
        k_send, bounds, cur, rated = [], [], [], []
        for i in survivors:
            se = scn.lines[i].sending
            k_send.append((se.k_gov + se.damping_d) * se.s_base / scn.s_base)
            bounds.append((se.omega_min / se.omega_nominal,
                           se.omega_max / se.omega_nominal))
            cur.append(min(self.detector.baseline(i),
                           scn.lines[i].converter.p_rated / scn.s_base))
            rated.append(scn.lines[i].converter.p_rated / scn.s_base)
        re = scn.receiving
        bounds.append((re.omega_min / re.omega_nominal,
                       re.omega_max / re.omega_nominal))
        k_maxes = {scn.lines[i].converter.k_max for i in survivors}
        if len(k_maxes) > 1:
            log.warning("surviving lines carry different k_max; using min")
        return OptimizationInput(
            p_loss=fault.p_loss,
            k_g_send=tuple(k_send),
            k_g_recv=(re.k_gov + re.damping_d) * re.s_base / scn.s_base,
            p_dc_current=tuple(cur), p_dc_rated=tuple(rated),
            k_max=min(k_maxes), omega_bounds=tuple(bounds),
            penalty_m=scn.coordinator.penalty_m)

    def _derivative(self, y, p_orders):
        m = self.m
        dev = y[:m + 1]
        pgov = y[m + 1:2 * m + 2]
        pdc = y[2 * m + 2:]
        dp_line = pdc * self.live - self.p_sched  # delivered minus scheduled
        pnet = np.empty(m + 1)
        pnet[0] = dp_line.sum() + self.shed_total
        pnet[1:] = -dp_line
        pnet *= self.base_ratio
        d_dev, d_pgov = grd.coi_rates(dev, pgov, pnet, self.h,
                                      self.damp, self.kgov, self.tgov)
        d_pdc = (p_orders - pdc) / self.t_dc * self.live
        return np.concatenate([d_dev, d_pgov, d_pdc])

    def run(self):
        m, dt = self.m, self.dt
        decim = self.scn.sim.decimation
        y = np.concatenate([np.zeros(2 * (m + 1)), self.p_sched])
        dev_hist = np.zeros(self.n_steps + 1)
        w_re_nom = self.scn.receiving.omega_nominal

        rec_t, rec_dev, rec_pdc, rec_ord, rec_shed = [], [], [], [], []
        half = 0.5 * dt
        sixth = dt / 6.0

        for k in range(self.n_steps + 1):
            t = k * dt
            while self.queue and self.queue[0][0] <= t + 1e-12:
                _, _, ev = heapq.heappop(self.queue)
                self._apply(ev, t, y)

            dev_hist[k] = y[0]
            delivered = y[2 * m + 2:] * self.live
            if self.detector is not None and self.fault is None:
                self._coordinate(t, delivered)

            p_orders = np.empty(m)
            for i in range(m):
                if self.blocked[i]:
                    p_orders[i] = self.frozen_order[i]
                    continue
                if self.override[i] is not None:
                    w = self.override[i]
                else:
                    w = w_re_nom * (1.0 + dev_hist[max(0, k - self.delay_steps[i])])
                p_orders[i] = drp.droop_power_order(w, self.settings[i])
            self._last_orders = p_orders

            if k % decim == 0 or k == self.n_steps:
                if not np.isfinite(y).all():
                    raise NonFiniteError(f"non-finite state at t={t:.4f} s")
                rec_t.append(t)
                rec_dev.append(y[:m + 1].copy())
                rec_pdc.append(delivered.copy())
                rec_ord.append(p_orders.copy())
                rec_shed.append(self.shed_total)

            if k == self.n_steps:
                break

            k1 = self._derivative(y, p_orders)
            k2 = self._derivative(y + half * k1, p_orders)
            k3 = self._derivative(y + half * k2, p_orders)
            k4 = self._derivative(y + dt * k3, p_orders)
            y = y + sixth * (k1 + 2.0 * (k2 + k3) + k4)

        return self._build_trace(np.array(rec_t), np.array(rec_dev),
                                 np.array(rec_pdc), np.array(rec_ord),
                                 np.array(rec_shed))

    def _electrical_series(self, line, p_dc):
        """Closed-form DC electrical quantities for a delivered-power series."""
        cp = self.scn.lines[line].converter
        p_mw = np.maximum(p_dc, 0.0) * self.scn.s_base
        a = cp.v_d0_inv * math.cos(cp.gamma_ref)
        b = _K_XC * cp.n_bridges * cp.x_c_inv
        disc = a * a - 4.0 * b * p_mw / cp.n_poles
        if disc.min() < 0.0:
            bad = int(np.argmax(disc < 0.0))
            raise DcSolveError(
                f"line {self.scn.lines[line].name}: power "
                f"{p_mw[bad]:.1f} MW above deliverable maximum",
                t=float(self.trace_time[bad]), line=line)
        i_d = (a - np.sqrt(disc)) / (2.0 * b)
        v_d_inv = a - b * i_d
        v_d_rect = v_d_inv + cp.r_dc * i_d
        arg = (v_d_rect + _K_XC * cp.n_bridges * cp.x_c_rect * i_d) / cp.v_d0_rect
        if np.abs(arg).max() > 1.0 + 1e-9:
            bad = int(np.argmax(np.abs(arg) > 1.0 + 1e-9))
            raise DcSolveError(
                f"line {self.scn.lines[line].name}: no firing angle "
                f"reaches the required DC voltage",
                t=float(self.trace_time[bad]), line=line)
        alpha = np.arccos(np.clip(arg, -1.0, 1.0))
        out_lo = alpha < cp.alpha_min - 1e-9
        out_hi = alpha > cp.alpha_max + 1e-9
        live = p_dc > 0.0
        if np.any((out_lo | out_hi) & live):
            bad = int(np.argmax((out_lo | out_hi) & live))
            raise DcSolveError(
                f"line {self.scn.lines[line].name}: firing angle "
                f"{alpha[bad]:.4f} rad outside its limits",
                t=float(self.trace_time[bad]), line=line)
        return i_d, v_d_inv, alpha

    def _build_trace(self, t, dev, pdc, orders, shed):
        scn = self.scn
        self.trace_time = t
        omega = {"re": (1.0 + dev[:, 0]) * self.wnom[0]}
        omega_nom = {"re": float(self.wnom[0])}
        for i in range(self.m):
            name = f"se{i + 1}"
            omega[name] = (1.0 + dev[:, i + 1]) * self.wnom[i + 1]
            omega_nom[name] = float(self.wnom[i + 1])
        lines = {}
        for i, lc in enumerate(scn.lines):
            i_d, v_d_inv, alpha = self._electrical_series(i, pdc[:, i])
            lines[lc.name] = {
                "p_dc": pdc[:, i],
                "p_order": orders[:, i],
                "i_d": i_d,
                "v_d_inv": v_d_inv,
                "alpha": alpha,
            }
        trace = SimulationTrace(
            time=t, omega=omega, omega_nominal=omega_nom, lines=lines,
            shed=shed, events=self.applied,
            line_names=tuple(lc.name for lc in scn.lines),
            blocked_lines=tuple(self.blocked_log),
            pre_fault_power=self.p_sched.copy(),
            band=(scn.receiving.omega_min, scn.receiving.omega_max),
            fault=self.fault, optimization=self.optimization,
            detection_time=self.detection_time,
            dispatch_time=self.dispatch_time,
            survivor_lines=self.survivors)
        trace.metrics = compute_metrics(trace)
        return trace


def run(scenario):
    """Run one scenario to completion and return its trace."""
    return _Engine(scenario).run()
