"""Global coordination layer for emergency DC power support.

Detects a block fault from per-line power streams, solves the coordinated
droop-coefficient allocation as a convex quadratic program, and emits timed
coefficient-update (and load-shed) dispatch events.

The allocation minimizes the chained squared differences between the
surviving sending-end frequencies and the receiving-end frequency, plus a
large penalty on shed load, subject to the subsystems' steady-state primary
response, per-line headroom, frequency bounds, and a no-overcompensation
cap.  The program is solved over frequency deviations, per-line power
increments and shed power (all linear constraints); the droop coefficients
are recovered afterwards as increment / receiving-end deviation, which
avoids the bilinear coupling of coefficient times deviation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, InsufficientHistoryError
from .events import CoefficientUpdate, LoadShed
from .qp import solve_qp

_DEGENERATE_V = 1e-12


@dataclass(frozen=True)
class FaultInfo:
    """Identified block fault: which line, when, and how much power was lost."""

    line_index: int
    detection_time: float
    p_loss: float  # p.u.

    def __post_init__(self):
        if self.p_loss <= 0.0:
            raise ValueError("p_loss must be > 0")


@dataclass(frozen=True)
class OptimizationInput:
    """Data of one coefficient-allocation problem, all in system per-unit.

    ``omega_bounds`` holds one (low, high) pair per surviving sending end
    plus the receiving end last, in per-unit of nominal frequency.
    """

    p_loss: float
    k_g_send: tuple
    k_g_recv: float
    p_dc_current: tuple
    p_dc_rated: tuple
    k_max: float
    omega_bounds: tuple
    penalty_m: float = 1e6

    def __post_init__(self):
        m = len(self.k_g_send)
        if m < 1:
            raise ValueError("need at least one surviving line")
        if len(self.p_dc_current) != m or len(self.p_dc_rated) != m:
            raise ValueError("line array lengths disagree")
        if len(self.omega_bounds) != m + 1:
            raise ValueError("omega_bounds needs one pair per sending end "
                             "plus the receiving end")
        if self.p_loss < 0.0:
            raise ValueError("p_loss must be >= 0")
        if self.k_g_recv < 0.0 or any(k < 0.0 for k in self.k_g_send):
            raise ValueError("governor gains must be >= 0")
        if self.k_max < 1.0:
            raise ValueError("k_max must be >= 1")
        if self.penalty_m <= 0.0:
            raise ValueError("penalty_m must be > 0")
        for cur, rat in zip(self.p_dc_current, self.p_dc_rated):
            if cur > rat + 1e-9:
                raise ValueError("p_dc_current above p_dc_rated")
        for lo, hi in self.omega_bounds:
            if not lo < hi:
                raise ValueError("invalid omega bound pair")

    @property
    def headroom(self):
        """Per-line power increment ceiling, p.u."""
        return tuple(max(0.0, self.k_max * r - c)
                     for c, r in zip(self.p_dc_current, self.p_dc_rated))

    def to_dict(self):
        return {
            "p_loss": self.p_loss,
            "k_g_send": list(self.k_g_send),
            "k_g_recv": self.k_g_recv,
            "p_dc_current": list(self.p_dc_current),
            "p_dc_rated": list(self.p_dc_rated),
            "k_max": self.k_max,
            "omega_bounds": [list(b) for b in self.omega_bounds],
            "penalty_m": self.penalty_m,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            p_loss=float(d["p_loss"]),
            k_g_send=tuple(float(k) for k in d["k_g_send"]),
            k_g_recv=float(d["k_g_recv"]),
            p_dc_current=tuple(float(p) for p in d["p_dc_current"]),
            p_dc_rated=tuple(float(p) for p in d["p_dc_rated"]),
            k_max=float(d["k_max"]),
            omega_bounds=tuple((float(b[0]), float(b[1]))
                               for b in d["omega_bounds"]),
            penalty_m=float(d.get("penalty_m", 1e6)),
        )


@dataclass(frozen=True)
class OptimizationResult:
    """Solved allocation: coefficients, increments, shed, frequencies."""

    k_droop: tuple
    dp_dc: tuple
    dp_shed: float
    omega_pred: tuple          # per-unit, sending ends then receiving end
    objective: float
    active_constraints: tuple = ()
    degenerate: bool = False

    def to_dict(self):
        return {
            "k_droop": list(self.k_droop),
            "dp_dc": list(self.dp_dc),
            "dp_shed": self.dp_shed,
            "omega_pred": list(self.omega_pred),
            "objective": self.objective,
            "active_constraints": list(self.active_constraints),
            "degenerate": self.degenerate,
        }


def chain_objective(omega_send_pu, omega_re_pu, dp_shed, penalty_m):
    """Chained squared frequency differences plus the shed penalty."""
    seq = np.append(np.asarray(omega_send_pu, float), omega_re_pu)
    return float(np.sum(np.diff(seq) ** 2) + penalty_m * dp_shed)


def constraint_residuals(inp, dp_dc, dp_shed, omega_send_pu, omega_re_pu):
    """Violation magnitude of every allocation constraint, by name.

    Straight evaluation of the steady-state relations on the supplied
    values; independent of any solver internals.
    """
    dp = np.asarray(dp_dc, float)
    u = np.asarray(omega_send_pu, float) - 1.0
    v = float(omega_re_pu) - 1.0
    res = {}
    for i, (lo, hi) in enumerate(inp.omega_bounds[:-1]):
        res[f"omega_send_bounds[{i}]"] = max(0.0, (lo - 1.0) - u[i],
                                             u[i] - (hi - 1.0))
    lo, hi = inp.omega_bounds[-1]
    res["omega_re_bounds"] = max(0.0, (lo - 1.0) - v, v - (hi - 1.0))
    for i, k in enumerate(inp.k_g_send):
        res[f"send_response[{i}]"] = abs(k * (-u[i]) - dp[i])
    res["recv_response"] = abs(inp.k_g_recv * (-v)
                               - (inp.p_loss - dp.sum() - dp_shed))
    for i, cap in enumerate(inp.headroom):
        res[f"headroom[{i}]"] = max(0.0, dp[i] - cap)
        res[f"dp_nonneg[{i}]"] = max(0.0, -dp[i])
    res["shed_nonneg"] = max(0.0, -dp_shed)
    res["no_overcompensation"] = max(0.0, dp.sum() + dp_shed - inp.p_loss)
    return res


def _zero_result(inp, dp_shed=0.0, degenerate=False):
    m = len(inp.k_g_send)
    return OptimizationResult(
        k_droop=(0.0,) * m, dp_dc=(0.0,) * m, dp_shed=dp_shed,
        omega_pred=(1.0,) * (m + 1),
        objective=chain_objective([1.0] * m, 1.0, dp_shed, inp.penalty_m),
        active_constraints=(), degenerate=degenerate)


def _finish_result(inp, dp, shed, u, v, active):
    dp = np.maximum(np.asarray(dp, float), 0.0)
    shed = max(0.0, float(shed))
    if abs(v) < _DEGENERATE_V:
        if dp.max(initial=0.0) > 1e-9:
            # receiving end at nominal with nonzero increments requested:
            # coefficients undefined, fall back to shedding the whole loss
            return _zero_result(inp, dp_shed=inp.p_loss, degenerate=True)
        return _zero_result(inp, dp_shed=shed,
                            degenerate=shed > 1e-9 and inp.p_loss > 0.0)
    k = tuple(float(x) for x in dp / (-v))
    omega_pred = tuple(float(1.0 + ui) for ui in u) + (1.0 + v,)
    obj = chain_objective([1.0 + ui for ui in u], 1.0 + v, shed,
                          inp.penalty_m)
    return OptimizationResult(
        k_droop=k, dp_dc=tuple(float(x) for x in dp), dp_shed=shed,
        omega_pred=omega_pred, objective=obj,
        active_constraints=tuple(active))


def optimize_droop(inp):
    """Solve the coordinated droop-coefficient allocation.

    Variables are the per-unit frequency deviations of the surviving
    sending ends and the receiving end, the per-line power increments, and
    the shed power.  Raises InfeasibleError when the frequency bounds
    exclude the pre-fault operating point (nothing else can be infeasible:
    shedding the whole loss is always available).
    """
    m = len(inp.k_g_send)
    if inp.p_loss == 0.0:
        return _zero_result(inp)

    lo = np.array([b[0] - 1.0 for b in inp.omega_bounds])
    hi = np.array([b[1] - 1.0 for b in inp.omega_bounds])
    for j in range(m + 1):
        if lo[j] > 0.0 or hi[j] < 0.0:
            name = "receiving end" if j == m else f"sending end {j}"
            raise InfeasibleError(
                f"frequency bounds of {name} exclude nominal: "
                f"[{inp.omega_bounds[j][0]}, {inp.omega_bounds[j][1]}] p.u.")

    caps = np.array(inp.headroom)
    k_send = np.array(inp.k_g_send, float)
    n = 2 * m + 2  # u_0..u_{m-1}, v, d_0..d_{m-1}, s
    iv, i_s = m, 2 * m + 1

    c_rows = np.zeros((m, n))
    for i in range(m - 1):
        c_rows[i, i] = 1.0
        c_rows[i, i + 1] = -1.0
    c_rows[m - 1, m - 1] = 1.0
    c_rows[m - 1, iv] = -1.0
    h = 2.0 * c_rows.T @ c_rows
    g = np.zeros(n)
    g[i_s] = inp.penalty_m

    a_eq = np.zeros((m + 1, n))
    b_eq = np.zeros(m + 1)
    for i in range(m):  # sending-end response: k_g * (-u_i) = d_i
        a_eq[i, i] = k_send[i]
        a_eq[i, m + 1 + i] = 1.0
    a_eq[m, iv] = -inp.k_g_recv  # receiving response closes the balance
    a_eq[m, m + 1:2 * m + 1] = 1.0
    a_eq[m, i_s] = 1.0
    b_eq[m] = inp.p_loss

    rows, rhs, labels = [], [], []

    def add(row, b, label):
        rows.append(row)
        rhs.append(b)
        labels.append(label)

    for i in range(m):
        e = np.zeros(n); e[i] = 1.0
        add(e, hi[i], f"omega_send_upper[{i}]")
        add(-e, -lo[i], f"omega_send_lower[{i}]")
    e = np.zeros(n); e[iv] = 1.0
    add(e, hi[m], "omega_re_upper")
    add(-e, -lo[m], "omega_re_lower")
    for i in range(m):
        e = np.zeros(n); e[m + 1 + i] = 1.0
        add(e, caps[i], f"headroom[{i}]")
        add(-e, 0.0, f"dp_nonneg[{i}]")
    e = np.zeros(n); e[i_s] = 1.0
    add(-e, 0.0, "shed_nonneg")
    e = np.zeros(n); e[m + 1:2 * m + 1] = 1.0; e[i_s] = 1.0
    add(e, inp.p_loss, "no_overcompensation")

    x0 = np.zeros(n)
    x0[i_s] = inp.p_loss  # shed the whole loss: always feasible
    x, _, _ = solve_qp(h, g, a_eq, b_eq, np.array(rows), np.array(rhs), x0)

    u = x[:m]
    v = float(x[iv])
    dp = x[m + 1:2 * m + 1]
    shed = float(x[i_s])
    active = [lab for row, b, lab in zip(rows, rhs, labels)
              if abs(row @ x - b) <= 1e-9 * (1.0 + abs(b))]
    result = _finish_result(inp, dp, shed, u, v, active)

    worst = max(constraint_residuals(inp, result.dp_dc, result.dp_shed,
                                     result.omega_pred[:-1],
                                     result.omega_pred[-1]).values())
    if worst > 1e-8:
        raise RuntimeError(f"allocation residual {worst:.3e} above tolerance")
    return result


def brute_force_droop(inp, resolution=0.005):
    """Grid-search oracle for the coefficient allocation (<= 3 lines).

    Exhaustive scan of the per-line increments and the shed power on a
    regular grid (grid caps and the analytic minimal-shed point are included
    as extra candidates), with feasibility filtering and direct objective
    evaluation.  Returns the best grid point.
    """
    m = len(inp.k_g_send)
    if m > 3:
        raise ValueError("grid search limited to 3 surviving lines")
    if resolution <= 0.0:
        raise ValueError("resolution must be > 0")
    if inp.p_loss == 0.0:
        return _zero_result(inp)
    if inp.k_g_recv <= 0.0:
        raise ValueError("grid oracle requires k_g_recv > 0")

    lo = np.array([b[0] - 1.0 for b in inp.omega_bounds])
    hi = np.array([b[1] - 1.0 for b in inp.omega_bounds])
    caps = np.array(inp.headroom)
    k_send = np.array(inp.k_g_send, float)

    grids = []
    for i in range(m):
        top = min(caps[i], inp.p_loss)
        if k_send[i] <= 0.0 or top <= 0.0:
            grids.append(np.array([0.0]))
        else:
            pts = np.arange(0.0, top, resolution)
            grids.append(np.append(pts, top))
    # the per-combo minimal-shed candidate below carries the fine structure
    # of the shed axis; the explicit grid only needs to cover small-penalty
    # corner cases, so it may stay coarse
    s_step = max(resolution, inp.p_loss / 50.0)
    s_grid = np.append(np.arange(0.0, inp.p_loss, s_step), inp.p_loss)

    n_combo = int(np.prod([len(gr) for gr in grids]))
    if n_combo * (len(s_grid) + 1) > 5e7:
        raise ValueError("grid too fine; coarsen the resolution")

    mesh = np.meshgrid(*grids, indexing="ij")
    d_all = np.stack([mm.ravel() for mm in mesh], axis=1)  # (n_combo, m)

    best = (math.inf, None)
    chunk = 200_000
    for start in range(0, n_combo, chunk):
        d = d_all[start:start + chunk]
        sum_d = d.sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            u = np.where(k_send > 0.0, -d / np.where(k_send > 0.0, k_send, 1.0), 0.0)
        feas = np.all((u >= lo[:m] - 1e-12) & (u <= hi[:m] + 1e-12), axis=1)
        feas &= sum_d <= inp.p_loss + 1e-12

        # shed candidates: the regular grid plus the per-combo minimum that
        # keeps the receiving-end frequency inside its bounds
        s_min = np.maximum(0.0, inp.p_loss - sum_d + inp.k_g_recv * lo[m])
        s_top = np.minimum(inp.p_loss - sum_d,
                           inp.p_loss - sum_d + inp.k_g_recv * hi[m])
        s_cand = np.concatenate(
            [np.broadcast_to(s_grid, (len(d), len(s_grid))), s_min[:, None]],
            axis=1)
        ok = (feas[:, None]
              & (s_cand >= s_min[:, None] - 1e-12)
              & (s_cand <= s_top[:, None] + 1e-12)
              & (s_cand >= -1e-15))
        v = (sum_d[:, None] + s_cand - inp.p_loss) / inp.k_g_recv
        if m > 1:
            chain_u = np.sum(np.diff(u, axis=1) ** 2, axis=1)[:, None]
        else:
            chain_u = 0.0
        obj = chain_u + (u[:, -1][:, None] - v) ** 2 + inp.penalty_m * s_cand
        obj = np.where(ok, obj, math.inf)
        flat = int(np.argmin(obj))
        val = obj.ravel()[flat]
        if val < best[0]:
            r, c = np.unravel_index(flat, obj.shape)
            best = (float(val),
                    (d[r].copy(), float(s_cand[r, c]), u[r].copy(),
                     float(v[r, c])))

    if best[1] is None:
        raise InfeasibleError("no feasible grid point")
    d_b, s_b, u_b, v_b = best[1]
    return _finish_result(inp, d_b, s_b, u_b, v_b, active=())


class BlockDetector:
    """Streaming block-fault detector over uniformly sampled line powers.

    A line is flagged once its power stays below ``threshold`` times its
    running pre-fault mean for ``hold`` seconds without interruption; the
    lost power is that pre-fault mean.
    """

    def __init__(self, n_lines, dt, threshold, hold):
        if threshold <= 0.0:
            raise ValueError("threshold must be > 0")
        if hold < 0.0 or dt <= 0.0:
            raise ValueError("need hold >= 0 and dt > 0")
        self.dt = dt
        self.threshold = threshold
        self.hold = hold
        self._mean = np.zeros(n_lines)
        self._count = np.zeros(n_lines, dtype=int)
        self._streak = np.zeros(n_lines, dtype=int)

    def baseline(self, line):
        """Running pre-fault mean power of one line, p.u."""
        return float(self._mean[line])

    def update(self, t, powers):
        """Feed one sample row; returns FaultInfo on first detection."""
        for i, p in enumerate(powers):
            if self._count[i] == 0:
                self._mean[i] = p
                self._count[i] = 1
                continue
            if self._mean[i] > 0.0 and p < self.threshold * self._mean[i]:
                self._streak[i] += 1
                if (self._streak[i] - 1) * self.dt >= self.hold - 1e-12:
                    return FaultInfo(line_index=i, detection_time=t,
                                     p_loss=self._mean[i])
            else:
                self._streak[i] = 0
                self._count[i] += 1
                self._mean[i] += (p - self._mean[i]) / self._count[i]
        return None


def detect_block(times, powers, threshold, hold):
    """Scan a recorded power series for a block fault.

    ``times`` must be uniformly spaced; ``powers`` has one column per line.
    Returns FaultInfo for the first line that qualifies, else None.
    """
    times = np.asarray(times, float)
    powers = np.asarray(powers, float)
    if powers.ndim == 1:
        powers = powers[:, None]
    if len(times) < 2:
        raise InsufficientHistoryError("need at least two samples")
    dt = float(times[1] - times[0])
    if dt <= 0.0 or np.abs(np.diff(times) - dt).max() > 1e-9 * max(dt, 1.0):
        raise ValueError("samples must be uniformly spaced")
    if times[-1] - times[0] < hold:
        raise InsufficientHistoryError(
            f"series spans {times[-1] - times[0]:.4f} s, "
            f"shorter than the {hold:.4f} s hold window")
    det = BlockDetector(powers.shape[1], dt, threshold, hold)
    for k in range(len(times)):
        fault = det.update(float(times[k]), powers[k])
        if fault is not None:
            return fault
    return None


def dispatch_coefficients(result, comm_delay, now, lines=None):
    """Timed dispatch events for an allocation result.

    One coefficient update per surviving line at ``now + comm_delay``, plus
    a load-shed event when the result sheds.  ``lines`` maps result
    positions to scenario line indices (defaults to 0..m-1).
    """
    if comm_delay < 0.0:
        raise ValueError("comm_delay must be >= 0")
    if lines is None:
        lines = list(range(len(result.k_droop)))
    t = now + comm_delay
    events = [CoefficientUpdate(time=t, line=idx, k_droop=k)
              for idx, k in zip(lines, result.k_droop)]
    if result.dp_shed > 1e-12:
        events.append(LoadShed(time=t, amount=result.dp_shed))
    return events
