"""Numerical reference for the output node ODE.

The output capacitor is driven through up to four time-varying resistors.
Nothing here uses the piecewise approximations of :mod:`delay_core`; the
resistances are integrated as they are.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

from .delay_core import CGateParams, GateParams, ModeKind
from .errors import NoCrossingError, StiffnessError
from .sim_engine import Schedule

DEFAULT_TOL = 1e-6
HORIZON_FACTOR = 20.0


@dataclass(frozen=True)
class ResistanceProfile:
    """One transistor.

    Switched on at ``t_switch`` the resistance is ``alpha/(t - t_switch) +
    r_on``; switched off it grows as ``beta*(t - t_switch) + r_on``, where
    ``beta = inf`` means it is gone instantly.
    """

    alpha: float
    r_on: float
    beta: float = math.inf
    t_switch: float = -math.inf
    on: bool = True

    def __post_init__(self):
        if not self.r_on > 0:
            raise ValueError("r_on must be > 0")
        if not self.alpha >= 0:
            raise ValueError("alpha must be >= 0")
        if not self.beta > 0:
            raise ValueError("beta must be > 0 or inf")

    @property
    def constant(self) -> bool:
        if self.on:
            return self.alpha == 0 or math.isinf(self.t_switch)
        return math.isinf(self.beta)

    def conductance(self, t: float) -> float:
        s = t - self.t_switch
        if self.on:
            if math.isinf(s) or self.alpha == 0:
                return 1.0 / self.r_on
            if s <= 0:
                return 0.0
            return s / (self.alpha + self.r_on * s)
        if math.isinf(self.beta):
            return 0.0
        return 1.0 / (self.beta * max(s, 0.0) + self.r_on)


def _series(g1: float, g2: float) -> float:
    if g1 == 0.0 or g2 == 0.0:
        return 0.0
    return g1 * g2 / (g1 + g2)


@dataclass(frozen=True)
class ModeOde:
    """``r1``/``r2`` form the series path to V_DD.  With ``topology="nor"``
    ``r3`` and ``r4`` are parallel paths to ground; with ``"c"`` they are in
    series."""

    r1: ResistanceProfile
    r2: ResistanceProfile
    r3: ResistanceProfile
    r4: ResistanceProfile
    c: float
    v_dd: float
    topology: str = "nor"

    def __post_init__(self):
        if self.topology not in ("nor", "c"):
            raise ValueError(f"unknown topology {self.topology!r}")

    def conductances(self, t: float) -> tuple[float, float]:
        up = _series(self.r1.conductance(t), self.r2.conductance(t))
        g3, g4 = self.r3.conductance(t), self.r4.conductance(t)
        down = g3 + g4 if self.topology == "nor" else _series(g3, g4)
        return up, down

    def rhs(self, t: float, v: float) -> float:
        up, down = self.conductances(t)
        return ((self.v_dd - v) * up - v * down) / self.c

    @property
    def constant(self) -> bool:
        return all(r.constant for r in (self.r1, self.r2, self.r3, self.r4))

    @property
    def time_scale(self) -> float:
        return self.c * max(r.r_on for r in (self.r1, self.r2, self.r3, self.r4))

    @property
    def horizon(self) -> float:
        return HORIZON_FACTOR * self.c * sum(r.r_on for r in (self.r1, self.r2, self.r3, self.r4))

    def closed_form(self, v0: float):
        """(v_inf, rate) of the exponential solution; only for constant modes."""
        up, down = self.conductances(0.0)
        total = up + down
        if total == 0:
            return v0, 0.0
        return self.v_dd * up / total, total / self.c


@dataclass(frozen=True)
class SampledTrajectory:
    times: np.ndarray
    volts: np.ndarray
    errors: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("sample times must be strictly increasing")


def _solve(ode: ModeOde, v0: float, t_end: float, rtol: float, events=None):
    scale = ode.time_scale

    def f(s, y):
        return [scale * ode.rhs(s * scale, y[0])]

    sol = solve_ivp(f, (0.0, t_end / scale), [v0], method="DOP853", rtol=rtol,
                    atol=rtol * ode.v_dd * 1e-3, dense_output=True, events=events)
    if sol.status == -1:
        raise StiffnessError(sol.message, float(sol.t[-1] * scale), float(sol.y[0, -1]))
    return sol, scale


def integrate_mode(ode: ModeOde, v0: float, t_end: float | None = None,
                   tol: float = DEFAULT_TOL, n_samples: int = 201) -> SampledTrajectory:
    """Integrate one mode from ``v0``; ``t`` is measured from the mode start.

    The error column compares against a solve at a 64 times tighter
    tolerance, relative to ``v_dd``.
    """
    if not 0 < tol <= 1e-3:
        raise ValueError("tol must lie in (0, 1e-3]")
    if t_end is None:
        t_end = ode.horizon
    if not t_end > 0:
        raise ValueError("t_end must be > 0")
    # per-step control makes the global error grow like tol**(8/9); the
    # sharpened tolerance restores (slightly better than) proportionality
    rtol = tol * (tol / 1e-3) ** 0.25
    sol, scale = _solve(ode, v0, t_end, rtol)
    ref, _ = _solve(ode, v0, t_end, rtol / 64)
    s = np.linspace(0.0, t_end / scale, n_samples)
    v = sol.sol(s)[0]
    vr = ref.sol(s)[0]
    v = np.clip(v, 0.0, ode.v_dd)
    return SampledTrajectory(s * scale, v, np.abs(v - vr) / ode.v_dd)


class _Segment:
    """Voltage of one mode from its start time ``t0``, evaluated lazily.

    Constant modes use their exponential solution.  A mode with a single
    conducting path to one rail has the solution
    ``V = V_rail + (v0 - V_rail) exp(-G(t)/C)`` with ``G`` the integral of
    the path conductance, evaluated by adaptive quadrature.  Anything else
    goes through the ODE integrator.
    """

    def __init__(self, ode: ModeOde, t0: float, v0: float, tol: float):
        self.ode, self.t0, self.v0, self.tol = ode, t0, v0, tol
        self._sol = None
        self.route = "ode"
        if ode.constant:
            self.route = "exp"
            self.v_inf, self.rate = ode.closed_form(v0)
        else:
            up, down = _paths(ode)
            if up is None and down is None:
                # floating output: held at v0
                self.route = "exp"
                self.v_inf, self.rate = v0, 0.0
            elif up is None or down is None:
                self.route = "quad"
                self.path = up if up is not None else down
                self.rail = ode.v_dd if up is not None else 0.0

    def _solution(self):
        if self._sol is None:
            half = self.ode.v_dd / 2

            def cross(s, y):
                return y[0] - half

            self._sol = _solve(self.ode, self.v0, self.ode.horizon, self.tol, events=cross)
        return self._sol

    def _g_integral(self, dt: float) -> float:
        value, _ = quad(self.path, 0.0, dt, epsabs=0.0, epsrel=self.tol * 1e-2, limit=200)
        return value

    def voltage(self, t: float) -> float:
        dt = t - self.t0
        if dt <= 0:
            return self.v0
        if self.route == "exp":
            return self.v_inf + (self.v0 - self.v_inf) * math.exp(-self.rate * dt)
        if self.route == "quad":
            g = self._g_integral(dt)
            return self.rail + (self.v0 - self.rail) * math.exp(-g / self.ode.c)
        (sol, scale) = self._solution()
        s = min(dt / scale, sol.t[-1])
        return float(np.clip(sol.sol(s)[0], 0.0, self.ode.v_dd))

    def crossing(self) -> float | None:
        """Time (relative to ``t0``) at which V_DD/2 is crossed, if ever."""
        half = self.ode.v_dd / 2
        if self.v0 == half:
            return 0.0
        if self.route == "exp":
            if self.rate == 0 or (self.v0 - half) * (self.v_inf - half) >= 0:
                return None
            return math.log((self.v0 - self.v_inf) / (half - self.v_inf)) / self.rate
        if self.route == "quad":
            if (self.v0 - half) * (self.rail - half) >= 0:
                return None
            target = self.ode.c * math.log((self.v0 - self.rail) / (half - self.rail))
            hi = self.ode.time_scale
            while self._g_integral(hi) < target:
                hi *= 2
                if hi > 1e6 * self.ode.horizon:
                    return None
            return brentq(lambda x: self._g_integral(x) - target, 0.0, hi,
                          xtol=self.ode.time_scale * self.tol * 1e-3, rtol=1e-15)
        sol, scale = self._solution()
        hits = sol.t_events[0]
        if len(hits) == 0:
            return None
        return float(hits[0] * scale)


def _paths(ode: ModeOde):
    """Conductance callables of the live pull-up/pull-down paths (None if open)."""
    r1, r2, r3, r4 = ode.r1, ode.r2, ode.r3, ode.r4

    def off(r):
        return not r.on and math.isinf(r.beta)

    up = None if off(r1) or off(r2) else (
        lambda t: _series(r1.conductance(t), r2.conductance(t)))
    if ode.topology == "nor":
        down = None if off(r3) and off(r4) else (
            lambda t: r3.conductance(t) + r4.conductance(t))
    else:
        down = None if off(r3) or off(r4) else (
            lambda t: _series(r3.conductance(t), r4.conductance(t)))
    return up, down


# -- mapping gate states to resistor networks ------------------------------------


def _nor_ode(params: GateParams, a: int, b: int, t_fall, tol=None) -> ModeOde:
    p = params
    pa = ResistanceProfile(p.alpha1, p.r, t_switch=t_fall[0], on=(a == 0))
    pb = ResistanceProfile(p.alpha2, p.r, t_switch=t_fall[1], on=(b == 0))
    na = ResistanceProfile(0.0, p.r_nA, on=(a == 1))
    nb = ResistanceProfile(0.0, p.r_nB, on=(b == 1))
    return ModeOde(pa, pb, na, nb, p.c, p.v_dd, "nor")


def _cgate_ode(params: CGateParams, a: int, b: int, t_rise, t_fall) -> ModeOde:
    p = params
    ua = ResistanceProfile(p.alpha1, p.r_n, t_switch=t_rise[0], on=(a == 1))
    ub = ResistanceProfile(p.alpha2, p.r_n, t_switch=t_rise[1], on=(b == 1))
    da = ResistanceProfile(p.alpha4, p.r_p, t_switch=t_fall[0], on=(a == 0))
    db = ResistanceProfile(p.alpha3, p.r_p, t_switch=t_fall[1], on=(b == 0))
    return ModeOde(ua, ub, da, db, p.c, p.v_dd, "c")


def gate_ode(params, a: int, b: int, t_rise=(-math.inf, -math.inf),
             t_fall=(-math.inf, -math.inf)) -> ModeOde:
    """Resistor network of a NOR or C gate given pins and last switch times.

    Times are relative to the start of the mode.
    """
    if isinstance(params, CGateParams):
        return _cgate_ode(params, a, b, t_rise, t_fall)
    return _nor_ode(params, a, b, t_fall)


def _pins_after(kind: ModeKind):
    return kind.target


def oracle_delay(mode_sequence: Sequence[ModeKind], delta: float, v0: float,
                 params, tol: float = 1e-9) -> float:
    """Threshold crossing of two composed modes, measured from the first switch.

    The first mode starts at time 0 from the source state of
    ``mode_sequence[0]`` (long settled) with output ``v0``; the second
    starts at ``|delta|``.  ``delta = inf`` means the second switch never
    comes; ``delta = -inf``/``inf`` with the crossing in the second mode is
    expressed by passing a one-element sequence whose source state already
    carries the long-settled first switch.
    """
    seq = list(mode_sequence)
    if not 1 <= len(seq) <= 2:
        raise ValueError("mode_sequence must have one or two modes")
    t_rise = [-math.inf, -math.inf]
    t_fall = [-math.inf, -math.inf]
    state = seq[0].source
    starts = [0.0] + ([abs(delta)] if len(seq) == 2 else [])
    t_cur, v_cur = 0.0, v0
    for idx, (kind, t0) in enumerate(zip(seq, starts)):
        if kind.source != state:
            raise ValueError(f"{kind.name} does not continue from state {state}")
        if idx > 0:
            if math.isinf(t0):
                raise NoCrossingError("crossing never happens before the second switch")
            v_cur = seg.voltage(t0)
        new = kind.target
        for i in range(2):
            if state[i] == 0 and new[i] == 1:
                t_rise[i] = t0
            elif state[i] == 1 and new[i] == 0:
                t_fall[i] = t0
        state = new
        ode = gate_ode(params, *state, [t - t0 for t in t_rise], [t - t0 for t in t_fall])
        seg = _Segment(ode, t0, v_cur, tol)
        hit = seg.crossing()
        is_last = idx == len(seq) - 1
        if hit is not None and (is_last or t0 + hit <= starts[idx + 1]):
            return t0 + hit
    raise NoCrossingError("composed trajectory never crosses V_DD/2")


_RISING_OUTPUT = {+1: (ModeKind.DOWN_MINUS, ModeKind.DOWNDOWN_PLUS),
                  -1: (ModeKind.DOWN_PLUS, ModeKind.DOWNDOWN_MINUS)}
_FALLING_OUTPUT = {+1: (ModeKind.UP_MINUS, ModeKind.UPUP_PLUS),
                   -1: (ModeKind.UP_PLUS, ModeKind.UPUP_MINUS)}


def oracle_mis_delay(direction: str, delta: float, v0: float, params,
                     tol: float = 1e-9) -> float:
    """Reference NOR delay with the closed-form conventions.

    Falling output: from the earlier rising input.  Rising output: from the
    later falling input.  Infinite ``delta`` is supported.
    """
    sign = 1 if delta >= 0 else -1
    if direction == "falling":
        seq = _FALLING_OUTPUT[sign]
        if math.isinf(delta):
            return oracle_delay(seq[:1], delta, v0, params, tol)
        return oracle_delay(seq, delta, v0, params, tol)
    if direction == "rising":
        seq = _RISING_OUTPUT[sign]
        if math.isinf(delta):
            # the earlier input has been low forever: output already discharged
            # to 0 and its pMOS fully on
            return oracle_delay(seq[1:], 0.0, 0.0, params, tol)
        return oracle_delay(seq, delta, v0, params, tol) - abs(delta)
    raise ValueError(f"direction must be 'rising' or 'falling', got {direction!r}")


_C_RISING = {+1: (ModeKind.UP_MINUS, ModeKind.UPUP_PLUS),
             -1: (ModeKind.UP_PLUS, ModeKind.UPUP_MINUS)}
_C_FALLING = {+1: (ModeKind.DOWN_MINUS, ModeKind.DOWNDOWN_PLUS),
              -1: (ModeKind.DOWN_PLUS, ModeKind.DOWNDOWN_MINUS)}


def oracle_c_delay(direction: str, delta: float, v0: float, params: CGateParams,
                   tol: float = 1e-9) -> float:
    """Reference C-gate delay from the later input (output held in between)."""
    sign = 1 if delta >= 0 else -1
    table = {"rising": _C_RISING, "falling": _C_FALLING}.get(direction)
    if table is None:
        raise ValueError(f"direction must be 'rising' or 'falling', got {direction!r}")
    seq = table[sign]
    if math.isinf(delta):
        return oracle_delay(seq[1:], 0.0, v0, params, tol)
    return oracle_delay(seq, delta, v0, params, tol) - abs(delta)


# -- reference channel for the simulator ------------------------------------------


class OracleChannel:
    """Simulator channel that integrates the exact ODE between input events.

    Works for NOR and C gates; wrap with ``DualChannel``/``TiedChannel`` for
    NAND and inverters.  Constant-coefficient modes use their exponential
    solution directly.
    """

    def __init__(self, params, tol: float = 1e-8):
        self.p = params
        self.tol = tol
        self.defer = params.delta_min
        self.is_c = isinstance(params, CGateParams)

    def evaluate(self, a, b, out=None):
        if self.is_c:
            return a if a == b else out
        return int(not (a or b))

    def reset(self, t, a, b, out):
        self.a, self.b = a, b
        self.t_rise = [-math.inf, -math.inf]
        self.t_fall = [-math.inf, -math.inf]
        self.out = out
        v = self.p.v_dd if out else 0.0
        self.seg = _Segment(self._ode(t), t, v, self.tol)

    def _ode(self, t0):
        return gate_ode(self.p, self.a, self.b, [x - t0 for x in self.t_rise],
                        [x - t0 for x in self.t_fall])

    def voltage(self, t):
        return self.seg.voltage(t)

    def switch(self, t, a, b):
        v = self.seg.voltage(t)
        for i, (o, n) in enumerate(zip((self.a, self.b), (a, b))):
            if o == 0 and n == 1:
                self.t_rise[i] = t
            elif o == 1 and n == 0:
                self.t_fall[i] = t
        self.a, self.b = a, b
        self.seg = _Segment(self._ode(t), t, v, self.tol)
        hit = self.seg.crossing()
        if hit is None:
            return Schedule("all", None)
        return Schedule("all", (t + hit, 1 if v < self.p.v_dd / 2 else 0))

    def commit(self, t, value):
        self.out = value


def oracle_channel(gate, params, tol: float = 1e-8):
    """Channel factory for :func:`sim_engine.simulate`."""
    from .sim_engine import DualChannel, TiedChannel

    base = OracleChannel(params, tol)
    if gate.kind == "NAND2":
        return DualChannel(base)
    if gate.kind == "INV":
        return TiedChannel(base)
    return base
