"""Event-driven gate-level simulation with pluggable delay channels.

A *channel* models one gate's input-to-output behavior.  The engine only
relies on this small duck-typed protocol:

``defer``
    time by which input changes are delayed before the channel sees them
``evaluate(a, b, out)``
    the gate's Boolean function (``out`` is the held value, for C gates)
``reset(t, a, b, out)``
    put the channel in the steady state for the given pins
``switch(t, a, b) -> Schedule``
    react to new pin values at time ``t``
``commit(t, value)``
    called when one of the channel's scheduled output events fires
"""

from __future__ import annotations

import heapq
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Mapping, NamedTuple

from . import delay_core as dc
from .delay_core import CGateParams, GateParams
from .errors import (
    ModelError,
    NegativeDelayError,
    NoCrossingError,
    OscillationError,
    SimulationError,
)

GATE_KINDS = ("NOR2", "NAND2", "CGATE2", "INV")
EVENT_BUDGET = 10_000


@dataclass(frozen=True)
class GateSpec:
    id: str
    kind: str
    paramset: str
    net_a: str
    net_b: str | None
    net_out: str

    @property
    def input_nets(self) -> tuple[str, ...]:
        return (self.net_a,) if self.net_b is None else (self.net_a, self.net_b)


@dataclass(frozen=True)
class Netlist:
    gates: tuple[GateSpec, ...] = ()
    inputs: tuple[str, ...] = ()
    outputs: tuple[str, ...] = ()

    @property
    def nets(self) -> tuple[str, ...]:
        seen = dict.fromkeys(self.inputs)
        for g in self.gates:
            seen.update(dict.fromkeys(g.input_nets))
            seen[g.net_out] = None
        seen.update(dict.fromkeys(self.outputs))
        return tuple(seen)

    def driver_of(self, net: str) -> GateSpec | None:
        for g in self.gates:
            if g.net_out == net:
                return g
        return None


@dataclass(frozen=True)
class DigitalTrace:
    """Threshold-crossing history of one net.

    ``times`` are the transition instants; directions alternate starting
    from ``initial``.  ``t_start``/``t_end`` delimit the observation window
    (``t_end`` may be unknown).
    """

    net: str
    initial: int
    times: tuple[float, ...] = ()
    t_start: float = 0.0
    t_end: float | None = None

    def __post_init__(self):
        if self.initial not in (0, 1):
            raise ValueError(f"initial value must be 0 or 1, got {self.initial!r}")
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        prev = self.t_start
        for i, t in enumerate(self.times):
            if not math.isfinite(t) or t < prev or (i and t == prev):
                raise ValueError(f"{self.net}: transition times must be finite and "
                                 f"strictly increasing from t_start (index {i})")
            prev = t
        if self.t_end is not None and self.times and self.times[-1] > self.t_end:
            raise ValueError(f"{self.net}: transition after t_end")

    @property
    def values(self) -> tuple[int, ...]:
        return tuple((self.initial + i + 1) % 2 for i in range(len(self.times)))

    @property
    def final(self) -> int:
        return (self.initial + len(self.times)) % 2

    def value_at(self, t: float) -> int:
        n = sum(1 for x in self.times if x <= t)
        return (self.initial + n) % 2


class Schedule(NamedTuple):
    """A channel's answer to an input change.

    ``cancel`` is ``"all"`` (drop every pending output event), ``"after"``
    (drop those not earlier than the new event) or ``"none"``.
    """

    cancel: str = "all"
    event: tuple[float, int] | None = None


def _nor(a, b, out=None):
    return int(not (a or b))


def _nand(a, b, out=None):
    return int(not (a and b))


def _celem(a, b, out):
    return a if a == b else out


# -- hybrid channels -------------------------------------------------------------


class HybridNorChannel:
    """NOR output driven by the closed-form trajectories.

    The charging trajectory needs the separation of the two pMOS switch-on
    times; by default that is ``t_fall_B - t_fall_A`` (``delta_rule =
    "resistor_age"``).  ``"same_input"`` instead uses the time since the
    switching input's previous transition when the other input did not take
    part, which is the single-input heuristic of the closed-form model.
    """

    evaluate = staticmethod(_nor)

    def __init__(self, params: GateParams, delta_rule: str = "resistor_age"):
        if delta_rule not in ("resistor_age", "same_input"):
            raise ValueError(f"unknown delta rule {delta_rule!r}")
        self.p = params
        self.defer = params.delta_min
        self.delta_rule = delta_rule

    def reset(self, t, a, b, out):
        self.a, self.b = a, b
        self.t_fall = [-math.inf, -math.inf]
        self.t_rise = [-math.inf, -math.inf]
        self.prev_state = (a, b)
        self.out = out
        self.ts = t
        self.v_switch = self.p.v_dd if out else 0.0
        self.seg = "steady"
        self.seg_delta = math.inf

    def voltage(self, t: float) -> float:
        dt = t - self.ts
        p = self.p
        if self.seg == "steady" or dt == 0:
            return self.v_switch
        if self.seg == "charge":
            return dc.v_charging(dt, self.seg_delta, self.v_switch, p)
        return self.v_switch * math.exp(-dt * self._discharge_rate())

    def _discharge_rate(self) -> float:
        p = self.p
        return self.a / (p.c * p.r_nA) + self.b / (p.c * p.r_nB)

    def _charge_delta(self, t, pin) -> float:
        fa, fb = self.t_fall
        if self.delta_rule == "same_input" and self.prev_state in ((1, 0), (0, 1)):
            # previous state entered by this same input rising: single-input case
            entered_by_same = (self.t_rise[pin] >= self.t_fall[1 - pin])
            if entered_by_same and math.isfinite(self.t_rise[pin]):
                w = t - self.t_rise[pin]
                return -w if pin == 0 else w
        if math.isinf(fa) and math.isinf(fb):
            return math.inf
        return fb - fa

    def switch(self, t, a, b) -> Schedule:
        v = min(self.p.v_dd, max(0.0, self.voltage(t)))
        old = (self.a, self.b)
        pin = 0 if a != self.a else 1
        for i, (o, n) in enumerate(zip(old, (a, b))):
            if o == 1 and n == 0:
                self.t_fall[i] = t
            elif o == 0 and n == 1:
                self.t_rise[i] = t
        self.prev_state = old
        self.a, self.b = a, b
        self.ts, self.v_switch = t, v
        half = self.p.v_dd / 2
        if a == 0 and b == 0:
            self.seg = "charge"
            self.seg_delta = self._charge_delta(t, pin)
            if v >= half:
                return Schedule("all", None)
            try:
                d = dc.rising_delay_from_switch(self.seg_delta, v, self.p)
            except NegativeDelayError:
                d = 0.0
            except NoCrossingError:
                return Schedule("all", None)
            return Schedule("all", (t + d, 1))
        self.seg = "discharge"
        if v <= half:
            return Schedule("all", None)
        d = math.log(2 * v / self.p.v_dd) / self._discharge_rate()
        return Schedule("all", (t + d, 0))

    def commit(self, t, value):
        self.out = value


class HybridCGateChannel:
    """Muller C gate: charge on (1,1), discharge on (0,0), hold otherwise."""

    evaluate = staticmethod(_celem)

    def __init__(self, params: CGateParams):
        self.p = params
        self.defer = params.delta_min

    def reset(self, t, a, b, out):
        self.a, self.b = a, b
        self.t_rise = [-math.inf, -math.inf]
        self.t_fall = [-math.inf, -math.inf]
        self.out = out
        self.ts = t
        self.v_switch = self.p.v_dd if out else 0.0
        self.seg = "hold"
        self.seg_delta = math.inf

    def voltage(self, t):
        dt = t - self.ts
        if self.seg == "hold" or dt == 0:
            return self.v_switch
        if self.seg == "charge":
            return dc.c_v_charging(dt, self.seg_delta, self.v_switch, self.p)
        return dc.c_v_discharging(dt, self.seg_delta, self.v_switch, self.p)

    @staticmethod
    def _sep(times):
        if math.isinf(times[0]) and math.isinf(times[1]):
            return math.inf
        return times[1] - times[0]

    def switch(self, t, a, b) -> Schedule:
        v = min(self.p.v_dd, max(0.0, self.voltage(t)))
        for i, (o, n) in enumerate(zip((self.a, self.b), (a, b))):
            if o == 0 and n == 1:
                self.t_rise[i] = t
            elif o == 1 and n == 0:
                self.t_fall[i] = t
        self.a, self.b = a, b
        self.ts, self.v_switch = t, v
        half = self.p.v_dd / 2
        if a != b:
            self.seg = "hold"
            return Schedule("all", None)
        try:
            if a == 1:
                self.seg, self.seg_delta = "charge", self._sep(self.t_rise)
                if v >= half:
                    return Schedule("all", None)
                return Schedule("all", (t + dc.c_delay_rising(self.seg_delta, v, self.p), 1))
            self.seg, self.seg_delta = "discharge", self._sep(self.t_fall)
            if v <= half:
                return Schedule("all", None)
            return Schedule("all", (t + dc.c_delay_falling(self.seg_delta, v, self.p), 0))
        except NegativeDelayError:
            return Schedule("all", (t, 1 if a == 1 else 0))
        except NoCrossingError:
            return Schedule("all", None)

    def commit(self, t, value):
        self.out = value


class DualChannel:
    """NAND from a NOR-like channel: inverted pins, output ``V_DD - V``."""

    evaluate = staticmethod(_nand)

    def __init__(self, inner):
        self.inner = inner
        self.defer = inner.defer

    def reset(self, t, a, b, out):
        self.inner.reset(t, 1 - a, 1 - b, 1 - out)

    def voltage(self, t):
        return self.inner.p.v_dd - self.inner.voltage(t)

    def switch(self, t, a, b):
        s = self.inner.switch(t, 1 - a, 1 - b)
        if s.event is None:
            return s
        return Schedule(s.cancel, (s.event[0], 1 - s.event[1]))

    def commit(self, t, value):
        self.inner.commit(t, 1 - value)


class TiedChannel:
    """Inverter from a NOR-like channel with input B tied low."""

    def __init__(self, inner):
        self.inner = inner
        self.defer = inner.defer

    @staticmethod
    def evaluate(a, b, out=None):
        return 1 - a

    def reset(self, t, a, b, out):
        self.inner.reset(t, a, 0, out)

    def voltage(self, t):
        return self.inner.voltage(t)

    def switch(self, t, a, b):
        return self.inner.switch(t, a, 0)

    def commit(self, t, value):
        self.inner.commit(t, value)


def hybrid_channel(gate: GateSpec, params, delta_rule: str = "resistor_age"):
    if gate.kind == "CGATE2":
        if not isinstance(params, CGateParams):
            raise TypeError(f"gate {gate.id}: CGATE2 needs C-gate parameters")
        return HybridCGateChannel(params)
    if not isinstance(params, GateParams):
        raise TypeError(f"gate {gate.id}: {gate.kind} needs NOR-type parameters")
    base = HybridNorChannel(params, delta_rule)
    if gate.kind == "NOR2":
        return base
    if gate.kind == "NAND2":
        return DualChannel(base)
    if gate.kind == "INV":
        return TiedChannel(base)
    raise ValueError(f"unknown gate kind {gate.kind!r}")


# -- baseline channels ----------------------------------------------------------


_FUNCTIONS = {"NOR2": _nor, "NAND2": _nand, "CGATE2": _celem,
              "INV": lambda a, b, out=None: 1 - a}


class BaselineChannel:
    """Constant rise/fall delay; ``inertial`` additionally swallows short pulses."""

    defer = 0.0

    def __init__(self, kind: str, rise: float, fall: float, inertial: bool):
        if rise < 0 or fall < 0:
            raise ValueError("baseline delays must be >= 0")
        self.evaluate = _FUNCTIONS[kind]
        self.rise, self.fall = rise, fall
        self.inertial = inertial

    def reset(self, t, a, b, out):
        self.a, self.b = a, b
        self.out = out
        self.pending: list[tuple[float, int]] = []

    def switch(self, t, a, b):
        self.a, self.b = a, b
        new = self.evaluate(a, b, self._projected(math.inf))
        when = t + (self.rise if new else self.fall)
        if self.inertial:
            self.pending = []
            if new == self.out:
                return Schedule("all", None)
            self.pending = [(when, new)]
            return Schedule("all", (when, new))
        self.pending = [p for p in self.pending if p[0] < when]
        if new == self._projected(when):
            return Schedule("after", None)
        self.pending.append((when, new))
        return Schedule("after", (when, new))

    def _projected(self, t):
        value = self.out
        for when, v in self.pending:
            if when <= t:
                value = v
        return value

    def commit(self, t, value):
        self.out = value
        self.pending = [p for p in self.pending if p[0] > t]


def baseline_delays(gate: GateSpec, params) -> tuple[float, float]:
    """Default (rise, fall) constants: mean of the two saturated single-input
    delays of the hybrid model, plus the pure delay."""
    inf = math.inf
    if isinstance(params, CGateParams):
        rise = (dc.c_delay_rising(inf, 0.0, params) + dc.c_delay_rising(-inf, 0.0, params)) / 2
        fall = (dc.c_delay_falling(inf, params.v_dd, params)
                + dc.c_delay_falling(-inf, params.v_dd, params)) / 2
        return rise + params.delta_min, fall + params.delta_min
    if gate.kind == "INV":
        rise = dc.mis_delay_rising(-inf, params)
        fall = dc.LN2 * params.c * params.r_nA
    else:
        rise = (dc.mis_delay_rising(inf, params) + dc.mis_delay_rising(-inf, params)) / 2
        fall = dc.LN2 * params.c * (params.r_nA + params.r_nB) / 2
    if gate.kind == "NAND2":
        rise, fall = fall, rise
    return rise + params.delta_min, fall + params.delta_min


# -- engine ---------------------------------------------------------------------


def _check_params(netlist: Netlist, paramsets: Mapping[str, object]):
    for g in netlist.gates:
        if g.paramset not in paramsets:
            raise KeyError(f"gate {g.id}: unknown parameter set {g.paramset!r}")


def run(netlist: Netlist, stimuli: Mapping[str, DigitalTrace], t_end: float,
        channels: Mapping[str, object], observe=None,
        t_start: float | None = None) -> dict[str, DigitalTrace]:
    """Core event loop shared by :func:`simulate` and :func:`simulate_baseline`."""
    missing = [n for n in netlist.inputs if n not in stimuli]
    if missing:
        raise KeyError(f"no stimulus for primary input(s) {missing}")
    if t_start is None:
        t_start = min((s.t_start for s in stimuli.values()), default=0.0)
    last = max((s.times[-1] for s in stimuli.values() if s.times), default=t_start)
    if t_end < last:
        raise ValueError("t_end precedes the last stimulus transition")

    nets = netlist.nets
    net_idx = {n: i for i, n in enumerate(nets)}
    value = {n: 0 for n in nets}
    for n in netlist.inputs:
        value[n] = stimuli[n].initial
    gates = netlist.gates
    chans = [channels[g.id] for g in gates]
    fanout = defaultdict(list)
    for gi, g in enumerate(gates):
        for pin, n in enumerate(g.input_nets):
            fanout[n].append((gi, pin))

    def pins(gi):
        g = gates[gi]
        a = value[g.net_a]
        b = value[g.net_b] if g.net_b is not None else 0
        return a, b

    # settle to a consistent steady state
    for _ in range(4 * len(gates) + 4):
        changed = False
        for gi, g in enumerate(gates):
            new = chans[gi].evaluate(*pins(gi), value[g.net_out])
            if new != value[g.net_out]:
                value[g.net_out] = new
                changed = True
        if not changed:
            break
    else:
        raise OscillationError("initial state does not settle")
    # pins as seen by each channel (after its deferral)
    seen = []
    for gi, g in enumerate(gates):
        a, b = pins(gi)
        chans[gi].reset(t_start, a, b, value[g.net_out])
        seen.append([a, b])

    observe = tuple(observe) if observe is not None else (netlist.outputs or nets)
    initial = {n: value[n] for n in observe}
    record = {n: [] for n in observe}

    heap = []
    seq = 0
    pending = defaultdict(list)  # gate index -> [(time, token)]
    cancelled = set()

    def push(t, kind, key, val, payload=None):
        nonlocal seq
        heapq.heappush(heap, (t, kind, key, val, seq, payload))
        seq += 1

    for n in netlist.inputs:
        s = stimuli[n]
        for t, v in zip(s.times, s.values):
            push(t, 0, net_idx[n], v)

    budget_t, budget = None, 0
    while heap:
        t, kind, key, val, token, payload = heapq.heappop(heap)
        if t > t_end:
            break
        if t == budget_t:
            budget += 1
            if budget > EVENT_BUDGET:
                raise OscillationError(f"more than {EVENT_BUDGET} events at t={t:.6e} s")
        else:
            budget_t, budget = t, 0
        if kind == 0:
            if payload is not None:
                gi = payload
                if token in cancelled:
                    cancelled.discard(token)
                    continue
                pending[gi] = [p for p in pending[gi] if p[1] != token]
                chans[gi].commit(t, val)
            net = nets[key]
            if value[net] == val:
                continue
            value[net] = val
            if net in record:
                record[net].append(t)
            for gi, pin in fanout[net]:
                push(t + chans[gi].defer, 1, gi * 2 + pin, val)
        else:
            gi, pin = divmod(key, 2)
            st = seen[gi]
            if st[pin] == val:
                continue
            st[pin] = val
            ch = chans[gi]
            try:
                sched = ch.switch(t, st[0], st[1])
            except ModelError as exc:
                raise SimulationError(gates[gi].id, t, exc) from exc
            if sched.cancel == "all":
                cancelled.update(tok for _, tok in pending[gi])
                pending[gi] = []
            elif sched.cancel == "after" and sched.event is not None:
                keep = []
                for when, tok in pending[gi]:
                    (keep.append((when, tok)) if when < sched.event[0]
                     else cancelled.add(tok))
                pending[gi] = keep
            if sched.event is not None:
                when, v = sched.event
                tok = seq
                pending[gi].append((when, tok))
                push(when, 0, net_idx[gates[gi].net_out], v, gi)

    return {n: DigitalTrace(n, initial[n], tuple(record[n]), t_start, t_end)
            for n in observe}


def simulate(netlist: Netlist, stimuli: Mapping[str, DigitalTrace], t_end: float,
             paramsets: Mapping[str, object], *, observe=None,
             delta_rule: str = "resistor_age",
             channel_factory: Callable | None = None) -> dict[str, DigitalTrace]:
    """Simulate with hybrid-model channels (or ``channel_factory(gate, params)``)."""
    _check_params(netlist, paramsets)
    make = channel_factory or (lambda g, p: hybrid_channel(g, p, delta_rule))
    channels = {g.id: make(g, paramsets[g.paramset]) for g in netlist.gates}
    return run(netlist, stimuli, t_end, channels, observe)


def simulate_baseline(netlist: Netlist, stimuli: Mapping[str, DigitalTrace], t_end: float,
                      model: str, delays: Mapping[str, tuple[float, float]], *,
                      observe=None) -> dict[str, DigitalTrace]:
    """Simulate with constant ``(rise, fall)`` delays per gate id.

    ``model`` is ``"pure"`` (transport delay) or ``"inertial"``.
    """
    if model not in ("pure", "inertial"):
        raise ValueError(f"model must be 'pure' or 'inertial', got {model!r}")
    channels = {}
    for g in netlist.gates:
        rise, fall = delays[g.id]
        channels[g.id] = BaselineChannel(g.kind, rise, fall, model == "inertial")
    return run(netlist, stimuli, t_end, channels, observe)
