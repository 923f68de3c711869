"""Waveforms, the deviation metric, delay sweeps and model comparison."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import delay_core as dc
from . import param_fit, sim_engine
from .delay_core import CGateParams, GateParams
from .errors import ModelError, WindowMismatchError
from .ode_oracle import oracle_c_delay, oracle_channel, oracle_mis_delay
from .sim_engine import DigitalTrace, GateSpec, Netlist

MIN_GAP = 1e-12


@dataclass(frozen=True)
class WaveformConfig:
    mode: str = "LOCAL"
    mu: float = 100e-12
    sigma: float = 50e-12
    n_transitions: int = 500
    seed: int = 0
    inputs: tuple[str, ...] = ("A", "B")

    def __post_init__(self):
        if self.mode not in ("LOCAL", "GLOBAL"):
            raise ValueError(f"mode must be LOCAL or GLOBAL, got {self.mode!r}")
        if not self.mu > 0:
            raise ValueError("mu must be > 0")
        if not self.sigma >= 0:
            raise ValueError("sigma must be >= 0")
        if self.n_transitions < 1:
            raise ValueError("n_transitions must be >= 1")
        if not self.inputs:
            raise ValueError("need at least one input")


def _gaps(rng, cfg: WaveformConfig, n: int) -> np.ndarray:
    out = rng.normal(cfg.mu, cfg.sigma, n)
    bad = out < MIN_GAP
    while bad.any():
        out[bad] = rng.normal(cfg.mu, cfg.sigma, int(bad.sum()))
        bad = out < MIN_GAP
    return out


def gen_waveform(cfg: WaveformConfig) -> dict[str, DigitalTrace]:
    """Random stimuli starting from all-zero inputs at t = 0.

    LOCAL draws ``n_transitions`` independent gaps per input.  GLOBAL draws
    one stream of ``n_transitions`` gaps and hands each transition to a
    uniformly chosen input.
    """
    rng = np.random.default_rng(cfg.seed)
    times: dict[str, list[float]] = {n: [] for n in cfg.inputs}
    if cfg.mode == "LOCAL":
        for n in cfg.inputs:
            times[n] = list(np.cumsum(_gaps(rng, cfg, cfg.n_transitions)))
    else:
        stamps = np.cumsum(_gaps(rng, cfg, cfg.n_transitions))
        picks = rng.integers(0, len(cfg.inputs), cfg.n_transitions)
        for t, k in zip(stamps, picks):
            times[cfg.inputs[k]].append(float(t))
    return {n: DigitalTrace(n, 0, tuple(map(float, ts)), 0.0, None) for n, ts in times.items()}


@dataclass(frozen=True)
class DeviationReport:
    area: float
    normalized: float | None = None
    count_delta: int = 0


def deviation_area(a: DigitalTrace, b: DigitalTrace, v_dd: float,
                   baseline: DeviationReport | None = None,
                   t_end: float | None = None) -> DeviationReport:
    """``v_dd`` times the total time the two traces disagree."""
    if a.t_start != b.t_start:
        raise WindowMismatchError("traces start at different times")
    if a.t_end is not None and b.t_end is not None and a.t_end != b.t_end:
        raise WindowMismatchError("traces end at different times")
    end = t_end if t_end is not None else (a.t_end if a.t_end is not None else b.t_end)
    if end is None:
        end = max([a.t_start, *a.times, *b.times])
    # merge both edge lists and integrate the XOR
    marks = sorted({a.t_start, end, *[t for t in a.times if t < end],
                    *[t for t in b.times if t < end]})
    ta, tb = np.asarray(a.times), np.asarray(b.times)
    total = 0.0
    for lo, hi in zip(marks, marks[1:]):
        va = (a.initial + np.searchsorted(ta, lo, side="right")) % 2
        vb = (b.initial + np.searchsorted(tb, lo, side="right")) % 2
        if va != vb:
            total += hi - lo
    area = v_dd * total
    norm = None
    if baseline is not None:
        norm = area / baseline.area if baseline.area > 0 else (0.0 if area == 0 else math.inf)
    return DeviationReport(area, norm, len(a.times) - len(b.times))


# -- sweeps -----------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    delta: float
    delay: float | None
    case: int | None
    error: str = ""


def _analytic(kind: str, direction: str, delta: float, params):
    if kind == "CGATE2":
        if direction == "rising":
            return dc.c_delay_rising(delta, 0.0, params)
        return dc.c_delay_falling(delta, params.v_dd, params)
    if direction == "rising":
        return dc.delay_rising_output(delta, 0.0, params)
    return dc.delay_falling_output(delta, params.v_dd, params)


def _case_of(kind, direction, delta, params):
    if kind != "CGATE2" and direction == "falling":
        return None
    if math.isinf(delta):
        return 4
    if kind == "CGATE2":
        p = params if delta >= 0 else dc.c_mirror(params)
        return int(dc.classify_case(abs(delta), p, "up" if direction == "rising" else "down"))
    p = params if delta >= 0 else dc.mirror(params)
    return int(dc.classify_case(abs(delta), p))


def sweep_mis(params, kind: str, direction: str, deltas: Iterable[float],
              model: str = "analytic") -> list[SweepRow]:
    """Delay (pure delay included) over a grid of input separations.

    ``model="oracle"`` evaluates the numerical reference instead.
    """
    if direction not in ("rising", "falling"):
        raise ValueError(f"direction must be rising or falling, got {direction!r}")
    rows = []
    for delta in deltas:
        try:
            if model == "analytic":
                d = _analytic(kind, direction, delta, params)
            elif kind == "CGATE2":
                v0 = 0.0 if direction == "rising" else params.v_dd
                d = oracle_c_delay(direction, delta, v0, params)
            else:
                v0 = 0.0 if direction == "rising" else params.v_dd
                d = oracle_mis_delay(direction, delta, v0, params)
            rows.append(SweepRow(delta, d + params.delta_min,
                                 _case_of(kind, direction, delta, params)))
        except (ModelError, ValueError) as exc:
            rows.append(SweepRow(delta, None, None, f"{type(exc).__name__}: {exc}"))
    return rows


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    out = ["delta_s,delay_s,case,error"]
    for r in rows:
        delay = "" if r.delay is None else f"{r.delay:.16e}"
        case = "" if r.case is None else str(r.case)
        out.append(f"{r.delta:.16e},{delay},{case},{r.error}")
    return "\n".join(out) + "\n"


# -- model comparison -------------------------------------------------------------


NOR_NETLIST = Netlist((GateSpec("g0", "NOR2", "gate", "A", "B", "Y"),), ("A", "B"), ("Y",))


def oracle_characteristic_delays(params: GateParams) -> param_fit.CharacteristicDelays:
    inf, v = math.inf, params.v_dd
    dm = params.delta_min
    return param_fit.CharacteristicDelays(
        fall_minus_inf=oracle_mis_delay("falling", -inf, v, params) + dm,
        fall_zero=oracle_mis_delay("falling", 0.0, v, params) + dm,
        fall_plus_inf=oracle_mis_delay("falling", inf, v, params) + dm,
        rise_minus_inf=oracle_mis_delay("rising", -inf, 0.0, params) + dm,
        rise_zero=oracle_mis_delay("rising", 0.0, 0.0, params) + dm,
        rise_plus_inf=oracle_mis_delay("rising", inf, 0.0, params) + dm,
    )


@dataclass(frozen=True)
class Comparison:
    hybrid: list[DeviationReport]
    inertial: list[DeviationReport]
    hybrid_params: GateParams
    inertial_delays: tuple[float, float]

    @property
    def mean_hybrid(self) -> float:
        return float(np.mean([r.normalized for r in self.hybrid]))

    @property
    def mean_inertial(self) -> float:
        return float(np.mean([r.normalized for r in self.inertial]))


def calibrate_hybrid(reference: GateParams, seed: int = 0) -> GateParams:
    """Fit the closed-form model to the reference ODE's characteristic delays,
    keeping the load capacitance, supply and pure delay."""
    d = oracle_characteristic_delays(reference)
    report = param_fit.fit(d, reference.c, v_dd=reference.v_dd,
                           delta_min=reference.delta_min, eta=reference.eta, seed=seed)
    return report.params


def compare_models(params: GateParams, cfg: WaveformConfig, repetitions: int = 20,
                   calibrate: bool = True, netlist: Netlist = NOR_NETLIST,
                   delta_rule: str = "resistor_age") -> Comparison:
    """Hybrid and inertial NOR simulations against the ODE reference.

    The reference channel integrates the exact ODE with ``params``.  With
    ``calibrate`` the hybrid model is first fitted to the reference's six
    characteristic delays, and the inertial delays are the mean saturated
    single-input delays of the reference.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if calibrate:
        hybrid_p = calibrate_hybrid(params, cfg.seed)
        d = oracle_characteristic_delays(params)
        inertial = ((d.rise_minus_inf + d.rise_plus_inf) / 2,
                    (d.fall_minus_inf + d.fall_plus_inf) / 2)
    else:
        hybrid_p = params
        inertial = sim_engine.baseline_delays(netlist.gates[0], params)
    sets_ref = {g.paramset: params for g in netlist.gates}
    sets_hyb = {g.paramset: hybrid_p for g in netlist.gates}
    delays = {g.id: inertial for g in netlist.gates}
    out_net = netlist.outputs[0]
    hyb, ine = [], []
    for rep in range(repetitions):
        stim = gen_waveform(replace(cfg, seed=cfg.seed + rep, inputs=netlist.inputs))
        t_end = max(s.times[-1] for s in stim.values() if s.times) + 20 * cfg.mu
        ref = sim_engine.simulate(netlist, stim, t_end, sets_ref,
                                  channel_factory=oracle_channel)[out_net]
        h = sim_engine.simulate(netlist, stim, t_end, sets_hyb,
                                delta_rule=delta_rule)[out_net]
        i = sim_engine.simulate_baseline(netlist, stim, t_end, "inertial", delays)[out_net]
        base = deviation_area(i, ref, params.v_dd)
        ine.append(deviation_area(i, ref, params.v_dd, base))
        hyb.append(deviation_area(h, ref, params.v_dd, base))
    return Comparison(hyb, ine, hybrid_p, inertial)
