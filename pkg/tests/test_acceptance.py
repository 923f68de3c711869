"""Acceptance checks, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL ...`` line (visible under
``pytest -v``) and then asserts the same condition, so the printed verdict
and the test outcome always agree.
"""
import math
import time

import numpy as np
import pytest

from hybriddelay import delay_core as dc
from hybriddelay import harness as hx
from hybriddelay import param_fit as pf
from hybriddelay import sim_engine as se
from hybriddelay.delay_core import CGateParams, GateParams
from hybriddelay.ode_oracle import oracle_mis_delay
from hybriddelay.sim_engine import DigitalTrace, GateSpec, Netlist

from conftest import CGATE_15NM, NOR_15NM, NOR_65NM, PS

INF = math.inf


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
        return ok
    return emit


def test_criterion_1_characteristic_delays(report):
    t0 = time.perf_counter()
    p = GateParams(**NOR_15NM)
    far = dc.delay_falling_output(INF, p.v_dd, p) + p.delta_min
    zero = dc.delay_falling_output(0.0, p.v_dd, p) + p.delta_min
    elapsed = time.perf_counter() - t0
    ok = 35.1 * PS <= far <= 42.9 * PS and 25.2 * PS <= zero <= 30.8 * PS and elapsed < 1.0
    report(1, ok, f"fall(inf)+dmin={far / PS:.3f} ps in [35.1,42.9], "
                  f"fall(0)+dmin={zero / PS:.3f} ps in [25.2,30.8], {elapsed:.3f} s")
    assert ok


def test_criterion_2_delta_min_rule(report):
    d15 = pf.choose_delta_min(38e-12, 28e-12)
    d65 = pf.choose_delta_min(222e-12, 116e-12)
    ok = d15 == 18e-12 and 9.5e-12 <= d65 <= 11.5e-12
    report(2, ok, f"choose(38,28)={d15!r} (want 1.8e-11 exactly), "
                  f"choose(222,116)={d65 / PS:.3f} ps in [9.5,11.5]")
    assert ok


def test_criterion_3_analytic_vs_oracle(report):
    t0 = time.perf_counter()
    p = GateParams(**NOR_15NM)
    analytic = {"falling": lambda d: dc.delay_falling_output(d, p.v_dd, p),
                "rising": lambda d: dc.delay_rising_output(d, 0.0, p)}
    v0 = {"falling": p.v_dd, "rising": 0.0}
    worst = {}
    for direction in ("falling", "rising"):
        for k in range(-40, 41):
            d = k * 0.5 * PS
            ref = oracle_mis_delay(direction, d, v0[direction], p)
            got = analytic[direction](d)
            err = abs(got - ref) / ref
            with_dmin = abs(got - ref) / (ref + p.delta_min)
            if err > worst.get(direction, (0.0,))[0]:
                worst[direction] = (err, d, with_dmin)
    zero_ref = oracle_mis_delay("rising", 0.0, 0.0, p)
    zero_err = abs(analytic["rising"](0.0) - zero_ref) / zero_ref
    elapsed = time.perf_counter() - t0
    ok = all(w[0] <= 0.02 for w in worst.values()) and zero_err <= 0.02 and elapsed < 30
    parts = [f"{k} max {w[0]:.2%} at {w[1] / PS:+.1f} ps ({w[2]:.2%} with dmin)"
             for k, w in worst.items()]
    report(3, ok, "; ".join(parts) + f"; rising at 0: {zero_err:.2%}; {elapsed:.1f} s")
    assert ok


def _shape_nor(p):
    fall = [dc.delay_falling_output(d, p.v_dd, p) for d in (-INF, 0.0, INF)]
    rise = [dc.delay_rising_output(d, 0.0, p) for d in (-INF, 0.0, INF)]
    return fall, rise


def _shape_c(p):
    fall = [dc.c_delay_falling(d, p.v_dd, p) for d in (-INF, 0.0, INF)]
    rise = [dc.c_delay_rising(d, 0.0, p) for d in (-INF, 0.0, INF)]
    return fall, rise


def test_criterion_4_shape_and_mirror(report):
    t0 = time.perf_counter()
    verdicts = []
    for name, p, shape in (("table III", GateParams(**NOR_15NM), _shape_nor),
                           ("table IV", GateParams(**NOR_65NM), _shape_nor),
                           ("table V", CGateParams(**CGATE_15NM), _shape_c)):
        fall, rise = shape(p)
        f_ok = fall[1] < min(fall[0], fall[2])
        r_ok = rise[1] > max(rise[0], rise[2])
        verdicts.append((name, f_ok, r_ok, fall, rise))

    rng = np.random.default_rng(4)
    worst = 0.0
    p, pc = GateParams(**NOR_15NM), CGateParams(**CGATE_15NM)
    for d in rng.uniform(-30 * PS, 30 * PS, 200):
        pairs = [(dc.delay_falling_output(d, p.v_dd, p),
                  dc.delay_falling_output(-d, p.v_dd, dc.mirror(p))),
                 (dc.delay_rising_output(d, 0.0, p),
                  dc.delay_rising_output(-d, 0.0, dc.mirror(p))),
                 (dc.c_delay_rising(d, 0.0, pc), dc.c_delay_rising(-d, 0.0, dc.c_mirror(pc))),
                 (dc.c_delay_falling(d, pc.v_dd, pc),
                  dc.c_delay_falling(-d, pc.v_dd, dc.c_mirror(pc)))]
        worst = max([worst] + [abs(a - b) / abs(a) for a, b in pairs])
    elapsed = time.perf_counter() - t0

    ok = all(v[1] and v[2] for v in verdicts) and worst <= 1e-12 and elapsed < 5
    parts = []
    for name, f_ok, r_ok, fall, rise in verdicts:
        parts.append(f"{name}: fall(-inf,0,inf)=" + "/".join(f"{x / PS:.2f}" for x in fall)
                     + f" {'ok' if f_ok else 'VIOLATED'}, rise="
                     + "/".join(f"{x / PS:.2f}" for x in rise) + f" {'ok' if r_ok else 'VIOLATED'}")
    report(4, ok, "; ".join(parts) + f"; mirror max rel {worst:.1e}; {elapsed:.2f} s")
    assert ok


def _jumps(delay, boundaries):
    out = []
    for b in boundaries:
        below, at = delay(math.nextafter(b, -INF if b > 0 else INF)), delay(b)
        out.append(abs(at - below) / abs(at))
    return out


def test_criterion_5_case_boundary_continuity(report):
    p, pc = GateParams(**NOR_15NM), CGateParams(**CGATE_15NM)
    jumps = {}
    for label, params, fn, network in (
            ("III rising", p, lambda d: dc.delay_rising_output(d, 0.0, p), "up"),
            ("V rising", pc, lambda d: dc.c_delay_rising(d, 0.0, pc), "up"),
            ("V falling", pc, lambda d: dc.c_delay_falling(d, pc.v_dd, pc), "down")):
        a1, a2, r = dc._triple(params, network)
        pos = dc.case_boundaries(a1, a2, r)
        neg = dc.case_boundaries(a2, a1, r)  # mirrored swap for delta < 0
        jumps[label] = max(_jumps(fn, pos) + _jumps(fn, [-b for b in neg]))
    ok = all(j <= 0.02 for j in jumps.values())
    report(5, ok, ", ".join(f"{k} max jump {v:.2e}" for k, v in jumps.items()))
    assert ok


def test_criterion_6_fit_round_trip(report):
    t0 = time.perf_counter()
    p = GateParams(**NOR_15NM)
    target = pf.characteristic_delays(p)
    fitted = pf.fit(target, p.c, v_dd=p.v_dd).params
    again = pf.characteristic_delays(fitted)
    errs = {k: abs(getattr(again, k) - getattr(target, k)) / getattr(target, k)
            for k in pf.DELAY_KEYS}
    elapsed = time.perf_counter() - t0
    ok = max(errs.values()) <= 0.01 and elapsed < 60
    report(6, ok, f"max relative residual {max(errs.values()):.2e} "
                  f"({max(errs, key=errs.get)}), dmin={fitted.delta_min / PS:.3f} ps, "
                  f"{elapsed:.2f} s")
    assert ok


def test_criterion_7_simulator_equivalence(report):
    t0 = time.perf_counter()
    p = GateParams(**NOR_15NM)
    net = Netlist((GateSpec("g0", "NOR2", "p", "A", "B", "Y"),), ("A", "B"), ("Y",))
    start = 200 * PS
    worst = 0.0
    for k in range(-60, 61):
        d = k * 0.5 * PS
        ta, tb = start, start + d
        up = {"A": DigitalTrace("A", 0, (ta,)), "B": DigitalTrace("B", 0, (tb,))}
        y = se.simulate(net, up, 2e-9, {"p": p})["Y"]
        want = min(ta, tb) + dc.delay_falling_output(d, p.v_dd, p) + p.delta_min
        worst = max(worst, abs(y.times[0] - want))
        down = {"A": DigitalTrace("A", 1, (ta,)), "B": DigitalTrace("B", 1, (tb,))}
        y = se.simulate(net, down, 2e-9, {"p": p})["Y"]
        want = max(ta, tb) + dc.delay_rising_output(d, 0.0, p) + p.delta_min
        worst = max(worst, abs(y.times[0] - want))

    delays = {"g0": (30 * PS, 20 * PS)}
    narrow = se.simulate_baseline(
        net, {"A": DigitalTrace("A", 0, (start, start + 10 * PS)), "B": DigitalTrace("B", 0)},
        1e-9, "inertial", delays)["Y"]
    wide = se.simulate_baseline(
        net, {"A": DigitalTrace("A", 0, (start, start + 50 * PS)), "B": DigitalTrace("B", 0)},
        1e-9, "inertial", delays)["Y"]
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and narrow.times == () and len(wide.times) == 2 and elapsed < 5
    report(7, ok, f"max |sim - direct| = {worst:.2e} s over 242 runs; inertial narrow "
                  f"edges={len(narrow.times)}, wide edges={len(wide.times)}; {elapsed:.2f} s")
    assert ok


def test_criterion_8_model_ordering(report):
    t0 = time.perf_counter()
    p = GateParams(**NOR_15NM)
    cfg = hx.WaveformConfig("LOCAL", 100 * PS, 50 * PS, 500, seed=0)
    res = hx.compare_models(p, cfg, repetitions=20)
    elapsed = time.perf_counter() - t0
    ok = res.mean_hybrid <= res.mean_inertial and elapsed < 120
    report(8, ok, f"mean normalized deviation hybrid={res.mean_hybrid:.4f} "
                  f"inertial={res.mean_inertial:.4f}; {elapsed:.1f} s")
    assert ok


def _random_params(rng):
    r = rng.uniform(2e3, 1.5e4)
    return GateParams(
        r_nA=rng.uniform(2e3, 1.5e4), r_nB=rng.uniform(2e3, 1.5e4), r=r,
        c=rng.uniform(1e-15, 4e-14), alpha1=rng.uniform(1e-8, 2e-7),
        alpha2=rng.uniform(1e-8, 2e-7), eta=rng.uniform(0.0, 0.1),
        delta_min=rng.uniform(0.0, 2e-11), v_dd=rng.uniform(0.6, 1.4))


def test_criterion_9_reduction_exact(report):
    rng = np.random.default_rng(9)
    checked = mismatches = 0
    for _ in range(100):
        p = _random_params(rng)
        b3 = (p.alpha1 + p.alpha2) / (2 * p.r)
        deltas = [0.0, INF, -INF] + list(rng.uniform(-3 * b3, 3 * b3, 7))
        for d in deltas:
            pairs = [(dc.delay_rising_output(d, 0.0, p), dc.mis_delay_rising(d, p)),
                     (dc.delay_falling_output(d, p.v_dd, p), dc.mis_delay_falling(d, p))]
            for general, special in pairs:
                checked += 1
                mismatches += general != special
    ok = mismatches == 0
    report(9, ok, f"{checked} comparisons over 100 random parameter sets, "
                  f"{mismatches} not bit-identical")
    assert ok
