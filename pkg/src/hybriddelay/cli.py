"""Command line entry point.

Every subcommand takes a ``key = value`` config file; ``--set key=value``
overrides single entries and ``--seed`` fixes all randomness.  Exit codes:
0 success, 1 usage or input error, 2 numeric/model error.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from . import delay_core as dc
from . import harness, ode_oracle, param_fit, sim_engine, trace_io
from .errors import HybridDelayError, ModelError


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


class Config:
    def __init__(self, path: Path, overrides):
        self.base = path.parent
        self.values = trace_io.parse_config(path.read_text())
        for item in overrides or ():
            if "=" not in item:
                raise UsageError(f"--set expects key=value, got {item!r}")
            k, v = item.split("=", 1)
            self.values[k.strip()] = v.strip()

    def get(self, key, default=None, cast=str):
        if key not in self.values:
            if default is None:
                raise UsageError(f"config is missing {key!r}")
            return default
        try:
            return cast(self.values[key])
        except ValueError:
            raise UsageError(f"bad value for {key!r}: {self.values[key]!r}") from None

    def path(self, key, default=None) -> Path:
        p = Path(self.get(key, default))
        return p if p.is_absolute() else self.base / p

    def optional_path(self, key):
        return self.path(key) if key in self.values else None


def _load_paramsets(cfg: Config):
    ref = cfg.get("params")
    if "/" not in ref and not ref.endswith(".params"):
        return {ref: trace_io.load_shipped(ref)}
    return trace_io.parse_params(cfg.path("params").read_text())


def _one_paramset(cfg: Config):
    sets = _load_paramsets(cfg)
    name = cfg.get("paramset", next(iter(sets)))
    if name not in sets:
        raise UsageError(f"no parameter set {name!r}; have {sorted(sets)}")
    return sets[name]


def _emit(text: str, target: Path | None):
    if target is None:
        sys.stdout.write(text)
    else:
        target.write_text(text)


def _grid(cfg: Config):
    start = cfg.get("delta_start_s", -20e-12, float)
    stop = cfg.get("delta_stop_s", 20e-12, float)
    step = cfg.get("delta_step_s", 0.5e-12, float)
    if not step > 0 or stop < start:
        raise UsageError("need delta_step_s > 0 and delta_stop_s >= delta_start_s")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [start + i * step for i in range(n)]


def cmd_sweep(cfg: Config, args):
    params = _one_paramset(cfg)
    kind = cfg.get("kind", "CGATE2" if isinstance(params, dc.CGateParams) else "NOR2")
    rows = harness.sweep_mis(params, kind, cfg.get("direction"), _grid(cfg),
                             model=cfg.get("model", "analytic"))
    _emit(harness.sweep_csv(rows), cfg.optional_path("out"))


def cmd_fit(cfg: Config, args):
    d = param_fit.delays_from_config(cfg.values)
    dm = cfg.get("delta_min_s", "", str)
    report = param_fit.fit(d, cfg.get("c_farad", cast=float),
                           v_dd=cfg.get("v_dd_volt", 0.8, float),
                           delta_min=float(dm) if dm else None,
                           eta=cfg.get("eta", 0.01, float), seed=args.seed,
                           starts=cfg.get("starts", 8, int))
    sys.stdout.write(report.to_text())
    out = cfg.optional_path("out")
    if out is not None:
        out.write_text(trace_io.write_config(report.to_kv()))
    params_out = cfg.optional_path("params_out")
    if params_out is not None:
        params_out.write_text(trace_io.write_params({cfg.get("name", "fitted"): report.params}))
    return 0 if report.converged else 2


def cmd_simulate(cfg: Config, args):
    netlist = trace_io.parse_netlist(cfg.path("netlist").read_text())
    sets = _load_paramsets(cfg)
    stimuli = trace_io.parse_traces(cfg.path("stimuli").read_text())
    last = max((s.times[-1] for s in stimuli.values() if s.times), default=0.0)
    t_end = cfg.get("t_end_s", last + 1e-9, float)
    model = cfg.get("model", "hybrid")
    if model == "hybrid":
        traces = sim_engine.simulate(netlist, stimuli, t_end, sets,
                                     delta_rule=cfg.get("delta_rule", "resistor_age"))
    elif model == "oracle":
        traces = sim_engine.simulate(netlist, stimuli, t_end, sets,
                                     channel_factory=ode_oracle.oracle_channel)
    elif model in ("pure", "inertial"):
        missing = [g.paramset for g in netlist.gates if g.paramset not in sets]
        if missing:
            raise UsageError(f"unknown parameter sets {missing}")
        delays = {g.id: sim_engine.baseline_delays(g, sets[g.paramset]) for g in netlist.gates}
        traces = sim_engine.simulate_baseline(netlist, stimuli, t_end, model, delays)
    else:
        raise UsageError(f"unknown model {model!r}")
    _emit(trace_io.write_traces(traces.values()), cfg.optional_path("out"))
    vcd = cfg.optional_path("vcd")
    if vcd is not None:
        vcd.write_text(trace_io.write_vcd(traces.values()))


def _waveform_cfg(cfg: Config, seed: int, inputs=("A", "B")):
    return harness.WaveformConfig(
        mode=cfg.get("mode", "LOCAL"), mu=cfg.get("mu_s", 100e-12, float),
        sigma=cfg.get("sigma_s", 50e-12, float),
        n_transitions=cfg.get("n_transitions", 500, int), seed=seed,
        inputs=tuple(cfg.get("inputs", ",".join(inputs)).split(",")))


def cmd_compare(cfg: Config, args):
    params = _one_paramset(cfg)
    if not isinstance(params, dc.GateParams):
        raise UsageError("compare supports NOR parameter sets only")
    wf = _waveform_cfg(cfg, args.seed)
    res = harness.compare_models(params, wf, repetitions=cfg.get("repetitions", 20, int),
                                 calibrate=cfg.get("calibrate", "true") == "true")
    lines = ["repetition,hybrid_area_Vs,inertial_area_Vs,hybrid_normalized"]
    for i, (h, n) in enumerate(zip(res.hybrid, res.inertial)):
        lines.append(f"{i},{h.area:.16e},{n.area:.16e},{h.normalized:.16e}")
    _emit("\n".join(lines) + "\n", cfg.optional_path("out"))
    sys.stderr.write(f"mean normalized deviation: hybrid {res.mean_hybrid:.4f}, "
                     f"inertial {res.mean_inertial:.4f}\n")


def cmd_oracle(cfg: Config, args):
    params = _one_paramset(cfg)
    direction = cfg.get("direction")
    default_v0 = 0.0 if direction == "rising" else params.v_dd
    v0 = cfg.get("v0_volt", default_v0, float)
    is_c = isinstance(params, dc.CGateParams)
    rows = ["delta_s,oracle_delay_s,analytic_delay_s"]
    for delta in _grid(cfg):
        if is_c:
            ref = ode_oracle.oracle_c_delay(direction, delta, v0, params)
            ana = (dc.c_delay_rising if direction == "rising" else dc.c_delay_falling)(
                delta, v0, params)
        else:
            ref = ode_oracle.oracle_mis_delay(direction, delta, v0, params)
            ana = (dc.delay_rising_output if direction == "rising"
                   else dc.delay_falling_output)(delta, v0, params)
        rows.append(f"{delta:.16e},{ref:.16e},{ana:.16e}")
    _emit("\n".join(rows) + "\n", cfg.optional_path("out"))
    dump = cfg.optional_path("dump")
    if dump is not None:
        # trajectory of the charging/discharging mode after a long-settled switch
        both = (0.0, 0.0)
        if is_c:
            pins = (1, 1) if direction == "rising" else (0, 0)
            ode = ode_oracle.gate_ode(params, *pins, t_rise=both, t_fall=both)
        else:
            pins = (0, 0) if direction == "rising" else (1, 1)
            ode = ode_oracle.gate_ode(params, *pins, t_fall=both)
        traj = ode_oracle.integrate_mode(ode, v0, tol=cfg.get("tol", 1e-6, float))
        lines = ["time_s,volts"] + [f"{t:.16e},{v:.16e}" for t, v in
                                    zip(traj.times, traj.volts)]
        dump.write_text("\n".join(lines) + "\n")


def cmd_gen(cfg: Config, args):
    stim = harness.gen_waveform(_waveform_cfg(cfg, args.seed))
    _emit(trace_io.write_traces(stim.values()), cfg.optional_path("out"))


COMMANDS = {"sweep": cmd_sweep, "fit": cmd_fit, "simulate": cmd_simulate,
            "compare": cmd_compare, "oracle": cmd_oracle, "gen": cmd_gen}


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="hybriddelay", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", type=Path, help="key = value config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override one config entry (repeatable)")
        p.add_argument("--seed", type=int, default=0)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = Config(args.config, args.set)
        return COMMANDS[args.command](cfg, args) or 0
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (UsageError, HybridDelayError, OSError, KeyError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
