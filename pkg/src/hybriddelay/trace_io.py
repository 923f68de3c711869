"""Text formats: netlists, parameter sets, key-value configs, traces, VCD."""

from __future__ import annotations

import math
import re
from importlib import resources
from typing import Iterable, Mapping

from .delay_core import CGateParams, GateParams
from .errors import (
    DanglingNetError,
    MissingKeyError,
    MultipleDriverError,
    SyntaxParseError,
    UnknownGateKindError,
)
from .sim_engine import GATE_KINDS, DigitalTrace, GateSpec, Netlist

_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_.\[\]$]*\Z")


def fmt_time(t: float) -> str:
    """Seconds in scientific notation, exact for doubles (17 significant digits)."""
    return f"{t:.16e}"


def _tokens(line: str):
    """Split on whitespace, yielding (column, token) with 1-based columns."""
    for m in re.finditer(r"\S+", line):
        yield m.start() + 1, m.group()


def _strip_comment(line: str) -> str:
    return line.split("#", 1)[0]


# -- netlists ---------------------------------------------------------------------


def parse_netlist(text: str) -> Netlist:
    gates: list[GateSpec] = []
    inputs: list[str] = []
    outputs: list[str] = []
    drivers: dict[str, tuple[int, int]] = {}
    uses: list[tuple[str, int, int]] = []
    gate_ids: set[str] = set()

    def claim(net, ln, col):
        if net in drivers:
            raise MultipleDriverError(f"net {net!r} already driven (line {drivers[net][0]})",
                                      ln, col)
        drivers[net] = (ln, col)

    for ln, raw in enumerate(text.splitlines(), 1):
        toks = list(_tokens(_strip_comment(raw)))
        if not toks:
            continue
        col, word = toks[0]
        for c, name in toks[1:]:
            if name != "-" and not _NAME.match(name):
                raise SyntaxParseError(f"invalid name {name!r}", ln, c)
        if word in ("input", "output"):
            if len(toks) != 2:
                raise SyntaxParseError(f"'{word}' takes exactly one net", ln, col)
            c, net = toks[1]
            if net == "-":
                raise SyntaxParseError("'-' is not a net name", ln, c)
            if word == "input":
                claim(net, ln, c)
                inputs.append(net)
            else:
                uses.append((net, ln, c))
                outputs.append(net)
        elif word == "gate":
            if len(toks) != 7:
                raise SyntaxParseError(
                    "expected: gate <id> <kind> <paramset> <netA> <netB> <netOut>", ln, col)
            (_, gid), (kc, kind), (_, pset), (ac, na), (bc, nb), (oc, no) = toks[1:]
            if kind not in GATE_KINDS:
                raise UnknownGateKindError(f"unknown gate kind {kind!r}", ln, kc)
            if gid in gate_ids:
                raise SyntaxParseError(f"duplicate gate id {gid!r}", ln, toks[1][0])
            gate_ids.add(gid)
            if na == "-" or no == "-":
                raise SyntaxParseError("only netB may be '-'", ln, ac if na == "-" else oc)
            if kind == "INV":
                if nb != "-":
                    raise SyntaxParseError("INV takes '-' as netB", ln, bc)
                nb = None
            elif nb == "-":
                raise SyntaxParseError(f"{kind} needs two inputs", ln, bc)
            claim(no, ln, oc)
            uses.append((na, ln, ac))
            if nb is not None:
                uses.append((nb, ln, bc))
            gates.append(GateSpec(gid, kind, pset, na, nb, no))
        else:
            raise SyntaxParseError(f"unknown statement {word!r}", ln, col)

    for net, ln, col in uses:
        if net not in drivers:
            raise DanglingNetError(f"net {net!r} has no driver", ln, col)
    return Netlist(tuple(gates), tuple(inputs), tuple(outputs))


def write_netlist(netlist: Netlist) -> str:
    lines = [f"input {n}" for n in netlist.inputs]
    for g in netlist.gates:
        nb = g.net_b if g.net_b is not None else "-"
        lines.append(f"gate {g.id} {g.kind} {g.paramset} {g.net_a} {nb} {g.net_out}")
    lines += [f"output {n}" for n in netlist.outputs]
    return "\n".join(lines) + ("\n" if lines else "")


# -- flat key = value files ---------------------------------------------------------


def _kv_lines(text: str):
    for ln, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        yield ln, raw, line


def _split_kv(ln, raw, line):
    if "=" not in line:
        raise SyntaxParseError("expected 'key = value'", ln, raw.find(line) + 1)
    key, value = (s.strip() for s in line.split("=", 1))
    if not key or not value:
        raise SyntaxParseError("empty key or value", ln, raw.find(line) + 1)
    return key, value


def parse_config(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for ln, raw, line in _kv_lines(text):
        key, value = _split_kv(ln, raw, line)
        if key in out:
            raise SyntaxParseError(f"duplicate key {key!r}", ln, raw.find(key) + 1)
        out[key] = value
    return out


def write_config(values: Mapping[str, object]) -> str:
    def show(v):
        if isinstance(v, float):
            return repr(v)
        return str(v)

    return "".join(f"{k} = {show(v)}\n" for k, v in values.items())


# -- parameter sets -------------------------------------------------------------------

NOR_KEYS = {
    "r_nA_ohm": "r_nA", "r_nB_ohm": "r_nB", "r_ohm": "r", "c_farad": "c",
    "alpha1_ohm_s": "alpha1", "alpha2_ohm_s": "alpha2", "eta": "eta",
    "delta_min_s": "delta_min", "v_dd_volt": "v_dd",
}
CGATE_KEYS = {
    "r_n_ohm": "r_n", "r_p_ohm": "r_p", "alpha1_ohm_s": "alpha1",
    "alpha2_ohm_s": "alpha2", "alpha3_ohm_s": "alpha3", "alpha4_ohm_s": "alpha4",
    "c_farad": "c", "eta": "eta", "delta_min_s": "delta_min", "v_dd_volt": "v_dd",
}
_KINDS = {"NOR": (NOR_KEYS, GateParams), "CGATE": (CGATE_KEYS, CGateParams)}


def _finite(value: str, ln: int, col: int) -> float:
    try:
        x = float(value)
    except ValueError:
        raise SyntaxParseError(f"not a number: {value!r}", ln, col) from None
    if not math.isfinite(x):
        raise SyntaxParseError(f"not finite: {value!r}", ln, col)
    return x


def parse_params(text: str) -> dict[str, GateParams | CGateParams]:
    """Parse ``[name]`` sections of unit-suffixed keys.

    Each section needs ``kind = NOR`` or ``kind = CGATE`` and every key of
    that kind.
    """
    sections: list[tuple[str, int, dict[str, tuple[str, int, int]]]] = []
    for ln, raw, line in _kv_lines(text):
        col = raw.find(line) + 1
        if line.startswith("["):
            if not line.endswith("]") or not _NAME.match(line[1:-1].strip() or "!"):
                raise SyntaxParseError(f"bad section header {line!r}", ln, col)
            name = line[1:-1].strip()
            if any(s[0] == name for s in sections):
                raise SyntaxParseError(f"duplicate parameter set {name!r}", ln, col)
            sections.append((name, ln, {}))
            continue
        if not sections:
            raise SyntaxParseError("key outside of a [section]", ln, col)
        key, value = _split_kv(ln, raw, line)
        entries = sections[-1][2]
        if key in entries:
            raise SyntaxParseError(f"duplicate key {key!r}", ln, col)
        entries[key] = (value, ln, raw.find(value, col - 1) + 1)

    result = {}
    for name, ln, entries in sections:
        if "kind" not in entries:
            raise MissingKeyError(f"[{name}] is missing 'kind'", ln, 1)
        kind, kln, kcol = entries.pop("kind")
        if kind not in _KINDS:
            raise UnknownGateKindError(f"unknown parameter kind {kind!r}", kln, kcol)
        keys, cls = _KINDS[kind]
        for key, (_, kl, kc) in entries.items():
            if key not in keys:
                raise SyntaxParseError(f"unknown key {key!r} for kind {kind}", kl, kc)
        missing = [k for k in keys if k not in entries]
        if missing:
            raise MissingKeyError(f"[{name}] is missing {', '.join(missing)}", ln, 1)
        kwargs = {keys[k]: _finite(*entries[k]) for k in keys}
        try:
            result[name] = cls(**kwargs)
        except ValueError as exc:
            raise SyntaxParseError(f"[{name}]: {exc}", ln, 1) from None
    return result


def write_params(paramsets: Mapping[str, GateParams | CGateParams]) -> str:
    chunks = []
    for name, p in paramsets.items():
        kind, keys = ("CGATE", CGATE_KEYS) if isinstance(p, CGateParams) else ("NOR", NOR_KEYS)
        lines = [f"[{name}]", f"kind = {kind}"]
        lines += [f"{k} = {getattr(p, attr)!r}" for k, attr in keys.items()]
        chunks.append("\n".join(lines) + "\n")
    return "\n".join(chunks)


def load_shipped(name: str) -> GateParams | CGateParams:
    """One of the bundled parameter sets: nor_15nm, nor_65nm, cgate_15nm."""
    text = resources.files("hybriddelay").joinpath("data", f"{name}.params").read_text()
    return parse_params(text)[name]


# -- trace CSV ----------------------------------------------------------------------

TRACE_HEADER = "time_s,net,value"


def write_traces(traces: Iterable[DigitalTrace]) -> str:
    """CSV with one row per value change.

    The first row of each net gives its initial value at ``t_start``; a
    final row repeating the current value marks ``t_end``.
    """
    rows = [TRACE_HEADER]
    for tr in traces:
        rows.append(f"{fmt_time(tr.t_start)},{tr.net},{tr.initial}")
        rows += [f"{fmt_time(t)},{tr.net},{v}" for t, v in zip(tr.times, tr.values)]
        if tr.t_end is not None:
            rows.append(f"{fmt_time(tr.t_end)},{tr.net},{tr.final}")
    return "\n".join(rows) + "\n"


def parse_traces(text: str) -> dict[str, DigitalTrace]:
    lines = text.splitlines()
    if not lines or lines[0].strip() != TRACE_HEADER:
        raise SyntaxParseError(f"expected header {TRACE_HEADER!r}", 1, 1)
    rows: dict[str, list[tuple[float, int, int]]] = {}
    for ln, raw in enumerate(lines[1:], 2):
        if not raw.strip():
            continue
        parts = raw.split(",")
        if len(parts) != 3:
            raise SyntaxParseError("expected time_s,net,value", ln, 1)
        t_s, net, v_s = (p.strip() for p in parts)
        t = _finite(t_s, ln, 1)
        if not _NAME.match(net):
            raise SyntaxParseError(f"invalid net name {net!r}", ln, len(parts[0]) + 2)
        if v_s not in ("0", "1"):
            raise SyntaxParseError(f"value must be 0 or 1, got {v_s!r}", ln,
                                   len(parts[0]) + len(parts[1]) + 3)
        rows.setdefault(net, []).append((t, int(v_s), ln))

    traces = {}
    for net, entries in rows.items():
        t_start, initial, _ = entries[0]
        times, t_end, cur = [], None, initial
        for i, (t, v, ln) in enumerate(entries[1:], 1):
            if v == cur:
                if i != len(entries) - 1:
                    raise SyntaxParseError(f"net {net!r}: repeated value {v}", ln, 1)
                t_end = t
                continue
            if t < (times[-1] if times else t_start) or (times and t == times[-1]):
                raise SyntaxParseError(f"net {net!r}: time goes backwards", ln, 1)
            times.append(t)
            cur = v
        if t_end is not None and times and t_end < times[-1]:
            raise SyntaxParseError(f"net {net!r}: end marker before last transition",
                                   entries[-1][2], 1)
        traces[net] = DigitalTrace(net, initial, tuple(times), t_start, t_end)
    return traces


def parse_trace(text: str, net: str | None = None) -> DigitalTrace:
    """Single-net convenience wrapper around :func:`parse_traces`."""
    traces = parse_traces(text)
    if net is None:
        if len(traces) != 1:
            raise ValueError(f"expected one net, found {sorted(traces)}")
        return next(iter(traces.values()))
    return traces[net]


# -- VCD ----------------------------------------------------------------------------


def _vcd_id(i: int) -> str:
    chars = []
    i += 1
    while i:
        i, r = divmod(i - 1, 94)
        chars.append(chr(33 + r))
    return "".join(chars)


def write_vcd(traces: Iterable[DigitalTrace], module: str = "top") -> str:
    """IEEE 1364 value change dump with a 1 fs timescale."""
    traces = list(traces)
    ids = {tr.net: _vcd_id(i) for i, tr in enumerate(traces)}
    out = ["$timescale 1fs $end", f"$scope module {module} $end"]
    out += [f"$var wire 1 {ids[tr.net]} {tr.net} $end" for tr in traces]
    out += ["$upscope $end", "$enddefinitions $end"]
    changes: dict[int, dict[str, int]] = {}
    for tr in traces:
        for t, v in zip(tr.times, tr.values):
            fs = round(t * 1e15)
            slot = changes.setdefault(fs, {})
            # two edges of one net inside the same fs collapse to the last value
            slot[tr.net] = v
    t0 = min((round(tr.t_start * 1e15) for tr in traces), default=0)
    out.append(f"#{t0}")
    out.append("$dumpvars")
    out += [f"{tr.initial}{ids[tr.net]}" for tr in traces]
    out.append("$end")
    for fs in sorted(changes):
        out.append(f"#{fs}")
        out += [f"{v}{ids[n]}" for n, v in changes[fs].items()]
    return "\n".join(out) + "\n"


def read_vcd(text: str) -> dict[str, list[tuple[int, int]]]:
    """Minimal reader: net -> [(time_fs, value)] including the initial dump."""
    names: dict[str, str] = {}
    result: dict[str, list[tuple[int, int]]] = {}
    now = 0
    scale = None
    for tok_line in text.splitlines():
        line = tok_line.strip()
        if line.startswith("$timescale"):
            scale = line.split()[1]
        elif line.startswith("$var"):
            parts = line.split()
            names[parts[3]] = parts[4]
            result[parts[4]] = []
        elif line.startswith("#"):
            now = int(line[1:])
        elif line and line[0] in "01xz" and line[1:] in names:
            result[names[line[1:]]].append((now, int(line[0]) if line[0] in "01" else -1))
    if scale != "1fs":
        raise SyntaxParseError(f"unsupported timescale {scale!r}", 1, 1)
    return result
