import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybriddelay import trace_io as tio
from hybriddelay.delay_core import CGateParams, GateParams
from hybriddelay.errors import (
    DanglingNetError,
    MissingKeyError,
    MultipleDriverError,
    ParseError,
    SyntaxParseError,
    UnknownGateKindError,
)
from hybriddelay.sim_engine import DigitalTrace, GateSpec, Netlist

from conftest import CGATE_15NM, NOR_15NM, NOR_65NM

# -- netlists ----------------------------------------------------------------------


def test_empty_netlist():
    assert tio.parse_netlist("") == Netlist()
    assert tio.parse_netlist("# only a comment\n\n") == Netlist()
    assert tio.write_netlist(Netlist()) == ""


def test_parse_netlist_basic():
    text = """
    # a NOR feeding an inverter
    input A
    input B
    gate g1 NOR2 nor_15nm A B n1   # trailing comment
    gate g2 INV nor_15nm n1 - Y
    output Y
    """
    n = tio.parse_netlist(text)
    assert n.inputs == ("A", "B")
    assert n.outputs == ("Y",)
    assert n.gates == (GateSpec("g1", "NOR2", "nor_15nm", "A", "B", "n1"),
                       GateSpec("g2", "INV", "nor_15nm", "n1", None, "Y"))
    assert tio.parse_netlist(tio.write_netlist(n)) == n


def test_feedback_netlist_allowed():
    text = "input A\ngate g1 CGATE2 c A q q\noutput q\n"
    n = tio.parse_netlist(text)
    assert n.gates[0].net_b == "q"


@pytest.mark.parametrize("text,exc,line,col", [
    ("input A\ngate g1 XOR2 p A A Y\n", UnknownGateKindError, 2, 9),
    ("input A\ngate g1 NOR2 p A B Y\n", DanglingNetError, 2, 18),
    ("input A\ninput A\n", MultipleDriverError, 2, 7),
    ("input A\ngate g1 NOR2 p A A A\n", MultipleDriverError, 2, 20),
    ("input A\ngate g1 NOR2 p A A\n", SyntaxParseError, 2, 1),
    ("wire A\n", SyntaxParseError, 1, 1),
    ("input A\ngate g1 INV p A A Y\n", SyntaxParseError, 2, 17),
    ("input A\ngate g1 NOR2 p A - Y\n", SyntaxParseError, 2, 18),
    ("input A B\n", SyntaxParseError, 1, 1),
    ("input A\noutput Z\n", DanglingNetError, 2, 8),
    ("input 9x\n", SyntaxParseError, 1, 7),
])
def test_netlist_errors_are_distinct_and_located(text, exc, line, col):
    with pytest.raises(exc) as info:
        tio.parse_netlist(text)
    assert (info.value.line, info.value.column) == (line, col)


def test_error_classes_are_distinct():
    classes = {SyntaxParseError, UnknownGateKindError, DanglingNetError, MissingKeyError,
               MultipleDriverError}
    assert len(classes) == 5
    for a in classes:
        assert issubclass(a, ParseError)
        for b in classes - {a}:
            assert not issubclass(a, b)


names = st.from_regex(r"[a-z][a-z0-9_]{0,5}", fullmatch=True)


@st.composite
def netlists(draw):
    inputs = draw(st.lists(names, min_size=1, max_size=3, unique=True))
    n_gates = draw(st.integers(0, 4))
    outs = draw(st.lists(names.filter(lambda s: s not in inputs), min_size=n_gates,
                         max_size=n_gates, unique=True))
    driven = list(inputs)
    gates = []
    for i, out in enumerate(outs):
        kind = draw(st.sampled_from(["NOR2", "NAND2", "CGATE2", "INV"]))
        pool = driven + outs  # forward references and feedback allowed
        a = draw(st.sampled_from(pool))
        b = None if kind == "INV" else draw(st.sampled_from(pool))
        gates.append(GateSpec(f"g{i}", kind, draw(names), a, b, out))
        driven.append(out)
    outputs = draw(st.lists(st.sampled_from(driven), max_size=2, unique=True))
    return Netlist(tuple(gates), tuple(inputs), tuple(outputs))


@settings(max_examples=200, deadline=None)
@given(netlists())
def test_netlist_round_trip(n):
    assert tio.parse_netlist(tio.write_netlist(n)) == n


@settings(max_examples=300, deadline=None)
@given(st.text(max_size=80))
def test_parsers_are_total(text):
    for parse in (tio.parse_netlist, tio.parse_params, tio.parse_traces, tio.parse_config):
        try:
            parse(text)
        except ParseError:
            pass


# -- parameter files --------------------------------------------------------------------


def test_shipped_params_equal_tables():
    assert tio.load_shipped("nor_15nm") == GateParams(**NOR_15NM)
    assert tio.load_shipped("nor_65nm") == GateParams(**NOR_65NM)
    assert tio.load_shipped("cgate_15nm") == CGateParams(**CGATE_15NM)


def test_params_round_trip():
    sets = {"a": GateParams(**NOR_15NM), "c": CGateParams(**CGATE_15NM)}
    assert tio.parse_params(tio.write_params(sets)) == sets


def test_params_missing_key():
    text = tio.write_params({"a": GateParams(**NOR_15NM)}).replace("eta = 0.01\n", "")
    with pytest.raises(MissingKeyError) as info:
        tio.parse_params(text)
    assert "eta" in str(info.value)


def test_params_errors():
    base = tio.write_params({"a": GateParams(**NOR_15NM)})
    with pytest.raises(UnknownGateKindError):
        tio.parse_params(base.replace("kind = NOR", "kind = XOR"))
    with pytest.raises(SyntaxParseError) as info:
        tio.parse_params(base.replace("r_ohm = 6699.9626822002", "r_ohm = abc"))
    assert info.value.line == 5
    with pytest.raises(SyntaxParseError):
        tio.parse_params(base.replace("r_ohm = 6699.9626822002", "r_ohm = inf"))
    with pytest.raises(SyntaxParseError):
        tio.parse_params("r_ohm = 1\n")
    with pytest.raises(SyntaxParseError):
        tio.parse_params(base + "bogus_key = 1\n")


def test_config_parse_write():
    cfg = tio.parse_config("a = 1\n# c\nb = x y  # tail\n")
    assert cfg == {"a": "1", "b": "x y"}
    assert tio.parse_config(tio.write_config({"a": 1.5e-12, "b": "s"})) == {
        "a": "1.5e-12", "b": "s"}
    with pytest.raises(SyntaxParseError):
        tio.parse_config("a = 1\na = 2\n")
    with pytest.raises(SyntaxParseError):
        tio.parse_config("novalue\n")


# -- traces ---------------------------------------------------------------------------

times = st.lists(st.floats(1e-15, 1e-6, allow_nan=False), max_size=12, unique=True).map(sorted)


@settings(max_examples=200, deadline=None)
@given(times, st.integers(0, 1), st.booleans())
def test_trace_round_trip_bit_exact(ts, initial, with_end):
    end = (ts[-1] if ts else 0.0) * 1.5 + 1e-12 if with_end else None
    tr = DigitalTrace("net_1", initial, tuple(ts), 0.0, end)
    back = tio.parse_trace(tio.write_traces([tr]))
    assert back == tr


def test_trace_multi_net():
    a = DigitalTrace("A", 0, (1e-11, 2e-11), 0.0, 5e-11)
    b = DigitalTrace("B", 1, (3.3e-11,), 0.0, 5e-11)
    parsed = tio.parse_traces(tio.write_traces([a, b]))
    assert parsed == {"A": a, "B": b}
    with pytest.raises(ValueError):
        tio.parse_trace(tio.write_traces([a, b]))
    assert tio.parse_trace(tio.write_traces([a, b]), "B") == b


def test_time_format_precision():
    t = 39.05148212345678e-12
    assert float(tio.fmt_time(t)) == t
    assert len(tio.fmt_time(t).split("e")[0].replace(".", "")) >= 15


@pytest.mark.parametrize("text", [
    "time,net,value\n",
    "time_s,net,value\n0,A,2\n",
    "time_s,net,value\n0,A,0\n1e-12,A,1\n5e-13,A,0\n",
    "time_s,net,value\n0,A\n",
    "time_s,net,value\nx,A,0\n",
    "time_s,net,value\n0,A,0\n1e-12,A,0\n2e-12,A,1\n",
])
def test_trace_errors(text):
    with pytest.raises(SyntaxParseError):
        tio.parse_traces(text)


# -- VCD -----------------------------------------------------------------------------


def test_vcd_structure_and_round_trip():
    a = DigitalTrace("A", 0, (1e-12, 2.5e-12), 0.0, 5e-12)
    y = DigitalTrace("Y", 1, (2.5e-12, 4e-12), 0.0, 5e-12)
    text = tio.write_vcd([a, y])
    assert "$timescale 1fs $end" in text
    assert "$enddefinitions $end" in text
    stamps = [int(line[1:]) for line in text.splitlines() if line.startswith("#")]
    assert stamps == sorted(set(stamps))
    back = tio.read_vcd(text)
    assert back["A"] == [(0, 0), (1000, 1), (2500, 0)]
    assert back["Y"] == [(0, 1), (2500, 0), (4000, 1)]


def test_vcd_rejects_other_timescale():
    text = tio.write_vcd([DigitalTrace("A", 0, (1e-12,))]).replace("1fs", "1ps")
    with pytest.raises(SyntaxParseError):
        tio.read_vcd(text)
