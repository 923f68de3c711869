"""Closed-form trajectories and delay functions of the hybrid gate model.

Sign and time conventions
-------------------------
``delta`` is always ``t_B - t_A``.  For a rising output both inputs fall and
the delay is measured from the later input; for a falling output both inputs
rise and the delay is measured from the earlier input.  Negative ``delta`` is
handled by swapping the roles of the two inputs (:func:`mirror`).

All quantities are SI.  The pure delay ``delta_min`` is never included here;
callers add it when scheduling.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields, replace

from .errors import (
    DegenerateParameterError,
    ExponentOverflowError,
    NegativeDelayError,
    NoCrossingError,
)

LN2 = math.log(2.0)
EXP_LIMIT = 700.0


def _exp(x: float) -> float:
    if x > EXP_LIMIT:
        raise ExponentOverflowError(f"exponent {x:.6g} exceeds {EXP_LIMIT}")
    return math.exp(x)


def _phi(x: float) -> float:
    """(e^x - 1)/x, continuous at 0."""
    if x == 0.0:
        return 1.0
    if x > EXP_LIMIT:
        raise ExponentOverflowError(f"exponent {x:.6g} exceeds {EXP_LIMIT}")
    return math.expm1(x) / x


def _check_positive(obj, names):
    for name in names:
        value = getattr(obj, name)
        if not (math.isfinite(value) and value > 0):
            raise ValueError(f"{name} must be finite and > 0, got {value!r}")


def _check_common(obj, alpha_names):
    for name in alpha_names:
        value = getattr(obj, name)
        if not (math.isfinite(value) and value >= 0):
            raise ValueError(f"{name} must be finite and >= 0, got {value!r}")
    if not 0 < obj.eta < 1:
        raise ValueError(f"eta must lie in (0, 1), got {obj.eta!r}")
    if not (math.isfinite(obj.delta_min) and obj.delta_min >= 0):
        raise ValueError(f"delta_min must be >= 0, got {obj.delta_min!r}")


@dataclass(frozen=True)
class GateParams:
    """Parameters of one NOR (or NAND) gate instance.

    ``r`` is the per-transistor on-resistance of the pMOS stack, so the fully
    switched-on series pull-up has resistance ``2 * r``.
    """

    r_nA: float
    r_nB: float
    r: float
    c: float
    alpha1: float
    alpha2: float
    eta: float = 0.01
    delta_min: float = 0.0
    v_dd: float = 0.8

    def __post_init__(self):
        _check_positive(self, ("r_nA", "r_nB", "r", "c", "v_dd"))
        _check_common(self, ("alpha1", "alpha2"))

    def to_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class CGateParams:
    """Parameters of a two-input Muller C gate.

    ``alpha1``/``alpha2`` shape the switch-on of the A/B transistors in the
    path that charges the output, ``alpha4``/``alpha3`` those of the A/B
    transistors in the discharging path.
    """

    r_n: float
    r_p: float
    alpha1: float
    alpha2: float
    alpha3: float
    alpha4: float
    c: float
    eta: float = 0.01
    delta_min: float = 0.0
    v_dd: float = 0.8

    def __post_init__(self):
        _check_positive(self, ("r_n", "r_p", "c", "v_dd"))
        _check_common(self, ("alpha1", "alpha2", "alpha3", "alpha4"))

    def to_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


class ModeKind(enum.Enum):
    """Input-state transitions; the suffix gives the required sign of delta."""

    UP_MINUS = ((0, 0), (1, 0), -1)
    UPUP_PLUS = ((1, 0), (1, 1), +1)
    UP_PLUS = ((0, 0), (0, 1), +1)
    UPUP_MINUS = ((0, 1), (1, 1), -1)
    DOWN_MINUS = ((1, 1), (0, 1), -1)
    DOWNDOWN_PLUS = ((0, 1), (0, 0), +1)
    DOWN_PLUS = ((1, 1), (1, 0), +1)
    DOWNDOWN_MINUS = ((1, 0), (0, 0), -1)

    @property
    def source(self) -> tuple[int, int]:
        return self.value[0]

    @property
    def target(self) -> tuple[int, int]:
        return self.value[1]

    @property
    def sign(self) -> int:
        return self.value[2]

    @classmethod
    def from_states(cls, old: tuple[int, int], new: tuple[int, int]) -> "ModeKind":
        for kind in cls:
            if kind.source == tuple(old) and kind.target == tuple(new):
                return kind
        raise ValueError(f"no single-input mode switch from {old} to {new}")


@dataclass(frozen=True)
class ModeSwitch:
    kind: ModeKind
    delta: float

    def __post_init__(self):
        if math.isnan(self.delta):
            raise ValueError("delta is NaN")
        if self.kind.sign > 0 and self.delta < 0:
            raise ValueError(f"{self.kind.name} requires delta >= 0")
        if self.kind.sign < 0 and self.delta > 0:
            raise ValueError(f"{self.kind.name} requires delta <= 0")


class ApproxCase(enum.IntEnum):
    CASE1 = 1
    CASE2 = 2
    CASE3 = 3
    CASE4 = 4

    @property
    def k(self) -> int:
        return int(self)


# -- generic machinery on (first alpha, second alpha, on-resistance) ----------
#
# ``a1`` belongs to the transistor that switched on first (input A when
# delta >= 0), ``a2`` to the one switching on at the mode switch, ``r`` is the
# per-transistor on-resistance.


def _triple(params, network: str = "up"):
    if isinstance(params, GateParams):
        return params.alpha1, params.alpha2, params.r
    if network == "up":
        return params.alpha1, params.alpha2, params.r_n
    if network == "down":
        return params.alpha4, params.alpha3, params.r_p
    raise ValueError(f"unknown network {network!r}")


def case_boundaries(a1: float, a2: float, r: float) -> tuple[float, float, float]:
    return a2 / (2 * r), (a1 + 2 * a2) / (4 * r), (a1 + a2) / (2 * r)


def _case(delta, a1, a2, r) -> ApproxCase:
    b1, b2, b3 = case_boundaries(a1, a2, r)
    if delta < b1:
        return ApproxCase.CASE1
    if delta < b2:
        return ApproxCase.CASE2
    if delta < b3:
        return ApproxCase.CASE3
    return ApproxCase.CASE4


def _i(delta, a1, a2, r, eta) -> float:
    k = _case(delta, a1, a2, r)
    eps = eta * delta
    lo, hi = delta - eps, delta + eps
    s12, s122 = a1 + a2, a1 + 2 * a2
    r2 = r * r
    if k == 1:
        return (lo * lo / (2 * a2) - hi * hi / (2 * s12)
                + 4 * eps * delta / s122 - s12 / (8 * r2))
    if k == 2:
        return ((4 * r * lo - s122) / (8 * r2) - hi * hi / (2 * s12)
                + 4 * eps * delta / s122)
    if k == 3:
        return (4 * r * hi - s122) / (8 * r2) - hi * hi / (2 * s12)
    return -a2 / (8 * r2)


def _gamma(delta, a1, a2, r, c, eta) -> float:
    k = _case(delta, a1, a2, r)
    kk = 4 * r * r * c
    tau = 2 * r * c
    eps = eta * delta
    lo, hi = delta - eps, delta + eps
    s12, s122 = a1 + a2, a1 + 2 * a2
    tail = _phi(a2 / kk)
    if k == 4:
        g = tail
    else:
        lead = kk / s12 * _exp(s12 / kk)
        e_hi = _exp(hi / tau)
        if k == 3:
            g = lead - (1 - (2 * r * hi - kk) / s12) * e_hi + tail
        else:
            e_lo = _exp(lo / tau)
            upper = ((4 * r * hi - 2 * kk) / s122 - (2 * r * hi - kk) / s12) * e_hi
            if k == 2:
                g = lead - (1 - (4 * r * lo - 2 * kk) / s122) * e_lo - upper + tail
            elif delta == 0:
                # the general expression cancels to this exactly
                g = _phi(s12 / kk)
            else:
                g = (lead - kk / a2
                     - ((2 * r * lo - kk) / a2 - (4 * r * lo - 2 * kk) / s122) * e_lo
                     - upper)
    if not g > 0.5:
        raise DegenerateParameterError(
            f"gamma_{int(k)} = {g:.6g} <= 1/2 at delta = {delta:.6e} s")
    return g


def _require_nonneg(delta):
    if not delta >= 0:
        raise ValueError(f"delta must be >= 0, got {delta!r}")


# -- public operations ----------------------------------------------------------


def classify_case(delta: float, params, network: str = "up") -> ApproxCase:
    _require_nonneg(delta)
    a1, a2, r = _triple(params, network)
    return _case(delta, a1, a2, r)


def i_k(delta: float, params, network: str = "up") -> float:
    _require_nonneg(delta)
    a1, a2, r = _triple(params, network)
    return _i(delta, a1, a2, r, params.eta)


def gamma_k(delta: float, params, network: str = "up") -> float:
    _require_nonneg(delta)
    a1, a2, r = _triple(params, network)
    return _gamma(delta, a1, a2, r, params.c, params.eta)


def mirror(params: GateParams) -> GateParams:
    return replace(params, alpha1=params.alpha2, alpha2=params.alpha1,
                   r_nA=params.r_nB, r_nB=params.r_nA)


def c_mirror(params: CGateParams) -> CGateParams:
    return replace(params, alpha1=params.alpha2, alpha2=params.alpha1,
                   alpha3=params.alpha4, alpha4=params.alpha3)


def v_rising_first(t: float, v0: float, params: GateParams) -> float:
    return v0 * math.exp(-t / (params.c * params.r_nA))


def v_rising_second(t: float, delta: float, v0_at_origin: float,
                    params: GateParams) -> float:
    v_switch = v_rising_first(delta, v0_at_origin, params)
    rate = 1 / (params.c * params.r_nA) + 1 / (params.c * params.r_nB)
    return v_switch * math.exp(-rate * t)


def v_falling_first(t: float, v0: float, params: GateParams) -> float:
    return v0 * math.exp(-t / (params.c * params.r_nB))


def v_charging(t: float, delta: float, v_switch: float, params: GateParams) -> float:
    """Output while both pull-up transistors conduct.

    ``t`` is measured from the later switch-on, ``v_switch`` is the output
    voltage at that instant.  The closed form does not start exactly at
    ``v_switch`` (it leads with ``V_DD (1 - gamma)``), so it is held at
    ``v_switch`` until it overtakes it.  The threshold crossing is unaffected
    whenever ``v_switch`` lies below ``V_DD/2``.
    """
    if delta < 0:
        return v_charging(t, -delta, v_switch, mirror(params))
    i = i_k(delta, params)
    g = gamma_k(delta, params)
    decay = math.exp(-t / (2 * params.r * params.c))
    v = v_switch * _exp(-i / params.c) * decay + params.v_dd * (1 - g * decay)
    return min(params.v_dd, max(v_switch, v))


def v_falling_second(t: float, delta: float, v0_at_origin: float,
                     params: GateParams) -> float:
    """Output after the second falling input; ``t`` from that input."""
    if delta < 0:
        return v_falling_second(t, -delta, v0_at_origin, mirror(params))
    return v_charging(t, delta, v_falling_first(delta, v0_at_origin, params), params)


def _charging_crossing(gamma: float, i: float, v_switch: float, tau: float,
                       c: float, v_dd: float) -> float:
    arg = 2 * (gamma - v_switch / v_dd * _exp(-i / c))
    if not arg > 0:
        raise NoCrossingError("charging trajectory never reaches V_DD/2")
    delay = tau * math.log(arg)
    if arg <= 1:
        raise NegativeDelayError(delay)
    return delay


def rising_delay_from_switch(delta: float, v_switch: float, params: GateParams) -> float:
    """Rising-output delay from the later pull-up switch-on.

    ``v_switch`` is the output voltage at that switch; ``delta`` is the
    switch-on time of pMOS B minus that of pMOS A.
    """
    if delta < 0:
        return rising_delay_from_switch(-delta, v_switch, mirror(params))
    if not v_switch < params.v_dd / 2:
        raise NoCrossingError(f"output already at {v_switch:.6g} V >= V_DD/2")
    return _charging_crossing(gamma_k(delta, params), i_k(delta, params), v_switch,
                              2 * params.r * params.c, params.c, params.v_dd)


def delay_rising_output(delta: float, v0: float, params: GateParams) -> float:
    """Rising-output delay, measured from the later falling input.

    ``v0`` is the output voltage when the earlier input fell; it decays
    through the remaining nMOS until the later input falls.
    """
    if delta < 0:
        return delay_rising_output(-delta, v0, mirror(params))
    if not 0 <= v0 <= params.v_dd:
        raise ValueError(f"v0 must lie in [0, V_DD], got {v0!r}")
    return rising_delay_from_switch(delta, v_falling_first(delta, v0, params), params)


def delay_falling_output(delta: float, v0: float, params: GateParams) -> float:
    """Falling-output delay, measured from the earlier rising input."""
    if delta < 0:
        return delay_falling_output(-delta, v0, mirror(params))
    if not v0 > params.v_dd / 2:
        raise NoCrossingError(f"output at {v0:.6g} V is not above V_DD/2")
    ell = math.log(params.v_dd / (2 * v0))
    ra, rb, c = params.r_nA, params.r_nB, params.c
    plateau = -ell * c * ra
    if delta >= plateau:
        return plateau
    # parallel resistance first so the delta = 0 value is symmetric in A/B
    return -ell * c * (ra * rb / (ra + rb)) + delta * ra / (ra + rb)


def mis_delay_falling(delta: float, params: GateParams) -> float:
    """Falling-output delay for an output resting at V_DD."""
    if delta < 0:
        return mis_delay_falling(-delta, mirror(params))
    ra, rb, c = params.r_nA, params.r_nB, params.c
    if delta >= LN2 * c * ra:
        return LN2 * c * ra
    return LN2 * c * (ra * rb / (ra + rb)) + delta * ra / (ra + rb)


def mis_delay_rising(delta: float, params: GateParams) -> float:
    """Rising-output delay for an output resting at 0 V."""
    if delta < 0:
        return mis_delay_rising(-delta, mirror(params))
    return 2 * params.r * params.c * math.log(2 * gamma_k(delta, params))


# -- Muller C gate ----------------------------------------------------------------


def c_v_charging(t: float, delta: float, v_switch: float, params: CGateParams) -> float:
    if delta < 0:
        return c_v_charging(t, -delta, v_switch, c_mirror(params))
    a1, a2, r = _triple(params, "up")
    i = _i(delta, a1, a2, r, params.eta)
    g = _gamma(delta, a1, a2, r, params.c, params.eta)
    decay = math.exp(-t / (2 * r * params.c))
    v = v_switch * _exp(-i / params.c) * decay + params.v_dd * (1 - g * decay)
    return min(params.v_dd, max(v_switch, v))


def c_v_discharging(t: float, delta: float, v_switch: float, params: CGateParams) -> float:
    if delta < 0:
        return c_v_discharging(t, -delta, v_switch, c_mirror(params))
    a4, a3, r = _triple(params, "down")
    i = _i(delta, a4, a3, r, params.eta)
    v = v_switch * _exp(-i / params.c) * math.exp(-t / (2 * r * params.c))
    return max(0.0, min(v_switch, v))


def c_delay_rising(delta: float, v0: float, params: CGateParams) -> float:
    """C-gate rising delay from the later rising input; ``v0`` held meanwhile."""
    if delta < 0:
        return c_delay_rising(-delta, v0, c_mirror(params))
    if not 0 <= v0 < params.v_dd / 2:
        raise NoCrossingError(f"output at {v0:.6g} V is not below V_DD/2")
    a1, a2, r = _triple(params, "up")
    return _charging_crossing(_gamma(delta, a1, a2, r, params.c, params.eta),
                              _i(delta, a1, a2, r, params.eta), v0,
                              2 * r * params.c, params.c, params.v_dd)


def c_delay_falling(delta: float, v0: float, params: CGateParams) -> float:
    """C-gate falling delay from the later falling input."""
    if delta < 0:
        return c_delay_falling(-delta, v0, c_mirror(params))
    if not v0 > params.v_dd / 2:
        raise NoCrossingError(f"output at {v0:.6g} V is not above V_DD/2")
    a4, a3, r = _triple(params, "down")
    i = _i(delta, a4, a3, r, params.eta)
    delay = 2 * r * params.c * (math.log(2 * v0 / params.v_dd) - i / params.c)
    if delay <= 0:
        raise NegativeDelayError(delay)
    return delay


# -- single input switching -------------------------------------------------------


def sis_delay(time_since_prev: float, v0_at_prev_switch: float, direction: str,
              params: GateParams, input: str = "A") -> float:
    """Delay of a NOR output transition caused by one input alone.

    ``time_since_prev`` is the time since the same input last switched and
    ``v0_at_prev_switch`` the output voltage at that moment.  ``direction``
    names the output transition, ``"rising"`` or ``"falling"``.  The other
    input is idle at 0.
    """
    if not time_since_prev >= 0:
        raise ValueError("time_since_prev must be >= 0")
    if input not in ("A", "B"):
        raise ValueError(f"input must be 'A' or 'B', got {input!r}")
    w = time_since_prev
    if direction == "rising":
        # the same-input separation stands in for delta; the output decayed
        # through this input's nMOS since its previous (rising) transition
        return delay_rising_output(-w if input == "A" else w, v0_at_prev_switch, params)
    if direction == "falling":
        # previous transition was a falling input that started charging
        if math.isinf(w):
            v = params.v_dd
        else:
            v = v_charging(w, w if input == "B" else -w, v0_at_prev_switch, params)
        r_down = params.r_nA if input == "A" else params.r_nB
        if not v > params.v_dd / 2:
            raise NoCrossingError(f"output only reached {v:.6g} V before the input rose")
        return params.c * r_down * math.log(2 * v / params.v_dd)
    raise ValueError(f"direction must be 'rising' or 'falling', got {direction!r}")
