"""Fit NOR model parameters to six characteristic delays.

The falling-output stage is closed form.  The rising stage searches
``(log r, log alpha1, log alpha2)`` with Nelder-Mead from several seeded
starting points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import delay_core as dc
from .delay_core import GateParams
from .errors import FitError, ModelError

DELAY_KEYS = ("fall_minus_inf", "fall_zero", "fall_plus_inf",
              "rise_minus_inf", "rise_zero", "rise_plus_inf")


@dataclass(frozen=True)
class CharacteristicDelays:
    """Delays (including the pure delay) at delta = -inf, 0 and +inf."""

    fall_minus_inf: float
    fall_zero: float
    fall_plus_inf: float
    rise_minus_inf: float
    rise_zero: float
    rise_plus_inf: float

    def __post_init__(self):
        for k in DELAY_KEYS:
            v = getattr(self, k)
            if not (math.isfinite(v) and v > 0):
                raise FitError(f"{k} must be finite and > 0, got {v!r}")
        if not self.fall_zero < min(self.fall_minus_inf, self.fall_plus_inf):
            raise FitError("falling delays must show a speed-up at delta = 0")
        if not self.rise_zero > max(self.rise_minus_inf, self.rise_plus_inf):
            raise FitError("rising delays must show a slow-down at delta = 0")

    def as_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in DELAY_KEYS}


def characteristic_delays(params: GateParams) -> CharacteristicDelays:
    """The six delays the model produces for ``params``, pure delay included."""
    inf, dm = math.inf, params.delta_min
    return CharacteristicDelays(
        fall_minus_inf=dc.mis_delay_falling(-inf, params) + dm,
        fall_zero=dc.mis_delay_falling(0.0, params) + dm,
        fall_plus_inf=dc.mis_delay_falling(inf, params) + dm,
        rise_minus_inf=dc.mis_delay_rising(-inf, params) + dm,
        rise_zero=dc.mis_delay_rising(0.0, params) + dm,
        rise_plus_inf=dc.mis_delay_rising(inf, params) + dm,
    )


@dataclass
class FitReport:
    params: GateParams
    residuals: dict[str, float]
    iterations: int
    converged: bool
    history: list[float] = field(default_factory=list)
    best_start: int = 0

    @property
    def max_residual(self) -> float:
        return max(abs(r) for r in self.residuals.values())

    def to_text(self) -> str:
        p = self.params
        lines = ["fit report", f"  converged     {self.converged}",
                 f"  iterations    {self.iterations}", f"  best start    {self.best_start}"]
        lines += [f"  {name:<14}{getattr(p, name):.10g}" for name in
                  ("r_nA", "r_nB", "r", "c", "alpha1", "alpha2", "eta", "delta_min", "v_dd")]
        lines.append("  relative residuals")
        lines += [f"    {k:<16}{v:+.3e}" for k, v in self.residuals.items()]
        return "\n".join(lines) + "\n"

    def to_kv(self) -> dict[str, object]:
        p = self.params
        out: dict[str, object] = {
            "converged": str(self.converged).lower(), "iterations": self.iterations,
            "r_nA_ohm": p.r_nA, "r_nB_ohm": p.r_nB, "r_ohm": p.r, "c_farad": p.c,
            "alpha1_ohm_s": p.alpha1, "alpha2_ohm_s": p.alpha2, "eta": p.eta,
            "delta_min_s": p.delta_min, "v_dd_volt": p.v_dd,
        }
        out.update({f"residual_{k}": v for k, v in self.residuals.items()})
        return out


def choose_delta_min(fall_plus_inf: float, fall_zero: float) -> float:
    """Pure delay making the falling delays at +inf and 0 differ by a factor 2."""
    d = 2 * fall_zero - fall_plus_inf
    if d < 0:
        raise FitError(f"inconsistent falling delays: pure delay would be {d:.4e} s")
    # the subtraction can leave a one-ulp residue; snap to the nearest 1e-18 s
    return round(d, 18)


def fit_falling(d: CharacteristicDelays, delta_min: float, c: float):
    """Pull-down resistances from the saturated falling delays.

    Returns ``(r_nA, r_nB, residual_zero)`` where the last item is the
    relative mismatch of the resulting delay at delta = 0.
    """
    if not c > 0:
        raise FitError("capacitance must be > 0")
    r_nA = (d.fall_plus_inf - delta_min) / (dc.LN2 * c)
    r_nB = (d.fall_minus_inf - delta_min) / (dc.LN2 * c)
    if r_nA <= 0 or r_nB <= 0:
        raise FitError("pure delay leaves no room for the falling delays")
    model_zero = dc.LN2 * c * r_nA * r_nB / (r_nA + r_nB) + delta_min
    return r_nA, r_nB, (model_zero - d.fall_zero) / d.fall_zero


def _rising_model(r, a1, a2, base: GateParams):
    p = GateParams(base.r_nA, base.r_nB, r, base.c, a1, a2, base.eta,
                   base.delta_min, base.v_dd)
    inf = math.inf
    return p, (dc.mis_delay_rising(-inf, p), dc.mis_delay_rising(0.0, p),
               dc.mis_delay_rising(inf, p))


def fit_rising(d: CharacteristicDelays, fixed, *, v_dd: float = 0.8, eta: float = 0.01,
               seed: int = 0, starts: int = 8, max_evals: int = 100_000,
               xtol: float = 1e-9, tolerance: float = 1e-3):
    """Fit ``r``, ``alpha1``, ``alpha2`` to the three rising delays.

    ``fixed`` is ``(r_nA, r_nB, c, delta_min)``.  ``eta`` is passed through
    unchanged: none of the six targets depends on it.  Returns
    ``(r, alpha1, alpha2, eta, report)``.
    """
    r_nA, r_nB, c, delta_min = fixed
    base = GateParams(r_nA, r_nB, 1.0, c, 0.0, 0.0, eta, delta_min, v_dd)
    targets = np.array([d.rise_minus_inf, d.rise_zero, d.rise_plus_inf]) - delta_min
    if np.any(targets <= 0):
        raise FitError("pure delay exceeds a rising delay")

    def objective(x):
        r, a1, a2 = np.exp(x)
        try:
            _, got = _rising_model(r, a1, a2, base)
        except (ModelError, ValueError, OverflowError):
            return 1e6
        rel = (np.array(got) - targets) / targets
        return float(rel @ rel)

    # scale guesses: all delays sit near 2 r c ln 2
    r0 = float(targets.min()) / (2 * c * dc.LN2)
    k0 = 4 * r0 * r0 * c
    rng = np.random.default_rng(seed)
    best = None
    for start in range(max(starts, 8)):
        x0 = np.log([r0 * rng.uniform(0.3, 1.0),
                     k0 * 10 ** rng.uniform(-3, 0),
                     k0 * 10 ** rng.uniform(-3, 0)])
        history: list[float] = []
        res = minimize(objective, x0, method="Nelder-Mead",
                       callback=lambda xk: history.append(objective(xk)),
                       options={"xatol": xtol, "fatol": 1e-20, "maxfev": max_evals,
                                "maxiter": max_evals, "adaptive": False})
        if best is None or res.fun < best[0].fun:
            best = (res, history, start)
    res, history, start = best
    r, a1, a2 = (float(v) for v in np.exp(res.x))
    params, _ = _rising_model(r, a1, a2, base)
    got = characteristic_delays(params)
    residuals = {k: (getattr(got, k) - getattr(d, k)) / getattr(d, k) for k in DELAY_KEYS}
    rising_max = max(abs(residuals[k]) for k in DELAY_KEYS[3:])
    report = FitReport(params, residuals, int(res.nit), bool(rising_max <= tolerance),
                       history, start)
    return r, a1, a2, eta, report


def fit(d: CharacteristicDelays, c: float, *, v_dd: float = 0.8,
        delta_min: float | None = None, eta: float = 0.01, seed: int = 0,
        starts: int = 8, tolerance: float = 1e-2) -> FitReport:
    """Whole procedure: pure delay, pull-down resistances, then the rising stage.

    ``converged`` requires every one of the six residuals within ``tolerance``.
    """
    if delta_min is None:
        delta_min = choose_delta_min(d.fall_plus_inf, d.fall_zero)
    r_nA, r_nB, _ = fit_falling(d, delta_min, c)
    _, _, _, _, report = fit_rising(d, (r_nA, r_nB, c, delta_min), v_dd=v_dd, eta=eta,
                                    seed=seed, starts=starts)
    report.converged = report.max_residual <= tolerance
    return report


def delays_from_config(cfg: dict[str, str]) -> CharacteristicDelays:
    try:
        return CharacteristicDelays(**{k: float(cfg[f"{k}_s"]) for k in DELAY_KEYS})
    except KeyError as exc:
        raise FitError(f"missing target delay {exc.args[0]!r}") from None
