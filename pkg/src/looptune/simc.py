"""SIMC model reduction and PI tuning.

The pipeline reduces a general gain/zeros/poles/delay model to first order
plus dead time and computes PI gains from it:

1. Every positive zero time constant T0 is cancelled against the closest
   pole time constant tau0 at least as large (the largest remaining pole
   when the zero exceeds them all).  With theta the model's dead time, the
   fraction (T0 s + 1)/(tau0 s + 1) is replaced by

       T0/tau0                    T0 >= tau0 >= theta        (T1)
       T0/theta                   T0 >= theta >= tau0        (T1a)
       1                          theta >= T0 >= tau0        (T1b)
       T0/tau0                    tau0 >= T0 >= 5 theta      (T2)
       1/((tau0 - T0) s + 1)      min(tau0, 5 theta) >= T0   (T3)

   i.e. a gain scaling (T1, T1a, T1b, T2) or a replacement pole (T3).

2. The half rule collapses the remaining lag ladder:

       tau1 = tau_p1 + tau_p2 / 2
       taud = delay + tau_p2 / 2 + sum(tau_p3..) + sum(|negative zeros|)

3. PI gains, with tau_c the closed-loop time constant knob
   (-taud < tau_c < inf; recommended tau_c = taud):

       Kp = (1/k) tau1 / (tau_c + taud)
       Ki = Kp / min(tau1, 4 (tau_c + taud))
"""

from __future__ import annotations

from dataclasses import dataclass, field


from .errors import InvalidTauC, UnsupportedStructure, ZeroGainModel
from .lti import TransferFunction

# Sentinel accepted anywhere a tau_c policy is taken.
RECOMMENDED = "recommended"


@dataclass(frozen=True)
class FopdtModel:
    """First-order-plus-dead-time reduction  k / (tau1 s + 1) e^(-taud s)."""

    k: float
    tau1: float
    taud: float

    def __post_init__(self):
        if self.tau1 < 0.0 or self.taud < 0.0:
            raise ValueError("tau1 and taud must be nonnegative")


@dataclass(frozen=True)
class PiGains:
    kp: float
    ki: float
    tau_c: float


@dataclass(frozen=True)
class ZeroSubstitution:
    """One applied positive-zero rule, for the audit log."""

    rule: str
    zero: float
    pole: float
    gain_factor: float
    replacement_pole: float | None

    def describe(self) -> str:
        action = f"gain x {self.gain_factor!r}"
        if self.replacement_pole is not None:
            action = f"pole -> {self.replacement_pole!r}"
        return (f"rule {self.rule}: zero {self.zero!r} against pole "
                f"{self.pole!r}, {action}")


def cancel_positive_zeros(g: TransferFunction) -> tuple[TransferFunction, list]:
    """Remove positive zeros by the T1/T1a/T1b/T2/T3 case table.

    Zeros are processed largest first, each against the closest remaining
    pole at least as large (or the largest remaining pole when the zero
    exceeds them all).  Negative zeros stay in place for the half rule.
    Returns the reduced model and the substitution log.
    """
    theta = g.delay
    poles = list(g.poles)
    keep = [z for z in g.zeros if z <= 0.0]
    positive = sorted((z for z in g.zeros if z > 0.0), reverse=True)
    k = g.k0
    log = []
    for t0 in positive:
        if not poles:
            raise UnsupportedStructure(
                "a positive zero is left with no pole to cancel against")
        larger = [p for p in poles if p >= t0]
        tau0 = min(larger) if larger else max(poles)
        if t0 >= tau0:
            if tau0 >= theta:
                rule, factor, newpole = "T1", t0 / tau0, None
            elif t0 >= theta:
                rule, factor, newpole = "T1a", t0 / theta, None
            else:
                rule, factor, newpole = "T1b", 1.0, None
        else:
            if t0 >= 5.0 * theta:
                rule, factor, newpole = "T2", t0 / tau0, None
            else:
                rule, factor, newpole = "T3", 1.0, tau0 - t0
        poles.remove(tau0)
        if newpole is not None:
            poles.append(newpole)
        k *= factor
        log.append(ZeroSubstitution(rule=rule, zero=t0, pole=tau0,
                                    gain_factor=factor, replacement_pole=newpole))
    reduced = TransferFunction(k, tuple(keep), tuple(poles), g.delay)
    return reduced, log


def half_rule(g: TransferFunction) -> FopdtModel:
    """Collapse the lag ladder to first order plus dead time.

    The largest lag keeps half of the second; the other half, every smaller
    lag, and every inverse-response zero go into the effective delay.  A
    static rational part yields tau1 = 0 with the delay passed through
    (documented behavior rather than an error).
    """
    if any(z > 0.0 for z in g.zeros):
        raise ValueError("positive zeros must be cancelled before the half rule")
    neg = sum(-z for z in g.zeros if z < 0.0)
    p = g.poles
    if len(p) == 0:
        return FopdtModel(g.k0, 0.0, g.delay + neg)
    if len(p) == 1:
        return FopdtModel(g.k0, p[0], g.delay + neg)
    half = p[1] / 2.0
    tau1 = p[0] + half
    taud = g.delay + half + sum(p[2:]) + neg
    return FopdtModel(g.k0, tau1, taud)


def tune_pi(m: FopdtModel, tau_c=RECOMMENDED) -> PiGains:
    """PI gains  Kp = (1/k) tau1/(tau_c + taud),  Ki = Kp/min(tau1, 4(tau_c+taud)).

    ``tau_c`` may be the "recommended" sentinel (tau_c = taud).  The interval
    -taud < tau_c is open; tau_c = -taud is rejected.
    """
    if m.k == 0.0:
        raise ZeroGainModel("cannot tune against a zero-gain model")
    if isinstance(tau_c, str):
        if tau_c.lower() != RECOMMENDED:
            raise InvalidTauC(f"unknown tau_c policy '{tau_c}'")
        tc = m.taud
    else:
        tc = float(tau_c)
    horizon = tc + m.taud
    if horizon <= 0.0:
        raise InvalidTauC(
            f"tau_c = {tc} with taud = {m.taud} leaves tau_c + taud <= 0")
    kp = (1.0 / m.k) * (m.tau1 / horizon)
    if m.tau1 <= 4.0 * horizon:
        # min() picked tau1; cancel it analytically so a static model
        # (tau1 = 0) degrades to pure integral action instead of 0/0.
        ki = 1.0 / (m.k * horizon)
    else:
        ki = kp / (4.0 * horizon)
    return PiGains(kp=kp, ki=ki, tau_c=tc)


@dataclass
class ReductionReport:
    """Every intermediate quantity of a tune_loop run, for audit."""

    input_model: TransferFunction
    substitutions: list
    reduced_model: TransferFunction
    fopdt: FopdtModel
    delay_before_reduction: float
    effective_delay: float
    tau_c_policy: object
    tau_c_used: float
    gains: PiGains
    case_table: str = field(default=(
        "(T0 s + 1)/(tau0 s + 1) with theta the model dead time: "
        "T1: T0/tau0 for T0 >= tau0 >= theta; "
        "T1a: T0/theta for T0 >= theta >= tau0; "
        "T1b: 1 for theta >= T0 >= tau0; "
        "T2: T0/tau0 for tau0 >= T0 >= 5 theta; "
        "T3: 1/((tau0 - T0) s + 1) for min(tau0, 5 theta) >= T0; "
        "tau0 is the closest pole >= T0, else the largest remaining pole."))

    def to_dict(self) -> dict:
        return {
            "input_model": self.input_model.to_dict(),
            "substitutions": [
                {"rule": s.rule, "zero": s.zero, "pole": s.pole,
                 "gain_factor": s.gain_factor,
                 "replacement_pole": s.replacement_pole}
                for s in self.substitutions],
            "reduced_model": self.reduced_model.to_dict(),
            "fopdt": {"k": self.fopdt.k, "tau1": self.fopdt.tau1,
                      "taud": self.fopdt.taud},
            "delay_before_reduction": self.delay_before_reduction,
            "effective_delay": self.effective_delay,
            "tau_c_policy": str(self.tau_c_policy),
            "tau_c_used": self.tau_c_used,
            "gains": {"kp": self.gains.kp, "ki": self.gains.ki,
                      "tau_c": self.gains.tau_c},
            "case_table": self.case_table,
        }

    def render(self) -> str:
        lines = [
            f"input: k0={self.input_model.k0!r} zeros={list(self.input_model.zeros)!r} "
            f"poles={list(self.input_model.poles)!r} delay={self.input_model.delay!r}",
        ]
        if self.substitutions:
            lines.append("positive-zero substitutions:")
            lines.extend("  " + s.describe() for s in self.substitutions)
        else:
            lines.append("positive-zero substitutions: none")
        lines += [
            f"after zero handling: k0={self.reduced_model.k0!r} "
            f"zeros={list(self.reduced_model.zeros)!r} "
            f"poles={list(self.reduced_model.poles)!r}",
            f"half rule: tau1={self.fopdt.tau1!r} (first-order lag)",
            f"delay before reduction: {self.delay_before_reduction!r}",
            f"effective delay after reduction: {self.effective_delay!r}",
            f"tau_c policy: {self.tau_c_policy} -> tau_c = {self.tau_c_used!r}",
            f"gains: Kp={self.gains.kp!r} Ki={self.gains.ki!r}",
            "case table: " + self.case_table,
        ]
        return "\n".join(lines)


def tune_loop(g: TransferFunction, tau_c=RECOMMENDED) -> tuple[PiGains, ReductionReport]:
    """cancel_positive_zeros -> half_rule -> tune_pi, with a full audit trail."""
    reduced, log = cancel_positive_zeros(g)
    fopdt = half_rule(reduced)
    gains = tune_pi(fopdt, tau_c)
    report = ReductionReport(
        input_model=g,
        substitutions=log,
        reduced_model=reduced,
        fopdt=fopdt,
        delay_before_reduction=g.delay,
        effective_delay=fopdt.taud,
        tau_c_policy=tau_c,
        tau_c_used=gains.tau_c,
        gains=gains,
    )
    return gains, report
