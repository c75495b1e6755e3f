"""Scenario language: a tiny brace-block format describing a perching run.

::

    scenario "dexcohand-tilt" {
      model "builtin:dexcohand"
      timestep 0.001
      gravity 0.0 0.0 0.0
      seed 0
      phase approach {
        duration 5.0
        thrust 0.0 0.0 0.02 0.0 0.0 0.0 ramp    # fx fy fz tx ty tz, base frame
      }
      phase perch { duration 2.0  gripper close 1.0 }
      phase tilt { duration 6.0  joint arm_tilt trapezoid 0.5 0.25 }
      log base_position base_quat joints contacts momentum
    }

``#`` comments run to end of line; line breaks are plain whitespace.
Profiles are evaluated on the phase-local clock; a joint that a phase does
not command keeps the target it had at the end of the previous phase.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace

import numpy as np

LOG_CHANNELS = ("base_position", "base_quat", "joints", "contacts", "momentum")
HEADER_KEYS = ("model", "timestep", "gravity", "seed")

APPROACH_S, PERCH_S, MANEUVER_S = 5.0, 2.0, 6.0
MANEUVER_AMPLITUDE = 0.5  # rad
MANEUVER_RISE = 0.25
APPROACH_THRUST = 0.02  # N along base +z, ramped from zero
GRIP_CLOSE_S = 1.0


class ScenarioError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        self.message, self.line, self.column = message, line, column
        super().__init__(f"line {line}, column {column}: {message}")


class ScenarioSyntaxError(ScenarioError):
    pass


class ScenarioValidationError(ScenarioError):
    pass


# ---------------------------------------------------------------------------
# structure


@dataclass(frozen=True)
class Step:
    value: float

    def at(self, s: float, duration: float) -> float:
        return self.value


@dataclass(frozen=True)
class Ramp:
    start: float
    end: float

    def at(self, s: float, duration: float) -> float:
        f = min(max(s / duration, 0.0), 1.0)
        return self.start + (self.end - self.start) * f


@dataclass(frozen=True)
class Trapezoid:
    """Rise from 0 to ``amplitude`` over ``rise_fraction`` of the phase, hold, fall back to 0."""

    amplitude: float
    rise_fraction: float

    def at(self, s: float, duration: float) -> float:
        rise = self.rise_fraction * duration
        if s <= 0.0 or s >= duration:
            return 0.0
        if s < rise:
            return self.amplitude * s / rise
        if s > duration - rise:
            return self.amplitude * (duration - s) / rise
        return self.amplitude


@dataclass(frozen=True)
class Thrust:
    wrench: tuple  # fx fy fz tx ty tz in the base frame
    mode: str = "hold"  # hold | ramp


@dataclass(frozen=True)
class JointTarget:
    joint: str
    profile: Step | Ramp | Trapezoid


@dataclass(frozen=True)
class Gripper:
    action: str  # open | close
    seconds: float


@dataclass(frozen=True)
class PhaseDef:
    name: str
    duration: float
    commands: tuple = ()


@dataclass(frozen=True)
class ScenarioDef:
    name: str
    model: str
    timestep: float = 1e-3
    gravity: tuple = (0.0, 0.0, 0.0)
    seed: int = 0
    phases: tuple = ()
    log: tuple = ()

    @property
    def duration(self) -> float:
        return math.fsum(p.duration for p in self.phases)

    def phase_bounds(self) -> list:
        """[(name, start, end)] on the scenario clock."""
        out, t = [], 0.0
        for p in self.phases:
            out.append((p.name, t, t + p.duration))
            t += p.duration
        return out


# ---------------------------------------------------------------------------
# tokens

_TOKEN_RE = re.compile(
    r"""(?P<ws>[ \t\r\n]+)
      | (?P<comment>\#[^\n]*)
      | (?P<number>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?(?![A-Za-z_0-9.]))
      | (?P<ident>[A-Za-z_][A-Za-z0-9_.\-]*)
      | (?P<string>"(?:[^"\\\n]|\\["\\])*")
      | (?P<lbrace>\{)
      | (?P<rbrace>\})""",
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list:
    toks = []
    pos, line, line_start = 0, 1, 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            ch = text[pos]
            if ch == '"':
                raise ScenarioSyntaxError("unterminated string", line, col)
            raise ScenarioSyntaxError(f"unexpected character {ch!r}", line, col)
        kind = m.lastgroup
        chunk = m.group(0)
        if kind not in ("ws", "comment"):
            toks.append(_Tok(kind, chunk, line, col))
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        tok = self.toks[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def fail(self, tok: _Tok, msg: str, cls=ScenarioSyntaxError):
        return cls(msg, tok.line, tok.col)

    def expect(self, kind: str, what: str) -> _Tok:
        tok = self.next()
        if tok.kind != kind:
            found = "end of input" if tok.kind == "eof" else repr(tok.text)
            raise self.fail(tok, f"expected {what}, found {found}")
        return tok

    def keyword(self, word: str) -> _Tok:
        tok = self.next()
        if tok.kind != "ident" or tok.text != word:
            found = "end of input" if tok.kind == "eof" else repr(tok.text)
            raise self.fail(tok, f"expected '{word}', found {found}")
        return tok

    def number(self, what: str = "number") -> float:
        tok = self.expect("number", what)
        x = float(tok.text)
        if not math.isfinite(x):
            raise self.fail(tok, f"{what} is not finite", ScenarioValidationError)
        return x

    def choice(self, options, what: str) -> str:
        tok = self.next()
        if tok.kind != "ident" or tok.text not in options:
            raise self.fail(tok, f"expected {what} ({' | '.join(options)}), found {tok.text or 'end of input'!r}")
        return tok.text

    def string(self) -> str:
        tok = self.expect("string", "quoted string")
        return re.sub(r"\\(.)", r"\1", tok.text[1:-1])

    # grammar -------------------------------------------------------------

    def scenario(self) -> ScenarioDef:
        self.keyword("scenario")
        name = self.string()
        self.expect("lbrace", "'{'")
        header = {}
        while self.peek().kind == "ident" and self.peek().text in HEADER_KEYS:
            tok = self.next()
            if tok.text in header:
                raise self.fail(tok, f"duplicate header '{tok.text}'", ScenarioValidationError)
            if tok.text == "model":
                header["model"] = self.string()
            elif tok.text == "timestep":
                ntok = self.peek()
                dt = self.number("timestep")
                if dt <= 0.0:
                    raise self.fail(ntok, "timestep must be positive", ScenarioValidationError)
                header["timestep"] = dt
            elif tok.text == "gravity":
                header["gravity"] = (self.number(), self.number(), self.number())
            else:
                ntok = self.expect("number", "integer seed")
                if not re.fullmatch(r"[+-]?\d+", ntok.text):
                    raise self.fail(ntok, "seed must be an integer", ScenarioValidationError)
                header["seed"] = int(ntok.text)
        phases, names = [], set()
        while self.peek().kind == "ident" and self.peek().text == "phase":
            ptok = self.peek()
            phase = self.phase()
            if phase.name in names:
                raise self.fail(ptok, f"duplicate phase name '{phase.name}'", ScenarioValidationError)
            names.add(phase.name)
            phases.append(phase)
        log = ()
        if self.peek().kind == "ident" and self.peek().text == "log":
            self.next()
            chans = []
            while self.peek().kind == "ident" and self.peek().text in LOG_CHANNELS:
                tok = self.next()
                if tok.text in chans:
                    raise self.fail(tok, f"duplicate log channel '{tok.text}'", ScenarioValidationError)
                chans.append(tok.text)
            if not chans:
                tok = self.peek()
                raise self.fail(tok, f"log needs at least one channel ({', '.join(LOG_CHANNELS)})")
            log = tuple(chans)
        end = self.peek()
        if end.kind == "ident" and end.text not in ("phase", "log"):
            raise self.fail(end, f"unknown directive '{end.text}'")
        if not phases:
            raise self.fail(end, "scenario needs at least one phase", ScenarioValidationError)
        self.expect("rbrace", "'}'")
        self.expect("eof", "end of input")
        if "model" not in header:
            raise ScenarioValidationError("missing 'model' header", self.toks[0].line, self.toks[0].col)
        return ScenarioDef(
            name=name,
            model=header["model"],
            timestep=header.get("timestep", 1e-3),
            gravity=header.get("gravity", (0.0, 0.0, 0.0)),
            seed=header.get("seed", 0),
            phases=tuple(phases),
            log=log,
        )

    def phase(self) -> PhaseDef:
        self.keyword("phase")
        name = self.expect("ident", "phase name").text
        self.expect("lbrace", "'{'")
        self.keyword("duration")
        dtok = self.peek()
        duration = self.number("duration")
        if duration <= 0.0:
            raise self.fail(dtok, "duration must be positive", ScenarioValidationError)
        commands, seen = [], set()
        while True:
            tok = self.peek()
            if tok.kind == "rbrace":
                self.next()
                break
            if tok.kind != "ident":
                raise self.fail(tok, f"expected a command or '}}', found {tok.text or 'end of input'!r}")
            cmd = self.command(duration)
            key = ("joint", cmd.joint) if isinstance(cmd, JointTarget) else type(cmd).__name__
            if key in seen:
                raise self.fail(tok, "conflicting commands in one phase", ScenarioValidationError)
            seen.add(key)
            commands.append(cmd)
        return PhaseDef(name, duration, tuple(commands))

    def command(self, duration: float):
        tok = self.next()
        if tok.text == "thrust":
            w = tuple(self.number("thrust component") for _ in range(6))
            return Thrust(w, self.choice(("hold", "ramp"), "thrust mode"))
        if tok.text == "joint":
            joint = self.expect("ident", "joint name").text
            return JointTarget(joint, self.profile())
        if tok.text == "gripper":
            action = self.choice(("open", "close"), "gripper action")
            stok = self.peek()
            secs = self.number("gripper time")
            if secs <= 0.0:
                raise self.fail(stok, "gripper time must be positive", ScenarioValidationError)
            return Gripper(action, secs)
        raise self.fail(tok, f"unknown directive '{tok.text}'")

    def profile(self):
        kind = self.choice(("step", "ramp", "trapezoid"), "profile")
        if kind == "step":
            return Step(self.number())
        if kind == "ramp":
            return Ramp(self.number(), self.number())
        ptok = self.peek()
        amp = self.number()
        ftok = self.peek()
        frac = self.number()
        if not 0.0 < frac <= 0.5:
            raise self.fail(ftok, "trapezoid rise fraction must be in (0, 0.5]", ScenarioValidationError)
        return Trapezoid(amp, frac)


def parse_scenario(text) -> ScenarioDef:
    """Parse scenario text (str or UTF-8 bytes). Errors carry line and column."""
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            head = bytes(text[: exc.start])
            line = head.count(b"\n") + 1
            col = exc.start - (head.rfind(b"\n") + 1) + 1
            raise ScenarioSyntaxError("input is not valid UTF-8", line, col) from None
    return _Parser(text).scenario()


# ---------------------------------------------------------------------------
# serialization


def _f(x: float) -> str:
    return repr(float(x))


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _command_text(c) -> str:
    if isinstance(c, Thrust):
        return "thrust " + " ".join(_f(x) for x in c.wrench) + " " + c.mode
    if isinstance(c, Gripper):
        return f"gripper {c.action} {_f(c.seconds)}"
    p = c.profile
    if isinstance(p, Step):
        prof = f"step {_f(p.value)}"
    elif isinstance(p, Ramp):
        prof = f"ramp {_f(p.start)} {_f(p.end)}"
    else:
        prof = f"trapezoid {_f(p.amplitude)} {_f(p.rise_fraction)}"
    return f"joint {c.joint} {prof}"


def serialize_scenario(s: ScenarioDef) -> str:
    lines = [
        f"scenario {_quote(s.name)} {{",
        f"  model {_quote(s.model)}",
        f"  timestep {_f(s.timestep)}",
        "  gravity " + " ".join(_f(g) for g in s.gravity),
        f"  seed {int(s.seed)}",
    ]
    for p in s.phases:
        lines.append(f"  phase {p.name} {{")
        lines.append(f"    duration {_f(p.duration)}")
        lines.extend(f"    {_command_text(c)}" for c in p.commands)
        lines.append("  }")
    if s.log:
        lines.append("  log " + " ".join(s.log))
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# built-in scenarios

MANEUVER_JOINT = {"tilt": "arm_tilt", "pan": "arm_pan"}


def _builtin(gripper: str, maneuver: str) -> ScenarioDef:
    return ScenarioDef(
        name=f"{gripper}-{maneuver}",
        model=f"builtin:{gripper}",
        timestep=1e-3,
        gravity=(0.0, 0.0, 0.0),
        seed=0,
        phases=(
            PhaseDef("approach", APPROACH_S, (Thrust((0.0, 0.0, APPROACH_THRUST, 0.0, 0.0, 0.0), "ramp"),)),
            PhaseDef("perch", PERCH_S, (Gripper("close", GRIP_CLOSE_S),)),
            PhaseDef(
                maneuver,
                MANEUVER_S,
                (JointTarget(MANEUVER_JOINT[maneuver], Trapezoid(MANEUVER_AMPLITUDE, MANEUVER_RISE)),),
            ),
        ),
        log=LOG_CHANNELS,
    )


BUILTIN_SCENARIOS = ("claw-tilt", "claw-pan", "dexcohand-tilt", "dexcohand-pan")


def builtin_scenarios() -> list:
    return [_builtin(g, m) for g in ("claw", "dexcohand") for m in ("tilt", "pan")]


def builtin_scenario(name: str) -> ScenarioDef:
    for s in builtin_scenarios():
        if s.name == name:
            return s
    raise KeyError(f"unknown builtin scenario {name!r} (choices: {', '.join(BUILTIN_SCENARIOS)})")


def maneuver_of(s: ScenarioDef):
    """(maneuver kind or None, perch-end time, maneuver end time) for reporting."""
    bounds = s.phase_bounds()
    perch_end = None
    for name, _, end in bounds:
        if name == "perch":
            perch_end = end
    kind = None
    last = s.phases[-1]
    if last.name in MANEUVER_JOINT:
        kind = last.name
    else:
        for c in last.commands:
            if isinstance(c, JointTarget):
                for k, j in MANEUVER_JOINT.items():
                    if c.joint == j:
                        kind = k
    if perch_end is None and len(bounds) > 1:
        perch_end = bounds[-2][2]
    return kind, perch_end, bounds[-1][2]


# ---------------------------------------------------------------------------
# command schedule


class CommandSchedule:
    """Actuator commands and base thrust as functions of scenario time."""

    def __init__(self, scenario: ScenarioDef, names, initial, grip: dict):
        self.scenario = scenario
        self.names = tuple(names)
        self.bounds = scenario.phase_bounds()
        self._segments = []
        held = np.array(initial, dtype=float)
        for phase, (_, t0, t1) in zip(scenario.phases, self.bounds):
            funcs = {}
            thrust = None
            for c in phase.commands:
                if isinstance(c, JointTarget):
                    funcs[self.names.index(c.joint)] = (lambda p, d: lambda s: p.at(s, d))(c.profile, phase.duration)
                elif isinstance(c, Gripper):
                    for name, (open_v, close_v) in grip.items():
                        k = self.names.index(name)
                        target = close_v if c.action == "close" else open_v
                        funcs.setdefault(k, (lambda a, b, T: lambda s: a + (b - a) * min(s / T, 1.0))(held[k], target, c.seconds))
                elif isinstance(c, Thrust):
                    thrust = c
            start = held.copy()
            self._segments.append((t0, t1, phase.duration, funcs, start, thrust))
            end = start.copy()
            for k, f in funcs.items():
                end[k] = f(phase.duration)
            held = end

    def _segment(self, t: float):
        for seg in self._segments:
            if t < seg[1]:
                return seg
        return self._segments[-1]

    def commands(self, t: float) -> np.ndarray:
        t0, _, _, funcs, start, _ = self._segment(t)
        out = start.copy()
        for k, f in funcs.items():
            out[k] = f(t - t0)
        return out

    def thrust(self, t: float):
        """Base-frame (force, torque) at time t, or None when no thrust is commanded."""
        t0, _, duration, _, _, c = self._segment(t)
        if c is None:
            return None
        w = np.array(c.wrench, dtype=float)
        if c.mode == "ramp":
            w = w * min(max((t - t0) / duration, 0.0), 1.0)
        return w[:3], w[3:]


def with_model(s: ScenarioDef, model: str) -> ScenarioDef:
    return replace(s, model=model)
