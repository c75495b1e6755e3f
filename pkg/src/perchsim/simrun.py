"""Fixed-step simulation of a scenario and the CSV trajectory log it produces."""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .compliance import ActuatorModel, actuation_terms, build_actuators
from .contact import ContactSolution, SolverConfig, detect_contacts_kin, solve_with_terms
from .dynamics import NumericalError, finish_step, spatial_momentum, step_terms
from .model import ModelDef, kinematics, parse_model
from .robots import builtin_model
from .scenario import CommandSchedule, Gripper, JointTarget, Ramp, ScenarioDef, Trapezoid, maneuver_of

ENGINE_VERSION = f"perchsim {__version__}"
BASE_COLUMNS = ("t", "px", "py", "pz", "qw", "qx", "qy", "qz")


class BindError(ValueError):
    """The scenario refers to something the model does not have."""


class SimulationError(RuntimeError):
    def __init__(self, message: str, step: int):
        self.step = step
        super().__init__(f"step {step}: {message}")


def resolve_model(ref: str, base_dir: Path | None = None) -> ModelDef:
    """``builtin:<name>`` or a model-file path (relative to ``base_dir``)."""
    if ref.startswith("builtin:"):
        try:
            return builtin_model(ref)
        except KeyError as exc:
            raise BindError(exc.args[0]) from None
    path = Path(ref)
    if base_dir is not None and not path.is_absolute():
        path = Path(base_dir) / path
    try:
        text = path.read_text()
    except OSError as exc:
        raise BindError(f"cannot read model file {str(path)!r}: {exc.strerror}") from None
    return parse_model(text, name=path.stem)


def bind(scenario: ScenarioDef, model: ModelDef, act: ActuatorModel | None = None) -> ActuatorModel:
    """Check that every commanded joint exists as an actuator; returns the actuators."""
    act = build_actuators(model) if act is None else act
    for phase in scenario.phases:
        for c in phase.commands:
            if isinstance(c, JointTarget) and c.joint not in act.names:
                known = ", ".join(act.names) or "none"
                raise BindError(f"phase '{phase.name}': no actuated joint '{c.joint}' (actuators: {known})")
            if isinstance(c, Gripper) and not act.grip:
                raise BindError(f"phase '{phase.name}': model '{model.name}' has no gripper joints")
    return act


# ---------------------------------------------------------------------------
# logs


@dataclass(eq=False)
class TrajectoryLog:
    header: dict
    columns: tuple
    data: np.ndarray  # rows x columns

    def channel(self, name: str) -> np.ndarray:
        try:
            return self.data[:, self.columns.index(name)]
        except ValueError:
            raise KeyError(f"no channel {name!r} (available: {', '.join(self.columns)})") from None

    @property
    def t(self) -> np.ndarray:
        return self.channel("t")

    def to_csv(self) -> str:
        out = io.StringIO()
        for k, v in self.header.items():
            out.write(f"# {k}={v}\n")
        out.write(",".join(self.columns) + "\n")
        for row in self.data.tolist():
            out.write(",".join(map(repr, row)) + "\n")
        return out.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> TrajectoryLog:
        header = {}
        lines = text.splitlines()
        i = 0
        while i < len(lines) and lines[i].startswith("#"):
            key, sep, value = lines[i][1:].strip().partition("=")
            if not sep:
                raise ValueError(f"line {i + 1}: metadata must be key=value")
            header[key] = value
            i += 1
        if i >= len(lines):
            raise ValueError("missing column-name row")
        columns = tuple(lines[i].split(","))
        rows = []
        for n, line in enumerate(lines[i + 1 :], start=i + 2):
            if not line.strip():
                continue
            cells = line.split(",")
            if len(cells) != len(columns):
                raise ValueError(f"line {n}: expected {len(columns)} values, found {len(cells)}")
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                raise ValueError(f"line {n}: non-numeric value") from None
        data = np.array(rows, dtype=float).reshape(len(rows), len(columns))
        return cls(header, columns, data)

    @classmethod
    def read_csv(cls, path) -> TrajectoryLog:
        return cls.from_csv(Path(path).read_text())


# ---------------------------------------------------------------------------
# simulation


@dataclass(eq=False)
class StepRecord:
    index: int
    contacts: list
    solution: ContactSolution
    thrust: np.ndarray | None  # world (force, torque about base origin) applied this step
    momentum_before: np.ndarray | None  # filled when auditing
    momentum_after: np.ndarray | None  # filled when auditing or logging momentum


class Simulation:
    """Steps a bound scenario: kinematics, contacts, actuation, contact solve, integration."""

    def __init__(
        self,
        scenario: ScenarioDef,
        model: ModelDef | None = None,
        *,
        actuators: ActuatorModel | None = None,
        solver: SolverConfig = SolverConfig(),
        timestep: float | None = None,
        diagnostics: bool = False,
        audit: bool = False,
    ):
        self.scenario = scenario
        self.audit = audit
        self.model = resolve_model(scenario.model) if model is None else model
        self.act = bind(scenario, self.model, actuators)
        self.dt = scenario.timestep if timestep is None else float(timestep)
        if not self.dt > 0.0:
            raise ValueError("timestep must be positive")
        self.solver = solver
        self.diagnostics = diagnostics
        self.gravity = np.array(scenario.gravity, dtype=float) if any(scenario.gravity) else None
        self.state = self.model.default_state()
        self.kin = kinematics(self.model, self.state.q)
        self.schedule = CommandSchedule(scenario, self.act.names, self.act.commands_from_state(self.state), self.act.grip)
        self.Cq = self.act.joint_compliance() if len(self.act.dofs) else None
        self.n_steps = int(round(scenario.duration / self.dt))
        self.index = 0
        self.last: StepRecord | None = None

    def time(self, k: int) -> float:
        return k * self.dt

    def step(self) -> StepRecord:
        model, state, kin, dt = self.model, self.state, self.kin, self.dt
        k = self.index
        t = self.time(k)
        state.t = t
        contacts = detect_contacts_kin(model, kin)
        tau, K, D = actuation_terms(model, self.act, state, self.schedule.commands(t))
        thrust = self.schedule.thrust(t)
        thrust_gen = None
        if thrust is not None:
            R = kin.R[0]
            thrust_gen = np.concatenate([R @ thrust[0], R @ thrust[1]])
        h0 = spatial_momentum(model, kin, state.v) if self.audit else None
        try:
            # overflow shows up as a non-finite state below, not as warnings
            with np.errstate(all="ignore"):
                terms = step_terms(model, state, tau, thrust_gen, dt, K, D, self.gravity, kin)
                sol = solve_with_terms(model, kin, terms, contacts, self.Cq, dt, self.solver)
                new, kin_new = finish_step(model, state, terms, sol.gen_impulse, sol.spatial_impulse, dt)
        except NumericalError as exc:
            raise SimulationError(str(exc), k) from None
        except (ArithmeticError, ValueError) as exc:
            raise SimulationError(f"arithmetic failure ({exc})", k) from None
        if not (np.all(np.isfinite(new.q)) and np.all(np.isfinite(new.v))):
            raise SimulationError("state became non-finite", k)
        new.t = self.time(k + 1)
        self.state, self.kin = new, kin_new
        self.index = k + 1
        h1 = spatial_momentum(model, kin_new, new.v) if self.audit or "momentum" in self.scenario.log else None
        rec = StepRecord(k, contacts, sol, thrust_gen, h0, h1)
        self.last = rec
        return rec

    # logging -------------------------------------------------------------

    def _columns(self) -> tuple:
        cols = list(BASE_COLUMNS)
        cols += [f"q_joint_{name}" for name in self.model.topology.joint_names]
        cols.append("fn_total")
        if self.diagnostics:
            cols += ["diag_iters", "diag_residual"]
        log = self.scenario.log
        if "contacts" in log:
            cols += ["n_contacts", "peak_impulse"]
        if "momentum" in log:
            cols += ["hx", "hy", "hz", "lx", "ly", "lz"]
        return tuple(cols)

    def _header(self) -> dict:
        s = self.scenario
        kind, perch_end, _ = maneuver_of(s)
        joint, peak = maneuver_target(s)
        return {
            "scenario": s.name,
            "model": s.model,
            "timestep": repr(self.dt),
            "seed": str(s.seed),
            "gravity": " ".join(repr(float(g)) for g in s.gravity),
            "engine_version": ENGINE_VERSION,
            "perch_end": "" if perch_end is None else repr(perch_end),
            "maneuver": kind or "",
            "maneuver_joint": joint or "",
            "maneuver_peak": "" if peak is None else repr(peak),
        }

    def _row(self, rec: StepRecord | None) -> list:
        st = self.state
        topo = self.model.topology
        q0 = topo.q_adr[0]
        row = [st.t, *st.q[q0 : q0 + 7].tolist()]
        row += st.q[topo.dof_q[topo.joint_dofs]].tolist()
        if rec is None:
            fn, iters, res, n_c, peak = 0.0, 0, 0.0, 0, 0.0
        else:
            sol = rec.solution
            fn = sum(imp.normal_impulse for imp in sol.impulses) / self.dt
            iters, res, n_c, peak = sol.diagnostics.iterations, sol.diagnostics.residual, len(rec.contacts), sol.peak
        row.append(fn)
        if self.diagnostics:
            row += [float(iters), res]
        log = self.scenario.log
        if "contacts" in log:
            row += [float(n_c), peak]
        if "momentum" in log:
            h = rec.momentum_after if rec is not None else spatial_momentum(self.model, self.kin, st.v)
            row += [*h[3:].tolist(), *h[:3].tolist()]
        return row

    def run(self) -> TrajectoryLog:
        rows = [self._row(None)]
        while self.index < self.n_steps:
            rec = self.step()
            rows.append(self._row(rec))
        return TrajectoryLog(self._header(), self._columns(), np.array(rows, dtype=float))


def maneuver_target(s: ScenarioDef):
    """(joint, peak command) of the last phase's joint target, or (None, None)."""
    for c in s.phases[-1].commands:
        if isinstance(c, JointTarget):
            p = c.profile
            if isinstance(p, Trapezoid):
                peak = p.amplitude
            elif isinstance(p, Ramp):
                peak = p.end
            else:
                peak = p.value
            return c.joint, float(peak)
    return None, None


def run_scenario(
    scenario: ScenarioDef,
    model: ModelDef | None = None,
    *,
    actuators: ActuatorModel | None = None,
    solver: SolverConfig = SolverConfig(),
    timestep: float | None = None,
    diagnostics: bool = False,
) -> TrajectoryLog:
    """Simulate ``scenario`` from the model's default state and return its log."""
    sim = Simulation(scenario, model, actuators=actuators, solver=solver, timestep=timestep, diagnostics=diagnostics)
    return sim.run()


def joint_columns(log: TrajectoryLog) -> list:
    return [c for c in log.columns if c.startswith("q_joint_")]


def is_finite_log(log: TrajectoryLog) -> bool:
    return bool(np.all(np.isfinite(log.data)))

