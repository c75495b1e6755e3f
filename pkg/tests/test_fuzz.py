from __future__ import annotations

import numpy as np

from gen import random_model, random_scenario
from perchsim.model import ModelError, parse_model, serialize_model
from perchsim.robots import build_astrobee_claw
from perchsim.scenario import ScenarioError, builtin_scenario, parse_scenario, serialize_scenario

N = 100_000

_MODEL_TOKENS = [
    "link", "material", "geom", "static", "parent=", "world", "base", "joint=", "free", "revolute",
    "prismatic", "fixed", "mass=", "inertia=", "1,1,1,0,0,0", "axis=", "0,0,1", "shape=", "sphere",
    "capsule", "cylinder", "box", "size=", "0.1", "-1", "nan", "inf", "1e308", "=", ",", "#", "\n", " ",
    "limits=", "pos=", "quat=", "0,0,0,0", "stiffness=", "coupling=", "grip=", "x", "\"", "\t", "\x00",
]
_SCENARIO_TOKENS = [
    "scenario", "model", "phase", "duration", "thrust", "hold", "joint", "gripper", "open", "close",
    "step", "ramp", "trapezoid", "log", "joints", "contacts", "momentum", "seed", "timestep", "gravity",
    "{", "}", "\"", "\"a\"", "\\", "1", "-1", "0", "1e999", ".5", "nan", "#", "\n", " ", "a-b", "\x00", "é",
]


def _mutate(rng, data: bytes, alphabet: bytes) -> bytes:
    b = bytearray(data)
    for _ in range(int(rng.integers(1, 6))):
        op = int(rng.integers(0, 4))
        pos = int(rng.integers(0, len(b) + 1))
        if op == 0 and b:
            del b[min(pos, len(b) - 1)]
        elif op == 1:
            b.insert(pos, alphabet[int(rng.integers(0, len(alphabet)))])
        elif op == 2 and b:
            b[min(pos, len(b) - 1)] = int(rng.integers(0, 256))
        else:
            end = min(len(b), pos + int(rng.integers(1, 40)))
            b[pos:pos] = b[pos:end]
    return bytes(b)


def _inputs(rng, seeds, tokens):
    alphabet = "".join(tokens).encode("utf-8")
    for k in range(N):
        kind = k % 3
        if kind == 0:
            yield rng.integers(0, 256, size=int(rng.integers(0, 80)), dtype=np.uint8).tobytes()
        elif kind == 1:
            picks = rng.integers(0, len(tokens), size=int(rng.integers(1, 30)))
            yield "".join(tokens[i] + (" " if rng.random() < 0.5 else "") for i in picks).encode("utf-8")
        else:
            yield _mutate(rng, seeds[int(rng.integers(0, len(seeds)))], alphabet)


def test_fuzz_model_parser():
    rng = np.random.default_rng(70)
    seeds = [serialize_model(build_astrobee_claw()).encode()]
    seeds += [serialize_model(random_model(rng, 3)).encode() for _ in range(20)]
    parsed = 0
    for data in _inputs(rng, seeds, _MODEL_TOKENS):
        text = data.decode("utf-8", errors="replace")
        try:
            parse_model(text)
            parsed += 1
        except ModelError as exc:
            assert exc.line >= 1 and exc.column >= 1
    assert parsed > 0


def test_fuzz_scenario_parser():
    rng = np.random.default_rng(71)
    seeds = [serialize_scenario(builtin_scenario("dexcohand-tilt")).encode()]
    seeds += [serialize_scenario(random_scenario(rng)).encode() for _ in range(20)]
    parsed = 0
    for data in _inputs(rng, seeds, _SCENARIO_TOKENS):
        try:
            parse_scenario(data)
            parsed += 1
        except ScenarioError as exc:
            assert exc.line >= 1 and exc.column >= 1
    assert parsed > 0
