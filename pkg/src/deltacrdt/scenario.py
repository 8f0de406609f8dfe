"""Line-oriented scenario files.

Format::

    # comment
    key = value              # settings, one per line
    network.drop = 0 2 1     # repeatable: origin target nth-broadcast
    [schedule]
    <time> <replica> <op> [arg]

Replica indices are zero-based. The README lists every key.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from importlib import resources
from typing import Optional

from .lattice import KINDS, make_kind
from .netsim import NetworkConfig
from .reductions import NATIVE_OP, DeliveryMode

STYLES = ("state", "op", "delta", "delta-refined")
CHECKS = ("strong_convergence", "eventual_delivery")
OP_ARITY = {"inc": 0, "dec": 0, "add": 1, "remove": 1}


class ScenarioError(ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.message, self.line, self.column = message, line, column
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(where + message)


@dataclass(frozen=True)
class ScheduledOp:
    time: int
    replica: int
    op: tuple


@dataclass(frozen=True)
class AntiEntropyConfig:
    enabled: bool = False
    sync_period: int = 4
    guard: bool = True
    buffer: bool = False
    force_empty: bool = False


@dataclass(frozen=True)
class Scenario:
    crdt: str
    style: str
    replicas: int
    schedule: tuple = ()
    network: NetworkConfig = NetworkConfig()
    antientropy: AntiEntropyConfig = AntiEntropyConfig()
    checks: Optional[tuple] = None
    unsafe: bool = False
    name: str = ""

    @property
    def effective_checks(self) -> tuple:
        if self.checks is not None:
            return self.checks
        if self.network.fairness or self.antientropy.enabled:
            return CHECKS
        return ("strong_convergence",)


def _bool(text: str) -> bool:
    if text.lower() in ("true", "yes", "1"):
        return True
    if text.lower() in ("false", "no", "0"):
        return False
    raise ValueError(f"expected true/false, got {text!r}")


def _range(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition("..")
    if not sep:
        return int(text), int(text)
    return int(lo), int(hi)


_NETWORK_KEYS = {
    "drop_probability": float,
    "duplicate_probability": float,
    "max_duplicates": int,
    "reorder": _bool,
    "seed": int,
    "fairness": _bool,
    "max_events": int,
}
_AE_KEYS = {
    "enabled": _bool,
    "sync_period": int,
    "guard": _bool,
    "buffer": _bool,
    "force_empty": _bool,
}


def parse_scenario(text: str) -> Scenario:
    top: dict = {}
    net: dict = {}
    ae: dict = {}
    drops: list = []
    schedule: list = []
    where: dict = {}  # key -> (line, column) for semantic errors
    in_schedule = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        col = len(line) - len(line.lstrip()) + 1
        stripped = line.strip()
        if stripped == "[schedule]":
            in_schedule = True
            continue
        if stripped.startswith("["):
            raise ScenarioError(f"unknown section {stripped}", lineno, col)
        if in_schedule:
            schedule.append(_parse_op(stripped, lineno, col))
            continue
        key, eq, value = stripped.partition("=")
        if not eq:
            raise ScenarioError("expected 'key = value'", lineno, col)
        key, value = key.strip(), value.strip()
        after = line[line.index("=") + 1:]
        vcol = line.index("=") + 2 + len(after) - len(after.lstrip())
        where[key] = (lineno, vcol)
        try:
            if key.startswith("network."):
                sub = key[len("network."):]
                if sub == "drop":
                    parts = [int(p) for p in value.split()]
                    if len(parts) != 3:
                        raise ValueError("drop rule needs: origin target nth")
                    drops.append((tuple(parts), lineno, vcol))
                elif sub == "delay":
                    net["delay_min"], net["delay_max"] = _range(value)
                elif sub == "mode":
                    net["mode"] = DeliveryMode(value)
                elif sub in _NETWORK_KEYS:
                    net[sub] = _NETWORK_KEYS[sub](value)
                else:
                    raise ScenarioError(f"unknown key {key!r}", lineno, col)
            elif key.startswith("antientropy."):
                sub = key[len("antientropy."):]
                if sub not in _AE_KEYS:
                    raise ScenarioError(f"unknown key {key!r}", lineno, col)
                ae[sub] = _AE_KEYS[sub](value)
            elif key in ("crdt", "style", "name"):
                top[key] = value
            elif key == "replicas":
                top[key] = int(value)
            elif key == "unsafe":
                top[key] = _bool(value)
            elif key == "checks":
                top[key] = tuple(value.split())
            else:
                raise ScenarioError(f"unknown key {key!r}", lineno, col)
        except ScenarioError:
            raise
        except ValueError as exc:
            raise ScenarioError(f"bad value for {key}: {exc}", lineno, vcol) from None

    for required in ("crdt", "style", "replicas"):
        if required not in top:
            raise ScenarioError(f"missing required key {required!r}")

    def fail(key, message):
        line, col = where.get(key, (0, 0))
        raise ScenarioError(message, line, col)

    if top["crdt"] not in KINDS:
        fail("crdt", f"unknown crdt {top['crdt']!r}; expected one of {sorted(KINDS)}")
    if top["style"] not in STYLES:
        fail("style", f"unknown style {top['style']!r}; expected one of {list(STYLES)}")
    n = top["replicas"]
    if n < 1:
        fail("replicas", "replicas must be >= 1")
    for rule, line, col in drops:
        if not (0 <= rule[0] < n and 0 <= rule[1] < n) or rule[2] < 1:
            raise ScenarioError(f"drop rule {rule} names a replica outside 0..{n - 1} or nth < 1", line, col)
    net["drop_rules"] = tuple(rule for rule, _, _ in drops)
    try:
        network = NetworkConfig(**net)
    except ValueError as exc:
        msg = str(exc)
        key = next((f"network.{k}" for k in net if msg.startswith(k)), None)
        if key is None:
            key = "network.delay" if "delay" in msg else "network.mode"
        fail(key, str(exc))
    antientropy = AntiEntropyConfig(**ae)
    if antientropy.sync_period < 1:
        fail("antientropy.sync_period", "sync_period must be >= 1")

    kind = make_kind(top["crdt"])
    for op, line in schedule:
        if not 0 <= op.replica < n:
            raise ScenarioError(f"replica {op.replica} out of range 0..{n - 1}", line, 1)
        if op.op[0] not in kind.op_names:
            raise ScenarioError(f"{top['crdt']} has no operation {op.op[0]!r}", line, 1)

    checks = top.get("checks")
    if checks is not None:
        bad = [c for c in checks if c not in CHECKS]
        if bad:
            fail("checks", f"unknown check {bad[0]!r}; expected {list(CHECKS)}")

    style, unsafe = top["style"], top.get("unsafe", False)
    if style == "op":
        if top["crdt"] not in NATIVE_OP:
            fail("style", f"no native op-based {top['crdt']}; op style supports {sorted(NATIVE_OP)}")
        if network.duplicate_probability > 0 and not unsafe:
            fail(
                "network.duplicate_probability",
                "op style with duplication requires 'unsafe = true': native op-based CRDTs "
                "apply every duplicate and lose convergence",
            )
        if network.mode is DeliveryMode.RELAXED and not unsafe:
            fail("network.mode", "op style needs 'network.mode = causal' or 'unsafe = true'")
    if antientropy.enabled and style != "delta":
        fail("antientropy.enabled", "anti-entropy runs delta-state replicas; set 'style = delta'")

    return Scenario(
        crdt=top["crdt"],
        style=style,
        replicas=n,
        schedule=tuple(op for op, _ in schedule),
        network=network,
        antientropy=antientropy,
        checks=checks,
        unsafe=unsafe,
        name=top.get("name", ""),
    )


def _parse_op(text: str, lineno: int, col: int) -> tuple[ScheduledOp, int]:
    parts = text.split()
    if len(parts) < 3:
        raise ScenarioError("schedule line needs: <time> <replica> <op> [arg]", lineno, col)
    try:
        time, replica = int(parts[0]), int(parts[1])
    except ValueError:
        raise ScenarioError("time and replica must be integers", lineno, col) from None
    if time < 0:
        raise ScenarioError("time must be >= 0", lineno, col)
    name, args = parts[2], tuple(parts[3:])
    if name not in OP_ARITY:
        raise ScenarioError(f"unknown operation {name!r}", lineno, col + text.index(name))
    if len(args) != OP_ARITY[name]:
        raise ScenarioError(f"{name} takes {OP_ARITY[name]} argument(s)", lineno, col + text.index(name))
    return ScheduledOp(time, replica, (name, *args)), lineno


def serialize_scenario(s: Scenario) -> str:
    net, ae = s.network, s.antientropy
    lines = []
    if s.name:
        lines.append(f"name = {s.name}")
    lines += [
        f"crdt = {s.crdt}",
        f"style = {s.style}",
        f"replicas = {s.replicas}",
        f"unsafe = {str(s.unsafe).lower()}",
    ]
    if s.checks is not None:
        lines.append(f"checks = {' '.join(s.checks)}")
    lines += [
        f"network.mode = {net.mode.value}",
        f"network.drop_probability = {net.drop_probability!r}",
        f"network.duplicate_probability = {net.duplicate_probability!r}",
        f"network.max_duplicates = {net.max_duplicates}",
        f"network.delay = {net.delay_min}..{net.delay_max}",
        f"network.reorder = {str(net.reorder).lower()}",
        f"network.fairness = {str(net.fairness).lower()}",
        f"network.seed = {net.seed}",
        f"network.max_events = {net.max_events}",
    ]
    lines += [f"network.drop = {o} {t} {k}" for o, t, k in net.drop_rules]
    for f in dataclasses.fields(ae):
        value = getattr(ae, f.name)
        lines.append(f"antientropy.{f.name} = {str(value).lower() if isinstance(value, bool) else value}")
    lines.append("")
    lines.append("[schedule]")
    lines += [" ".join([str(op.time), str(op.replica), *op.op]) for op in s.schedule]
    return "\n".join(lines) + "\n"


BUNDLED = (
    "example_5_1",
    "example_5_1_state",
    "fig_6_1_no_antientropy",
    "fig_6_1_with_antientropy",
    "state_gcounter_merge",
    "sweep_delta_gcounter",
    "sweep_delta_gset",
)


def bundled_text(name: str) -> str:
    return resources.files("deltacrdt").joinpath("scenarios", f"{name}.scn").read_text()


def load_scenario(path_or_name: str) -> Scenario:
    """Parse a scenario file, or a bundled scenario when given its bare name."""
    if path_or_name in BUNDLED:
        return parse_scenario(bundled_text(path_or_name))
    with open(path_or_name) as fh:
        return parse_scenario(fh.read())
