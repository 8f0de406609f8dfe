"""Run scenarios end to end: build replicas, drive the network, judge the histories."""
from __future__ import annotations

import dataclasses
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .antientropy import AntiEntropyNode
from .checker import (
    NA,
    Verdict,
    eventual_delivery_check,
    strong_convergence_check,
)
from .lattice import ReplicaId, make_kind, render
from .netsim import NonTermination, Simulator, run_to_quiescence
from .reductions import check_delivery, make_machine
from .scenario import Scenario


@dataclass
class RunResult:
    scenario: Scenario
    seed: int
    transcript: str
    verdict: Verdict
    sim: Simulator

    @property
    def exit_code(self) -> int:
        return self.verdict.exit_code

    def queries(self) -> dict:
        return {i: self.sim.replicas[i].query() for i in self.sim.ids}

    def states(self) -> dict:
        return self.sim.states()

    def summary(self) -> str:
        sim = self.sim
        deliveries = [ev for ev in sim.transcript if ev.kind == "Deliver"]
        seen, dups = set(), 0
        for ev in deliveries:
            key = (ev.replica, ev.envelope.msg_id)
            dups += key in seen
            seen.add(key)
        lines = [
            f"scenario: {self.scenario.name or '-'}",
            f"seed: {self.seed}",
            f"crdt: {self.scenario.crdt}",
            f"style: {self.scenario.style}",
            f"antientropy: {str(self.scenario.antientropy.enabled).lower()}",
            f"final_time: {sim.now}",
            f"events: {sim.events}",
            f"broadcasts: {len(sim.broadcasts)}",
            f"deliveries: {len(deliveries)}",
            f"duplicate_deliveries: {dups}",
            f"crashed: {' '.join(map(str, sorted(sim.crashed))) or '-'}",
        ]
        queries = self.queries()
        for i in sim.ids:
            lines.append(f"{i}: query={render(queries[i])} state={render(sim.replicas[i].state)}")
        return "\n".join(lines) + "\n"

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "transcript.log").write_text(self.transcript)
        (out / "verdict.txt").write_text(self.verdict.report())
        (out / "summary.txt").write_text(self.summary())


def _converged(sim: Simulator, nodes) -> bool:
    live = [nodes[i] for i in sim.live]
    if any(not n.group.empty for n in live):
        return False
    return all(n.state == live[0].state for n in live[1:])


def run_scenario(
    scenario: Scenario, seed: Optional[int] = None, out_dir=None, style: Optional[str] = None
) -> RunResult:
    """Execute one scenario. ``seed`` overrides the file's seed; ``style`` its replica style."""
    if style is not None:
        scenario = dataclasses.replace(scenario, style=style)
    config = scenario.network
    if seed is not None:
        config = dataclasses.replace(config, seed=seed)
    ids = [ReplicaId(i) for i in range(scenario.replicas)]
    kind = make_kind(scenario.crdt, ids)
    ae = scenario.antientropy

    if ae.enabled:
        replicas = [AntiEntropyNode(kind, i, ae.guard, ae.buffer, ae.force_empty) for i in ids]
    else:
        replicas = [make_machine(kind, scenario.style).fresh() for _ in ids]
        check_delivery(replicas[0], config.mode, scenario.unsafe)
    sim = Simulator(replicas, config)

    terminated, note = True, ""
    try:
        if ae.enabled:
            _drive_antientropy(sim, replicas, scenario)
        else:
            _drive_plain(sim, replicas, scenario)
    except NonTermination as exc:
        terminated, note = False, str(exc)

    result = RunResult(scenario, config.seed, sim.transcript_text(), Verdict(), sim)
    result.verdict = _judge(sim, replicas, scenario, kind)
    result.verdict.terminated, result.verdict.note = terminated, note
    if out_dir is not None:
        result.write(out_dir)
    return result


def _ordered_ops(scenario: Scenario) -> list:
    return sorted(scenario.schedule, key=lambda op: op.time)  # stable: file order on ties


def _drive_plain(sim: Simulator, machines, scenario: Scenario) -> None:
    for op in _ordered_ops(scenario):
        while sim.pending() and sim.next_time() < op.time:
            sim.step()
        sim.now = max(sim.now, op.time)
        who = ReplicaId(op.replica)
        if who in sim.crashed:
            continue
        sim.broadcast(who, machines[who].prepare(who, op.op))
    run_to_quiescence(sim)


def _drive_antientropy(sim: Simulator, nodes, scenario: Scenario) -> None:
    period = scenario.antientropy.sync_period
    ops = _ordered_ops(scenario)
    next_sync = period
    while True:
        idle = not ops and not sim.pending()
        if idle and _converged(sim, nodes) and not (sim.config.fairness and sim.missing()):
            return
        if idle and sim.config.fairness and sim.missing():
            sim.reoffer()
        candidates = [next_sync]
        if ops:
            candidates.append(ops[0].time)
        if sim.pending():
            candidates.append(sim.next_time())
        t = min(candidates)
        if ops and ops[0].time == t:
            op = ops.pop(0)
            sim.now = max(sim.now, t)
            who = ReplicaId(op.replica)
            if who not in sim.crashed:
                nodes[who].on_local_update(op.op)
        elif sim.pending() and sim.next_time() == t:
            sim.step()
        else:
            sim.now = max(sim.now, t)
            for who in sim.live:
                payload = nodes[who].periodic_sync(sim.rng.bit())
                if payload is not None:
                    sim.broadcast(who, payload, covers=payload.covers)
            next_sync += period
            sim.events += 1
            if sim.events > sim.config.max_events:
                raise NonTermination(f"exceeded max_events={sim.config.max_events}")


def _judge(sim: Simulator, replicas, scenario: Scenario, kind) -> Verdict:
    checks = scenario.effective_checks
    ae = scenario.antientropy.enabled
    delivered = universe = None
    if ae:
        delivered = {i: frozenset(replicas[i].incorporated) for i in sim.ids}
        universe = frozenset((i, k) for i in sim.ids for k in range(replicas[i].seq))
    query = replicas[0].query_fn if not ae else kind.query
    if "strong_convergence" in checks:
        verdict = strong_convergence_check(
            sim.histories, sim.states(), query, sim.crashed, delivered, sim.config.mode
        )
    else:
        verdict = Verdict(strong_convergence=NA)
    if "eventual_delivery" in checks:
        verdict.eventual_delivery, verdict.missing = eventual_delivery_check(
            sim.histories, sim.live, delivered, universe
        )
    return verdict


@dataclass
class SweepReport:
    seeds: list = field(default_factory=list)
    passed: list = field(default_factory=list)
    failed: list = field(default_factory=list)
    final_times: list = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return 1 if self.failed else 0

    def text(self) -> str:
        lines = [f"runs: {len(self.seeds)}", f"passed: {len(self.passed)}", f"failed: {len(self.failed)}"]
        if self.final_times:
            lines.append(
                "convergence_time: min={} mean={:.2f} max={}".format(
                    min(self.final_times), statistics.fmean(self.final_times), max(self.final_times)
                )
            )
        if self.failed:
            lines.append("failed_seeds: " + " ".join(map(str, self.failed)))
        return "\n".join(lines) + "\n"


def sweep(scenario: Scenario, seeds: Iterable[int]) -> SweepReport:
    report = SweepReport()
    for seed in seeds:
        result = run_scenario(scenario, seed)
        report.seeds.append(seed)
        (report.passed if result.exit_code == 0 else report.failed).append(seed)
        report.final_times.append(result.sim.now)
    return report
