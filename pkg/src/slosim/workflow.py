"""Task-dependency graph: nodes tagged by agent kind, validated as a DAG.

A workflow is a set of nodes (each a data-parallel microtask set) and
directed edges encoding execution order.  Validation reports violations as
data; ordering helpers refuse to run on an invalid graph.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from enum import Enum

from .slo import SloSpec


class AgentTag(Enum):
    HUMAN_ONLY = "human_only"
    MACHINE_ONLY = "machine_only"
    EITHER = "either"


@dataclass(frozen=True)
class WorkflowNode:
    """One activity: a set of `microtask_count` independent microtasks.

    `node_slo` overrides the targets derived from the task-level SLO when
    present.  A zero microtask_count is accepted as a degenerate node that
    completes immediately; scenario files require at least one.
    """

    id: str
    label: str
    agent_tag: AgentTag
    microtask_count: int
    node_slo: SloSpec | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("node id must be non-empty")
        if self.microtask_count < 0:
            raise ValueError(f"microtask_count must be >= 0: {self.microtask_count}")
        if not isinstance(self.agent_tag, AgentTag):
            raise ValueError(f"agent_tag must be an AgentTag: {self.agent_tag!r}")


@dataclass(frozen=True)
class WorkflowGraph:
    nodes: tuple[WorkflowNode, ...]
    edges: frozenset[tuple[str, str]]
    task_slo: SloSpec

    @property
    def node_map(self) -> dict[str, WorkflowNode]:
        return {node.id: node for node in self.nodes}

    def predecessors(self, node_id: str) -> set[str]:
        return {src for src, dst in self.edges if dst == node_id}

    def successors(self, node_id: str) -> set[str]:
        return {dst for src, dst in self.edges if src == node_id}


@dataclass(frozen=True)
class Violation:
    kind: str  # "duplicate-id" | "dangling-edge" | "cycle"
    detail: str
    subjects: tuple[str, ...]


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def render(self) -> str:
        if self.ok:
            return "OK"
        return "\n".join(f"{v.kind}: {v.detail}" for v in self.violations)


class GraphInvalid(ValueError):
    """Raised when an operation requires a graph that fails validation."""

    def __init__(self, report: ValidationReport):
        super().__init__(report.render())
        self.report = report


def validate(graph: WorkflowGraph) -> ValidationReport:
    """Check well-formedness; violations are reported, never raised."""
    report = ValidationReport()

    seen: set[str] = set()
    for node in graph.nodes:
        if node.id in seen:
            report.violations.append(
                Violation("duplicate-id", f"node id {node.id!r} declared more than once", (node.id,))
            )
        seen.add(node.id)

    for src, dst in sorted(graph.edges):
        for endpoint in (src, dst):
            if endpoint not in seen:
                report.violations.append(
                    Violation(
                        "dangling-edge",
                        f"edge ({src!r}, {dst!r}) references unknown node {endpoint!r}",
                        (src, dst, endpoint),
                    )
                )

    cycle = _find_cycle(seen, graph.edges)
    if cycle is not None:
        report.violations.append(
            Violation("cycle", f"dependency cycle: {' -> '.join(cycle)}", tuple(cycle))
        )
    return report


def _find_cycle(node_ids: set[str], edges: frozenset[tuple[str, str]]) -> list[str] | None:
    """Return one concrete cycle as a node sequence, or None."""
    adjacency: dict[str, list[str]] = {nid: [] for nid in node_ids}
    for src, dst in sorted(edges):
        if src in adjacency and dst in adjacency:
            adjacency[src].append(dst)

    WHITE, GRAY, BLACK = 0, 1, 2
    color = {nid: WHITE for nid in node_ids}
    parent: dict[str, str] = {}

    for start in sorted(node_ids):
        if color[start] != WHITE:
            continue
        stack: list[tuple[str, int]] = [(start, 0)]
        color[start] = GRAY
        while stack:
            node, idx = stack[-1]
            if idx < len(adjacency[node]):
                stack[-1] = (node, idx + 1)
                child = adjacency[node][idx]
                if color[child] == GRAY:
                    # walk parents back from node to child to list the cycle
                    cycle = [child]
                    cursor = node
                    while cursor != child:
                        cycle.append(cursor)
                        cursor = parent[cursor]
                    cycle.reverse()
                    return cycle
                if color[child] == WHITE:
                    color[child] = GRAY
                    parent[child] = node
                    stack.append((child, 0))
            else:
                color[node] = BLACK
                stack.pop()
    return None


def topological_order(graph: WorkflowGraph) -> list[str]:
    """Dependency-respecting node order; ties broken by ascending node id."""
    report = validate(graph)
    if not report.ok:
        raise GraphInvalid(report)

    indegree = {node.id: 0 for node in graph.nodes}
    for _, dst in graph.edges:
        indegree[dst] += 1

    ready = [nid for nid, deg in indegree.items() if deg == 0]
    heapq.heapify(ready)
    order: list[str] = []
    while ready:
        nid = heapq.heappop(ready)
        order.append(nid)
        for succ in sorted(graph.successors(nid)):
            indegree[succ] -= 1
            if indegree[succ] == 0:
                heapq.heappush(ready, succ)
    return order


def ready_nodes(graph: WorkflowGraph, completed: set[str]) -> set[str]:
    """Nodes whose every predecessor is completed and that are not done."""
    ids = {node.id for node in graph.nodes}
    unknown = completed - ids
    if unknown:
        raise ValueError(f"unknown node ids in completed set: {sorted(unknown)}")
    return {
        nid
        for nid in ids - completed
        if graph.predecessors(nid) <= completed
    }


def node_levels(graph: WorkflowGraph) -> dict[str, int]:
    """Longest-path depth of each node (sources are level 0)."""
    levels: dict[str, int] = {}
    for nid in topological_order(graph):
        preds = graph.predecessors(nid)
        levels[nid] = 0 if not preds else 1 + max(levels[p] for p in preds)
    return levels


def derive_node_slos(graph: WorkflowGraph) -> dict[str, SloSpec]:
    """Resolve the effective SLO for every node.

    Explicit node SLOs win.  Otherwise the task budget is split across nodes
    proportionally to microtask_count, the task deadline is split into equal
    shares per dependency level (a node at level d gets the end of share
    d+1 as its deadline), and the accuracy target is inherited unchanged.
    """
    levels = node_levels(graph)
    num_levels = (max(levels.values()) + 1) if levels else 1
    total_count = sum(node.microtask_count for node in graph.nodes)
    task = graph.task_slo

    resolved: dict[str, SloSpec] = {}
    for node in sorted(graph.nodes, key=lambda n: n.id):
        if node.node_slo is not None:
            resolved[node.id] = node.node_slo
            continue
        if total_count > 0:
            budget = task.budget * node.microtask_count / total_count
        else:
            budget = task.budget / len(graph.nodes)
        deadline = task.deadline * (levels[node.id] + 1) / num_levels
        resolved[node.id] = SloSpec(
            accuracy_target=task.accuracy_target,
            budget=max(budget, 1e-9),
            deadline=deadline,
        )
    return resolved
