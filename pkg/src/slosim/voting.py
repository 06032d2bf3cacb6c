"""Result evaluation: majority voting over replicated answers.

The default rule is a strict majority: a label wins only if it holds more
than half of all returned votes.  A plurality rule (unique top count wins)
is available behind a flag for scenarios that want it.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from typing import Iterable, Sequence

MAX_ENUM_REPLICATION = 9
MAX_ENUM_LABELS = 6


class ConsensusStatus(Enum):
    CONSENSUS = "consensus"
    NO_CONSENSUS = "no_consensus"
    EMPTY = "empty"


@dataclass(frozen=True)
class VoteSet:
    """Returned answers for one microtask; votes must come from its domain."""

    microtask_id: str
    votes: tuple[str, ...]
    domain: tuple[str, ...]

    def __post_init__(self) -> None:
        allowed = set(self.domain)
        for vote in self.votes:
            if vote not in allowed:
                raise ValueError(
                    f"vote {vote!r} outside answer domain {list(self.domain)}"
                )


@dataclass(frozen=True)
class ConsensusResult:
    microtask_id: str
    decision: str | None
    support: float
    status: ConsensusStatus


def majority_vote(votes: VoteSet, rule: str = "majority") -> ConsensusResult:
    """Aggregate one vote set; deterministic and order-independent.

    majority: decision requires strictly more than half of the votes.
    plurality: a unique top count wins even without a majority; tied top
    counts yield no consensus.
    """
    if rule not in ("majority", "plurality"):
        raise ValueError(f"unknown vote rule: {rule!r}")
    total = len(votes.votes)
    if total == 0:
        return ConsensusResult(votes.microtask_id, None, 0.0, ConsensusStatus.EMPTY)

    counts = Counter(votes.votes)
    top_label, top_count = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    support = top_count / total

    if rule == "majority":
        won = top_count * 2 > total
    else:
        won = sum(1 for c in counts.values() if c == top_count) == 1
    if won:
        return ConsensusResult(votes.microtask_id, top_label, support, ConsensusStatus.CONSENSUS)
    return ConsensusResult(votes.microtask_id, None, support, ConsensusStatus.NO_CONSENSUS)


def node_consensus_rate(results: Iterable[ConsensusResult]) -> float:
    """Fraction of results that reached consensus; 0.0 for no results."""
    total = 0
    agreed = 0
    for result in results:
        total += 1
        if result.status is ConsensusStatus.CONSENSUS:
            agreed += 1
    return agreed / total if total else 0.0


def majority_accuracy_analytic(p: float, w: int, num_labels: int) -> float:
    """Exact probability that a strict majority of w independent answers
    equals the true label, when each answer is correct with probability p
    and otherwise uniform over the remaining num_labels - 1 labels.

    Computed by enumerating all vote-count compositions, which is feasible
    only for small w and label counts; larger parameters are refused.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1]: {p}")
    if w < 1 or w % 2 == 0:
        raise ValueError(f"replication must be an odd positive integer: {w}")
    if num_labels < 2:
        raise ValueError(f"need at least two labels: {num_labels}")
    if w > MAX_ENUM_REPLICATION or num_labels > MAX_ENUM_LABELS:
        raise ValueError(
            f"enumeration bounded to w <= {MAX_ENUM_REPLICATION}, "
            f"labels <= {MAX_ENUM_LABELS}: got w={w}, labels={num_labels}"
        )

    wrong_each = (1.0 - p) / (num_labels - 1)
    total = 0.0
    for composition in _compositions(w, num_labels):
        truth_count = composition[0]
        if truth_count * 2 <= w:
            continue
        coef = math.factorial(w)
        for count in composition:
            coef //= math.factorial(count)
        total += coef * (p ** truth_count) * (wrong_each ** (w - truth_count))
    return total


def _compositions(total: int, parts: int) -> Iterable[Sequence[int]]:
    """All orderings of non-negative integers of length `parts` summing to total."""
    for cuts in combinations(range(total + parts - 1), parts - 1):
        previous = -1
        composition = []
        for cut in cuts:
            composition.append(cut - previous - 1)
            previous = cut
        composition.append(total + parts - 2 - previous)
        yield composition
