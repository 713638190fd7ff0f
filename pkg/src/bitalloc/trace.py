"""Per-iteration solve traces shared by both solvers.

A trace is a flat sequence of iteration records plus the terminal allocation
and a termination reason.  The ``gap`` field holds whichever stationarity
measure the solver tracks: the Frank-Wolfe gap for the conditional-gradient
solver, the barrier-gradient max norm for the interior-point solver.  Traces
serialize to one comma-delimited line per iteration for the CLI.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .model import BitVector

TRACE_FIELDS = ("iteration", "objective", "gap", "step_size", "vertex", "barrier_mu", "elapsed_seconds")


class Termination(Enum):
    GAP_CONVERGED = "gap-converged"
    MAX_ITERATIONS = "max-iterations"
    TIME_LIMIT = "time-limit"


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    objective: float
    gap: float
    step_size: float
    vertex: int | None = None
    barrier_mu: float | None = None
    elapsed_seconds: float = 0.0

    def as_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "objective": repr(self.objective),
            "gap": repr(self.gap),
            "step_size": repr(self.step_size),
            "vertex": "" if self.vertex is None else self.vertex,
            "barrier_mu": "" if self.barrier_mu is None else repr(self.barrier_mu),
            "elapsed_seconds": repr(self.elapsed_seconds),
        }


@dataclass(frozen=True)
class GapCertificate:
    """Computable convergence certificate for a conditional-gradient run.

    ``min_gap`` is the smallest stationarity gap observed over all iterates;
    ``rate_bound`` is the max(2*h0, 2*L*B^2)/sqrt(T+1) envelope it must sit
    under, with h0 taken as the observed objective drop (a lower bound on the
    true initial suboptimality, so the certified inequality is the stronger
    one).
    """

    min_gap: float
    rate_bound: float

    @property
    def holds(self) -> bool:
        return self.min_gap <= self.rate_bound


@dataclass(frozen=True)
class SolveTrace:
    iterates: tuple[IterationRecord, ...]
    final_bits: BitVector
    termination: Termination
    certificate: GapCertificate | None = None

    @property
    def iterations(self) -> int:
        """Number of update steps performed (records minus the terminal one)."""
        return max(len(self.iterates) - 1, 0)

    @property
    def final_objective(self) -> float:
        return self.iterates[-1].objective

    def best_gap(self) -> float:
        return min(rec.gap for rec in self.iterates)


def write_trace(path, trace: SolveTrace) -> None:
    """Write one iteration record per line, comma-delimited with a header."""
    with Path(path).open("w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=TRACE_FIELDS)
        writer.writeheader()
        for rec in trace.iterates:
            writer.writerow(rec.as_dict())
