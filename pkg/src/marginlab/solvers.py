"""Solvers that build sign vectors for margin-constrained instances.

Two families live here.  The multi-stage majority solver assigns coordinates
in blocks: a large round-0 block votes with every constraint row, then each
later round votes only with the rows whose running margins are smallest, so
the most endangered constraints steer the remaining coordinates.  Block sizes
follow a geometric schedule of fractions f_0 = 1, f_1 = 1/200,
f_j = 10^(-2^j), and both block and vote sizes are derived with exact
rational arithmetic so the blocks always partition the n coordinates.

The online family commits to one coordinate per column, seeing only the
columns consumed so far; the two built-in step rules either minimize the
worst running margin or a smooth exponential proxy for it.  Exhaustive search
over the cube backs everything up at small n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .disorder import DisorderMatrix
from .errors import DomainError, SizingError
from .landscape import SignVector, _scan_masks

__all__ = [
    "KimRocheSchedule",
    "RoundRecord",
    "StepRecord",
    "exhaustive_solve",
    "kim_roche_schedule",
    "kim_roche_solve",
    "majority_solve",
    "online_solve",
]

ONLINE_STRATEGIES = ("greedy_minimax", "exp_potential")


@dataclass(frozen=True)
class KimRocheSchedule:
    """Block and vote sizes for the multi-stage majority solver.

    ``f`` holds the block fractions for rounds 0..rounds, ``n_blocks`` the
    integer block sizes (they sum to exactly n), and ``k`` the vote sizes for
    rounds 1..rounds (round 0 votes with every row).  All vote sizes are odd
    so majorities never tie on sign disorder.
    """

    n: int
    rounds: int
    f: tuple[float, ...]
    k: tuple[int, ...]
    n_blocks: tuple[int, ...]
    total_fraction: float

    def __post_init__(self) -> None:
        if self.n < 1:
            raise SizingError(f"need n >= 1, got {self.n}")
        if self.rounds < 0:
            raise SizingError(f"negative round count {self.rounds}")
        if len(self.f) != self.rounds + 1 or len(self.n_blocks) != self.rounds + 1:
            raise SizingError("f and n_blocks must cover rounds 0..rounds")
        if len(self.k) != self.rounds:
            raise SizingError("k must cover rounds 1..rounds")
        if self.f[0] != 1.0:
            raise DomainError(f"round-0 fraction must be 1, got {self.f[0]}")
        if sum(self.n_blocks) != self.n:
            raise SizingError(
                f"blocks sum to {sum(self.n_blocks)}, expected n={self.n}"
            )
        if any(b < 1 for b in self.n_blocks):
            raise SizingError(f"empty block in {self.n_blocks}")
        if any(kj < 1 or kj % 2 == 0 for kj in self.k):
            raise DomainError(f"vote sizes must be odd and positive, got {self.k}")


def _block_fraction(j: int) -> Fraction:
    if j == 0:
        return Fraction(1)
    if j == 1:
        return Fraction(1, 200)
    return Fraction(1, 10 ** (2**j))


def kim_roche_schedule(
    n: int,
    c_rounds: float = 4.0,
    divisors: tuple[float, float] = (1000.0, 3.0),
) -> KimRocheSchedule:
    """Build the block/vote schedule for an n-coordinate instance.

    The round count targets ceil(c_rounds * log10(log10 n)) and is then
    truncated at the first round whose block would be empty.  ``divisors``
    is (d1, p): round 1 votes with 2*floor(n/(2*d1)) + 1 rows and round
    s >= 2 with 2*floor(n*f_s^p / 2) + 1.  The default d1 = 1000 keeps the
    round-1 vote meaningfully smaller than the row count at desk scales
    (n up to about 1e5, where the default c_rounds gives 2 to 4 rounds
    before truncation); at astronomical n the analysis behind the schedule
    takes d1 much larger.

    Block sizes are floors of exact rational cumulative sums, so they always
    partition n.
    """
    if n < 2:
        raise SizingError(f"schedule needs n >= 2, got n={n}")
    d1, power = divisors
    if d1 <= 0.0 or power <= 0.0:
        raise DomainError(f"divisors must be positive, got {divisors}")
    if c_rounds < 0.0:
        raise DomainError(f"c_rounds must be nonnegative, got {c_rounds}")
    loglog = math.log10(math.log10(n)) if n > 10 else 0.0
    target = max(0, math.ceil(c_rounds * loglog)) if loglog > 0.0 else 0
    fracs = [_block_fraction(j) for j in range(target + 1)]

    # Drop trailing rounds until every block is nonempty.  Cutting just the
    # tail (rather than everything past the first empty block) matters: a
    # tiny trailing fraction can steal an earlier block's floor slot, and
    # removing the tail restores it.
    while True:
        total = sum(fracs)
        cums = []
        acc = Fraction(0)
        for fr in fracs:
            acc += fr
            cums.append((n * acc) // total)  # exact rational floor
        blocks = [int(cums[0])] + [int(b - a) for a, b in zip(cums, cums[1:])]
        if all(b >= 1 for b in blocks):
            break
        if len(fracs) == 1:
            raise SizingError(f"n={n} too small for a nonempty round-0 block")
        fracs = fracs[:-1]

    rounds = len(fracs) - 1
    k: list[int] = []
    for j in range(1, rounds + 1):
        if j == 1:
            kj = 2 * math.floor(n / (2.0 * d1)) + 1
        else:
            if float(power).is_integer():
                x = Fraction(n) * _block_fraction(j) ** int(power)
                kj = 2 * int(x // 2) + 1
            else:
                kj = 2 * math.floor(n * float(_block_fraction(j)) ** power / 2.0) + 1
        if kj < 1:
            raise SizingError(f"vote size for round {j} came out {kj}")
        k.append(kj)
    return KimRocheSchedule(
        n=n,
        rounds=rounds,
        f=tuple(float(fr) for fr in fracs),
        k=tuple(k),
        n_blocks=tuple(blocks),
        total_fraction=float(sum(fracs)),
    )


@dataclass(frozen=True)
class RoundRecord:
    """Trace of one block round: which rows voted, and the damage so far.

    ``selected_rows`` is None for round 0 (every row votes).
    ``violated_after`` counts rows whose running margin over the assigned
    prefix is negative once the block is committed.
    """

    round_index: int
    block_start: int
    block_size: int
    k_used: int
    violated_after: int
    selected_rows: tuple[int, ...] | None


def majority_solve(mat: DisorderMatrix) -> SignVector:
    """One-shot majority: each coordinate is the sign of its column sum.

    Zero column sums resolve to +1 (they occur with positive probability
    only for sign disorder with an even row count).
    """
    votes = mat.entries.sum(axis=0)
    signs = np.where(votes >= 0.0, 1, -1).astype(np.int8)
    return SignVector.from_signs(signs)


def kim_roche_solve(
    mat: DisorderMatrix,
    schedule: KimRocheSchedule | None = None,
    collect_trace: bool = False,
) -> tuple[SignVector, list[RoundRecord] | None]:
    """Run the multi-stage majority solver.

    Round 0 assigns the first block by full-row majority.  Round j >= 1
    computes every row's margin over the assigned prefix, selects the
    schedule's k_j rows with the smallest margins (ties broken by row index,
    stably), and assigns the next block by majority over just those rows.
    Vote sizes are clipped to the row count when the schedule asks for more
    rows than the instance has.
    """
    sched = schedule if schedule is not None else kim_roche_schedule(mat.cols)
    if sched.n != mat.cols:
        raise SizingError(f"schedule is for n={sched.n}, matrix has n={mat.cols}")
    entries = mat.entries
    m_rows = mat.rows
    sigma = np.zeros(mat.cols, dtype=np.float64)
    trace: list[RoundRecord] | None = [] if collect_trace else None
    start = 0
    for j, block in enumerate(sched.n_blocks):
        stop = start + block
        if j == 0:
            votes = entries[:, start:stop].sum(axis=0)
            selected: np.ndarray | None = None
            k_used = m_rows
        else:
            margins = entries[:, :start] @ sigma[:start]
            k_used = min(sched.k[j - 1], m_rows)
            order = np.argsort(margins, kind="stable")
            selected = order[:k_used]
            votes = entries[selected][:, start:stop].sum(axis=0)
        sigma[start:stop] = np.where(votes >= 0.0, 1.0, -1.0)
        if trace is not None:
            running = entries[:, :stop] @ sigma[:stop]
            trace.append(
                RoundRecord(
                    round_index=j,
                    block_start=start,
                    block_size=block,
                    k_used=k_used,
                    violated_after=int(np.count_nonzero(running < 0.0)),
                    selected_rows=None if selected is None else tuple(int(r) for r in selected),
                )
            )
        start = stop
    return SignVector.from_signs(sigma.astype(np.int8)), trace


@dataclass(frozen=True)
class StepRecord:
    """Trace of one online step: the worst margin after the commitment."""

    step: int
    sign: int
    max_abs_margin: float


def online_solve(
    mat: DisorderMatrix,
    kappa: float,
    strategy: str = "greedy_minimax",
    collect_trace: bool = False,
) -> tuple[SignVector, bool, list[StepRecord] | None]:
    """Assign coordinates one column at a time, never looking ahead.

    ``greedy_minimax`` picks the sign minimizing the worst running margin.
    ``exp_potential`` minimizes sum cosh(lambda * margin) with
    lambda = kappa / (2 sqrt(n)), a smooth stand-in for the same objective
    whose step rule reduces to the sign of a sinh correlation.  Ties resolve
    to +1.  Returns the configuration, whether it satisfies the two-sided
    window at margin kappa, and the optional per-step trace.
    """
    if strategy not in ONLINE_STRATEGIES:
        raise DomainError(
            f"unknown strategy {strategy!r}, expected one of {ONLINE_STRATEGIES}"
        )
    if kappa <= 0.0:
        raise DomainError(f"kappa must be positive, got {kappa}")
    entries = mat.entries
    n = mat.cols
    run = np.zeros(mat.rows, dtype=np.float64)
    signs = np.empty(n, dtype=np.int8)
    lam = kappa / (2.0 * math.sqrt(n))
    trace: list[StepRecord] | None = [] if collect_trace else None
    for t in range(n):
        col = entries[:, t]
        if strategy == "greedy_minimax":
            cost_plus = float(np.max(np.abs(run + col)))
            cost_minus = float(np.max(np.abs(run - col)))
            s = 1 if cost_plus <= cost_minus else -1
        else:
            # Phi(+1) - Phi(-1) = 2 sum sinh(lam*run) sinh(lam*col)
            diff = float(np.dot(np.sinh(lam * run), np.sinh(lam * col)))
            s = 1 if diff <= 0.0 else -1
        run += s * col
        signs[t] = s
        if trace is not None:
            trace.append(StepRecord(step=t, sign=s, max_abs_margin=float(np.max(np.abs(run)))))
    feasible = bool(np.max(np.abs(run)) <= kappa * math.sqrt(n))
    return SignVector.from_signs(signs), feasible, trace


def exhaustive_solve(
    mat: DisorderMatrix,
    kappa: float,
    symmetric: bool = True,
    n_cap: int = 25,
) -> SignVector | None:
    """First satisfying configuration in lexicographic order, or None.

    Shares the meet-in-the-middle scan with the landscape enumerator but
    stops at the first hit.
    """
    masks = _scan_masks(mat, kappa, symmetric, n_cap, first_only=True)
    return SignVector(mat.cols, masks[0]) if masks else None
