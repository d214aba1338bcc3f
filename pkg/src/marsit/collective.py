"""Multi-hop all-reduce over a simulated lock-step transport.

A :class:`Schedule` lists, step by step, which segment every worker sends to
whom. :func:`simulate` replays a schedule over per-worker segment states:
in a reduce step the receiver combines the message with its own state, in a
gather step it overwrites its state. All sends of a step read the states as
they were before the step, so the result does not depend on the order in
which workers are visited.

The four all-reduce variants only differ in the state type and in the
``encode`` / ``combine`` / ``measure`` callbacks passed to the simulator.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .compressor import (AggregateSign, SsdmPacket, merge_signs, ssdm_compress,
                         ssdm_decompress, sum_code_bits)
from .errors import ParameterError, ProtocolError, UnsupportedError
from .rng import STAGE_SSDM, RngStream
from .vectorcore import PackedSignVector, Segmentation, dense

FLOAT_BITS = 32
NORM_BITS = 32

REDUCE = "reduce"
GATHER = "gather"


@dataclass(frozen=True)
class Transfer:
    sender: int
    receiver: int
    segment: int


@dataclass(frozen=True)
class Step:
    phase: str
    index: int
    stage: int
    transfers: tuple[Transfer, ...]

    def plan_for(self, worker: int) -> tuple[int, int, int, int]:
        """``(send_to, recv_from, sent_segment, received_segment)`` for one worker."""
        out = next(t for t in self.transfers if t.sender == worker)
        inc = next(t for t in self.transfers if t.receiver == worker)
        return out.receiver, inc.sender, out.segment, inc.segment


@dataclass(frozen=True)
class Schedule:
    M: int
    topology: str
    steps: tuple[Step, ...]
    shape: tuple[int, ...] = ()

    @property
    def n_segments(self) -> int:
        return self.M

    @property
    def reduce_steps(self) -> list[Step]:
        return [s for s in self.steps if s.phase == REDUCE]

    @property
    def gather_steps(self) -> list[Step]:
        return [s for s in self.steps if s.phase == GATHER]

    def owners(self) -> dict[int, int]:
        """Worker holding the fully reduced value of each segment after the reduce phase."""
        own = {}
        for step in self.reduce_steps:
            for t in step.transfers:
                own[t.segment] = t.receiver
        return own

    def validate(self) -> None:
        seen_gather = False
        for step in self.steps:
            if step.phase == GATHER:
                seen_gather = True
            elif seen_gather:
                raise ProtocolError("reduce step after a gather step")
            senders = sorted(t.sender for t in step.transfers)
            receivers = sorted(t.receiver for t in step.transfers)
            if senders != list(range(self.M)) or receivers != list(range(self.M)):
                raise ProtocolError(f"step {step.index}: every worker must send and receive once")
            for t in step.transfers:
                if t.sender == t.receiver or not 0 <= t.segment < self.M:
                    raise ProtocolError(f"step {step.index}: bad transfer {t}")


def build_ring_schedule(M: int) -> Schedule:
    """Reduce-scatter then all-gather on the ring 0 -> 1 -> ... -> M-1 -> 0.

    At reduce step ``s`` worker ``m`` sends segment ``(m - s) mod M``; worker
    ``m`` ends the reduce phase owning segment ``(m + 1) mod M``.
    """
    if M < 2:
        raise ParameterError(f"ring needs at least 2 workers, got {M}")
    steps = []
    for s in range(M - 1):
        steps.append(Step(REDUCE, len(steps), 0, tuple(
            Transfer(m, (m + 1) % M, (m - s) % M) for m in range(M))))
    for s in range(M - 1):
        steps.append(Step(GATHER, len(steps), 1, tuple(
            Transfer(m, (m + 1) % M, (m + 1 - s) % M) for m in range(M))))
    sched = Schedule(M, "ring", tuple(steps), (M,))
    sched.validate()
    return sched


def build_torus_schedule(rows: int, cols: int, M: int | None = None) -> Schedule:
    """Three-stage 2D-torus all-reduce on a ``rows x cols`` grid.

    Worker ``(r, c)`` has id ``r * cols + c``. The ``M = rows * cols``
    segments are grouped in ``cols`` chunks of ``rows`` segments:

    1. ring reduce-scatter of chunks inside each row,
    2. ring reduce-scatter then all-gather of the owned chunk's segments
       down each column,
    3. ring all-gather of chunks inside each row.

    A chunk hop in stages 1 and 3 is emitted as ``rows`` single-segment
    steps so every step moves exactly one segment per worker.
    """
    if rows < 2 or cols < 2:
        raise ParameterError(f"torus needs rows, cols >= 2, got {rows}x{cols}")
    if M is not None and M != rows * cols:
        raise ParameterError(f"{M} workers do not factor as a {rows}x{cols} grid")
    n = rows * cols

    def wid(r, c):
        return (r % rows) * cols + (c % cols)

    steps: list[Step] = []

    def add(phase, stage, transfers):
        steps.append(Step(phase, len(steps), stage, tuple(sorted(transfers, key=lambda t: t.sender))))

    for s in range(cols - 1):
        for i in range(rows):
            add(REDUCE, 0, [Transfer(wid(r, c), wid(r, c + 1), ((c - s) % cols) * rows + i)
                            for r in range(rows) for c in range(cols)])
    # after stage 1, every worker in column c owns chunk (c + 1) mod cols
    for s in range(rows - 1):
        add(REDUCE, 1, [Transfer(wid(r, c), wid(r + 1, c), ((c + 1) % cols) * rows + (r - s) % rows)
                        for r in range(rows) for c in range(cols)])
    for s in range(rows - 1):
        add(GATHER, 2, [Transfer(wid(r, c), wid(r + 1, c), ((c + 1) % cols) * rows + (r + 1 - s) % rows)
                        for r in range(rows) for c in range(cols)])
    for s in range(cols - 1):
        for i in range(rows):
            add(GATHER, 3, [Transfer(wid(r, c), wid(r, c + 1), ((c + 1 - s) % cols) * rows + i)
                            for r in range(rows) for c in range(cols)])
    sched = Schedule(n, "torus", tuple(steps), (rows, cols))
    sched.validate()
    return sched


@dataclass
class BitsAccount:
    """Payload bits sent by each worker, split by phase."""

    M: int
    by_phase: dict[str, np.ndarray] = field(default_factory=dict)

    def add(self, phase: str, worker: int, bits: int) -> None:
        arr = self.by_phase.setdefault(phase, np.zeros(self.M, dtype=np.int64))
        arr[worker] += bits

    @property
    def per_worker(self) -> np.ndarray:
        out = np.zeros(self.M, dtype=np.int64)
        for arr in self.by_phase.values():
            out += arr
        return out

    @property
    def total(self) -> int:
        return int(self.per_worker.sum())

    @property
    def max_per_worker(self) -> int:
        return int(self.per_worker.max())


class Transport:
    """Lock-step message queues keyed by ``(step, sender, receiver)``."""

    def __init__(self):
        self._queue: dict[tuple[int, int, int], Any] = {}

    def send(self, step: int, sender: int, receiver: int, payload: Any) -> None:
        key = (step, sender, receiver)
        if key in self._queue:
            raise ProtocolError(f"duplicate message {key}")
        self._queue[key] = payload

    def deliver(self, step: int) -> list[tuple[int, int, Any]]:
        keys = sorted(k for k in self._queue if k[0] == step)
        return [(k[1], k[2], self._queue.pop(k)) for k in keys]

    @property
    def pending(self) -> int:
        return len(self._queue)


def simulate(schedule: Schedule, states: list[dict[int, Any]], *,
             combine: Callable[[int, int, Any, Any, Step], Any],
             measure: Callable[[Any], int],
             encode: Callable[[int, int, Any, Step], Any] | None = None,
             finalize: Callable[[int, int, Any], Any] | None = None,
             ) -> tuple[list[dict[int, Any]], BitsAccount]:
    """Run ``schedule`` over per-worker ``{segment: state}`` maps.

    ``encode(sender, segment, state, step)`` builds the wire message,
    ``combine(receiver, segment, message, local, step)`` folds it in during
    reduce steps, and ``finalize(owner, segment, state)`` converts each owned
    segment once the reduce phase ends.
    """
    if len(states) != schedule.M:
        raise ProtocolError(f"expected {schedule.M} workers, got {len(states)}")
    states = [dict(s) for s in states]
    account = BitsAccount(schedule.M)
    transport = Transport()
    finalized = False
    for step in schedule.steps:
        if step.phase == GATHER and not finalized:
            finalized = True
            if finalize is not None:
                for seg, w in schedule.owners().items():
                    states[w][seg] = finalize(w, seg, states[w][seg])
        for t in step.transfers:
            state = states[t.sender][t.segment]
            msg = encode(t.sender, t.segment, state, step) if encode else state
            account.add(step.phase, t.sender, measure(msg))
            transport.send(step.index, t.sender, t.receiver, (t.segment, msg))
        for sender, receiver, (seg, msg) in transport.deliver(step.index):
            if step.phase == REDUCE:
                states[receiver][seg] = combine(receiver, seg, msg, states[receiver][seg], step)
            else:
                states[receiver][seg] = msg
    if transport.pending:
        raise ProtocolError("undelivered messages left in transport")
    return states, account


def _consensus(states: list[dict[int, Any]], key: Callable[[Any], Any]) -> list[Any]:
    ref = states[0]
    for w, st in enumerate(states[1:], start=1):
        for seg in ref:
            if key(st[seg]) != key(ref[seg]):
                raise ProtocolError(f"worker {w} disagrees with worker 0 on segment {seg}")
    return [ref[seg] for seg in sorted(ref)]


def _split_all(vectors, M: int) -> tuple[Segmentation, list[dict[int, np.ndarray]]]:
    vs = [dense(v) for v in vectors]
    if len(vs) != M:
        raise ProtocolError(f"expected {M} vectors, got {len(vs)}")
    D = len(vs[0])
    if any(len(v) != D for v in vs):
        raise ProtocolError("vectors differ in length")
    seg = Segmentation(D, M)
    return seg, [dict(enumerate(seg.split(v))) for v in vs]


def allreduce_dense(vectors, schedule: Schedule) -> tuple[np.ndarray, BitsAccount]:
    """Full-precision all-reduce; returns the arithmetic mean."""
    seg, states = _split_all(vectors, schedule.M)
    final, account = simulate(
        schedule, states,
        combine=lambda r, s, msg, local, step: msg + local,
        measure=lambda msg: FLOAT_BITS * len(msg))
    parts = _consensus(final, key=lambda a: a.tobytes())
    return seg.join(parts) / schedule.M, account


def allreduce_sign(segments, schedule: Schedule, rng: RngStream
                   ) -> tuple[list[PackedSignVector], BitsAccount]:
    """Sign-bit all-reduce with the merge operator at every reduce hop.

    ``segments[m][i]`` is worker ``m``'s sign vector for segment ``i``.
    The merge at worker ``r`` on segment ``i`` draws from
    ``rng.child(worker_id=r, segment_index=i, stage=step.stage)``.
    """
    if len(segments) != schedule.M:
        raise ProtocolError(f"expected {schedule.M} workers, got {len(segments)}")
    states = []
    for m, segs in enumerate(segments):
        if len(segs) != schedule.n_segments:
            raise ProtocolError(f"worker {m} supplied {len(segs)} segments")
        states.append({i: AggregateSign(b, 1) for i, b in enumerate(segs)})
    for i in range(schedule.n_segments):
        if len({states[m][i].bits.logical_len for m in range(schedule.M)}) != 1:
            raise ProtocolError(f"segment {i} length differs across workers")

    def combine(r, i, msg, local, step):
        return merge_signs(msg, local, rng.child(worker_id=r, segment_index=i, stage=step.stage))

    final, account = simulate(schedule, states, combine=combine,
                              measure=lambda msg: msg.bits.logical_len)
    aggs = _consensus(final, key=lambda a: (a.bits, a.count))
    if any(a.count != schedule.M for a in aggs):
        raise ProtocolError("reduce phase did not collect every contribution")
    return [a.bits for a in aggs], account


def _require_ring(schedule: Schedule, what: str) -> None:
    if schedule.topology != "ring":
        raise UnsupportedError(f"{what} is only defined on a ring schedule")


def cascading_allreduce(vectors, schedule: Schedule, rng: RngStream
                        ) -> tuple[np.ndarray, BitsAccount]:
    """Decompress-add-recompress SSDM chain along the ring, divided by M.

    Each segment is compressed M times in total: once by every reduce hop's
    sender and once more by its owner before the gather phase.
    """
    _require_ring(schedule, "cascading compression")
    seg, states = _split_all(vectors, schedule.M)

    def encode(s, i, state, step):
        if isinstance(state, SsdmPacket):
            return state
        return ssdm_compress(state, rng.child(worker_id=s, segment_index=i, stage=STAGE_SSDM + step.index))

    def finalize(w, i, state):
        return ssdm_compress(state, rng.child(worker_id=w, segment_index=i, stage=STAGE_SSDM - 1))

    final, account = simulate(
        schedule, states, encode=encode, finalize=finalize,
        combine=lambda r, i, msg, local, step: ssdm_decompress(msg) + local,
        measure=lambda p: p.bits.logical_len + NORM_BITS)
    packets = _consensus(final, key=lambda p: (p.norm, p.bits))
    return seg.join([ssdm_decompress(p) for p in packets]) / schedule.M, account


@dataclass(frozen=True)
class SumPayload:
    """Integer sums of stochastic signs plus the contributors' scaled values."""

    sums: np.ndarray
    values: np.ndarray
    count: int


def sum_ssdm_allreduce(vectors, schedule: Schedule, rng: RngStream
                       ) -> tuple[np.ndarray, BitsAccount]:
    """SSDM once per worker, then linear summation of the signs along the ring.

    The per-coordinate integer sums grow with every hop, so their
    Elias-gamma code length grows too; every carried contributor norm costs
    ``NORM_BITS``.
    """
    _require_ring(schedule, "sum-SSDM")
    seg, _ = _split_all(vectors, schedule.M)
    states = []
    for m, v in enumerate(vectors):
        packet = ssdm_compress(v, rng.child(worker_id=m, stage=STAGE_SSDM))
        signs = np.where(packet.bits.bits(), 1, -1).astype(np.int64)
        values = ssdm_decompress(packet)
        s_parts = seg.split(signs.astype(np.float64))
        v_parts = seg.split(values)
        states.append({i: SumPayload(s_parts[i].astype(np.int64), v_parts[i], 1)
                       for i in range(schedule.M)})

    def combine(r, i, msg, local, step):
        return SumPayload(msg.sums + local.sums, msg.values + local.values, msg.count + local.count)

    final, account = simulate(
        schedule, states, combine=combine,
        measure=lambda p: sum_code_bits(p.sums) + NORM_BITS * p.count)
    parts = _consensus(final, key=lambda p: (p.sums.tobytes(), p.values.tobytes(), p.count))
    return seg.join([p.values for p in parts]) / schedule.M, account
