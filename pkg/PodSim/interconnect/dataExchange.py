#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Data objects that travel between the schedule builders, the executor and the
simulator: communication steps, schedules and per-node buffers.
"""
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from errors import InvalidArgument, ScheduleCorrupt
from verbosity import makePrintLog, verbosityMedium, verbosityHigh

FILE_VERBOSITY = verbosityMedium  # verbosity of this file
printLog = makePrintLog("dataExchange", FILE_VERBOSITY)

ELEMENT_SIZE_BYTES = 4  # 32-bit payload elements on the wire

SCHEDULE_TEXT_HEADER = "round,phase,half,src,dst,chunk_lo,chunk_hi,op"


class STEP_OP(Enum):
    REDUCE_ADD = "reduce-add"
    COPY = "copy"


class HALF(Enum):
    A = "A"
    B = "B"
    WHOLE = "whole"


class DIRECTION(Enum):
    UNI = "uni"
    BI = "bi"

    @staticmethod
    def parse(value):
        if isinstance(value, DIRECTION):
            return value
        try:
            return DIRECTION(str(value).lower())
        except ValueError:
            raise InvalidArgument("unknown direction '%s', expected uni or bi" % value)


@dataclass(frozen=True)
class CommStep:
    sender: int
    receiver: int
    lo: int  # chunk is the element range [lo, hi)
    hi: int
    op: STEP_OP
    round: int
    phase: int = 1
    half: HALF = HALF.WHOLE
    link: object = None  # LinkId, None when the hop has no physical link

    @property
    def elements(self):
        return self.hi - self.lo


@dataclass
class Payload:
    elements: np.ndarray
    elementSizeBytes: int = ELEMENT_SIZE_BYTES

    @property
    def count(self):
        return len(self.elements)

    @property
    def sizeBytes(self):
        return self.count * self.elementSizeBytes


def payloadCount(payload):
    """Element count of a Payload, an array or a plain integer."""
    if isinstance(payload, Payload):
        count = payload.count
    elif isinstance(payload, np.ndarray):
        count = payload.shape[-1]
    else:
        count = int(payload)
    if count < 1:
        raise InvalidArgument("payload must hold at least one element, got %d" % count)
    return count


class Schedule:
    """
    Rounds of CommSteps. Steps of one round run concurrently, rounds run in order.
    partition maps each HALF to the element range it covers, phaseRounds maps each
    phase to the number of rounds it spans.
    """

    def __init__(self, rounds, topology, algorithm, elementCount, partition=None, phaseRounds=None, direction=DIRECTION.UNI):
        self.rounds = rounds
        self.topology = topology
        self.algorithm = algorithm
        self.elementCount = elementCount
        self.partition = partition if partition is not None else {HALF.WHOLE: (0, elementCount)}
        self.phaseRounds = phaseRounds if phaseRounds is not None else {}
        self.direction = direction

    @classmethod
    def fromSteps(cls, steps, topology, algorithm, elementCount, partition=None, direction=DIRECTION.UNI):
        """Group steps by round, drop empty rounds and renumber what is left."""
        byRound = {}
        for step in steps:
            byRound.setdefault(step.round, []).append(step)

        rounds = []
        phaseRounds = {}
        for newIdx, oldIdx in enumerate(sorted(byRound)):
            rnd = [replace(s, round=newIdx) if s.round != newIdx else s for s in byRound[oldIdx]]
            rounds.append(rnd)
            for phase in {s.phase for s in rnd}:
                phaseRounds[phase] = phaseRounds.get(phase, 0) + 1

        printLog(
            "Schedule %s: %d steps in %d rounds" % (algorithm, len(steps), len(rounds)),
            verbosityHigh,
        )
        return cls(rounds, topology, algorithm, elementCount, partition, phaseRounds, direction)

    @property
    def roundCount(self):
        return len(self.rounds)

    @property
    def stepCount(self):
        return sum(len(r) for r in self.rounds)

    def steps(self):
        for rnd in self.rounds:
            yield from rnd

    def bytesSent(self, elementSizeBytes=ELEMENT_SIZE_BYTES):
        """Bytes sent per node over the whole schedule."""
        sent = np.zeros(self.topology.nodeCount, dtype=np.int64)
        for step in self.steps():
            sent[step.sender] += step.elements * elementSizeBytes
        return sent

    def bytesPerLink(self, elementSizeBytes=ELEMENT_SIZE_BYTES):
        perLink = {}
        for step in self.steps():
            link = step.link if step.link is not None else self.topology.linkFor(step.sender, step.receiver)
            perLink[link] = perLink.get(link, 0) + step.elements * elementSizeBytes
        return perLink

    def __repr__(self):
        return "Schedule(%s on %s, %d rounds, %d steps)" % (
            self.algorithm,
            self.topology.spec,
            self.roundCount,
            self.stepCount,
        )


@dataclass
class ClusterState:
    """One float64 buffer of equal length per node."""

    buffers: np.ndarray

    def __post_init__(self):
        self.buffers = np.array(self.buffers, dtype=np.float64, copy=True)
        if self.buffers.ndim != 2:
            raise InvalidArgument("cluster state must be a (nodes, elements) array")

    @property
    def nodeCount(self):
        return self.buffers.shape[0]

    @property
    def elementCount(self):
        return self.buffers.shape[1]

    def copy(self):
        return ClusterState(self.buffers)


def randomClusterState(nodeCount, elementCount, seed=0):
    rng = np.random.default_rng(seed)
    return ClusterState(rng.standard_normal((nodeCount, elementCount)))


def sumOracle(state):
    """Element-wise sum over nodes, what every node must hold after an all-reduce."""
    return state.buffers.sum(axis=0)


def relativeError(result, oracle):
    """Normwise relative error max|x - o| / max|o|, replicated over nodes."""
    diff = np.max(np.abs(np.asarray(result) - oracle))
    scale = np.max(np.abs(oracle))
    if scale == 0.0:
        return float(diff)
    return float(diff / scale)


# ------------------------------ text format ---------------------------------


def scheduleToText(schedule):
    lines = [SCHEDULE_TEXT_HEADER]
    for rnd in schedule.rounds:
        for s in rnd:
            lines.append("%d,%d,%s,%d,%d,%d,%d,%s" % (s.round, s.phase, s.half.value, s.sender, s.receiver, s.lo, s.hi, s.op.value))
    return "\n".join(lines) + "\n"


def scheduleFromText(text, topology, algorithm="parsed", elementCount=None):
    """
    Parse the text form back into a Schedule. Links are resolved per round,
    the first channel of a pair not yet used in that round wins.
    """
    steps = []
    used = {}  # round -> set of LinkId
    maxHi = 0
    for lineNo, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#") or line == SCHEDULE_TEXT_HEADER:
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != 8:
            raise ScheduleCorrupt("line %d: expected 8 fields, got %d" % (lineNo, len(fields)))
        try:
            rnd, phase = int(fields[0]), int(fields[1])
            half = HALF(fields[2])
            src, dst, lo, hi = (int(f) for f in fields[3:7])
            op = STEP_OP(fields[7])
        except ValueError as e:
            raise ScheduleCorrupt("line %d: %s" % (lineNo, e))

        taken = used.setdefault(rnd, set())
        link = None
        for candidate in topology.linksBetween(src, dst):
            if candidate not in taken:
                link = candidate
                break
        if link is None:
            link = topology.linkFor(src, dst)
        if link is not None:
            taken.add(link)

        steps.append(CommStep(src, dst, lo, hi, op, rnd, phase, half, link))
        maxHi = max(maxHi, hi)

    count = elementCount if elementCount is not None else maxHi
    return Schedule.fromSteps(steps, topology, algorithm, count)
