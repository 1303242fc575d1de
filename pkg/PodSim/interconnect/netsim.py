#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Alpha-beta network simulator for all-reduce schedules.

Rounds are barrier synchronized. Inside a round every directed link is a simpy
process that sends its steps one after the other (FIFO in emission order), so
contended steps serialize and the round lasts as long as its slowest link.
"""
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import simpy

from errors import InvalidArgument, UnsupportedAlgorithm
from verbosity import makePrintLog, printWarning, verbosityLow, verbosityMedium, verbosityHigh
from interconnect.dataExchange import ELEMENT_SIZE_BYTES, DIRECTION
from interconnect.topology import buildTopology
from interconnect.collectives import allReduce1d, allReduce2d
from sweepWorker import runSweep

FILE_VERBOSITY = verbosityMedium  # verbosity of this file
printLog = makePrintLog("netsim", FILE_VERBOSITY)


class ALGORITHM(Enum):
    RING1D = "ring1d"
    TORUS2D = "torus2d"
    MESH2D = "mesh2d"

    @staticmethod
    def parse(value):
        if isinstance(value, ALGORITHM):
            return value
        try:
            return ALGORITHM(str(value).lower())
        except ValueError:
            raise UnsupportedAlgorithm("unsupported algorithm '%s', expected ring1d, torus2d or mesh2d" % value)


@dataclass(frozen=True)
class CostModel:
    alpha: float = 1e-6  # seconds per message per hop
    beta: float = 1e9  # bytes per second per directed link
    elementSizeBytes: int = ELEMENT_SIZE_BYTES

    def __post_init__(self):
        if not self.alpha >= 0:
            raise InvalidArgument("alpha must be >= 0, got %s" % self.alpha)
        if not self.beta > 0:
            raise InvalidArgument("beta must be > 0, got %s" % self.beta)
        if self.elementSizeBytes < 1:
            raise InvalidArgument("element size must be >= 1 byte")

    def messageTime(self, nbytes):
        return self.alpha + nbytes / self.beta

    @classmethod
    def fromDict(cls, values):
        return cls(
            alpha=float(values.get("alpha", cls.alpha)),
            beta=float(values.get("beta", cls.beta)),
            elementSizeBytes=int(values.get("elementSizeBytes", ELEMENT_SIZE_BYTES)),
        )


@dataclass
class SimResult:
    completionTime: float
    criticalPathRounds: int
    spanHops: int
    linkBytes: dict = field(default_factory=dict)  # LinkId -> bytes
    roundTimes: list = field(default_factory=list)
    contendedLinkRounds: int = 0

    @property
    def maxLinkBytes(self):
        return max(self.linkBytes.values()) if self.linkBytes else 0

    @property
    def totalBytes(self):
        return sum(self.linkBytes.values())


class cNetSimulator:
    def __init__(self, topo, cost):
        self.topo = topo
        self.cost = cost

    def _resolveLink(self, step):
        link = step.link
        if link is None or (link.src, link.dst) != (step.sender, step.receiver) or not self.topo.hasLink(link.src, link.dst):
            link = self.topo.linkFor(step.sender, step.receiver)
        if link is None:
            raise InvalidArgument("step %d->%d in round %d has no physical link" % (step.sender, step.receiver, step.round))
        return link

    def _linkProcess(self, env, durations):
        for d in durations:
            yield env.timeout(d)

    def Run(self, schedule):
        env = simpy.Environment()
        result = SimResult(0.0, schedule.roundCount, self._spanHops(schedule))
        elementSize = self.cost.elementSizeBytes

        # resolve every step up front so an unknown link fails before any time passes
        plan = []
        for rnd in schedule.rounds:
            perLink = {}
            for step in rnd:
                link = self._resolveLink(step)
                nbytes = step.elements * elementSize
                perLink.setdefault(link, []).append(self.cost.messageTime(nbytes))
                result.linkBytes[link] = result.linkBytes.get(link, 0) + nbytes
            result.contendedLinkRounds += sum(1 for d in perLink.values() if len(d) > 1)
            plan.append(perLink)

        def driver(env):
            for perLink in plan:
                start = env.now
                procs = [env.process(self._linkProcess(env, durations)) for durations in perLink.values()]
                yield env.all_of(procs)
                result.roundTimes.append(env.now - start)

        env.process(driver(env))
        env.run()
        result.completionTime = env.now

        printLog(
            "Simulated %r: %.6g s, span %d hops, max link %d bytes"
            % (schedule, result.completionTime, result.spanHops, result.maxLinkBytes),
            verbosityHigh,
        )
        return result

    def _spanHops(self, schedule):
        """Longest chain of hops any element's value went through."""
        if schedule.roundCount == 0:
            return 0
        bounds = {0, schedule.elementCount}
        for step in schedule.steps():
            bounds.add(step.lo)
            bounds.add(step.hi)
        bounds = sorted(bounds)
        index = {b: i for i, b in enumerate(bounds)}
        depth = np.zeros((schedule.topology.nodeCount, len(bounds) - 1), dtype=np.int64)

        for rnd in schedule.rounds:
            updates = []
            for step in rnd:
                s0, s1 = index[step.lo], index[step.hi]
                updates.append((step.receiver, s0, s1, depth[step.sender, s0:s1] + 1))
            for receiver, s0, s1, value in updates:
                np.maximum(depth[receiver, s0:s1], value, out=depth[receiver, s0:s1])
        return int(depth.max())


def simulate(schedule, topo=None, cost=None):
    topo = topo if topo is not None else schedule.topology
    cost = cost if cost is not None else CostModel()
    return cNetSimulator(topo, cost).Run(schedule)


# ------------------------------- closed forms -------------------------------


def _gridShape(nodes):
    if isinstance(nodes, (tuple, list)):
        if len(nodes) != 2:
            raise InvalidArgument("2-D algorithms take (rows, cols), got %s" % (nodes,))
        return int(nodes[0]), int(nodes[1])
    n = math.isqrt(int(nodes))
    if n * n != int(nodes):
        raise InvalidArgument("%s chips is not a square grid" % nodes)
    return n, n


def _nodeTotal(nodes):
    if isinstance(nodes, (tuple, list)):
        return int(np.prod(nodes))
    return int(nodes)


def closedFormTime(algorithm, nodes, payloadBytes, cost, bidirectional=False):
    """
    ring1d: 2(P-1)(alpha + S/(P beta)), bidirectional halves the bandwidth term.
    torus2d / mesh2d on r x c: two phases, each a concurrent pair of ring passes
    over S/2 bytes with barrier-synchronized rounds. Meshes run line exchanges,
    which already use both directions, so bidirectional only affects the torus.
    """
    algorithm = ALGORITHM.parse(algorithm)
    if payloadBytes < 0 or _nodeTotal(nodes) < 1:
        raise InvalidArgument("parameters must be positive")
    a, b = cost.alpha, cost.beta

    if algorithm == ALGORITHM.RING1D:
        p = _nodeTotal(nodes)
        if p == 1:
            return 0.0
        bw = payloadBytes / p / (2.0 if bidirectional else 1.0)
        return 2 * (p - 1) * (a + bw / b)

    rows, cols = _gridShape(nodes)
    factor = 2.0 if (bidirectional and algorithm == ALGORITHM.TORUS2D) else 1.0
    half = payloadBytes / 2.0

    def perStep(n):
        return a + half / n / factor / b

    ra, rb = 2 * (rows - 1), 2 * (cols - 1)
    ea, eb = perStep(rows), perStep(cols)
    shared = min(ra, rb)
    phase = shared * max(ea, eb) + (ra - shared) * ea + (rb - shared) * eb
    return 2 * phase


def spanRounds(algorithm, nodes):
    """Critical-path rounds: 2(P-1) for the 1-D ring, 2 * max(2(r-1), 2(c-1)) for the 2-D algorithms."""
    algorithm = ALGORITHM.parse(algorithm)
    if algorithm == ALGORITHM.RING1D:
        return 2 * (_nodeTotal(nodes) - 1)
    rows, cols = _gridShape(nodes)
    return 2 * max(2 * (rows - 1), 2 * (cols - 1))


def fitLogLogSlope(xs, ys):
    """Least-squares slope of log(ys) over log(xs)."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if len(xs) < 2 or np.any(xs <= 0) or np.any(ys <= 0):
        raise InvalidArgument("log-log fit needs at least two strictly positive points")
    slope, _ = np.polyfit(np.log(xs), np.log(ys), 1)
    return float(slope)


# --------------------------------- sweeps -----------------------------------


@dataclass
class SweepRow:
    algorithm: str
    chips: int
    topology: str
    payloadBytes: int
    alpha: float
    beta: float
    rounds: int
    timeSeconds: float
    maxLinkBytes: int

    HEADER = ("algorithm", "chips", "topology", "payload_bytes", "alpha", "beta", "rounds", "time_seconds", "max_link_bytes")

    def values(self):
        return [
            self.algorithm,
            self.chips,
            self.topology,
            self.payloadBytes,
            self.alpha,
            self.beta,
            self.rounds,
            self.timeSeconds,
            self.maxLinkBytes,
        ]

    @property
    def skipped(self):
        return self.topology.startswith("skipped")


def sweepTopology(algorithm, chips):
    """Topology a sweep point runs on, None when a 2-D algorithm gets a non-square count."""
    n = math.isqrt(chips)
    square = n * n == chips
    if algorithm == ALGORITHM.RING1D:
        if square:
            return buildTopology([n, n], [True, True])
        return buildTopology([chips], [True])
    if not square:
        return None
    return buildTopology([n, n], algorithm == ALGORITHM.TORUS2D)


def sweepPoint(algorithm, chips, payloadBytes, cost):
    algorithm = ALGORITHM.parse(algorithm)
    if chips < 1:
        raise InvalidArgument("chip count must be >= 1, got %d" % chips)
    topo = sweepTopology(algorithm, chips)
    if topo is None:
        printWarning("netsim", "%s skipped at %d chips: not a square count" % (algorithm.value, chips))
        return SweepRow(algorithm.value, chips, "skipped:non-square", payloadBytes, cost.alpha, cost.beta, 0, float("nan"), 0)

    count = max(1, payloadBytes // cost.elementSizeBytes)
    if algorithm == ALGORITHM.RING1D:
        schedule = allReduce1d(topo, count, DIRECTION.UNI)
    else:
        schedule = allReduce2d(topo, count, DIRECTION.BI if algorithm == ALGORITHM.TORUS2D else DIRECTION.UNI)
    res = simulate(schedule, topo, cost)
    printLog("%s at %d chips: %.6g s in %d rounds" % (algorithm.value, chips, res.completionTime, res.criticalPathRounds), verbosityMedium)
    return SweepRow(
        algorithm.value,
        chips,
        topo.spec,
        payloadBytes,
        cost.alpha,
        cost.beta,
        res.criticalPathRounds,
        res.completionTime,
        res.maxLinkBytes,
    )


def sweepChipCounts(algorithms, chipCounts, payloadBytes, cost, jobs=1):
    """
    One row per (algorithm, count), algorithm-major. When 2-D algorithms are part
    of the sweep both the torus and the mesh variant are reported at the largest count.
    """
    algorithms = [ALGORITHM.parse(a) for a in algorithms]
    chipCounts = [int(c) for c in chipCounts]
    points = [(a, c) for a in algorithms for c in chipCounts]

    largest = max(chipCounts) if chipCounts else 0
    twoD = [a for a in algorithms if a in (ALGORITHM.TORUS2D, ALGORITHM.MESH2D)]
    if twoD and math.isqrt(largest) ** 2 == largest:
        for variant in (ALGORITHM.TORUS2D, ALGORITHM.MESH2D):
            if variant not in algorithms:
                points.append((variant, largest))

    printLog("Sweeping %d points with %d jobs" % (len(points), jobs), verbosityLow)
    return runSweep(points, lambda p: sweepPoint(p[0], p[1], payloadBytes, cost), jobs)
