#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
All-reduce schedule builders and the reference executor.

A ring of n nodes runs a reduce-scatter followed by an all-gather, n-1 rounds
each. Sequences that cannot close into a ring run the same two passes as a
line, pushing traffic both ways. The 2-D algorithm splits the payload in two
halves that run along Y and X concurrently, then swap dimensions.
"""
import networkx as nx

from errors import InvalidArgument, ScheduleCorrupt
from verbosity import makePrintLog, verbosityLow, verbosityMedium, verbosityHigh
from interconnect.dataExchange import (
    CommStep,
    Schedule,
    ClusterState,
    STEP_OP,
    HALF,
    DIRECTION,
    payloadCount,
)
from interconnect.topology import (
    RingPath,
    embed1dRing,
    ringsAlong,
    isPath,
    closesRing,
    rectangleOrderings,
)

FILE_VERBOSITY = verbosityMedium  # verbosity of this file
printLog = makePrintLog("collectives", FILE_VERBOSITY)

HAMILTON_SEARCH_BUDGET = 200000  # expanded nodes before the path search gives up


def subChunks(lo, hi, n):
    """Split [lo, hi) into n contiguous ranges, the first (hi-lo) % n ranges one longer."""
    base, extra = divmod(hi - lo, n)
    result = []
    start = lo
    for k in range(n):
        end = start + base + (1 if k < extra else 0)
        result.append((start, end))
        start = end
    return result


def _step(topo, src, dst, chunk, op, rnd, phase, half, forward):
    return CommStep(src, dst, chunk[0], chunk[1], op, rnd, phase, half, topo.linkFor(src, dst, forward))


# ------------------------------- ring passes -------------------------------


def _ringPassSteps(topo, ring, lo, hi, step, reduce, roundOffset, phase, half):
    """
    One pass around a closed ring. step is +1 (forward) or -1 (backward).
    Reduce-scatter leaves position i owning sub-chunk i, all-gather starts from there.
    """
    n = len(ring)
    if n <= 1 or hi <= lo:
        return []
    chunks = subChunks(lo, hi, n)
    op = STEP_OP.REDUCE_ADD if reduce else STEP_OP.COPY
    steps = []
    for t in range(n - 1):
        for i in range(n):
            k = (i - step * (t + 1)) % n if reduce else (i - step * t) % n
            if chunks[k][1] <= chunks[k][0]:
                continue
            steps.append(_step(topo, ring[i], ring[(i + step) % n], chunks[k], op, roundOffset + t, phase, half, step > 0))
    return steps


def _directionalRanges(lo, hi, direction):
    """[(lo, hi, step)] per travel direction, bidirectional sends the first half forward."""
    if direction == DIRECTION.BI:
        mid = lo + (hi - lo + 1) // 2
        return [(lo, mid, +1), (mid, hi, -1)]
    return [(lo, hi, +1)]


def _ringReduceScatterSteps(topo, ring, lo, hi, direction, roundOffset=0, phase=1, half=HALF.WHOLE):
    steps = []
    for a, b, step in _directionalRanges(lo, hi, direction):
        steps += _ringPassSteps(topo, ring, a, b, step, True, roundOffset, phase, half)
    return steps


def _ringAllGatherSteps(topo, ring, lo, hi, direction, roundOffset=0, phase=1, half=HALF.WHOLE):
    steps = []
    for a, b, step in _directionalRanges(lo, hi, direction):
        steps += _ringPassSteps(topo, ring, a, b, step, False, roundOffset, phase, half)
    return steps


# ------------------------------- line passes -------------------------------


def _lineReduceScatterSteps(topo, line, lo, hi, roundOffset=0, phase=1, half=HALF.WHOLE):
    """
    Open line, both directions in n-1 rounds. Node k ends owning sub-chunk k,
    partial sums of chunks right of a sender flow right and the others flow left.
    """
    n = len(line)
    if n <= 1 or hi <= lo:
        return []
    chunks = subChunks(lo, hi, n)
    steps = []
    for i in range(n - 1):
        for k in range(i + 1, n):
            if chunks[k][1] > chunks[k][0]:
                t = i + (n - 1 - k)
                steps.append(_step(topo, line[i], line[i + 1], chunks[k], STEP_OP.REDUCE_ADD, roundOffset + t, phase, half, True))
    for i in range(1, n):
        for k in range(i):
            if chunks[k][1] > chunks[k][0]:
                t = (n - 1 - i) + k
                steps.append(_step(topo, line[i], line[i - 1], chunks[k], STEP_OP.REDUCE_ADD, roundOffset + t, phase, half, False))
    return steps


def _lineAllGatherSteps(topo, line, lo, hi, roundOffset=0, phase=1, half=HALF.WHOLE):
    n = len(line)
    if n <= 1 or hi <= lo:
        return []
    chunks = subChunks(lo, hi, n)
    steps = []
    for i in range(n - 1):
        for k in range(i + 1):
            if chunks[k][1] > chunks[k][0]:
                steps.append(_step(topo, line[i], line[i + 1], chunks[k], STEP_OP.COPY, roundOffset + i - k, phase, half, True))
    for i in range(1, n):
        for k in range(i, n):
            if chunks[k][1] > chunks[k][0]:
                steps.append(_step(topo, line[i], line[i - 1], chunks[k], STEP_OP.COPY, roundOffset + k - i, phase, half, False))
    return steps


def _allReduceSteps(topo, sequence, lo, hi, direction, roundOffset, phase, half):
    """Reduce-scatter then all-gather on one sequence, returns (steps, rounds used)."""
    n = len(sequence)
    if n <= 1 or hi <= lo:
        return [], 0
    if getattr(sequence, "closed", False):
        steps = _ringReduceScatterSteps(topo, sequence, lo, hi, direction, roundOffset, phase, half)
        steps += _ringAllGatherSteps(topo, sequence, lo, hi, direction, roundOffset + n - 1, phase, half)
    else:
        steps = _lineReduceScatterSteps(topo, sequence, lo, hi, roundOffset, phase, half)
        steps += _lineAllGatherSteps(topo, sequence, lo, hi, roundOffset + n - 1, phase, half)
    return steps, 2 * (n - 1)


# ----------------------------- public builders ------------------------------


def _asRing(ring):
    return ring if isinstance(ring, RingPath) else RingPath(ring, True)


def ringReduceScatter(topo, ring, chunkRange, direction=DIRECTION.UNI):
    """Partial schedule: after it, position i of ring holds the sum of sub-chunk i."""
    ring = _asRing(ring)
    lo, hi = chunkRange
    direction = DIRECTION.parse(direction)
    if ring.closed:
        steps = _ringReduceScatterSteps(topo, ring, lo, hi, direction)
    else:
        steps = _lineReduceScatterSteps(topo, ring, lo, hi)
    return Schedule.fromSteps(steps, topo, "reduce-scatter", hi, direction=direction)


def ringAllGather(topo, ring, chunkRange, direction=DIRECTION.UNI):
    """Partial schedule: broadcasts sub-chunk i from position i to every ring member."""
    ring = _asRing(ring)
    lo, hi = chunkRange
    direction = DIRECTION.parse(direction)
    if ring.closed:
        steps = _ringAllGatherSteps(topo, ring, lo, hi, direction)
    else:
        steps = _lineAllGatherSteps(topo, ring, lo, hi)
    return Schedule.fromSteps(steps, topo, "all-gather", hi, direction=direction)


def allReduce1d(topo, payload, direction=DIRECTION.UNI):
    count = payloadCount(payload)
    direction = DIRECTION.parse(direction)
    ring = embed1dRing(topo)
    if not ring.closed and direction == DIRECTION.BI:
        printLog("Open line on %s already uses both directions" % topo.spec, verbosityMedium)

    steps, _ = _allReduceSteps(topo, ring, 0, count, direction, 0, 1, HALF.WHOLE)
    algorithm = "ring1d" if ring.closed else "line1d"
    schedule = Schedule.fromSteps(steps, topo, algorithm, count, direction=direction)
    schedule.ring = ring
    printLog("%s on %s: %d rounds" % (algorithm, topo.spec, schedule.roundCount), verbosityHigh)
    return schedule


def allReduce2d(topo, payload, direction=DIRECTION.UNI):
    """
    Half A reduces along Y while half B reduces along X, then the two swap.
    Phase 2 starts only after both halves finished phase 1.
    """
    if topo.ndims != 2:
        raise InvalidArgument("2-D all-reduce needs a 2-D topology, got %s" % topo.spec)
    count = payloadCount(payload)
    direction = DIRECTION.parse(direction)

    split = (count + 1) // 2
    ranges = {HALF.A: (0, split), HALF.B: (split, count)}
    firstDim = {HALF.A: 0, HALF.B: 1}

    steps = []
    offset = 0
    for phase in (1, 2):
        phaseLength = 0
        for half, (lo, hi) in ranges.items():
            dim = firstDim[half] if phase == 1 else 1 - firstDim[half]
            for sequence in ringsAlong(topo, dim):
                s, used = _allReduceSteps(topo, sequence, lo, hi, direction, offset, phase, half)
                steps += s
                phaseLength = max(phaseLength, used)
        offset += phaseLength

    algorithm = "torus2d" if all(topo.wrap) else "mesh2d"
    schedule = Schedule.fromSteps(steps, topo, algorithm, count, partition=ranges, direction=direction)
    printLog(
        "%s on %s: %d rounds, phases %s" % (algorithm, topo.spec, schedule.roundCount, schedule.phaseRounds),
        verbosityHigh,
    )
    return schedule


# ---------------------------- group all-reduce ------------------------------


def _hamiltonianPath(graph, budget=HAMILTON_SEARCH_BUDGET):
    """Backtracking search for a path visiting every node of graph, None if not found."""
    nodes = sorted(graph.nodes)
    target = len(nodes)
    expanded = [0]

    def extend(path, visited):
        if len(path) == target:
            return list(path)
        expanded[0] += 1
        if expanded[0] > budget:
            return None
        # fewest onward options first
        options = sorted(
            (n for n in graph.neighbors(path[-1]) if n not in visited),
            key=lambda n: (sum(1 for m in graph.neighbors(n) if m not in visited), n),
        )
        for n in options:
            path.append(n)
            visited.add(n)
            found = extend(path, visited)
            if found is not None:
                return found
            path.pop()
            visited.discard(n)
        return None

    for start in nodes:
        found = extend([start], {start})
        if found is not None or expanded[0] > budget:
            return found
    return None


def _isContiguousRange(values):
    return values == list(range(values[0], values[0] + len(values)))


def groupOrdering(topo, members, groupId=0):
    """RingPath visiting every member of a group, closed when a circuit exists."""
    members = sorted(members)
    if len(members) == 1:
        return RingPath(members, True)

    graph = topo.toGraph().subgraph(members).to_undirected()
    if not nx.is_connected(graph):
        raise InvalidArgument("group %s is not a connected set of nodes" % groupId, groupId=groupId)

    candidates = [members]
    if topo.ndims == 2:
        coords = [topo.coord(m) for m in members]
        rows = sorted({c[0] for c in coords})
        cols = sorted({c[1] for c in coords})
        if len(rows) * len(cols) == len(members) and _isContiguousRange(rows) and _isContiguousRange(cols):
            candidates += rectangleOrderings(topo, rows, cols)
        else:
            byRow = {}
            for m, c in zip(members, coords):
                byRow.setdefault(c[0], []).append(m)
            order = []
            for idx, r in enumerate(sorted(byRow)):
                order += byRow[r] if idx % 2 == 0 else list(reversed(byRow[r]))
            candidates.append(order)

    paths = [c for c in candidates if isPath(topo, c)]
    for order in paths:
        if closesRing(topo, order):
            return RingPath(order, True)
    if paths:
        return RingPath(paths[0], False)

    printLog("Group %s: searching for a Hamiltonian path over %d nodes" % (groupId, len(members)), verbosityMedium)
    order = _hamiltonianPath(graph)
    if order is None:
        raise InvalidArgument("group %s has no path through its nodes" % groupId, groupId=groupId)
    return RingPath(order, closesRing(topo, order))


def _normalizeGroups(topo, groups):
    """Accept a node->group sequence or mapping, return {groupId: [nodes]}."""
    if isinstance(groups, dict):
        assignment = groups
    else:
        groups = list(groups)
        if len(groups) != topo.nodeCount:
            raise InvalidArgument("group assignment covers %d nodes, topology has %d" % (len(groups), topo.nodeCount))
        assignment = dict(enumerate(groups))
    if sorted(assignment) != list(range(topo.nodeCount)):
        raise InvalidArgument("group assignment must cover every node exactly once")
    byGroup = {}
    for node, gid in assignment.items():
        byGroup.setdefault(gid, []).append(node)
    return {gid: sorted(nodes) for gid, nodes in sorted(byGroup.items())}


def groupAllReduce(topo, groups, payload):
    """Independent all-reduce inside every group, all groups start in round 0."""
    count = payloadCount(payload)
    byGroup = _normalizeGroups(topo, groups)

    steps = []
    orderings = {}
    for gid, members in byGroup.items():
        ordering = groupOrdering(topo, members, gid)
        orderings[gid] = ordering
        s, _ = _allReduceSteps(topo, ordering, 0, count, DIRECTION.UNI, 0, 1, HALF.WHOLE)
        steps += s

    schedule = Schedule.fromSteps(steps, topo, "group", count)
    schedule.groupOrderings = orderings
    printLog("Group all-reduce over %d groups: %d rounds" % (len(byGroup), schedule.roundCount), verbosityHigh)
    return schedule


# --------------------------------- executor ---------------------------------


def execute(schedule, state):
    """
    Apply a schedule to a copy of state. Every step of a round reads what its
    sender held when the round started.
    """
    if state.nodeCount != schedule.topology.nodeCount:
        raise InvalidArgument(
            "state has %d nodes, schedule topology has %d" % (state.nodeCount, schedule.topology.nodeCount)
        )
    buffers = state.buffers.copy()
    nodes, count = buffers.shape

    for rnd in schedule.rounds:
        snapshot = []
        for step in rnd:
            if not (0 <= step.lo < step.hi <= count):
                raise ScheduleCorrupt("step %s addresses chunk [%d, %d) outside [0, %d)" % (step, step.lo, step.hi, count))
            if not (0 <= step.sender < nodes and 0 <= step.receiver < nodes):
                raise ScheduleCorrupt("step %s names a node outside the topology" % (step,))
            snapshot.append(buffers[step.sender, step.lo:step.hi].copy())
        for step, data in zip(rnd, snapshot):
            if step.op == STEP_OP.REDUCE_ADD:
                buffers[step.receiver, step.lo:step.hi] += data
            else:
                buffers[step.receiver, step.lo:step.hi] = data

    return ClusterState(buffers)


# -------------------------------- validation --------------------------------


class ValidationReport:
    def __init__(self):
        self.nonPhysicalSteps = []
        self.contendedLinkRounds = 0
        self.contentionByRound = {}  # round -> number of links carrying more than one step
        self.dimensionViolations = []

    @property
    def ok(self):
        return not self.nonPhysicalSteps and self.contendedLinkRounds == 0 and not self.dimensionViolations

    def summary(self):
        return "non_physical_steps %d contended_link_rounds %d dimension_violations %d" % (
            len(self.nonPhysicalSteps),
            self.contendedLinkRounds,
            len(self.dimensionViolations),
        )


def validateSchedule(schedule, topo=None):
    topo = topo if topo is not None else schedule.topology
    report = ValidationReport()
    checkDims = schedule.algorithm in ("torus2d", "mesh2d")

    for idx, rnd in enumerate(schedule.rounds):
        usage = {}
        for step in rnd:
            link = step.link
            if link is None or not topo.hasLink(link.src, link.dst) or (link.src, link.dst) != (step.sender, step.receiver):
                link = topo.linkFor(step.sender, step.receiver)
            if link is None:
                report.nonPhysicalSteps.append(step)
                continue
            usage[link] = usage.get(link, 0) + 1

            if checkDims and step.half in (HALF.A, HALF.B):
                expected = 0 if step.half == HALF.A else 1
                if step.phase == 2:
                    expected = 1 - expected
                if link.dim != expected:
                    report.dimensionViolations.append(step)

        contended = sum(1 for used in usage.values() if used > 1)
        if contended:
            report.contentionByRound[idx] = contended
            report.contendedLinkRounds += contended

    printLog("Validated %r: %s" % (schedule, report.summary()), verbosityLow if not report.ok else verbosityHigh)
    return report
