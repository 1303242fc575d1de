#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Batch normalization with statistics shared inside small groups of replicas.

Every replica computes (count, sum, sum of squares) per channel, the group sums
them with one all-reduce over the interconnect and each member normalizes its own
examples with the group mean and variance. The normalization batch is therefore
per-replica batch * group size, independent of the global batch.
"""
from dataclasses import dataclass

import numpy as np

from errors import InvalidArgument
from verbosity import makePrintLog, verbosityMedium, verbosityHigh
from interconnect.dataExchange import ClusterState
from interconnect.collectives import groupAllReduce, execute

FILE_VERBOSITY = verbosityMedium  # verbosity of this file
printLog = makePrintLog("dbn", FILE_VERBOSITY)

DEFAULT_EPSILON = 1e-5


def _asMatrix(values):
    values = np.array(values, dtype=np.float64)
    if values.ndim == 1:
        values = values.reshape(-1, 1)
    if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
        raise InvalidArgument("activation batch must be a non-empty [examples x channels] matrix")
    return values


@dataclass
class ActivationBatch:
    values: np.ndarray
    replicaId: int = 0

    def __post_init__(self):
        self.values = _asMatrix(self.values)

    @property
    def examples(self):
        return self.values.shape[0]

    @property
    def channels(self):
        return self.values.shape[1]


@dataclass
class GroupStats:
    count: float
    sum: np.ndarray
    sumSq: np.ndarray

    def __post_init__(self):
        self.sum = np.asarray(self.sum, dtype=np.float64)
        self.sumSq = np.asarray(self.sumSq, dtype=np.float64)
        if self.count <= 0:
            raise InvalidArgument("group statistics need a positive example count")

    @property
    def channels(self):
        return len(self.sum)

    @property
    def mean(self):
        return self.sum / self.count

    @property
    def variance(self):
        # population variance, E[x^2] - mean^2 can dip below zero by rounding
        mu = self.mean
        return np.maximum(self.sumSq / self.count - mu * mu, 0.0)

    def toPayload(self):
        """[count, sum..., sumSq...] the layout exchanged by the all-reduce."""
        return np.concatenate(([float(self.count)], self.sum, self.sumSq))

    @classmethod
    def fromPayload(cls, payload, channels):
        payload = np.asarray(payload, dtype=np.float64)
        if len(payload) != 2 * channels + 1:
            raise InvalidArgument("moment payload of length %d does not match %d channels" % (len(payload), channels))
        return cls(payload[0], payload[1 : channels + 1].copy(), payload[channels + 1 :].copy())


@dataclass
class BNParams:
    gamma: np.ndarray
    betaShift: np.ndarray
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=np.float64)
        self.betaShift = np.asarray(self.betaShift, dtype=np.float64)
        if not self.epsilon > 0:
            raise InvalidArgument("epsilon must be > 0, got %s" % self.epsilon)
        if self.gamma.shape != self.betaShift.shape:
            raise InvalidArgument("gamma and beta shift must have the same number of channels")

    @property
    def channels(self):
        return len(self.gamma)

    @classmethod
    def identity(cls, channels, epsilon=DEFAULT_EPSILON):
        return cls(np.ones(channels), np.zeros(channels), epsilon)


class GroupAssignment:
    """Replicas split into equal groups of contiguous ids: replica r is in group r // groupSize."""

    def __init__(self, replicaCount, groupSize):
        if replicaCount < 1 or groupSize < 1:
            raise InvalidArgument("replica count and group size must be >= 1")
        if replicaCount % groupSize != 0:
            raise InvalidArgument("group size %d does not divide %d replicas" % (groupSize, replicaCount))
        self.replicaCount = replicaCount
        self.groupSize = groupSize

    @property
    def groupCount(self):
        return self.replicaCount // self.groupSize

    def groupOf(self, replica):
        return replica // self.groupSize

    def nodeGroups(self):
        return [self.groupOf(r) for r in range(self.replicaCount)]

    def groups(self):
        return {g: list(range(g * self.groupSize, (g + 1) * self.groupSize)) for g in range(self.groupCount)}


def localMoments(batch):
    values = batch.values if isinstance(batch, ActivationBatch) else _asMatrix(batch)
    return GroupStats(float(values.shape[0]), values.sum(axis=0), (values * values).sum(axis=0))


def combineMoments(stats):
    stats = list(stats)
    if not stats:
        raise InvalidArgument("cannot combine an empty list of statistics")
    channels = stats[0].channels
    for s in stats:
        if s.channels != channels:
            raise InvalidArgument("channel mismatch: %d vs %d" % (s.channels, channels))
    count = sum(s.count for s in stats)
    total = np.sum([s.sum for s in stats], axis=0)
    totalSq = np.sum([s.sumSq for s in stats], axis=0)
    return GroupStats(count, total, totalSq)


def bnForward(batch, stats, params):
    values = batch.values if isinstance(batch, ActivationBatch) else _asMatrix(batch)
    if stats.channels != values.shape[1] or params.channels != values.shape[1]:
        raise InvalidArgument(
            "channel mismatch: batch %d, stats %d, params %d" % (values.shape[1], stats.channels, params.channels)
        )
    return params.gamma * (values - stats.mean) / np.sqrt(stats.variance + params.epsilon) + params.betaShift


def effectiveBnBatch(perReplica, groupSize):
    if perReplica < 1 or groupSize < 1:
        raise InvalidArgument("per-replica batch and group size must be >= 1")
    return perReplica * groupSize


@dataclass
class DistributedBnResult:
    outputs: list  # per replica, [examples x channels]
    groupStats: dict  # group id -> GroupStats
    schedule: object  # the moment all-reduce


def _checkBatches(batches, assignment):
    batches = [b if isinstance(b, ActivationBatch) else ActivationBatch(b, i) for i, b in enumerate(batches)]
    if len(batches) != assignment.replicaCount:
        raise InvalidArgument("%d batches for %d replicas" % (len(batches), assignment.replicaCount))
    channels = batches[0].channels
    for b in batches:
        if b.channels != channels:
            raise InvalidArgument("replica %d has %d channels, expected %d" % (b.replicaId, b.channels, channels))
    for gid, members in assignment.groups().items():
        shapes = {batches[r].values.shape for r in members}
        if len(shapes) != 1:
            raise InvalidArgument("replicas of group %d have different batch shapes" % gid, groupId=gid)
    return batches


def distributedBn(batches, assignment, params, topo):
    """
    Replica i lives on node i of topo. Moments are summed with a group all-reduce
    that is executed on the cluster state, so the result is what the interconnect
    would deliver.
    """
    batches = _checkBatches(batches, assignment)
    if topo.nodeCount != assignment.replicaCount:
        raise InvalidArgument("topology has %d nodes for %d replicas" % (topo.nodeCount, assignment.replicaCount))
    channels = batches[0].channels

    state = ClusterState(np.stack([localMoments(b).toPayload() for b in batches]))
    schedule = groupAllReduce(topo, assignment.nodeGroups(), state.elementCount)
    reduced = execute(schedule, state)

    groupStats = {}
    outputs = []
    for r, batch in enumerate(batches):
        stats = GroupStats.fromPayload(reduced.buffers[r], channels)
        groupStats.setdefault(assignment.groupOf(r), stats)
        outputs.append(bnForward(batch, stats, params))

    printLog(
        "Distributed BN: %d replicas, group size %d, %d moment rounds"
        % (assignment.replicaCount, assignment.groupSize, schedule.roundCount),
        verbosityHigh,
    )
    return DistributedBnResult(outputs, groupStats, schedule)


def concatOracle(batches, assignment, params):
    """Per-replica outputs of BN over the concatenation of each group's batches."""
    batches = _checkBatches(batches, assignment)
    outputs = [None] * len(batches)
    for gid, members in assignment.groups().items():
        stacked = np.concatenate([batches[r].values for r in members], axis=0)
        mu = stacked.mean(axis=0)
        var = ((stacked - mu) ** 2).mean(axis=0)  # two-pass
        for r in members:
            outputs[r] = params.gamma * (batches[r].values - mu) / np.sqrt(var + params.epsilon) + params.betaShift
        printLog("Oracle group %d: %d examples" % (gid, stacked.shape[0]), verbosityHigh)
    return outputs


def localBn(batches, params):
    """Every replica on its own, the group-size-1 baseline."""
    printLog("Local BN over %d replicas" % len(batches), verbosityHigh)
    return [bnForward(b, localMoments(b), params) for b in batches]
