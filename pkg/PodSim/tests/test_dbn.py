#!/usr/bin/env python3
# -*- coding: utf-8 -*-
import os
import sys
import unittest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.realpath(__file__))))  # PodSim directory

import numpy as np
import numpy.testing as npt

from errors import InvalidArgument
from interconnect.topology import buildTopology
from batchnorm.dbn import (
    ActivationBatch,
    GroupStats,
    BNParams,
    GroupAssignment,
    localMoments,
    combineMoments,
    bnForward,
    effectiveBnBatch,
    distributedBn,
    concatOracle,
    localBn,
)


def randomBatches(replicas, perReplica, channels, seed=0):
    rng = np.random.default_rng(seed)
    return [ActivationBatch(rng.normal(2.0, 3.0, (perReplica, channels)), r) for r in range(replicas)]


class TestMoments(unittest.TestCase):
    def test_local_moments(self):
        stats = localMoments(ActivationBatch([[1.0], [3.0]]))
        self.assertEqual(stats.count, 2)
        npt.assert_array_equal(stats.sum, [4.0])
        npt.assert_array_equal(stats.sumSq, [10.0])

    def test_combine_two_batches(self):
        stats = combineMoments([localMoments([[1.0], [3.0]]), localMoments([[5.0], [7.0]])])
        npt.assert_allclose(stats.mean, [4.0])
        npt.assert_allclose(stats.variance, [5.0])

    def test_combine_single_is_identity(self):
        stats = localMoments([[1.0, 2.0], [4.0, 8.0]])
        combined = combineMoments([stats])
        self.assertEqual(combined.count, stats.count)
        npt.assert_array_equal(combined.sum, stats.sum)
        npt.assert_array_equal(combined.sumSq, stats.sumSq)

    def test_combine_is_order_independent(self):
        parts = [localMoments(b) for b in randomBatches(5, 7, 3, seed=4)]
        a = combineMoments(parts)
        b = combineMoments(reversed(parts))
        npt.assert_allclose(a.mean, b.mean, rtol=1e-14)
        npt.assert_allclose(a.variance, b.variance, rtol=1e-12)

    def test_combine_matches_two_pass(self):
        batches = randomBatches(8, 8, 8, seed=1)
        stacked = np.concatenate([b.values for b in batches])
        stats = combineMoments(localMoments(b) for b in batches)
        npt.assert_allclose(stats.mean, stacked.mean(axis=0), rtol=1e-12)
        npt.assert_allclose(stats.variance, stacked.var(axis=0), rtol=1e-12)

    def test_combine_errors(self):
        with self.assertRaises(InvalidArgument):
            combineMoments([])
        with self.assertRaises(InvalidArgument):
            combineMoments([localMoments([[1.0, 2.0]]), localMoments([[1.0]])])

    def test_empty_batch_rejected(self):
        with self.assertRaises(InvalidArgument):
            ActivationBatch(np.zeros((0, 4)))

    def test_payload_layout(self):
        stats = localMoments([[1.0, 2.0], [3.0, 4.0]])
        payload = stats.toPayload()
        npt.assert_array_equal(payload, [2.0, 4.0, 6.0, 10.0, 20.0])
        back = GroupStats.fromPayload(payload, 2)
        npt.assert_array_equal(back.sum, stats.sum)
        with self.assertRaises(InvalidArgument):
            GroupStats.fromPayload(payload, 3)


class TestBnForward(unittest.TestCase):
    def test_normalizes(self):
        batch = ActivationBatch([[1.0], [3.0], [5.0], [7.0]])
        out = bnForward(batch, localMoments(batch), BNParams.identity(1, epsilon=1e-12))
        self.assertAlmostEqual(out.mean(), 0.0, places=12)
        self.assertAlmostEqual(out.var(), 1.0, places=9)

    def test_scale_and_shift(self):
        batch = ActivationBatch([[1.0], [3.0], [5.0], [7.0]])
        stats = localMoments(batch)
        plain = bnForward(batch, stats, BNParams.identity(1, epsilon=1e-12))
        shifted = bnForward(batch, stats, BNParams([2.0], [1.0], 1e-12))
        npt.assert_allclose(shifted, 2.0 * plain + 1.0, rtol=1e-12)

    def test_constant_batch_gives_shift(self):
        batch = ActivationBatch(np.full((6, 2), 3.5))
        out = bnForward(batch, localMoments(batch), BNParams([1.0, 2.0], [0.25, -1.0]))
        npt.assert_allclose(out, np.tile([0.25, -1.0], (6, 1)), atol=1e-9)

    def test_affine_equivariance(self):
        params = BNParams.identity(4, epsilon=1e-12)
        batch = randomBatches(1, 32, 4, seed=6)[0]
        moved = ActivationBatch(batch.values * 1e3 + 5.0)
        npt.assert_allclose(
            bnForward(moved, localMoments(moved), params),
            bnForward(batch, localMoments(batch), params),
            atol=1e-6,
        )

    def test_epsilon_must_be_positive(self):
        with self.assertRaises(InvalidArgument):
            BNParams([1.0], [0.0], 0.0)

    def test_channel_mismatch(self):
        batch = ActivationBatch([[1.0, 2.0]])
        with self.assertRaises(InvalidArgument):
            bnForward(batch, localMoments(batch), BNParams.identity(3))


class TestGroupAssignment(unittest.TestCase):
    def test_groups(self):
        assignment = GroupAssignment(8, 4)
        self.assertEqual(assignment.groupCount, 2)
        self.assertEqual(assignment.groups(), {0: [0, 1, 2, 3], 1: [4, 5, 6, 7]})
        self.assertEqual(assignment.groupOf(5), 1)

    def test_group_size_must_divide(self):
        with self.assertRaises(InvalidArgument):
            GroupAssignment(8, 3)

    def test_effective_batch(self):
        self.assertEqual(effectiveBnBatch(16, 4), 64)
        self.assertEqual(effectiveBnBatch(16, 1), 16)
        with self.assertRaises(InvalidArgument):
            effectiveBnBatch(0, 4)


class TestDistributedBn(unittest.TestCase):
    def setUp(self):
        self.topo = buildTopology([2, 4], [True, True])
        self.batches = randomBatches(8, 16, 8, seed=2)
        self.params = BNParams(np.linspace(0.5, 2.0, 8), np.linspace(-1.0, 1.0, 8))

    def test_groups_of_four_match_concatenation(self):
        assignment = GroupAssignment(8, 4)
        result = distributedBn(self.batches, assignment, self.params, self.topo)
        oracle = concatOracle(self.batches, assignment, self.params)
        for got, want in zip(result.outputs, oracle):
            npt.assert_allclose(got, want, atol=1e-10)
        self.assertEqual(result.groupStats[0].count, effectiveBnBatch(16, 4))

    def test_group_of_one_is_local(self):
        result = distributedBn(self.batches, GroupAssignment(8, 1), self.params, self.topo)
        for got, want in zip(result.outputs, localBn(self.batches, self.params)):
            npt.assert_allclose(got, want, atol=1e-12)
        self.assertEqual(result.schedule.roundCount, 0)

    def test_single_group_is_global(self):
        assignment = GroupAssignment(8, 8)
        result = distributedBn(self.batches, assignment, self.params, self.topo)
        stacked = np.concatenate([b.values for b in self.batches])
        globalStats = localMoments(stacked)
        for batch, got in zip(self.batches, result.outputs):
            npt.assert_allclose(got, bnForward(batch, globalStats, self.params), atol=1e-12)

    def test_every_group_size(self):
        for size in (1, 2, 4, 8):
            assignment = GroupAssignment(8, size)
            result = distributedBn(self.batches, assignment, self.params, self.topo)
            oracle = concatOracle(self.batches, assignment, self.params)
            error = max(np.max(np.abs(g - w)) for g, w in zip(result.outputs, oracle))
            self.assertLessEqual(error, 1e-10, msg=size)

    def test_random_trials(self):
        rng = np.random.default_rng(42)
        for trial in range(100):
            replicas = int(rng.choice([1, 2, 4, 8, 16]))
            channels = int(rng.integers(1, 33))
            perReplica = int(rng.integers(1, 65))
            size = int(rng.choice([g for g in (1, 2, 4, 8, replicas) if replicas % g == 0]))
            topo = buildTopology([replicas], [True])
            batches = randomBatches(replicas, perReplica, channels, seed=trial)
            params = BNParams(rng.uniform(0.5, 2.0, channels), rng.uniform(-1.0, 1.0, channels))

            assignment = GroupAssignment(replicas, size)
            result = distributedBn(batches, assignment, params, topo)
            for got, want in zip(result.outputs, concatOracle(batches, assignment, params)):
                npt.assert_allclose(got, want, atol=1e-10, err_msg="trial %d" % trial)

    def test_topology_must_match_replicas(self):
        with self.assertRaises(InvalidArgument):
            distributedBn(self.batches, GroupAssignment(8, 4), self.params, buildTopology([4, 4], True))

    def test_batch_count_must_match(self):
        with self.assertRaises(InvalidArgument):
            distributedBn(self.batches[:6], GroupAssignment(8, 4), self.params, self.topo)

    def test_disconnected_group(self):
        topo = buildTopology([6, 6], [False, False])
        batches = randomBatches(36, 2, 2, seed=3)
        with self.assertRaises(InvalidArgument) as ctx:
            distributedBn(batches, GroupAssignment(36, 4), BNParams.identity(2), topo)
        self.assertEqual(ctx.exception.groupId, 1)


if __name__ == "__main__":
    unittest.main()
