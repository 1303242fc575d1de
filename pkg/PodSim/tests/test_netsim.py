#!/usr/bin/env python3
# -*- coding: utf-8 -*-
import math
import os
import sys
import unittest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.realpath(__file__))))  # PodSim directory

from errors import InvalidArgument, UnsupportedAlgorithm
from interconnect.topology import buildTopology
from interconnect.dataExchange import CommStep, Schedule, STEP_OP, DIRECTION
from interconnect.collectives import allReduce1d, allReduce2d
from interconnect.netsim import (
    ALGORITHM,
    CostModel,
    simulate,
    closedFormTime,
    spanRounds,
    fitLogLogSlope,
    sweepTopology,
    sweepPoint,
    sweepChipCounts,
    SweepRow,
)
from sweepWorker import runSweep

COST = CostModel(alpha=1e-6, beta=1e9, elementSizeBytes=4)


class TestCostModel(unittest.TestCase):
    def test_message_time(self):
        self.assertAlmostEqual(COST.messageTime(1e6), 1e-6 + 1e-3)

    def test_rejects_bad_parameters(self):
        with self.assertRaises(InvalidArgument):
            CostModel(alpha=-1.0)
        with self.assertRaises(InvalidArgument):
            CostModel(beta=0.0)

    def test_from_dict(self):
        cost = CostModel.fromDict({"alpha": 0.0, "beta": 2e9})
        self.assertEqual(cost.alpha, 0.0)
        self.assertEqual(cost.beta, 2e9)
        self.assertEqual(cost.elementSizeBytes, 4)

    def test_algorithm_parse(self):
        self.assertEqual(ALGORITHM.parse("Torus2d"), ALGORITHM.TORUS2D)
        with self.assertRaises(UnsupportedAlgorithm):
            ALGORITHM.parse("butterfly")


class TestSimulate(unittest.TestCase):
    def test_four_node_ring_megabyte_chunks(self):
        topo = buildTopology([4], [True])
        schedule = allReduce1d(topo, 1000000)  # 1 MB sub-chunks
        res = simulate(schedule, topo, COST)
        self.assertAlmostEqual(res.completionTime, 6 * (1e-6 + 1e-3), delta=1e-12)
        self.assertEqual(res.criticalPathRounds, 6)
        self.assertEqual(res.contendedLinkRounds, 0)

    def test_empty_schedule_takes_no_time(self):
        topo = buildTopology([1, 1])
        res = simulate(allReduce1d(topo, 8), topo, COST)
        self.assertEqual(res.completionTime, 0.0)
        self.assertEqual(res.spanHops, 0)

    def test_contended_link_serializes(self):
        topo = buildTopology([2], [False])
        link = topo.linkFor(0, 1)
        steps = [
            CommStep(0, 1, 0, 250, STEP_OP.REDUCE_ADD, 0, link=link),
            CommStep(0, 1, 250, 500, STEP_OP.REDUCE_ADD, 0, link=link),
        ]
        res = simulate(Schedule.fromSteps(steps, topo, "manual", 500), topo, COST)
        self.assertAlmostEqual(res.completionTime, 2 * (1e-6 + 1000 / 1e9), delta=1e-15)
        self.assertEqual(res.contendedLinkRounds, 1)
        self.assertEqual(res.maxLinkBytes, 2000)

    def test_step_without_link_is_rejected(self):
        topo = buildTopology([4, 4], [True, True])
        steps = [CommStep(0, 5, 0, 1, STEP_OP.COPY, 0)]
        with self.assertRaises(InvalidArgument):
            simulate(Schedule.fromSteps(steps, topo, "manual", 1), topo, COST)

    def test_phase_time_is_max_of_halves(self):
        # rows finish after 2 rounds, columns after 6: phase time follows the slower half
        topo = buildTopology([2, 4], [True, True])
        schedule = allReduce2d(topo, 1600, DIRECTION.BI)
        res = simulate(schedule, topo, COST)
        expected = closedFormTime(ALGORITHM.TORUS2D, (2, 4), 1600 * 4, COST, bidirectional=True)
        self.assertAlmostEqual(res.completionTime, expected, delta=1e-9 * expected)

        perHalfSum = 2 * (1e-6 + 800 / 1e9) + 6 * (1e-6 + 400 / 1e9)
        self.assertLess(sum(res.roundTimes[:6]), perHalfSum)

    def test_link_bytes_match_schedule(self):
        topo = buildTopology([4, 4], True)
        for schedule in (allReduce1d(topo, 800), allReduce2d(topo, 800, DIRECTION.BI)):
            result = simulate(schedule, cost=COST)
            self.assertEqual(result.linkBytes, schedule.bytesPerLink())
            self.assertEqual(result.totalBytes, int(schedule.bytesSent().sum()))

    def test_simulated_bandwidth_ratio(self):
        # alpha = 0: two-dimensional bidirectional over one-dimensional is n / (2 (n + 1))
        cost = CostModel(alpha=0.0, beta=1e9)
        for n in (4, 8, 16):
            topo = buildTopology([n, n], True)
            count = 16 * n * n
            oneD = simulate(allReduce1d(topo, count, DIRECTION.UNI), cost=cost).completionTime
            twoD = simulate(allReduce2d(topo, count, DIRECTION.BI), cost=cost).completionTime
            self.assertAlmostEqual(twoD / oneD, n / (2.0 * (n + 1)), msg=n)

    def test_span_hops(self):
        topo = buildTopology([4, 4], [True, True])
        self.assertEqual(simulate(allReduce1d(topo, 64), topo, COST).spanHops, 30)
        self.assertEqual(simulate(allReduce2d(topo, 64, DIRECTION.BI), topo, COST).spanHops, 12)

    def test_monotone_in_payload_and_alpha(self):
        topo = buildTopology([4, 4], [True, True])
        small = simulate(allReduce2d(topo, 256), topo, COST).completionTime
        large = simulate(allReduce2d(topo, 4096), topo, COST).completionTime
        self.assertLess(small, large)
        slow = simulate(allReduce2d(topo, 256), topo, CostModel(alpha=1e-5)).completionTime
        self.assertLess(small, slow)


class TestClosedFormAgreement(unittest.TestCase):
    def test_ring1d(self):
        for chips in (4, 9, 16, 64, 256):
            topo = sweepTopology(ALGORITHM.RING1D, chips)
            count = 8 * chips
            res = simulate(allReduce1d(topo, count), topo, COST)
            expected = closedFormTime(ALGORITHM.RING1D, chips, count * 4, COST)
            self.assertAlmostEqual(res.completionTime, expected, delta=1e-9 * expected, msg=chips)
            self.assertEqual(res.contendedLinkRounds, 0)

    def test_torus2d_bidirectional(self):
        for n in (2, 3, 4, 8, 16):
            topo = buildTopology([n, n], [True, True])
            count = 4 * n * 3
            res = simulate(allReduce2d(topo, count, DIRECTION.BI), topo, COST)
            expected = closedFormTime(ALGORITHM.TORUS2D, n * n, count * 4, COST, bidirectional=True)
            self.assertAlmostEqual(res.completionTime, expected, delta=1e-9 * expected, msg=n)
            self.assertEqual(res.criticalPathRounds, spanRounds(ALGORITHM.TORUS2D, n * n))

    def test_mesh2d(self):
        for n in (2, 4, 8):
            topo = buildTopology([n, n], [False, False])
            count = 2 * n * 5
            res = simulate(allReduce2d(topo, count), topo, COST)
            expected = closedFormTime(ALGORITHM.MESH2D, n * n, count * 4, COST)
            self.assertAlmostEqual(res.completionTime, expected, delta=1e-9 * expected, msg=n)
            self.assertEqual(res.contendedLinkRounds, 0)


class TestClosedForm(unittest.TestCase):
    def test_latency_bound_rounds(self):
        cost = CostModel(alpha=1e-6, beta=1e30)
        ring = closedFormTime(ALGORITHM.RING1D, 256, 0, cost)
        torus = closedFormTime(ALGORITHM.TORUS2D, 256, 0, cost)
        self.assertAlmostEqual(ring, 510e-6)
        self.assertAlmostEqual(torus, 60e-6)
        self.assertAlmostEqual(ring / torus, 8.5)

    def test_single_chip(self):
        self.assertEqual(closedFormTime(ALGORITHM.RING1D, 1, 1e6, COST), 0.0)
        self.assertEqual(closedFormTime(ALGORITHM.TORUS2D, 1, 1e6, COST), 0.0)

    def test_span_ratio_grows_with_side(self):
        for n in (4, 8, 16):
            ratio = spanRounds(ALGORITHM.RING1D, n * n) / spanRounds(ALGORITHM.TORUS2D, n * n)
            self.assertAlmostEqual(ratio, (n + 1) / 2.0)

    def test_bandwidth_ratio(self):
        # exact ratio at alpha = 0 is n / (2 (n + 1))
        cost = CostModel(alpha=0.0, beta=1e9)
        for n in (4, 8, 16):
            twoD = closedFormTime(ALGORITHM.TORUS2D, n * n, 1e8, cost, bidirectional=True)
            oneD = closedFormTime(ALGORITHM.RING1D, n * n, 1e8, cost)
            self.assertAlmostEqual(twoD / oneD, n / (2.0 * (n + 1)))
        self.assertTrue(0.45 <= twoD / oneD <= 0.55)

    def test_torus_beats_mesh(self):
        self.assertLess(
            closedFormTime(ALGORITHM.TORUS2D, 256, 1e8, COST, bidirectional=True),
            closedFormTime(ALGORITHM.MESH2D, 256, 1e8, COST),
        )

    def test_rejects_non_square(self):
        with self.assertRaises(InvalidArgument):
            closedFormTime(ALGORITHM.TORUS2D, 32, 1e6, COST)

    def test_log_log_slope(self):
        self.assertAlmostEqual(fitLogLogSlope([1, 2, 4, 8], [1, 4, 16, 64]), 2.0)
        with self.assertRaises(InvalidArgument):
            fitLogLogSlope([1], [1])


class TestSweep(unittest.TestCase):
    def test_latency_regime_slopes(self):
        rows = sweepChipCounts(["ring1d", "torus2d"], [16, 64, 256], 4096, COST)
        byAlgorithm = {}
        for row in rows:
            byAlgorithm.setdefault(row.algorithm, []).append(row)
        ring = byAlgorithm["ring1d"]
        torus = byAlgorithm["torus2d"]
        ringSlope = fitLogLogSlope([r.chips for r in ring], [r.timeSeconds for r in ring])
        torusSlope = fitLogLogSlope([r.chips for r in torus], [r.timeSeconds for r in torus])
        self.assertTrue(0.9 <= ringSlope <= 1.1, msg=ringSlope)
        self.assertTrue(0.4 <= torusSlope <= 0.6, msg=torusSlope)

        # the mesh variant is added at the largest count
        mesh = byAlgorithm["mesh2d"]
        self.assertEqual([r.chips for r in mesh], [256])
        self.assertLess(torus[-1].timeSeconds, mesh[0].timeSeconds)

    def test_rounds_column(self):
        rows = sweepChipCounts(["ring1d", "torus2d"], [16], 4096, COST)
        self.assertEqual([r.rounds for r in rows[:2]], [30, 12])
        self.assertEqual(rows[0].topology, "4x4+wrap")

    def test_non_square_count_is_skipped(self):
        row = sweepPoint("torus2d", 32, 4096, COST)
        self.assertTrue(row.skipped)
        self.assertTrue(math.isnan(row.timeSeconds))
        ring = sweepPoint("ring1d", 32, 4096, COST)
        self.assertEqual(ring.topology, "32+wrap")
        self.assertEqual(ring.rounds, 62)

    def test_single_chip(self):
        row = sweepPoint("ring1d", 1, 4096, COST)
        self.assertEqual(row.timeSeconds, 0.0)
        self.assertEqual(row.rounds, 0)

    def test_row_layout(self):
        row = sweepPoint("torus2d", 16, 4096, COST)
        self.assertEqual(len(row.values()), len(SweepRow.HEADER))
        self.assertEqual(SweepRow.HEADER[0], "algorithm")

    def test_parallel_sweep_matches_serial(self):
        serial = sweepChipCounts(["ring1d", "mesh2d"], [4, 16], 4096, COST, jobs=1)
        parallel = sweepChipCounts(["ring1d", "mesh2d"], [4, 16], 4096, COST, jobs=3)
        self.assertEqual([r.values() for r in serial], [r.values() for r in parallel])

    def test_worker_errors_reach_the_caller(self):
        def fail(point):
            raise InvalidArgument("point %s" % point)

        with self.assertRaises(InvalidArgument):
            runSweep([1, 2, 3], fail, jobs=2)


if __name__ == "__main__":
    unittest.main()
