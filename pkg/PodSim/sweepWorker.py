#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Runs independent sweep points on a small pool of threads.
Results always come back in point order.
"""

import threading

from verbosity import makePrintLog, verbosityMedium, verbosityHigh

FILE_VERBOSITY = verbosityMedium  # verbosity of this file
printLog = makePrintLog("sweepWorker", FILE_VERBOSITY)


class cSweepThread(threading.Thread):
    def __init__(self, threadID, name, points, fn, results):
        threading.Thread.__init__(self)
        self.threadID = threadID
        self.name = name
        self.points = points  # [(index, point),...] handled by this thread
        self.fn = fn
        self.results = results  # shared list, every thread writes its own indices only
        self.error = None

    def run(self):
        printLog("Starting " + self.name, verbosityHigh)
        try:
            for idx, point in self.points:
                self.results[idx] = self.fn(point)
        except Exception as e:  # re-raised by runSweep in the calling thread
            self.error = e
        printLog("Exiting " + self.name, verbosityHigh)


def runSweep(points, fn, jobs=1):
    points = list(points)
    if jobs is None or jobs <= 1 or len(points) <= 1:
        return [fn(p) for p in points]

    jobs = min(jobs, len(points))
    results = [None] * len(points)
    threads = []
    for k in range(jobs):
        share = [(i, points[i]) for i in range(k, len(points), jobs)]
        threads.append(cSweepThread(k + 1, "SweepThread-%d" % (k + 1), share, fn, results))

    for t in threads:
        t.start()
    for t in threads:
        t.join()

    for t in threads:
        if t.error is not None:
            raise t.error
    return results
