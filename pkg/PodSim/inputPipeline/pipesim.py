#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Discrete-event model of the host input pipeline feeding one accelerator:

    reader -> readQ -> parse/decode workers -> doneQ -> batcher -> prefetchQ -> device

Queues are bounded simpy Stores. With prefetch depth 0 the reader may only start a
batch when the device asks for one, so host and device never overlap.
"""
from dataclasses import dataclass, field, replace

import numpy as np
import simpy

from errors import InvalidArgument
from verbosity import makePrintLog, printWarning, verbosityLow, verbosityMedium, verbosityHigh
from inputPipeline.dataset import generateDataset, cropWindow, shardOf
from sweepWorker import runSweep

FILE_VERBOSITY = verbosityMedium  # verbosity of this file
printLog = makePrintLog("pipesim", FILE_VERBOSITY)

STAGES = ("read", "decode", "batch", "device")
DEFAULT_SIM_DURATION = 1e6  # seconds, long enough for every shipped configuration to drain
DEFAULT_WINDOW = 1000  # images per throughput window


@dataclass(frozen=True)
class StageProfile:
    readSeek: float = 0.0
    diskBandwidth: float = float("inf")  # bytes per second
    memoryCopy: float = 0.0  # per cached image
    parseFixed: float = 0.0
    parsePerByte: float = 0.0
    decodePerPixel: float = 0.0
    cropPerPixel: float = 0.0
    fusedHeader: float = 0.0  # header parse, paid by every decode
    batchPerItem: float = 0.0
    deviceStep: float = 0.0  # per batch

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not value >= 0:
                raise InvalidArgument("stage cost %s must be >= 0, got %s" % (name, value))
        if self.diskBandwidth <= 0:
            raise InvalidArgument("disk bandwidth must be > 0")

    @classmethod
    def fromDict(cls, values):
        known = {k: float(v) for k, v in values.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    def readTime(self, image, cached=False):
        if cached:
            return self.memoryCopy
        return self.readSeek + image.encodedBytes / self.diskBandwidth

    def parseTime(self, image):
        return self.parseFixed + self.parsePerByte * image.encodedBytes

    def decodeFullTime(self, image, window):
        """Decode every pixel, then copy the crop window out."""
        return self.fusedHeader + self.decodePerPixel * image.pixels + self.cropPerPixel * window.pixels

    def decodeFusedTime(self, window):
        return self.fusedHeader + self.decodePerPixel * window.pixels

    def workerTime(self, image, window, fused):
        decode = self.decodeFusedTime(window) if fused else self.decodeFullTime(image, window)
        return self.parseTime(image) + decode


@dataclass(frozen=True)
class PipelineConfig:
    cache: bool = False
    prefetchDepth: int = 0  # batches, 0 = serialized handoff
    fusedJpeg: bool = False
    parallelWorkers: int = 1
    shardCount: int = 1
    hostId: int = 0
    memoryBudgetBytes: float = 64e9
    batchSize: int = 128
    epochs: int = 2
    seed: int = 0
    window: int = DEFAULT_WINDOW
    label: str = "custom"

    def __post_init__(self):
        if self.prefetchDepth < 0:
            raise InvalidArgument("prefetch depth must be >= 0")
        if self.parallelWorkers < 1:
            raise InvalidArgument("parallel workers must be >= 1")
        if self.batchSize < 1 or self.epochs < 1 or self.window < 1:
            raise InvalidArgument("batch size, epochs and window must be >= 1")
        if self.shardCount < 1 or not 0 <= self.hostId < self.shardCount:
            raise InvalidArgument("host id %d outside %d shards" % (self.hostId, self.shardCount))
        if self.memoryBudgetBytes < 0:
            raise InvalidArgument("memory budget must be >= 0")

    def withFlags(self, **flags):
        return replace(self, **flags)


@dataclass
class ThroughputReport:
    label: str
    config: PipelineConfig
    meanIps: float
    q25Ips: float
    medianIps: float
    q75Ips: float
    windowRates: list = field(default_factory=list)
    utilization: dict = field(default_factory=dict)  # stage -> [0, 1]
    bottleneckStage: str = ""
    cacheHitRate: float = 0.0
    cacheWarning: bool = False
    imagesRead: int = 0
    imagesDelivered: int = 0
    epochsCompleted: int = 0
    simulatedSeconds: float = 0.0

    HEADER = (
        "config_label",
        "cache",
        "prefetch_depth",
        "fused",
        "workers",
        "mean_ips",
        "q25_ips",
        "q75_ips",
        "bottleneck_stage",
        "cache_hit_rate",
    )

    def values(self):
        c = self.config
        return [
            self.label,
            c.cache,
            c.prefetchDepth,
            c.fusedJpeg,
            c.parallelWorkers,
            self.meanIps,
            self.q25Ips,
            self.q75Ips,
            self.bottleneckStage,
            self.cacheHitRate,
        ]


class _Item:
    __slots__ = ("seq", "epoch", "image", "window")

    def __init__(self, seq, epoch, image, window):
        self.seq = seq
        self.epoch = epoch
        self.image = image
        self.window = window


class cPipelineSimulator:
    def __init__(self, dataset, config, profile):
        if not dataset:
            raise InvalidArgument("dataset is empty")
        self.config = config
        self.profile = profile
        self.shard = shardOf(dataset, config.hostId, config.shardCount)
        if not self.shard:
            raise InvalidArgument("host %d has no images in its shard" % config.hostId)

        self.cached = set()
        self.cacheWarning = False
        if config.cache:
            used = 0
            for image in self.shard:
                if used + image.encodedBytes > config.memoryBudgetBytes:
                    self.cacheWarning = True
                    break
                used += image.encodedBytes
                self.cached.add(image.index)
            if self.cacheWarning:
                printWarning(
                    "pipesim",
                    "memory budget %.3g B holds %d of %d shard images, cache partially disabled"
                    % (config.memoryBudgetBytes, len(self.cached), len(self.shard)),
                )

    def Run(self, simDuration=DEFAULT_SIM_DURATION):
        if not simDuration > 0:
            raise InvalidArgument("simulation duration must be positive")
        cfg = self.config
        profile = self.profile
        workers = cfg.parallelWorkers
        env = simpy.Environment()
        rng = np.random.default_rng(cfg.seed)

        readQ = simpy.Store(env, capacity=workers)
        doneQ = simpy.Store(env, capacity=workers)
        prefetchQ = simpy.Store(env, capacity=max(1, cfg.prefetchDepth))
        tokens = simpy.Store(env) if cfg.prefetchDepth == 0 else None

        busy = dict.fromkeys(STAGES, 0.0)
        counters = {"read": 0, "hits": 0}
        deliveries = []  # delivery time per image, in delivery order

        def reader():
            seq = 0
            allowance = 0  # images the device asked for (serialized mode)
            for epoch in range(cfg.epochs):
                for image in self.shard:
                    if tokens is not None and allowance == 0:
                        yield tokens.get()
                        allowance = cfg.batchSize
                    hit = cfg.cache and epoch > 0 and image.index in self.cached
                    t = profile.readTime(image, hit)
                    busy["read"] += t
                    yield env.timeout(t)
                    counters["read"] += 1
                    counters["hits"] += 1 if hit else 0
                    yield readQ.put(_Item(seq, epoch, image, cropWindow(image, rng)))
                    seq += 1
                    allowance -= 1
            for _ in range(workers):
                yield readQ.put(None)

        def worker():
            while True:
                item = yield readQ.get()
                if item is None:
                    yield doneQ.put(None)
                    return
                t = profile.workerTime(item.image, item.window, cfg.fusedJpeg)
                busy["decode"] += t
                yield env.timeout(t)
                yield doneQ.put(item)

        def batcher():
            batch = []
            finished = 0
            while True:
                item = yield doneQ.get()
                if item is None:
                    finished += 1
                    if finished == workers:
                        if batch:
                            yield prefetchQ.put(batch)
                        yield prefetchQ.put(None)
                        return
                    continue
                busy["batch"] += profile.batchPerItem
                yield env.timeout(profile.batchPerItem)
                batch.append(item)
                if len(batch) == cfg.batchSize:
                    yield prefetchQ.put(batch)
                    batch = []

        def device():
            while True:
                if tokens is not None:
                    yield tokens.put(1)
                batch = yield prefetchQ.get()
                if batch is None:
                    return
                busy["device"] += profile.deviceStep
                yield env.timeout(profile.deviceStep)
                for item in batch:
                    deliveries.append(env.now)

        env.process(reader())
        for _ in range(workers):
            env.process(worker())
        env.process(batcher())
        feeding = env.process(device())
        env.run(until=env.any_of([feeding, env.timeout(simDuration)]))

        report = self._report(env.now, busy, counters, deliveries)
        printLog(
            "%s: %.1f images/s (q25 %.1f, q75 %.1f), bottleneck %s"
            % (cfg.label, report.meanIps, report.q25Ips, report.q75Ips, report.bottleneckStage),
            verbosityMedium,
        )
        return report

    def _report(self, elapsed, busy, counters, deliveries):
        cfg = self.config
        times = np.array(deliveries, dtype=np.float64)
        delivered = len(times)

        # steady state starts at the first batch boundary after one epoch of images
        start, startTime = 0, 0.0
        if cfg.epochs > 1:
            boundary = -(-len(self.shard) // cfg.batchSize) * cfg.batchSize
            if boundary < delivered:
                start, startTime = boundary, times[boundary - 1]
        steady = times[start:]

        rates = []
        if len(steady):
            w = cfg.window
            if len(steady) < w:
                span = steady[-1] - startTime
                if span > 0:
                    rates.append(len(steady) / span)
            else:
                previous = startTime
                for k in range(len(steady) // w):
                    end = steady[(k + 1) * w - 1]
                    if end > previous:
                        rates.append(w / (end - previous))
                    previous = end

        span = steady[-1] - startTime if len(steady) else 0.0
        meanIps = len(steady) / span if span > 0 else 0.0
        if rates:
            q25, median, q75 = (float(v) for v in np.percentile(rates, [25, 50, 75]))
        else:
            q25 = median = q75 = meanIps

        utilization = {}
        for stage in STAGES:
            lanes = cfg.parallelWorkers if stage == "decode" else 1
            utilization[stage] = min(1.0, busy[stage] / (lanes * elapsed)) if elapsed > 0 else 0.0
        bottleneck = max(STAGES, key=lambda s: utilization[s])

        epochsCompleted = delivered // len(self.shard) if self.shard else 0
        return ThroughputReport(
            label=cfg.label,
            config=cfg,
            meanIps=float(meanIps),
            q25Ips=q25,
            medianIps=median,
            q75Ips=q75,
            windowRates=[float(r) for r in rates],
            utilization=utilization,
            bottleneckStage=bottleneck,
            cacheHitRate=counters["hits"] / counters["read"] if counters["read"] else 0.0,
            cacheWarning=self.cacheWarning,
            imagesRead=counters["read"],
            imagesDelivered=delivered,
            epochsCompleted=min(epochsCompleted, cfg.epochs),
            simulatedSeconds=float(elapsed),
        )


def runPipeline(dataset, config, profile, simDuration=DEFAULT_SIM_DURATION):
    return cPipelineSimulator(dataset, config, profile).Run(simDuration)


# ------------------------------ experiment tables ----------------------------

OFF_FLAGS = {"cache": False, "prefetchDepth": 0, "fusedJpeg": False, "parallelWorkers": 1}
DEFAULT_ON_FLAGS = {"cache": True, "prefetchDepth": 8, "fusedJpeg": True, "parallelWorkers": 16}

# label -> flag name, in table order
OPTIMIZATIONS = (("cache", "cache"), ("prefetch", "prefetchDepth"), ("jpeg", "fusedJpeg"), ("parallel", "parallelWorkers"))


def additionsAblationsConfigs(baseConfig=None, onFlags=None):
    baseConfig = baseConfig if baseConfig is not None else PipelineConfig()
    onFlags = dict(DEFAULT_ON_FLAGS, **(onFlags or {}))

    configs = [baseConfig.withFlags(label="baseline", **OFF_FLAGS)]
    for name, flag in OPTIMIZATIONS:
        configs.append(baseConfig.withFlags(label="+" + name, **dict(OFF_FLAGS, **{flag: onFlags[flag]})))
    configs.append(baseConfig.withFlags(label="all-on", **onFlags))
    for name, flag in OPTIMIZATIONS:
        configs.append(baseConfig.withFlags(label="-" + name, **dict(onFlags, **{flag: OFF_FLAGS[flag]})))
    return configs


def _runConfigs(configs, dataset, profile, simDuration, jobs):
    return runSweep(configs, lambda cfg: runPipeline(dataset, cfg, profile, simDuration), jobs)


def additionsAblations(profile, dataset=None, baseConfig=None, onFlags=None, simDuration=DEFAULT_SIM_DURATION, jobs=1):
    """
    baseline, +cache, +prefetch, +jpeg, +parallel, all-on,
    -cache, -prefetch, -jpeg, -parallel
    """
    baseConfig = baseConfig if baseConfig is not None else PipelineConfig()
    if dataset is None:
        dataset = generateDataset(4000, baseConfig.seed, baseConfig.shardCount)
    configs = additionsAblationsConfigs(baseConfig, onFlags)
    printLog("Running %d addition/ablation configurations" % len(configs), verbosityLow)
    return _runConfigs(configs, dataset, profile, simDuration, jobs)


def workerSweep(profile, dataset, baseConfig=None, onFlags=None, workers=(1, 2, 4, 8, 16, 32), simDuration=DEFAULT_SIM_DURATION, jobs=1):
    """Every other optimization on, parallel workers varied."""
    baseConfig = baseConfig if baseConfig is not None else PipelineConfig()
    onFlags = dict(DEFAULT_ON_FLAGS, **(onFlags or {}))
    configs = [baseConfig.withFlags(label="workers=%d" % w, **dict(onFlags, parallelWorkers=w)) for w in workers]
    printLog("Running worker sweep over %s" % (list(workers),), verbosityHigh)
    return _runConfigs(configs, dataset, profile, simDuration, jobs)
