#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
podSim command line.

    python3 podSim.py allreduce verify --topo 4x4+wrap --algo 2d --direction bi
    python3 podSim.py allreduce sweep --counts 16,64,256 --profile latency --svg
    python3 podSim.py dbn sweep --group-sizes 1,2,4,8
    python3 podSim.py pipeline bench --images 4000
    python3 podSim.py report plot results/allreduce_sweep.csv

Exit codes: 0 ok, 1 usage or configuration error, 2 verification failed, 3 file error.
"""
import argparse
import os
import sys

import numpy as np

from errors import PodSimError, InvalidArgument, ConfigError
from verbosity import (
    makePrintLog,
    printWarning,
    installHandler,
    setGlobalVerbosity,
    verbosityMedium,
    verbosityHigh,
)
from settings import cSettings
from csvReport import writeCsv, readCsv
from interconnect.topology import parseTopologySpec
from interconnect.dataExchange import DIRECTION, randomClusterState, sumOracle, relativeError, scheduleToText
from interconnect.collectives import allReduce1d, allReduce2d, execute, validateSchedule
from interconnect.netsim import CostModel, SweepRow, sweepChipCounts, simulate
from batchnorm.dbn import ActivationBatch, BNParams, GroupAssignment, distributedBn, concatOracle, effectiveBnBatch
from inputPipeline.dataset import generateDataset
from inputPipeline.pipesim import (
    PipelineConfig,
    StageProfile,
    ThroughputReport,
    OFF_FLAGS,
    additionsAblations,
    workerSweep,
    runPipeline,
)
from sweepWorker import runSweep

FILE_VERBOSITY = verbosityHigh  # verbosity of this file
printLog = makePrintLog("podSim", FILE_VERBOSITY)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VERIFY_FAILED = 2
EXIT_IO = 3

DBN_HEADER = (
    "group_size",
    "per_replica_batch",
    "effective_bn_batch",
    "max_abs_error_vs_concat_oracle",
    "moment_reduce_rounds",
    "moment_reduce_seconds",
)


class UsageError(Exception):
    pass


class cArgumentParser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage, podSim reserves 2 for failed verification."""

    def error(self, message):
        raise UsageError("%s: error: %s" % (self.prog, message))


def _intList(text):
    try:
        values = [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise InvalidArgument("expected a comma separated list of integers, got '%s'" % text)
    if not values:
        raise InvalidArgument("empty list '%s'" % text)
    return values


def _strList(text):
    return [v.strip() for v in str(text).split(",") if v.strip()]


def _listSetting(value):
    return ",".join(str(v) for v in value) if isinstance(value, (list, tuple)) else value


def _outputPath(args, settings, name, suffix=".csv"):
    if args.out:
        return args.out
    return os.path.join(settings.outputDir(args.output_dir), name + suffix)


def _svgPath(args, settings, csvPath, name):
    if not (args.svg or settings.getDefault("output", "svg")):
        return None
    if csvPath == "-":
        return os.path.join(settings.outputDir(args.output_dir), name + ".svg")
    return os.path.splitext(csvPath)[0] + ".svg"


def _costModel(args, settings, profileName):
    values = settings.profile("netsim", profileName)
    if getattr(args, "alpha", None) is not None:
        values["alpha"] = args.alpha
    if getattr(args, "beta", None) is not None:
        values["beta"] = args.beta
    payloadBytes = int(getattr(args, "payload_bytes", None) or values.get("payloadBytes", 0))
    return CostModel.fromDict(values), payloadBytes


# ---------------------------------- commands ----------------------------------


def cmdAllreduceVerify(args, settings):
    topo = parseTopologySpec(args.topo)
    direction = DIRECTION.parse(args.direction)
    count = int(args.payload)

    if args.algo == "1d":
        schedule = allReduce1d(topo, count, direction)
    else:
        schedule = allReduce2d(topo, count, direction)

    if args.dump_schedule:
        with open(args.dump_schedule, "w") as fh:
            fh.write(scheduleToText(schedule))
        printLog("Schedule written to " + args.dump_schedule, verbosityMedium)

    state = randomClusterState(topo.nodeCount, count, args.seed)
    oracle = sumOracle(state)
    result = execute(schedule, state)
    error = relativeError(result.buffers, oracle)
    report = validateSchedule(schedule, topo)
    passed = report.ok and error <= args.tolerance

    print("topology %s algorithm %s direction %s payload %d" % (topo.spec, schedule.algorithm, direction.value, count))
    print("rounds %d %s" % (schedule.roundCount, report.summary()))
    print("max_rel_err %.3e" % error)
    print("PASS" if passed else "FAIL")
    return EXIT_OK if passed else EXIT_VERIFY_FAILED


def cmdAllreduceSweep(args, settings):
    cost, payloadBytes = _costModel(args, settings, args.profile)
    counts = _intList(args.counts)
    algorithms = _strList(args.algos)
    rows = sweepChipCounts(algorithms, counts, payloadBytes, cost, args.jobs)
    path = writeCsv(_outputPath(args, settings, "allreduce_sweep"), SweepRow.HEADER, [r.values() for r in rows], "allreduce sweep", not args.no_timestamp)
    svg = _svgPath(args, settings, path, "allreduce_sweep")
    if svg:
        from charts import plotAllreduceSweep

        plotAllreduceSweep([dict(zip(SweepRow.HEADER, [str(v) for v in r.values()])) for r in rows], svg)
    return EXIT_OK


def _dbnBatches(replicas, perReplica, channels, seed):
    rng = np.random.default_rng(seed)
    shift = rng.uniform(-1.0, 1.0, channels)
    scale = rng.uniform(0.5, 2.0, channels)
    return [ActivationBatch(rng.standard_normal((perReplica, channels)) * scale + shift, r) for r in range(replicas)]


def cmdDbnSweep(args, settings):
    topo = parseTopologySpec(args.topo)
    cost, _ = _costModel(args, settings, args.profile)
    replicas = topo.nodeCount
    groupSizes = _intList(args.group_sizes)
    for g in groupSizes:
        if g < 1 or replicas % g:
            raise InvalidArgument("group size %d does not divide %d replicas" % (g, replicas))

    batches = _dbnBatches(replicas, args.per_replica, args.channels, args.seed)
    params = BNParams.identity(args.channels, args.epsilon)

    def point(g):
        assignment = GroupAssignment(replicas, g)
        result = distributedBn(batches, assignment, params, topo)
        oracle = concatOracle(batches, assignment, params)
        error = max(float(np.max(np.abs(out - ref))) for out, ref in zip(result.outputs, oracle))
        seconds = simulate(result.schedule, topo, cost).completionTime
        printLog("group size %d: error %.3g, %d rounds" % (g, error, result.schedule.roundCount), verbosityMedium)
        return [g, args.per_replica, effectiveBnBatch(args.per_replica, g), error, result.schedule.roundCount, seconds]

    rows = runSweep(groupSizes, point, args.jobs)
    path = writeCsv(_outputPath(args, settings, "dbn_sweep"), DBN_HEADER, rows, "dbn sweep", not args.no_timestamp)
    svg = _svgPath(args, settings, path, "dbn_sweep")
    if svg:
        from charts import plotDbnSweep

        plotDbnSweep([dict(zip(DBN_HEADER, [str(v) for v in row])) for row in rows], svg)

    worst = max(row[3] for row in rows)
    if worst > args.tolerance:
        printWarning("podSim", "distributed BN differs from the concatenated oracle by %.3g" % worst)
        return EXIT_VERIFY_FAILED
    return EXIT_OK


def _customFlags(args):
    flags = {}
    if args.cache is not None:
        flags["cache"] = args.cache
    if args.prefetch is not None:
        flags["prefetchDepth"] = args.prefetch
    if args.fused is not None:
        flags["fusedJpeg"] = args.fused
    if args.workers is not None:
        flags["parallelWorkers"] = args.workers
    return flags


def cmdPipelineBench(args, settings):
    section = settings.section("pipeline")
    profile = StageProfile.fromDict(settings.profile("pipeline", args.profile))
    onFlags = dict(section.get("flags", {}))
    base = PipelineConfig(
        batchSize=args.batch,
        epochs=args.epochs,
        shardCount=args.shards,
        hostId=args.host_id,
        memoryBudgetBytes=float(args.memory_budget),
        seed=args.seed,
        window=int(section.get("window", 1000)),
    )
    simDuration = float(section.get("simDuration", 1e6))
    dataset = generateDataset(args.images, args.seed, args.shards)

    reports = additionsAblations(profile, dataset, base, onFlags, simDuration, args.jobs)
    if not args.skip_worker_sweep:
        workers = _intList(_listSetting(section.get("workerSweep", [1, 2, 4, 8, 16, 32])))
        reports += workerSweep(profile, dataset, base, onFlags, workers, simDuration, args.jobs)

    custom = _customFlags(args)
    if custom:
        config = base.withFlags(label="custom", **dict(OFF_FLAGS, **custom))
        reports.append(runPipeline(dataset, config, profile, simDuration))

    for report in reports:
        if report.cacheWarning:
            printWarning("podSim", "%s: cache partially disabled by the memory budget" % report.label)

    path = writeCsv(
        _outputPath(args, settings, "pipeline_bench"),
        ThroughputReport.HEADER,
        [r.values() for r in reports],
        "pipeline bench",
        not args.no_timestamp,
    )
    svg = _svgPath(args, settings, path, "pipeline_bench")
    if svg:
        from charts import plotPipelineBench

        plotPipelineBench([{"config_label": r.label, "mean_ips": r.meanIps, "q25_ips": r.q25Ips, "q75_ips": r.q75Ips} for r in reports], svg)
    return EXIT_OK


def cmdReportPlot(args, settings):
    import charts

    header, rows = readCsv(args.csv)
    fields = set(header)
    out = args.out or os.path.splitext(args.csv)[0] + ".svg"
    if {"algorithm", "chips", "time_seconds"} <= fields:
        charts.plotAllreduceSweep(rows, out)
    elif {"config_label", "mean_ips", "q25_ips", "q75_ips"} <= fields:
        charts.plotPipelineBench(rows, out)
    elif {"group_size", "max_abs_error_vs_concat_oracle"} <= fields:
        charts.plotDbnSweep(rows, out)
    else:
        raise InvalidArgument("%s: unknown table, header %s" % (args.csv, ",".join(header)))
    return EXIT_OK


# ----------------------------------- parser -----------------------------------


def _onOff(text):
    value = str(text).lower()
    if value in ("on", "true", "1", "yes"):
        return True
    if value in ("off", "false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError("expected on or off, got '%s'" % text)


def buildParser(settings):
    d = settings.getDefault
    parser = cArgumentParser(prog="podSim", description="Pod-scale training toolkit: collectives, distributed BN, input pipeline")
    parser.add_argument("--config", help="YAML file overriding defaults.yaml")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (-vv for everything)")
    parser.add_argument("-q", "--quiet", action="store_true", help="only warnings and errors")
    parser.add_argument("--jobs", type=int, default=1, help="threads for independent sweep points")
    parser.add_argument("--no-timestamp", action="store_true", help="omit the timestamp comment line of CSV files")
    parser.add_argument("--output-dir", help="default directory of output files (env %s)" % "PODSIM_OUTPUT_DIR")
    commands = parser.add_subparsers(dest="command", metavar="command")
    commands.required = True

    # allreduce
    allreduce = commands.add_parser("allreduce", help="all-reduce schedules")
    allreduceCmds = allreduce.add_subparsers(dest="action", metavar="action")
    allreduceCmds.required = True

    verify = allreduceCmds.add_parser("verify", help="execute a schedule on random buffers against a summation oracle")
    verify.add_argument("--topo", default=d("allreduce", "topology"), help="e.g. 4x4+wrap, 8x8, 16+wrap")
    verify.add_argument("--algo", choices=("1d", "2d"), default=str(d("allreduce", "algorithm")))
    verify.add_argument("--direction", choices=("uni", "bi"), default=d("allreduce", "direction"))
    verify.add_argument("--payload", type=int, default=d("allreduce", "payload"), help="elements per node")
    verify.add_argument("--seed", type=int, default=d("allreduce", "seed"))
    verify.add_argument("--tolerance", type=float, default=float(d("allreduce", "tolerance")))
    verify.add_argument("--dump-schedule", help="write the schedule in text form to this file")
    verify.set_defaults(func=cmdAllreduceVerify)

    sweep = allreduceCmds.add_parser("sweep", help="simulated all-reduce time over chip counts")
    sweep.add_argument("--counts", default=_listSetting(d("allreduce", "chipCounts")))
    sweep.add_argument("--algos", default=_listSetting(d("allreduce", "algorithms")))
    sweep.add_argument("--profile", default=d("allreduce", "profile"), help="netsim cost profile")
    sweep.add_argument("--alpha", type=float, help="override the profile latency (s)")
    sweep.add_argument("--beta", type=float, help="override the profile link bandwidth (B/s)")
    sweep.add_argument("--payload-bytes", type=int, help="override the profile payload size")
    sweep.add_argument("--out", help="CSV path, - for stdout")
    sweep.add_argument("--svg", action="store_true", help="also draw a chart")
    sweep.set_defaults(func=cmdAllreduceSweep)

    # dbn
    dbn = commands.add_parser("dbn", help="distributed batch normalization")
    dbnCmds = dbn.add_subparsers(dest="action", metavar="action")
    dbnCmds.required = True
    dbnSweep = dbnCmds.add_parser("sweep", help="group-size sweep against the concatenated-batch oracle")
    dbnSweep.add_argument("--group-sizes", default=_listSetting(d("dbn", "groupSizes")))
    dbnSweep.add_argument("--per-replica", type=int, default=d("dbn", "perReplicaBatch"))
    dbnSweep.add_argument("--channels", type=int, default=d("dbn", "channels"))
    dbnSweep.add_argument("--topo", default=d("dbn", "topology"))
    dbnSweep.add_argument("--epsilon", type=float, default=float(d("dbn", "epsilon")))
    dbnSweep.add_argument("--seed", type=int, default=d("dbn", "seed"))
    dbnSweep.add_argument("--profile", default=d("dbn", "profile"), help="netsim cost profile of the moment reduction")
    dbnSweep.add_argument("--tolerance", type=float, default=1e-10)
    dbnSweep.add_argument("--out", help="CSV path, - for stdout")
    dbnSweep.add_argument("--svg", action="store_true")
    dbnSweep.set_defaults(func=cmdDbnSweep)

    # pipeline
    pipeline = commands.add_parser("pipeline", help="input pipeline simulation")
    pipelineCmds = pipeline.add_subparsers(dest="action", metavar="action")
    pipelineCmds.required = True
    bench = pipelineCmds.add_parser("bench", help="additions, ablations and worker sweep")
    bench.add_argument("--images", type=int, default=d("pipeline", "images"))
    bench.add_argument("--epochs", type=int, default=d("pipeline", "epochs"))
    bench.add_argument("--batch", type=int, default=d("pipeline", "batchSize"))
    bench.add_argument("--shards", type=int, default=d("pipeline", "shardCount"))
    bench.add_argument("--host-id", type=int, default=d("pipeline", "hostId"))
    bench.add_argument("--memory-budget", type=float, default=float(d("pipeline", "memoryBudgetBytes")))
    bench.add_argument("--seed", type=int, default=d("pipeline", "seed"))
    bench.add_argument("--profile", default=d("pipeline", "profile"))
    bench.add_argument("--cache", type=_onOff, help="on/off, adds a custom row")
    bench.add_argument("--prefetch", type=int, help="prefetch depth in batches, adds a custom row")
    bench.add_argument("--fused", type=_onOff, help="on/off, adds a custom row")
    bench.add_argument("--workers", type=int, help="parallel workers, adds a custom row")
    bench.add_argument("--skip-worker-sweep", action="store_true")
    bench.add_argument("--out", help="CSV path, - for stdout")
    bench.add_argument("--svg", action="store_true")
    bench.set_defaults(func=cmdPipelineBench)

    # report
    report = commands.add_parser("report", help="charts from CSV tables")
    reportCmds = report.add_subparsers(dest="action", metavar="action")
    reportCmds.required = True
    plot = reportCmds.add_parser("plot", help="draw the chart matching a CSV table")
    plot.add_argument("csv")
    plot.add_argument("--out", help="SVG path, defaults next to the CSV")
    plot.set_defaults(func=cmdReportPlot)

    return parser


def _preScan(argv):
    """--config has to be known before the parser, its values are the parser defaults."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    return known.config


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    installHandler()
    try:
        settings = cSettings(_preScan(argv))
        args = buildParser(settings).parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as e:
        print("podSim: configuration error: %s" % e, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return e.code if isinstance(e.code, int) else EXIT_OK

    setGlobalVerbosity(min(args.verbose, verbosityHigh))
    installHandler(quiet=args.quiet)
    printLog("Running %s %s" % (args.command, args.action), verbosityMedium)

    try:
        return args.func(args, settings)
    except (InvalidArgument, ConfigError) as e:
        print("podSim: %s" % e, file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print("podSim: %s" % e, file=sys.stderr)
        return EXIT_IO
    except PodSimError as e:
        print("podSim: %s" % e, file=sys.stderr)
        return EXIT_VERIFY_FAILED


if __name__ == "__main__":
    sys.exit(main())
