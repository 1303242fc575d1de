#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
CSV tables written by the command line. The first line is a comment naming the
command and the time of the run, the rest is identical for identical inputs.
"""
import csv
import datetime
import math
import os
import sys

from verbosity import makePrintLog, verbosityMedium

FILE_VERBOSITY = verbosityMedium  # verbosity of this file
printLog = makePrintLog("csvReport", FILE_VERBOSITY)

FLOAT_FORMAT = "%.9g"


def formatValue(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return FLOAT_FORMAT % value
    if value is None:
        return ""
    return str(value)


def writeCsv(path, header, rows, command, timestamp=True):
    """path '-' writes to stdout. Returns the path written."""
    if path == "-":
        _write(sys.stdout, header, rows, command, timestamp)
        return path

    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", newline="") as fh:
        _write(fh, header, rows, command, timestamp)
    printLog("Wrote %d rows to %s" % (len(rows), path))
    return path


def _write(fh, header, rows, command, timestamp):
    if timestamp:
        fh.write("# podSim %s %s\n" % (command, datetime.datetime.now().isoformat(timespec="seconds")))
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([formatValue(v) for v in row])


def readCsv(path):
    """Returns (header, rows as dicts), comment lines skipped."""
    with open(path, newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    reader = csv.DictReader(lines)
    rows = list(reader)
    return list(reader.fieldnames or []), rows
