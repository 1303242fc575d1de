#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Verbosity levels and the printLog helper shared by every module.

Each file keeps its own FILE_VERBOSITY and builds its printLog with makePrintLog,
messages go through the logging package so that stdout stays free for CSV output.
"""

import logging
import sys

verbosityLow = 0
verbosityMedium = 1
verbosityHigh = 2

_LEVELS = {
    verbosityLow: logging.INFO,
    verbosityMedium: logging.DEBUG,
    verbosityHigh: logging.DEBUG,
}

# ceiling applied on top of FILE_VERBOSITY, set by the command line (-v, -vv, -q)
_globalVerbosity = verbosityLow
_handlerInstalled = False


def setGlobalVerbosity(value):
    global _globalVerbosity
    _globalVerbosity = value


def installHandler(quiet=False):
    """Attach one stderr handler to the podSim logger tree (idempotent)."""
    global _handlerInstalled
    root = logging.getLogger("podSim")
    if not _handlerInstalled:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))
        root.addHandler(handler)
        _handlerInstalled = True
    root.setLevel(logging.WARNING if quiet else logging.DEBUG)


def makePrintLog(name, fileVerbosity):
    logger = logging.getLogger("podSim." + name)

    def printLog(txt, verbosity=verbosityLow):
        if min(fileVerbosity, max(_globalVerbosity, verbosityLow)) >= verbosity:
            logger.log(_LEVELS.get(verbosity, logging.DEBUG), txt)

    return printLog


def printWarning(name, txt):
    logging.getLogger("podSim." + name).warning(txt)
