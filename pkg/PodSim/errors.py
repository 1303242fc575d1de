#!/usr/bin/env python3
# -*- coding: utf-8 -*-


class PodSimError(Exception):
    pass


class InvalidArgument(PodSimError, ValueError):
    def __init__(self, message, groupId=None):
        PodSimError.__init__(self, message)
        self.groupId = groupId


class UnsupportedAlgorithm(InvalidArgument):
    pass


class ScheduleCorrupt(PodSimError, RuntimeError):
    pass


class ConfigError(PodSimError):
    pass
