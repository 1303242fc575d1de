#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Configuration: defaults.yaml next to this file, overridden by the user's values file.
"""
import os

import yaml

from errors import ConfigError
from verbosity import makePrintLog, verbosityMedium, verbosityHigh

FILE_VERBOSITY = verbosityMedium  # verbosity of this file
printLog = makePrintLog("settings", FILE_VERBOSITY)

DEFAULTS_FILE = os.path.join(os.path.dirname(os.path.realpath(__file__)), "defaults.yaml")
USER_VALUES_FILE = "podSimValues.yaml"
OUTPUT_DIR_ENV = "PODSIM_OUTPUT_DIR"


def _loadYaml(path):
    try:
        with open(path, "r") as file:
            data = yaml.safe_load(file)
    except yaml.YAMLError as e:
        raise ConfigError("cannot parse %s: %s" % (path, e))
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("%s must contain a mapping of sections" % path)
    return data


def _deepMerge(base, override):
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deepMerge(merged[key], value)
        else:
            merged[key] = value
    return merged


class cSettings:
    def __init__(self, configPath=None):
        self.defaults = _loadYaml(DEFAULTS_FILE)

        if configPath is not None:
            if not os.path.exists(configPath):
                raise ConfigError("config file %s does not exist" % configPath)
            self.defaults = _deepMerge(self.defaults, _loadYaml(configPath))
            printLog("Loaded values from " + configPath, verbosityMedium)
        elif os.path.exists(USER_VALUES_FILE):
            # first run has no values file, the shipped defaults are enough
            self.defaults = _deepMerge(self.defaults, _loadYaml(USER_VALUES_FILE))
            printLog("Loaded values from " + USER_VALUES_FILE, verbosityMedium)

    def getDefault(self, section, key):
        try:
            return self.defaults[section][key]
        except (KeyError, TypeError) as e:
            raise ConfigError("can't load default value %s.%s: missing %s" % (section, key, e))

    def section(self, name):
        try:
            return dict(self.defaults[name])
        except (KeyError, TypeError):
            raise ConfigError("missing configuration section '%s'" % name)

    def profile(self, section, name):
        profiles = self.section(section).get("profiles", {})
        if name not in profiles:
            raise ConfigError("unknown %s profile '%s', known: %s" % (section, name, ", ".join(sorted(profiles))))
        printLog("Using %s profile %s" % (section, name), verbosityHigh)
        return dict(profiles[name])

    def outputDir(self, override=None):
        if override:
            return override
        env = os.environ.get(OUTPUT_DIR_ENV)
        if env:
            return env
        return self.getDefault("output", "dir")
