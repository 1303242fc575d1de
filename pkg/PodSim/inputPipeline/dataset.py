#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Synthetic image files standing in for an ImageNet-like training set, and the
random crop sampled for every image an epoch reads.
"""
import math
from dataclasses import dataclass

import numpy as np

from errors import InvalidArgument
from verbosity import makePrintLog, verbosityMedium, verbosityHigh

FILE_VERBOSITY = verbosityMedium  # verbosity of this file
printLog = makePrintLog("dataset", FILE_VERBOSITY)

MEDIAN_WIDTH = 500
MEDIAN_HEIGHT = 375
SIZE_SIGMA = 0.3  # log-space spread of each dimension
MIN_SIDE = 100
MAX_SIDE = 5000
BYTES_PER_PIXEL = 0.6
HEADER_BYTES = 1024

CROP_MIN_AREA = 0.08
CROP_MAX_AREA = 1.0
CROP_MIN_ASPECT = 3.0 / 4.0
CROP_MAX_ASPECT = 4.0 / 3.0
CROP_ATTEMPTS = 10


@dataclass(frozen=True)
class SyntheticImage:
    encodedBytes: int
    width: int
    height: int
    shardId: int = 0
    index: int = 0

    @property
    def pixels(self):
        return self.width * self.height


@dataclass(frozen=True)
class CropWindow:
    x: int
    y: int
    w: int
    h: int

    @property
    def pixels(self):
        return self.w * self.h


def expectedPixels():
    """Mean pixel count of the unclamped size distribution."""
    return MEDIAN_WIDTH * MEDIAN_HEIGHT * math.exp(SIZE_SIGMA**2)


def generateDataset(n, seed=0, shardCount=1):
    """n images, shard i % shardCount, identical for identical seeds."""
    if n < 1:
        raise InvalidArgument("dataset needs at least one image, got %d" % n)
    if shardCount < 1:
        raise InvalidArgument("shard count must be >= 1")
    rng = np.random.default_rng(seed)
    widths = np.clip(np.rint(rng.lognormal(math.log(MEDIAN_WIDTH), SIZE_SIGMA, n)), MIN_SIDE, MAX_SIDE).astype(np.int64)
    heights = np.clip(np.rint(rng.lognormal(math.log(MEDIAN_HEIGHT), SIZE_SIGMA, n)), MIN_SIDE, MAX_SIDE).astype(np.int64)
    encoded = np.maximum(HEADER_BYTES, np.rint(BYTES_PER_PIXEL * widths * heights)).astype(np.int64)

    dataset = [
        SyntheticImage(int(encoded[i]), int(widths[i]), int(heights[i]), i % shardCount, i) for i in range(n)
    ]
    printLog("Generated %d images, %.1f MB encoded" % (n, encoded.sum() / 1e6), verbosityHigh)
    return dataset


def shardOf(dataset, hostId, shardCount):
    return [img for img in dataset if img.index % shardCount == hostId]


def cropWindow(image, rng, attempts=CROP_ATTEMPTS):
    """
    Random-sized crop: area fraction uniform in [0.08, 1], aspect ratio log-uniform
    in [3/4, 4/3]. After the attempts run out, a centered crop of the whole image
    with its aspect ratio clamped into range.
    """
    area = image.width * image.height
    logLo, logHi = math.log(CROP_MIN_ASPECT), math.log(CROP_MAX_ASPECT)
    for _ in range(attempts):
        target = area * rng.uniform(CROP_MIN_AREA, CROP_MAX_AREA)
        aspect = math.exp(rng.uniform(logLo, logHi))
        w = int(round(math.sqrt(target * aspect)))
        h = int(round(math.sqrt(target / aspect)))
        if 0 < w <= image.width and 0 < h <= image.height:
            x = int(rng.integers(0, image.width - w + 1))
            y = int(rng.integers(0, image.height - h + 1))
            return CropWindow(x, y, w, h)

    ratio = image.width / image.height
    if ratio < CROP_MIN_ASPECT:
        w = image.width
        h = max(1, min(image.height, int(round(w / CROP_MIN_ASPECT))))
    elif ratio > CROP_MAX_ASPECT:
        h = image.height
        w = max(1, min(image.width, int(round(h * CROP_MAX_ASPECT))))
    else:
        w, h = image.width, image.height
    return CropWindow((image.width - w) // 2, (image.height - h) // 2, w, h)
