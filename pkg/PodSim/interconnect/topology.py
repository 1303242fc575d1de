#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Chip interconnect of a pod: a 1-D or 2-D grid of nodes, optionally with
wrap-around links on each dimension (torus), otherwise a mesh.

Nodes are numbered row-major, node = i * cols + j for coordinate (i, j).
Dimension 0 is the vertical (Y) one, dimension 1 the horizontal (X) one.
Every neighbouring pair is joined by two directed links, one per direction.
"""

import re
from dataclasses import dataclass

import networkx as nx

from errors import InvalidArgument
from verbosity import makePrintLog, verbosityLow, verbosityMedium, verbosityHigh

FILE_VERBOSITY = verbosityMedium  # verbosity of this file
printLog = makePrintLog("topology", FILE_VERBOSITY)

PLUS = +1
MINUS = -1

_TOPO_SPEC_RE = re.compile(r"^\s*(\d+)(?:\s*x\s*(\d+))?\s*(\+\s*wrap)?\s*$", re.IGNORECASE)


@dataclass(frozen=True)
class LinkId:
    """Directed physical link. direction is PLUS when the coordinate grows (or wraps to 0)."""

    src: int
    dst: int
    dim: int
    direction: int

    def __str__(self):
        return "%d->%d/d%d%s" % (self.src, self.dst, self.dim, "+" if self.direction > 0 else "-")


class RingPath(tuple):
    """Ordered node sequence. closed tells if the hop last->first may also be used."""

    def __new__(cls, nodes, closed):
        obj = tuple.__new__(cls, nodes)
        obj.closed = bool(closed)
        return obj

    def __repr__(self):
        return "RingPath(%s, closed=%s)" % (list(self), self.closed)


class TorusTopology:
    def __init__(self, dims, wrap):
        self.dims = tuple(dims)
        self.wrap = tuple(wrap)
        self.nodeCount = 1
        for extent in self.dims:
            self.nodeCount *= extent

        self._links = []
        self._linksByPair = {}  # (src, dst) -> [LinkId,...]
        for node in range(self.nodeCount):
            for dim in range(len(self.dims)):
                for direction in (PLUS, MINUS):
                    dst = self.neighbor(node, dim, direction)
                    if dst is None:
                        continue
                    link = LinkId(node, dst, dim, direction)
                    self._links.append(link)
                    self._linksByPair.setdefault((node, dst), []).append(link)
        self._links = tuple(self._links)

        printLog("Built topology %s with %d links" % (self.spec, len(self._links)), verbosityHigh)

    @property
    def ndims(self):
        return len(self.dims)

    @property
    def rows(self):
        return self.dims[0] if self.ndims == 2 else 1

    @property
    def cols(self):
        return self.dims[-1]

    @property
    def spec(self):
        txt = "x".join(str(d) for d in self.dims)
        if any(self.wrap):
            txt += "+wrap"
        return txt

    def __repr__(self):
        return "TorusTopology(dims=%s, wrap=%s)" % (list(self.dims), list(self.wrap))

    def coord(self, node):
        if self.ndims == 1:
            return (node,)
        return divmod(node, self.dims[1])

    def nodeAt(self, coord):
        if self.ndims == 1:
            return coord[0]
        return coord[0] * self.dims[1] + coord[1]

    def neighbor(self, node, dim, direction):
        """Node reached from node along dim in direction, None at an unwrapped edge."""
        c = list(self.coord(node))
        extent = self.dims[dim]
        x = c[dim] + direction
        if 0 <= x < extent:
            c[dim] = x
        elif self.wrap[dim] and extent > 1:
            c[dim] = x % extent
        else:
            return None
        return self.nodeAt(c)

    def links(self):
        return self._links

    @property
    def linkCount(self):
        return len(self._links)

    def hasLink(self, src, dst):
        return (src, dst) in self._linksByPair

    def linksBetween(self, src, dst):
        return tuple(self._linksByPair.get((src, dst), ()))

    def linkFor(self, src, dst, forward=True):
        """
        Physical link used for a hop src->dst, None if the nodes are not neighbours.
        Extent-2 wrapped dimensions have two channels per ordered pair, forward
        traffic takes the PLUS one and backward traffic the MINUS one.
        """
        candidates = self._linksByPair.get((src, dst))
        if not candidates:
            return None
        if len(candidates) == 1:
            return candidates[0]
        wanted = PLUS if forward else MINUS
        for link in candidates:
            if link.direction == wanted:
                return link
        return candidates[0]

    def toGraph(self):
        g = nx.DiGraph()
        g.add_nodes_from(range(self.nodeCount))
        for link in self._links:
            g.add_edge(link.src, link.dst, dim=link.dim)
        return g


def expectedLinkCount(dims, wrap):
    """Sum over dimensions of 2 * slices * (extent - 1 + wrap)."""
    total = 0
    nodes = 1
    for extent in dims:
        nodes *= extent
    for extent, w in zip(dims, wrap):
        if extent <= 1:
            continue
        slices = nodes // extent
        total += 2 * slices * (extent - 1 + (1 if w else 0))
    return total


def buildTopology(dims, wrap=None):
    dims = list(dims) if not isinstance(dims, int) else [dims]
    if len(dims) not in (1, 2):
        raise InvalidArgument("topology must have 1 or 2 dimensions, got %d" % len(dims))
    for extent in dims:
        if int(extent) != extent or extent < 1:
            raise InvalidArgument("dimension extents must be positive integers, got %s" % (dims,))
    dims = [int(d) for d in dims]
    if wrap is None:
        wrap = [False] * len(dims)
    elif isinstance(wrap, bool):
        wrap = [wrap] * len(dims)
    wrap = [bool(w) for w in wrap]
    if len(wrap) != len(dims):
        raise InvalidArgument("wrap flags %s do not match dims %s" % (wrap, dims))
    return TorusTopology(dims, wrap)


def parseTopologySpec(text):
    """'16x16+wrap', '4x4' or '32+wrap' -> TorusTopology"""
    m = _TOPO_SPEC_RE.match(str(text))
    if m is None:
        raise InvalidArgument("cannot parse topology '%s', expected e.g. 4x4 or 16x16+wrap" % text)
    dims = [int(m.group(1))]
    if m.group(2) is not None:
        dims.append(int(m.group(2)))
    return buildTopology(dims, [m.group(3) is not None] * len(dims))


def formatTopologySpec(topo):
    return topo.spec


def ringsAlong(topo, dim):
    """One node sequence per slice orthogonal to dim, in increasing coordinate order."""
    if not 0 <= dim < topo.ndims:
        raise InvalidArgument("dimension %d out of range for %s" % (dim, topo.spec))
    closed = topo.dims[dim] == 1 or topo.wrap[dim]
    if topo.ndims == 1:
        return [RingPath(range(topo.nodeCount), closed)]

    rows, cols = topo.dims
    result = []
    if dim == 0:
        for j in range(cols):
            result.append(RingPath([i * cols + j for i in range(rows)], closed))
    else:
        for i in range(rows):
            result.append(RingPath([i * cols + j for j in range(cols)], closed))
    return result


# --------------------------- Hamiltonian embeddings ---------------------------


def isPath(topo, order):
    return all(topo.hasLink(a, b) for a, b in zip(order, order[1:]))


def closesRing(topo, order):
    """
    True when order can run as a ring. Two nodes only make a ring when they
    have two channels each way, otherwise both directions would share one link.
    """
    n = len(order)
    if n <= 1:
        return True
    if n == 2:
        a, b = order
        return len(topo.linksBetween(a, b)) >= 2 and len(topo.linksBetween(b, a)) >= 2
    return topo.hasLink(order[-1], order[0])


def snakeOrder(topo, rows, cols):
    order = []
    for idx, i in enumerate(rows):
        line = cols if idx % 2 == 0 else list(reversed(cols))
        order.extend(topo.nodeAt((i, j)) for j in line)
    return order


def combOrder(topo, rows, cols):
    """
    Snake over every column but the first, then climb back up the first column.
    Closes on odd row counts when the last row can jump back to the first column.
    """
    if len(rows) < 2 or len(cols) < 2:
        return None
    order = [topo.nodeAt((rows[0], cols[0]))]
    order.extend(snakeOrder(topo, rows, cols[1:]))
    order.extend(topo.nodeAt((i, cols[0])) for i in reversed(rows[1:]))
    return order


def transposedCombOrder(topo, rows, cols):
    if len(rows) < 2 or len(cols) < 2:
        return None
    order = [topo.nodeAt((rows[0], cols[0]))]
    for idx, j in enumerate(cols):
        line = rows[1:] if idx % 2 == 0 else list(reversed(rows[1:]))
        order.extend(topo.nodeAt((i, j)) for i in line)
    order.extend(topo.nodeAt((rows[0], j)) for j in reversed(cols[1:]))
    return order


def rectangleOrderings(topo, rows, cols):
    """Candidate Hamiltonian orderings of a rectangle of nodes, plain snake first."""
    candidates = [snakeOrder(topo, rows, cols)]
    for builder in (combOrder, transposedCombOrder):
        order = builder(topo, rows, cols)
        if order is not None:
            candidates.append(order)
    return candidates


def embed1dRing(topo):
    """
    Hamiltonian ordering of every node for a 1-D ring collective.
    Falls back to an open line (closed=False) when no circuit is found.
    """
    if topo.nodeCount == 1:
        return RingPath([0], True)

    if topo.ndims == 1:
        order = list(range(topo.nodeCount))
        return RingPath(order, closesRing(topo, order))

    rows = list(range(topo.dims[0]))
    cols = list(range(topo.dims[1]))
    candidates = rectangleOrderings(topo, rows, cols)
    for order in candidates:
        if isPath(topo, order) and closesRing(topo, order):
            printLog("1-D ring embedded on %s: %s" % (topo.spec, order), verbosityHigh)
            return RingPath(order, True)

    printLog("No Hamiltonian circuit found on %s, using an open snake" % topo.spec, verbosityLow)
    return RingPath(candidates[0], False)
