"""IPv4 prefixes, source/destination regions, and an area-based quad tree.

A region is the rectangle spanned by a (source prefix, destination prefix)
pair.  Two prefixes either nest or are disjoint, so two regions are disjoint,
equal, nested, or cross (each one is narrower in a different dimension).

The tree stores each region at the node whose square is given by the first
``min(src.length, dst.length)`` bits of both prefixes.  Inside a node, filters
are kept in a binary trie over the remaining bits of their more specific
dimension.
"""

from __future__ import annotations

import enum
import ipaddress
from dataclasses import dataclass
from typing import Any, Iterator

WIDTH = 32
_FULL = (1 << WIDTH) - 1


def _mask(length: int) -> int:
    return (_FULL << (WIDTH - length)) & _FULL if length else 0


@dataclass(frozen=True, order=True)
class Prefix:
    bits: int
    length: int

    def __post_init__(self):
        if not 0 <= self.length <= WIDTH:
            raise ValueError(f"prefix length out of range: {self.length}")
        if self.bits & ~_mask(self.length) & _FULL:
            raise ValueError(f"host bits set in {self.bits:#x}/{self.length}")

    @classmethod
    def parse(cls, text: str) -> "Prefix":
        if text in ("*", "any"):
            return WILDCARD
        net = ipaddress.IPv4Network(text, strict=True)
        return cls(int(net.network_address), net.prefixlen)

    @classmethod
    def host(cls, addr: str | int) -> "Prefix":
        value = int(ipaddress.IPv4Address(addr))
        return cls(value, WIDTH)

    def __str__(self) -> str:
        if self.length == 0:
            return "*"
        return f"{ipaddress.IPv4Address(self.bits)}/{self.length}"

    def __repr__(self) -> str:
        return f"Prefix({self})"

    @property
    def size(self) -> int:
        return 1 << (WIDTH - self.length)

    def contains(self, other: "Prefix") -> bool:
        """Inclusive containment: ``other`` lies inside ``self``."""
        return other.length >= self.length and (other.bits & _mask(self.length)) == self.bits

    def contains_addr(self, addr: int) -> bool:
        return (addr & _mask(self.length)) == self.bits

    def overlaps(self, other: "Prefix") -> bool:
        return self.contains(other) or other.contains(self)

    def truncate(self, length: int) -> "Prefix":
        length = min(length, self.length)
        return Prefix(self.bits & _mask(length), length)

    def bit(self, i: int) -> int:
        """The i-th most significant bit (0-based)."""
        return (self.bits >> (WIDTH - 1 - i)) & 1


WILDCARD = Prefix(0, 0)


class Overlap(enum.Enum):
    DISJOINT = "disjoint"
    EQUAL = "equal"
    A_CONTAINS_B = "aContainsB"
    B_CONTAINS_A = "bContainsA"
    CROSS = "cross"


@dataclass(frozen=True, order=True)
class Region:
    src: Prefix
    dst: Prefix

    @classmethod
    def parse(cls, src: str, dst: str) -> "Region":
        return cls(Prefix.parse(src), Prefix.parse(dst))

    def __str__(self) -> str:
        return f"<{self.src}, {self.dst}>"

    @property
    def area(self) -> int:
        return self.src.size * self.dst.size

    @property
    def specificity(self) -> int:
        return self.src.length + self.dst.length

    def contains(self, other: "Region") -> bool:
        return self.src.contains(other.src) and self.dst.contains(other.dst)

    def contains_point(self, src_addr: int, dst_addr: int) -> bool:
        return self.src.contains_addr(src_addr) and self.dst.contains_addr(dst_addr)

    def overlaps(self, other: "Region") -> bool:
        return self.src.overlaps(other.src) and self.dst.overlaps(other.dst)

    def intersect(self, other: "Region") -> "Region | None":
        if not self.overlaps(other):
            return None
        src = self.src if self.src.length >= other.src.length else other.src
        dst = self.dst if self.dst.length >= other.dst.length else other.dst
        return Region(src, dst)


EVERYWHERE = Region(WILDCARD, WILDCARD)


def classify_overlap(a: Region, b: Region) -> Overlap:
    if not a.overlaps(b):
        return Overlap.DISJOINT
    if a == b:
        return Overlap.EQUAL
    if a.contains(b):
        return Overlap.A_CONTAINS_B
    if b.contains(a):
        return Overlap.B_CONTAINS_A
    return Overlap.CROSS


class _Trie:
    """Binary trie over bit strings; each trie node holds at most one filter."""

    __slots__ = ("children", "item")

    def __init__(self):
        self.children: list[_Trie | None] = [None, None]
        self.item: tuple[Region, Any] | None = None

    def empty(self) -> bool:
        return self.item is None and self.children[0] is None and self.children[1] is None


class _Node:
    __slots__ = ("level", "children", "by_dst", "by_src", "count")

    def __init__(self, level: int):
        self.level = level
        self.children: dict[int, _Node] = {}
        # filters whose src spans the square (src.length == level); keyed by dst bits
        self.by_dst = _Trie()
        # filters whose dst spans the square and src is narrower; keyed by src bits
        self.by_src = _Trie()
        self.count = 0


class AQT:
    """Area-based quad tree mapping regions to values."""

    def __init__(self):
        self._root = _Node(0)
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def __contains__(self, region: Region) -> bool:
        return self.get(region, _MISSING) is not _MISSING

    def _collection(self, node: _Node, region: Region) -> tuple[_Trie, Prefix]:
        if region.src.length <= region.dst.length:
            return node.by_dst, region.dst
        return node.by_src, region.src

    def _find_node(self, region: Region, create: bool) -> list[_Node] | None:
        level = min(region.src.length, region.dst.length)
        path = [self._root]
        node = self._root
        for i in range(level):
            code = (region.src.bit(i) << 1) | region.dst.bit(i)
            child = node.children.get(code)
            if child is None:
                if not create:
                    return None
                child = node.children[code] = _Node(i + 1)
            node = child
            path.append(node)
        return path

    def get(self, region: Region, default=None):
        path = self._find_node(region, create=False)
        if path is None:
            return default
        node = path[-1]
        trie, key = self._collection(node, region)
        for i in range(node.level, key.length):
            trie = trie.children[key.bit(i)]
            if trie is None:
                return default
        if trie.item is None:
            return default
        return trie.item[1]

    def insert(self, region: Region, value) -> None:
        path = self._find_node(region, create=True)
        node = path[-1]
        trie, key = self._collection(node, region)
        for i in range(node.level, key.length):
            b = key.bit(i)
            nxt = trie.children[b]
            if nxt is None:
                nxt = trie.children[b] = _Trie()
            trie = nxt
        if trie.item is None:
            self._size += 1
            for n in path:
                n.count += 1
        trie.item = (region, value)

    put = insert

    def remove(self, region: Region) -> bool:
        path = self._find_node(region, create=False)
        if path is None:
            return False
        node = path[-1]
        trie, key = self._collection(node, region)
        tpath = [trie]
        for i in range(node.level, key.length):
            trie = trie.children[key.bit(i)]
            if trie is None:
                return False
            tpath.append(trie)
        if trie.item is None:
            return False
        trie.item = None
        for i in range(len(tpath) - 1, 0, -1):
            if tpath[i].empty():
                tpath[i - 1].children[key.bit(node.level + i - 1)] = None
            else:
                break
        self._size -= 1
        for n in path:
            n.count -= 1
        for i in range(len(path) - 1, 0, -1):
            if path[i].count == 0:
                parent = path[i - 1]
                code = (region.src.bit(i - 1) << 1) | region.dst.bit(i - 1)
                del parent.children[code]
            else:
                break
        return True

    def query(self, probe: Region) -> list[tuple[Region, Any]]:
        """All stored (region, value) pairs overlapping ``probe``."""
        out: list[tuple[Region, Any]] = []
        stack = [(self._root, 0, 0)]
        while stack:
            node, sbits, dbits = stack.pop()
            level = node.level
            # the node square overlaps the probe, so the spanning dimension overlaps
            _scan(node.by_dst, level, probe.dst, out)
            _scan(node.by_src, level, probe.src, out)
            shift = WIDTH - 1 - level
            for code, child in node.children.items():
                cs = Prefix(sbits | ((code >> 1) << shift), level + 1)
                cd = Prefix(dbits | ((code & 1) << shift), level + 1)
                if cs.overlaps(probe.src) and cd.overlaps(probe.dst):
                    stack.append((child, cs.bits, cd.bits))
        return out

    def items(self) -> Iterator[tuple[Region, Any]]:
        yield from self.query(EVERYWHERE)

    def check_placement(self) -> None:
        """Walk the tree and assert every stored filter sits where it belongs."""
        stack = [(self._root, 0, 0)]
        seen = 0
        while stack:
            node, sbits, dbits = stack.pop()
            level = node.level
            for trie, spans_src in ((node.by_dst, True), (node.by_src, False)):
                for region, _ in _walk(trie):
                    seen += 1
                    assert min(region.src.length, region.dst.length) == level
                    assert region.src.truncate(level).bits == sbits
                    assert region.dst.truncate(level).bits == dbits
                    if spans_src:
                        assert region.src.length <= region.dst.length
                    else:
                        assert region.src.length > region.dst.length
            for code, child in node.children.items():
                shift = WIDTH - 1 - level
                stack.append((child, sbits | ((code >> 1) << shift), dbits | ((code & 1) << shift)))
        assert seen == self._size


def _walk(trie: _Trie) -> Iterator[tuple[Region, Any]]:
    stack = [trie]
    while stack:
        t = stack.pop()
        if t.item is not None:
            yield t.item
        stack.extend(c for c in t.children if c is not None)


def _scan(trie: _Trie, level: int, probe: Prefix, out: list) -> None:
    # filters on the probe's bit path are supersets of it; everything below is a subset
    for i in range(level, probe.length):
        if trie.item is not None:
            out.append(trie.item)
        trie = trie.children[probe.bit(i)]
        if trie is None:
            return
    out.extend(_walk(trie))


_MISSING = object()
