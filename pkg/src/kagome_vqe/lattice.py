"""Kagome fragments: sites, coupling graphs and the reciprocal-space grid.

Positions are in units of the nearest-neighbour spacing. The underlying
triangular Bravais lattice of the kagome net then has lattice constant 2,
primitive vectors ``a1 = (2, 0)`` and ``a2 = (1, sqrt(3))``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import InvalidArgument

UNIT_TOL = 1e-9
BZ_TOL = 1e-9

BRAVAIS = np.array([[2.0, 0.0], [1.0, np.sqrt(3.0)]])
RECIPROCAL = 2.0 * np.pi * np.linalg.inv(BRAVAIS).T


@dataclass(frozen=True)
class Site:
    index: int
    position: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(x) for x in self.position))


@dataclass(frozen=True)
class Edge:
    i: int
    j: int
    coupling: float = 1.0

    def __post_init__(self):
        if self.i == self.j:
            raise InvalidArgument(f"self-loop edge on site {self.i}")
        if self.i > self.j:
            a, b = self.j, self.i
            object.__setattr__(self, "i", a)
            object.__setattr__(self, "j", b)

    @property
    def pair(self) -> tuple[int, int]:
        return (self.i, self.j)


@dataclass(frozen=True)
class LatticeFragment:
    name: str
    sites: tuple[Site, ...]
    edges: tuple[Edge, ...]

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(self.sites))
        object.__setattr__(self, "edges", tuple(self.edges))
        self.validate()

    def validate(self) -> None:
        n = len(self.sites)
        if n == 0:
            raise InvalidArgument("fragment has no sites")
        if [s.index for s in self.sites] != list(range(n)):
            raise InvalidArgument("site indices must be contiguous 0..N-1 in order")
        seen = set()
        for e in self.edges:
            if not (0 <= e.i < n and 0 <= e.j < n):
                raise InvalidArgument(f"edge {e.pair} references a missing site")
            if e.pair in seen:
                raise InvalidArgument(f"duplicate edge {e.pair}")
            if not e.coupling > 0:
                raise InvalidArgument(f"edge {e.pair} coupling must be > 0 (antiferromagnetic)")
            seen.add(e.pair)
            d = np.linalg.norm(self.positions[e.i] - self.positions[e.j])
            if abs(d - 1.0) > UNIT_TOL:
                raise InvalidArgument(f"edge {e.pair} has length {d:.12g}, expected 1")
        if n > 1 and not self._connected():
            raise InvalidArgument("coupling graph is not connected")

    @property
    def num_sites(self) -> int:
        return len(self.sites)

    @property
    def positions(self) -> np.ndarray:
        return np.array([s.position for s in self.sites], dtype=float)

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return [e.pair for e in self.edges]

    def neighbours(self) -> list[set[int]]:
        adj: list[set[int]] = [set() for _ in self.sites]
        for e in self.edges:
            adj[e.i].add(e.j)
            adj[e.j].add(e.i)
        return adj

    def degrees(self) -> list[int]:
        return [len(a) for a in self.neighbours()]

    def triangles(self) -> list[tuple[int, int, int]]:
        """All 3-cliques of the coupling graph, found by brute force."""
        edges = set(self.pairs)
        return [
            t
            for t in itertools.combinations(range(self.num_sites), 3)
            if {(t[0], t[1]), (t[0], t[2]), (t[1], t[2])} <= edges
        ]

    def _connected(self) -> bool:
        adj = self.neighbours()
        seen, stack = {0}, [0]
        while stack:
            for nb in adj[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        return len(seen) == self.num_sites

    def to_text(self) -> str:
        lines = [f"# name: {self.name}", "[sites]"]
        lines += [f"{s.index},{s.position[0]!r},{s.position[1]!r}" for s in self.sites]
        lines.append("[edges]")
        lines += [f"{e.i},{e.j},{float(e.coupling)!r}" for e in self.edges]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, name: str = "custom") -> "LatticeFragment":
        """Parse the ``[sites]`` / ``[edges]`` text format written by :meth:`to_text`."""
        section = None
        sites: list[Site] = []
        edges: list[Edge] = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if line.startswith("# name:"):
                name = line.split(":", 1)[1].strip() or name
                continue
            if not line or line.startswith("#"):
                continue
            if line in ("[sites]", "[edges]"):
                section = line[1:-1]
                continue
            fields = [f.strip() for f in line.split(",")]
            try:
                if section == "sites" and len(fields) == 3:
                    sites.append(Site(int(fields[0]), (float(fields[1]), float(fields[2]))))
                elif section == "edges" and len(fields) in (2, 3):
                    coupling = float(fields[2]) if len(fields) == 3 else 1.0
                    edges.append(Edge(int(fields[0]), int(fields[1]), coupling))
                else:
                    raise ValueError("unexpected field count or section")
            except ValueError as exc:
                raise InvalidArgument(f"line {lineno}: cannot parse {raw!r} ({exc})") from None
        return cls(name, tuple(sites), tuple(edges))


def load_fragment(path: str | Path) -> LatticeFragment:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InvalidArgument(f"cannot read fragment file {path}: {exc}") from None
    return LatticeFragment.from_text(text, name=path.stem)


def build_triangle() -> LatticeFragment:
    pos = [(0.0, 0.0), (1.0, 0.0), (0.5, np.sqrt(3.0) / 2.0)]
    sites = tuple(Site(k, p) for k, p in enumerate(pos))
    edges = (Edge(0, 1), Edge(1, 2), Edge(0, 2))
    return LatticeFragment("triangle", sites, edges)


def build_star() -> LatticeFragment:
    """Six corner-sharing triangles around a hexagon (the kagome star).

    Sites are numbered along the outer ring: even sites are hexagon corners
    at angle 60k on the unit circle, odd sites are the outer tips at angle
    60k + 30 and radius sqrt(3). Consecutive labels are always coupled, which
    puts both dimer coverings ``(0,1),(2,3),...`` and ``(1,2),...,(11,0)`` on
    bonds, the latter being the one the star ansatz prepares.
    """
    sites = []
    for k in range(12):
        angle = np.deg2rad(30.0 * k)
        radius = 1.0 if k % 2 == 0 else np.sqrt(3.0)
        sites.append(Site(k, (radius * np.cos(angle), radius * np.sin(angle))))
    edges = [Edge(k, (k + 1) % 12) for k in range(12)]
    edges += [Edge(2 * k, (2 * k + 2) % 12) for k in range(6)]
    return LatticeFragment("star", tuple(sites), tuple(edges))


def star_rotation() -> list[int]:
    """Site permutation induced by a 60 degree rotation of :func:`build_star`."""
    return [(k + 2) % 12 for k in range(12)]


def reciprocal_shells() -> np.ndarray:
    """The six shortest nonzero reciprocal lattice vectors."""
    vecs = [n1 * RECIPROCAL[0] + n2 * RECIPROCAL[1] for n1, n2 in itertools.product((-1, 0, 1), repeat=2)]
    vecs = [v for v in vecs if np.linalg.norm(v) > 0]
    shortest = min(np.linalg.norm(v) for v in vecs)
    return np.array([v for v in vecs if np.linalg.norm(v) < shortest + 1e-9])


def in_brillouin_zone(q: Sequence[float] | np.ndarray) -> np.ndarray | bool:
    """Closed point-in-hexagon test for the first Brillouin zone."""
    q = np.asarray(q, dtype=float)
    g = reciprocal_shells()
    proj = np.abs(q.reshape(-1, 2) @ g.T) / np.linalg.norm(g, axis=1)
    half = np.linalg.norm(g[0]) / 2.0
    inside = np.all(proj <= half + BZ_TOL, axis=1)
    return bool(inside[0]) if q.ndim == 1 else inside


def bz_vertices() -> np.ndarray:
    """Corners of the hexagonal Brillouin zone, counter-clockwise."""
    radius = 4.0 * np.pi / (3.0 * np.linalg.norm(BRAVAIS[0]))
    g = reciprocal_shells()
    base = np.arctan2(g[:, 1], g[:, 0]).min() + np.pi / 6.0
    angles = base + np.arange(6) * np.pi / 3.0
    return radius * np.column_stack([np.cos(angles), np.sin(angles)])


@dataclass(frozen=True)
class MomentumGrid:
    points: np.ndarray
    inside_bz: np.ndarray
    resolution: int

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self) -> Iterator[tuple[np.ndarray, bool]]:
        for q, inside in zip(self.points, self.inside_bz):
            yield q, bool(inside)

    def same_as(self, other: "MomentumGrid") -> bool:
        return self.points.shape == other.points.shape and np.allclose(self.points, other.points, atol=1e-12)


def momentum_grid(resolution: int, extent: float = 1.0) -> MomentumGrid:
    """Square ``resolution x resolution`` grid of momenta.

    Covers ``[-L, L]^2`` with ``L = extent * |b1|``. The zone corners sit at
    ``|q| = |b1| / sqrt(3)``, so any ``extent >= 1/sqrt(3)`` covers the whole
    first zone; the default 1.0 also shows part of the extended zone.
    """
    if int(resolution) != resolution or resolution < 2:
        raise InvalidArgument(f"resolution must be an integer >= 2, got {resolution}")
    if not extent > 0:
        raise InvalidArgument(f"extent must be positive, got {extent}")
    half = extent * np.linalg.norm(RECIPROCAL[0])
    axis = np.linspace(-half, half, int(resolution))
    qx, qy = np.meshgrid(axis, axis, indexing="xy")
    points = np.column_stack([qx.ravel(), qy.ravel()])
    return MomentumGrid(points, in_brillouin_zone(points), int(resolution))
