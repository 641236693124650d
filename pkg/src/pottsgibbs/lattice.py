"""Rectangular pixel lattice, partition bookkeeping and bond components.

Pixels are indexed row-major from 0 internally; grid coordinates are 1-based
integers, so pixel j sits at (1 + j // width, 1 + j % width).  Cluster and
nested-cluster labels are 0-based and dense; serialization helpers emit
1-based labels.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels


@dataclass(frozen=True)
class Lattice:
    """First-order (4-connectivity) neighbour structure of a height x width grid.

    Attributes
    ----------
    height, width : int
        Grid dimensions.
    p : int
        Pixel count, height * width.
    coords : ndarray, shape (p, 2)
        Integer grid location of each pixel, 1-based, row-major order.
    pair_j, pair_k : ndarray, shape (n_pairs,)
        Neighbour pairs with pair_j < pair_k, ordered row-major.
    coupling : ndarray, shape (n_pairs,)
        Nonnegative Potts coupling per pair (a single shared value in the
        common-coupling case, but pair-specific values are supported).
    """

    height: int
    width: int
    p: int
    coords: np.ndarray
    pair_j: np.ndarray
    pair_k: np.ndarray
    coupling: np.ndarray
    # CSR map pixel -> incident pair indices, used by the samplers
    pix_pair_start: np.ndarray = field(repr=False, default=None)
    pix_pair_idx: np.ndarray = field(repr=False, default=None)

    @property
    def n_pairs(self) -> int:
        return self.pair_j.shape[0]

    def with_coupling(self, upsilon) -> "Lattice":
        """Same lattice with a new coupling (scalar or per-pair array)."""
        coupling = np.broadcast_to(np.asarray(upsilon, dtype=float),
                                   (self.n_pairs,)).copy()
        if np.any(coupling < 0):
            raise ValueError("couplings must be nonnegative")
        return Lattice(self.height, self.width, self.p, self.coords,
                       self.pair_j, self.pair_k, coupling,
                       self.pix_pair_start, self.pix_pair_idx)


def build_lattice(height: int, width: int, upsilon=0.0) -> Lattice:
    """Build the full first-order neighbour list of a height x width grid.

    A grid has 2*height*width - height - width neighbour pairs; every pair
    carries coupling `upsilon` (scalar, or an array of per-pair values).
    """
    if height < 1 or width < 1:
        raise ValueError(f"grid dimensions must be positive, got {height}x{width}")
    p = height * width
    rows, cols = np.divmod(np.arange(p), width)
    coords = np.stack([rows + 1, cols + 1], axis=1)

    pj, pk = [], []
    for j in range(p):
        if cols[j] + 1 < width:
            pj.append(j)
            pk.append(j + 1)
        if rows[j] + 1 < height:
            pj.append(j)
            pk.append(j + width)
    pair_j = np.asarray(pj, dtype=np.int64)
    pair_k = np.asarray(pk, dtype=np.int64)
    coupling = np.broadcast_to(np.asarray(upsilon, dtype=float),
                               (pair_j.shape[0],)).copy()
    if np.any(coupling < 0):
        raise ValueError("couplings must be nonnegative")

    # CSR pixel -> incident pairs
    deg = np.zeros(p + 1, dtype=np.int64)
    for j, k in zip(pair_j, pair_k):
        deg[j + 1] += 1
        deg[k + 1] += 1
    start = np.cumsum(deg)
    idx = np.empty(2 * pair_j.shape[0], dtype=np.int64)
    fill = start[:-1].copy()
    for e in range(pair_j.shape[0]):
        for v in (pair_j[e], pair_k[e]):
            idx[fill[v]] = e
            fill[v] += 1

    return Lattice(height, width, p, coords, pair_j, pair_k, coupling,
                   start, idx)


class PartitionState:
    """Cluster labels z over pixels plus the derived cluster inventory.

    Labels are dense 0-based ints; clusters are nonempty, mutually exclusive
    and exhaustive by construction.
    """

    __slots__ = ("labels", "M")

    def __init__(self, labels, canonical=False):
        labels = np.asarray(labels, dtype=np.int64).copy()
        if labels.ndim != 1 or labels.shape[0] == 0:
            raise ValueError("labels must be a nonempty 1-D array")
        if not canonical:
            _kernels.canonicalize_labels(labels)
        M = int(labels.max()) + 1
        uniq = np.unique(labels)
        if uniq.shape[0] != M or uniq[0] != 0:
            raise ValueError("labels must be dense 0..M-1")
        self.labels = labels
        self.M = M

    @property
    def p(self) -> int:
        return self.labels.shape[0]

    @property
    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.M)

    @property
    def cluster_members(self) -> list:
        return [np.flatnonzero(self.labels == m) for m in range(self.M)]

    def copy(self) -> "PartitionState":
        return PartitionState(self.labels, canonical=True)

    def __eq__(self, other):
        return (isinstance(other, PartitionState)
                and np.array_equal(canonicalize(self).labels,
                                   canonicalize(other).labels))

    def __repr__(self):
        return f"PartitionState(p={self.p}, M={self.M})"


def canonicalize(state: PartitionState) -> PartitionState:
    """Relabel clusters by order of first appearance; the partition (as a set
    of sets) is unchanged."""
    labels = state.labels.copy()
    _kernels.canonicalize_labels(labels)
    return PartitionState(labels, canonical=True)


class BondSet:
    """Binary bond variables r_e, one per lattice neighbour pair."""

    __slots__ = ("bonds",)

    def __init__(self, bonds, lattice: Lattice = None):
        bonds = np.asarray(bonds, dtype=np.int8)
        if lattice is not None and bonds.shape[0] != lattice.n_pairs:
            raise ValueError(
                f"bond vector length {bonds.shape[0]} != "
                f"{lattice.n_pairs} neighbour pairs")
        if not np.all((bonds == 0) | (bonds == 1)):
            raise ValueError("bonds must be 0/1")
        self.bonds = bonds

    @property
    def n_bonds(self) -> int:
        return int(self.bonds.sum())


@dataclass(frozen=True)
class NestedClustering:
    """Bond-connected components A_1..A_O; each is contained in one cluster."""

    nested_labels: np.ndarray
    O: int

    @property
    def members(self) -> list:
        return [np.flatnonzero(self.nested_labels == o) for o in range(self.O)]


def nested_clusters(lattice: Lattice, bonds: BondSet) -> NestedClustering:
    """Connected components of the graph whose edges are pairs with r=1.

    Isolated pixels form singleton components.  Component labels are
    deterministic (first-appearance order) given the bonds.
    """
    if bonds.bonds.shape[0] != lattice.n_pairs:
        raise ValueError(
            f"bond vector length {bonds.bonds.shape[0]} != "
            f"{lattice.n_pairs} neighbour pairs")
    labels, O = _kernels.connected_components(
        lattice.p, lattice.pair_j, lattice.pair_k, bonds.bonds)
    return NestedClustering(labels, int(O))


def potts_energy(lattice: Lattice, state: PartitionState) -> float:
    """Sum of couplings over same-label neighbour pairs."""
    if state.p != lattice.p:
        raise ValueError("partition size does not match lattice")
    return float(_kernels.potts_energy_kernel(
        state.labels, lattice.pair_j, lattice.pair_k, lattice.coupling))


def serialize_labels(labels) -> str:
    """One partition draw as comma-separated canonical 1-based labels."""
    labels = np.asarray(labels, dtype=np.int64).copy()
    _kernels.canonicalize_labels(labels)
    return ",".join(str(v + 1) for v in labels)


def parse_labels(line: str) -> np.ndarray:
    """Inverse of :func:`serialize_labels` (back to 0-based)."""
    return np.array([int(v) - 1 for v in line.strip().split(",")],
                    dtype=np.int64)
