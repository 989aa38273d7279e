"""Problem instances and exact evaluation of the socially fair objective.

Points are integer ids into a dense symmetric distance matrix. Clients and
candidate facilities are both subsets of those ids (they may coincide, which
is the usual setup for the benchmark datasets).
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

ORACLE_CAP = 2_000_000


class InstanceError(ValueError):
    pass


class OracleTooLarge(RuntimeError):
    def __init__(self, count, cap):
        super().__init__(f"instance too large for oracle ({count} subsets > cap {cap})")
        self.count = count
        self.cap = cap


@dataclass(frozen=True)
class Group:
    members: tuple[int, ...]
    weights: tuple[float, ...]

    @classmethod
    def uniform(cls, members: Iterable[int]) -> "Group":
        members = tuple(int(i) for i in members)
        if not members:
            raise InstanceError("every group must be nonempty")
        return cls(members, (1.0 / len(members),) * len(members))


@dataclass(frozen=True)
class CostProfile:
    per_group: tuple[float, ...]

    @property
    def objective(self) -> float:
        return max(self.per_group)

    def as_dict(self) -> dict:
        return {"per_group": list(self.per_group), "objective": self.objective}


def as_center_set(centers: Iterable[int]) -> tuple[int, ...]:
    """Canonical center set: sorted tuple of distinct facility ids."""
    return tuple(sorted({int(c) for c in centers}))


class Instance:
    """Socially fair (l_p, k)-clustering instance.

    Parameters
    ----------
    distance : (N, N) array
        Symmetric nonnegative distances over all point ids ``0..N-1``.
    clients, facilities : sequences of point ids
    groups : sequence of :class:`Group`
        Group members are client ids. Groups may overlap.
    k : int
    p : float, >= 1
    check_metric : bool
        Verify the triangle inequality (O(N^3)); turn off for large trusted
        inputs such as Euclidean data.
    """

    def __init__(self, distance, clients, facilities, groups: Sequence[Group], k: int,
                 p: float = 1.0, check_metric: bool = True, metric_tol: float = 1e-9):
        d = np.array(distance, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise InstanceError("distance matrix must be square")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise InstanceError("distances must be finite and nonnegative")
        if np.any(np.diag(d) != 0):
            raise InstanceError("distance[i][i] must be 0")
        if not np.allclose(d, d.T, rtol=0, atol=metric_tol):
            raise InstanceError("distance matrix must be symmetric")
        d = (d + d.T) / 2
        if check_metric:
            _check_triangle(d, metric_tol)

        self.clients = np.array(clients, dtype=int)
        self.facilities = np.array(facilities, dtype=int)
        npts = d.shape[0]
        for name, ids in (("client", self.clients), ("facility", self.facilities)):
            if ids.ndim != 1 or len(ids) == 0:
                raise InstanceError(f"need at least one {name}")
            if len(set(ids.tolist())) != len(ids):
                raise InstanceError(f"duplicate {name} ids")
            if ids.min() < 0 or ids.max() >= npts:
                raise InstanceError(f"{name} id out of range")
        k = int(k)
        if not 1 <= k <= len(self.facilities):
            raise InstanceError(f"k must be in [1, {len(self.facilities)}], got {k}")
        p = float(p)
        if not p >= 1:
            raise InstanceError("p must be >= 1")
        if not groups:
            raise InstanceError("need at least one group")

        self.distance = d
        self.distance.setflags(write=False)
        self.k = k
        self.p = p
        self.groups = tuple(groups)
        self._client_pos = {int(c): i for i, c in enumerate(self.clients)}
        self._facility_pos = {int(f): j for j, f in enumerate(self.facilities)}

        W = np.zeros((len(self.groups), len(self.clients)))
        for s, g in enumerate(self.groups):
            if len(g.members) == 0:
                raise InstanceError(f"group {s} is empty")
            if len(g.members) != len(g.weights):
                raise InstanceError(f"group {s}: members/weights length mismatch")
            for i, w in zip(g.members, g.weights):
                if i not in self._client_pos:
                    raise InstanceError(f"group {s}: unknown client id {i}")
                if not (w >= 0 and math.isfinite(w)):
                    raise InstanceError(f"group {s}: weights must be nonnegative")
                W[s, self._client_pos[i]] += w
        self.weights = W
        self.weights.setflags(write=False)
        # client x facility block, the only part most algorithms touch
        self.cf = d[np.ix_(self.clients, self.facilities)]
        self.cf.setflags(write=False)

    @property
    def m(self) -> int:
        return len(self.groups)

    @property
    def n(self) -> int:
        return len(self.clients)

    def facility_pos(self, ids) -> np.ndarray:
        try:
            return np.array([self._facility_pos[int(f)] for f in ids], dtype=int)
        except KeyError as exc:
            raise InstanceError(f"not a facility: {exc.args[0]}") from None

    def client_pos(self, ids) -> np.ndarray:
        return np.array([self._client_pos[int(i)] for i in ids], dtype=int)

    def with_facilities(self, facilities) -> "Instance":
        """Same clients, groups and metric with a restricted facility set."""
        return Instance(self.distance, self.clients, facilities, self.groups, self.k, self.p,
                        check_metric=False)

    def with_k(self, k: int) -> "Instance":
        return Instance(self.distance, self.clients, self.facilities, self.groups, k, self.p,
                        check_metric=False)

    def groups_disjoint(self) -> bool:
        return bool(np.all((self.weights > 0).sum(axis=0) <= 1))

    def __repr__(self):
        return (f"Instance(n={self.n}, facilities={len(self.facilities)}, m={self.m}, "
                f"k={self.k}, p={self.p})")

    # -- serialization ----------------------------------------------------

    def to_json(self) -> dict:
        doc = {
            "distance_matrix": self.distance.tolist(),
            "clients": self.clients.tolist(),
            "facilities": self.facilities.tolist(),
            "groups": [{"ids": list(g.members), "weights": list(g.weights)} for g in self.groups],
            "k": self.k,
            "p": self.p,
        }
        return doc

    @classmethod
    def from_json(cls, doc: dict, check_metric: bool = True) -> "Instance":
        if "distance_matrix" in doc:
            d = np.asarray(doc["distance_matrix"], dtype=float)
        elif "points" in doc:
            pts = np.asarray(doc["points"], dtype=float)
            if pts.ndim == 1:
                pts = pts[:, None]
            d = euclidean_distances(pts)
            check_metric = False
        else:
            raise InstanceError("instance needs 'points' or 'distance_matrix'")
        npts = d.shape[0]
        clients = doc.get("clients", list(range(npts)))
        facilities = doc.get("facilities", list(range(npts)))
        groups = []
        for g in doc.get("groups") or [{"ids": list(clients)}]:
            ids = [int(i) for i in g["ids"]]
            if g.get("weights") is None:
                groups.append(Group.uniform(ids))
            else:
                groups.append(Group(tuple(ids), tuple(float(w) for w in g["weights"])))
        return cls(d, clients, facilities, groups, doc["k"], doc.get("p", 1.0),
                   check_metric=check_metric)

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path, check_metric: bool = True) -> "Instance":
        return cls.from_json(json.loads(Path(path).read_text()), check_metric=check_metric)


def euclidean_distances(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    sq = np.sum(pts * pts, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2 * pts @ pts.T
    np.maximum(d2, 0, out=d2)
    d = np.sqrt(d2)
    # exact zeros on the diagonal and for duplicate points
    np.fill_diagonal(d, 0.0)
    dup = np.all(pts[:, None, :] == pts[None, :, :], axis=2) if len(pts) <= 2000 else None
    if dup is not None:
        d[dup] = 0.0
    return (d + d.T) / 2


def _check_triangle(d: np.ndarray, tol: float) -> None:
    for b in range(d.shape[0]):
        via = d[:, b][:, None] + d[b, :][None, :]
        if np.any(d > via + tol):
            i, j = np.argwhere(d > via + tol)[0]
            raise InstanceError(
                f"triangle inequality violated: d({i},{j})={d[i, j]} > "
                f"d({i},{b})+d({b},{j})={via[i, j]}")


def connection_costs(inst: Instance, centers) -> np.ndarray:
    """d(i, F)^p for every client position i."""
    cols = inst.facility_pos(centers)
    if len(cols) == 0:
        raise InstanceError("no centers")
    dist = inst.cf[:, cols].min(axis=1)
    return dist ** inst.p


def evaluate(inst: Instance, centers) -> CostProfile:
    """Per-group weighted cost of serving every client by its nearest center."""
    centers = as_center_set(centers)
    if not centers:
        raise InstanceError("no centers")
    per_group = inst.weights @ connection_costs(inst, centers)
    return CostProfile(tuple(float(v) for v in per_group))


def _subset_objectives(inst: Instance, combos: np.ndarray) -> np.ndarray:
    # combos: (B, k) facility positions -> (B,) objective values
    dist = inst.cf[:, combos].min(axis=2) ** inst.p  # (n, B)
    return (inst.weights @ dist).max(axis=0)


def brute_force_opt(inst: Instance, cap: int = ORACLE_CAP,
                    chunk: int = 4096) -> tuple[tuple[int, ...], CostProfile]:
    """Exact optimum over all k-subsets of facilities.

    Ties go to the lexicographically smallest center tuple (combinations are
    generated in lexicographic order and only a strict improvement replaces
    the incumbent).
    """
    nf = len(inst.facilities)
    count = math.comb(nf, inst.k)
    if count > cap:
        raise OracleTooLarge(count, cap)
    order = np.argsort(inst.facilities, kind="stable")  # positions sorted by id
    best_val = math.inf
    best = None
    it = itertools.combinations(order.tolist(), inst.k)
    while True:
        block = list(itertools.islice(it, chunk))
        if not block:
            break
        combos = np.array(block, dtype=int)
        vals = _subset_objectives(inst, combos)
        b = int(np.argmin(vals))
        if vals[b] < best_val:
            best_val = float(vals[b])
            best = combos[b]
    centers = as_center_set(inst.facilities[best])
    return centers, evaluate(inst, centers)


def pad_centers(inst: Instance, centers, size: int) -> tuple[int, ...]:
    """Greedily add facilities (largest objective drop, then lowest id) up to ``size``."""
    centers = list(as_center_set(centers))
    size = min(size, len(inst.facilities))
    order = np.argsort(inst.facilities, kind="stable")
    while len(centers) < size:
        chosen = set(centers)
        cur = inst.cf[:, inst.facility_pos(centers)].min(axis=1) if centers else np.full(inst.n, np.inf)
        best, best_val = None, math.inf
        for j in order:
            fid = int(inst.facilities[j])
            if fid in chosen:
                continue
            val = float((inst.weights @ (np.minimum(cur, inst.cf[:, j]) ** inst.p)).max())
            if val < best_val:
                best, best_val = fid, val
        centers.append(best)
    return as_center_set(centers)
