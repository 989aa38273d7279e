"""Facility-set sparsification and ball utilities.

Dense regions of the facility set (a facility far from every optimal center
but with a lot of weighted client mass packed around it) break the
conversion step. ``enumerate_instances`` removes open facility balls around
guessed (facility, nearest optimal center) pairs; one of the candidates is
sparse with the optimum unchanged.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .instance import Instance, as_center_set

DEFAULT_MAX_CANDIDATES = 10_000


def fball(inst: Instance, q: int, r: float) -> frozenset:
    """Facilities strictly closer than ``r`` to point ``q``."""
    if r < 0:
        raise ValueError("radius must be nonnegative")
    d = inst.distance[q, inst.facilities]
    return frozenset(int(f) for f in inst.facilities[d < r])


def cball_mass(inst: Instance, s: int, q: int, r: float) -> float:
    """Weight of group ``s`` clients strictly closer than ``r`` to ``q``."""
    inside = inst.distance[q, inst.clients] < r
    return float(inst.weights[s, inside].sum())


@dataclass(frozen=True)
class SparsifyJob:
    base: Instance
    t: int
    pair_sequence: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class SparsifiedInstance:
    instance: Instance
    job: SparsifyJob

    @property
    def removed(self) -> frozenset:
        return frozenset(int(f) for f in self.job.base.facilities) - frozenset(
            int(f) for f in self.instance.facilities)


def remove_balls(inst: Instance, pairs) -> list[int]:
    """Facilities left after deleting FBall(j, d(j, j')) for every pair."""
    removed = set()
    for j, jp in pairs:
        removed |= fball(inst, j, inst.distance[j, jp])
    return [int(f) for f in inst.facilities if int(f) not in removed]


@dataclass
class CandidateStream:
    """Iterable over sparsified candidates; counters fill in while consuming.

    ``truncated`` is set when the candidate cap stopped the enumeration
    before every pair sequence was tried.
    """
    base: Instance
    t: int
    max_candidates: int = DEFAULT_MAX_CANDIDATES
    unique: bool = False
    generated: int = 0
    discarded: int = 0
    duplicates: int = 0
    truncated: bool = False
    _seen: set = field(default_factory=set, repr=False)

    def __post_init__(self):
        if self.t < 1:
            raise ValueError("t must be >= 1")
        if not self.base.groups_disjoint():
            warnings.warn("groups overlap; the sparsity guarantee assumes disjoint groups")

    @property
    def max_length(self) -> int:
        return self.base.m ** 2 * self.t

    def total_sequences(self) -> int:
        nf = len(self.base.facilities)
        return 1 + sum((nf * nf) ** L for L in range(1, self.max_length + 1))

    def _sequences(self) -> Iterator[tuple]:
        yield ()
        fac = sorted(int(f) for f in self.base.facilities)
        pairs = list(itertools.product(fac, fac))
        for L in range(1, self.max_length + 1):
            yield from itertools.product(pairs, repeat=L)

    def __iter__(self) -> Iterator[SparsifiedInstance]:
        base = self.base
        for seq in self._sequences():
            if self.generated >= self.max_candidates:
                self.truncated = True
                return
            self.generated += 1
            kept = remove_balls(base, seq)
            if len(kept) < base.k:
                self.discarded += 1
                continue
            if self.unique:
                key = tuple(kept)
                if key in self._seen:
                    self.duplicates += 1
                    continue
                self._seen.add(key)
            sub = base if len(kept) == len(base.facilities) else base.with_facilities(kept)
            yield SparsifiedInstance(sub, SparsifyJob(base, self.t, tuple(seq)))

    def report(self) -> dict:
        return {"generated": self.generated, "discarded": self.discarded,
                "duplicates": self.duplicates, "truncated": self.truncated,
                "max_candidates": self.max_candidates}


def enumerate_instances(inst: Instance, t: int, max_candidates: int = DEFAULT_MAX_CANDIDATES,
                        unique: bool = False) -> CandidateStream:
    """Candidates in a fixed order: the base instance, then every ordered
    facility-pair sequence of length 1..m^2 t (lexicographic by id).

    The cap counts candidates before the |F'| < k discard. With
    ``unique=True`` candidates repeating an earlier facility set are skipped.
    """
    return CandidateStream(inst, int(t), int(max_candidates), unique)


def distances_to(inst: Instance, centers) -> np.ndarray:
    """d(j, centers) for every facility j, in facility order."""
    cols = np.asarray(as_center_set(centers), dtype=int)
    return inst.distance[np.ix_(inst.facilities, cols)].min(axis=1)


def density(inst: Instance, opt_centers) -> np.ndarray:
    """(m, |F|) array of (2/3 d(j,OPT))^p * mass of group s within d(j,OPT)/3."""
    dj = distances_to(inst, opt_centers)
    dcl = inst.distance[np.ix_(inst.facilities, inst.clients)]
    inside = dcl < (dj / 3.0)[:, None]                 # (|F|, n)
    mass = inst.weights @ inside.T.astype(float)       # (m, |F|)
    return ((2.0 / 3.0) * dj)[None, :] ** inst.p * mass


def is_alpha_sparse(inst: Instance, alpha: float, opt_centers, rtol: float = 1e-12) -> bool:
    if math.isinf(alpha) and alpha > 0:
        return True
    dens = density(inst, opt_centers)
    return bool(np.all(dens <= alpha + rtol * max(1.0, abs(alpha))))


def dense_pair_sequence(inst: Instance, alpha: float, opt_centers,
                        limit: Optional[int] = None) -> tuple[tuple[int, int], ...]:
    """Greedy witness sequence: repeatedly take the lowest-id alpha-dense
    facility still present and pair it with its nearest optimal center.

    The resulting candidate is alpha-sparse and keeps every optimal center.
    """
    opt = as_center_set(opt_centers)
    opt_arr = np.asarray(opt, dtype=int)
    dens = density(inst, opt).max(axis=0)
    fac = inst.facilities
    present = {int(f) for f in fac}
    seq = []
    for pos in np.argsort(fac, kind="stable"):
        j = int(fac[pos])
        if j not in present or dens[pos] <= alpha:
            continue
        jp = int(opt_arr[np.argmin(inst.distance[j, opt_arr])])
        seq.append((j, jp))
        present -= fball(inst, j, inst.distance[j, jp])
        if limit is not None and len(seq) >= limit:
            break
    return tuple(seq)
