"""Distinct allocation sufficient statistics with exact multiplicities.

Instead of summing over all k**n component allocations, the engine tracks
the distinct values of the complete-data sufficient statistic
(n_1, S_1, ..., n_k, S_k) together with the exact number of allocations
mapping to each value. Absorbing one observation sends every entry to k
successors; colliding successors add their multiplicities. Multiplicities
are Python integers, so conservation (they always sum to k**n) holds as
exact arbitrary-precision arithmetic.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterator, Mapping, Sequence

from . import families
from .errors import ResourceLimitError, UnsupportedFamilyError

DEFAULT_ENTRY_BUDGET = 5_000_000

# canonical flat key layout: (n_1, *S_1, n_2, *S_2, ..., n_k, *S_k)
Key = tuple[int, ...]


@dataclass(frozen=True)
class StatLattice:
    """Immutable map from canonical statistic keys to exact multiplicities."""

    family: str
    k: int
    n: int
    entries: Mapping[Key, int]
    log_base: float  # sum over absorbed observations of log h(x_i)

    def __post_init__(self):
        object.__setattr__(self, "entries", MappingProxyType(dict(self.entries)))

    @property
    def slot_width(self) -> int:
        key = next(iter(self.entries))
        return len(key) // self.k

    @property
    def categories(self) -> int | None:
        if self.family != "multinomial":
            return None
        return self.slot_width - 1

    def distinct_count(self) -> int:
        return len(self.entries)

    def total_count(self) -> int:
        return sum(self.entries.values())

    def sorted_items(self) -> list[tuple[Key, int]]:
        return sorted(self.entries.items())

    def group_stat(self, key: Key, j: int) -> families.GroupStat:
        w = self.slot_width
        slot = key[j * w : (j + 1) * w]
        return families.GroupStat(slot[0], tuple(slot[1:]))


def _infer_family(obs) -> str:
    if isinstance(obs, bool):
        raise ValueError(f"not a supported observation: {obs!r}")
    if isinstance(obs, tuple):
        return "multinomial"
    if isinstance(obs, int):
        return "poisson"
    if isinstance(obs, float):
        return "normal"
    raise ValueError(f"not a supported observation: {obs!r}")


def _require_lattice_family(family: str) -> None:
    if family == "normal":
        # real-valued statistics collide only within-partition; growth is
        # Bell-number-like, so enumeration goes through the oracle instead
        raise UnsupportedFamilyError("normal-family lattices are not supported; use the oracle")
    if family not in families.FAMILIES:
        raise ValueError(f"unknown family {family!r}")


def init(first_obs, k: int, family: str | None = None) -> StatLattice:
    """Lattice of a single observation: k singleton entries, multiplicity 1."""
    if k < 1:
        raise ValueError(f"component count must be >= 1, got {k}")
    if family is None:
        family = _infer_family(first_obs)
    _require_lattice_family(family)
    families.check_observation(family, first_obs)
    r = families.observation_statistic(family, first_obs)
    w = 1 + len(r.total)
    zero = (0,) * w
    entries = {}
    for j in range(k):
        key = zero * j + (1, *r.total) + zero * (k - j - 1)
        entries[key] = 1
    return StatLattice(family, k, 1, entries, families.log_base_measure(family, first_obs))


def _successors(key: Key, k: int, w: int, r: Sequence[int]) -> Iterator[Key]:
    for j in range(k):
        off = j * w
        bumped = (key[off] + 1,) + tuple(key[off + 1 + u] + r[u] for u in range(w - 1))
        yield key[:off] + bumped + key[off + w :]


def extend(
    lattice: StatLattice,
    obs,
    budget: int = DEFAULT_ENTRY_BUDGET,
    backend: str = "hash",
) -> StatLattice:
    """Absorb one observation: spawn k successors per entry, merge collisions."""
    families.check_observation(lattice.family, obs, lattice.categories)
    r = families.observation_statistic(lattice.family, obs).total
    k, w = lattice.k, lattice.slot_width
    if len(r) != w - 1:
        raise ValueError("observation width does not match the lattice family")

    if backend == "hash":
        merged: dict[Key, int] = {}
        for key, mult in lattice.entries.items():
            for succ in _successors(key, k, w, r):
                if succ in merged:
                    merged[succ] += mult
                else:
                    merged[succ] = mult
                    if len(merged) > budget:
                        raise ResourceLimitError(
                            f"entry budget {budget} exceeded at {len(merged)} entries",
                            entry_count=len(merged),
                        )
    elif backend == "sortmerge":
        pairs = sorted(
            (succ, mult)
            for key, mult in lattice.entries.items()
            for succ in _successors(key, k, w, r)
        )
        merged = {}
        for succ, group in itertools.groupby(pairs, key=lambda p: p[0]):
            merged[succ] = sum(m for _, m in group)
        if len(merged) > budget:
            raise ResourceLimitError(
                f"entry budget {budget} exceeded at {len(merged)} entries",
                entry_count=len(merged),
            )
    else:
        raise ValueError(f"unknown backend {backend!r}")

    log_base = lattice.log_base + families.log_base_measure(lattice.family, obs)
    return StatLattice(lattice.family, k, lattice.n + 1, merged, log_base)


def build(
    data: Sequence,
    k: int,
    family: str | None = None,
    budget: int = DEFAULT_ENTRY_BUDGET,
    backend: str = "hash",
) -> StatLattice:
    """Fold extend over the dataset, starting from init(data[0], k)."""
    if len(data) == 0:
        raise ValueError("dataset must be non-empty")
    lattice = init(data[0], k, family)
    for obs in data[1:]:
        lattice = extend(lattice, obs, budget=budget, backend=backend)
    return lattice


def distinct_count(lattice: StatLattice) -> int:
    return lattice.distinct_count()


def total_count(lattice: StatLattice) -> int:
    return lattice.total_count()


def dump(lattice: StatLattice) -> str:
    """Flat text form: header, then one sorted line per entry."""
    lines = [
        f"family={lattice.family} k={lattice.k} n={lattice.n} logh={lattice.log_base.hex()}"
    ]
    for key, mult in lattice.sorted_items():
        lines.append("\t".join([*(str(v) for v in key), str(mult)]))
    return "\n".join(lines) + "\n"


def load(text: str) -> StatLattice:
    """Inverse of dump; validates conservation before returning."""
    lines = text.splitlines()
    if not lines:
        raise ValueError("empty lattice dump")
    header = dict(item.split("=", 1) for item in lines[0].split(" "))
    try:
        family = header["family"]
        k = int(header["k"])
        n = int(header["n"])
        log_base = float.fromhex(header["logh"])
    except (KeyError, ValueError) as exc:
        raise ValueError(f"malformed lattice header: {lines[0]!r}") from exc
    entries: dict[Key, int] = {}
    for line in lines[1:]:
        if not line:
            continue
        cells = line.split("\t")
        entries[tuple(int(c) for c in cells[:-1])] = int(cells[-1])
    if not entries:
        raise ValueError("lattice dump has no entries")
    lat = StatLattice(family, k, n, entries, log_base)
    if lat.total_count() != k**n:
        raise ValueError(f"dump violates conservation: total {lat.total_count()} != {k}^{n}")
    return lat
