"""Population construction: identity codes, group schemes, and cohorts.

Agents carry 16-digit binary identity codes.  Under the ``random`` scheme the
codes are sampled uniformly and specializations are balanced thirds assigned
independently of the codes, so a code carries no group information.  Under
the ``correlated`` scheme the first three digits are a one-hot group label
(purple, yellow, or cyan) and the remaining thirteen digits individuate
members; each group is half specialists of its signature skill, a quarter of
the mirror skill, and a quarter of the third skill, so group membership
predicts behavior only statistically.

The module also mints replacement cohorts (half choppers, half miners, never
builders) for generational turnover, and held-out probe codes that are never
trained on but share the live code distribution.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional

import numpy as np

from .env import Skill

__all__ = [
    "CODE_LENGTH",
    "GROUP_PREFIX_LENGTH",
    "CANONICAL_SIZES",
    "GroupLabel",
    "IdentityCode",
    "AgentRecord",
    "ProbeCode",
    "ProbeSet",
    "Population",
    "PopulationError",
    "allocate_group_sizes",
    "allocate_skill_counts",
    "validate_population_size",
    "build_population",
    "write_manifest",
]

CODE_LENGTH = 16
GROUP_PREFIX_LENGTH = 3
SUFFIX_LENGTH = CODE_LENGTH - GROUP_PREFIX_LENGTH

# sizes used throughout the studies; other sizes must divide into exact
# thirds and in-group quarters (multiples of 12)
CANONICAL_SIZES = (30, 100, 300, 600)

MAJORITY_SHARE = 0.5
MINORITY_SHARE = 0.25


class PopulationError(ValueError):
    """Raised when a roster request cannot be honored exactly."""


class GroupLabel(enum.IntEnum):
    PURPLE = 0
    YELLOW = 1
    CYAN = 2

    @property
    def color(self) -> str:
        return self.name.lower()

    @property
    def prefix(self) -> tuple[int, int, int]:
        bits = [0, 0, 0]
        bits[int(self)] = 1
        return tuple(bits)

    @property
    def majority_skill(self) -> Skill:
        return Skill(int(self))


@dataclass(frozen=True)
class IdentityCode:
    """A 16-digit binary code; hashable, with cached observation vector."""

    bits: tuple[int, ...]

    def __post_init__(self):
        if len(self.bits) != CODE_LENGTH or any(b not in (0, 1) for b in self.bits):
            raise PopulationError(f"identity code must be {CODE_LENGTH} binary digits")

    @cached_property
    def as_obs(self) -> np.ndarray:
        vec = np.array(self.bits, dtype=np.float64)
        vec.setflags(write=False)
        return vec

    @cached_property
    def as_string(self) -> str:
        return "".join(str(b) for b in self.bits)

    @property
    def group(self) -> Optional[GroupLabel]:
        prefix = self.bits[:GROUP_PREFIX_LENGTH]
        if sum(prefix) != 1:
            return None
        return GroupLabel(prefix.index(1))

    @classmethod
    def from_string(cls, text: str) -> "IdentityCode":
        return cls(tuple(int(c) for c in text.strip()))


@dataclass
class AgentRecord:
    """Roster entry: who an agent is, independent of its inventory."""

    agent_id: str
    code: IdentityCode
    skill: Skill
    group: Optional[GroupLabel]
    wave: int = 0  # 0 for founding agents, then the wave that introduced them


@dataclass(frozen=True)
class ProbeCode:
    code: IdentityCode
    skill: Skill


@dataclass
class ProbeSet:
    """Held-out codes for one group (or the whole roster when group is None)."""

    group: Optional[GroupLabel]
    probes: list[ProbeCode]
    truth_mix: float = 0.5  # probability a probed identity is wood-skilled


def _largest_remainder(total: int, shares: Iterable[float], tie_order: list[int]) -> list[int]:
    """Apportion ``total`` by ``shares`` exactly, ties broken by ``tie_order``."""
    shares = list(shares)
    quotas = [total * s for s in shares]
    counts = [int(np.floor(q)) for q in quotas]
    remainders = [q - c for q, c in zip(quotas, counts)]
    leftover = total - sum(counts)
    pref = {idx: rank for rank, idx in enumerate(tie_order)}
    order = sorted(range(len(shares)), key=lambda i: (-remainders[i], pref[i]))
    for i in order[:leftover]:
        counts[i] += 1
    return counts


def allocate_group_sizes(size: int) -> tuple[int, int, int]:
    """Near-equal thirds, earlier groups receiving any remainder."""
    counts = _largest_remainder(size, [1 / 3] * 3, tie_order=[0, 1, 2])
    return tuple(counts)  # type: ignore[return-value]


def allocate_skill_counts(group_size: int, group: GroupLabel) -> dict[Skill, int]:
    """Half majority skill, quarter mirror skill, quarter third skill.

    When the quarters do not divide exactly, units go by largest remainder
    with preference majority, then mirror minority, then the leftover skill.
    """
    majority = group.majority_skill
    if majority == Skill.CHOPPER:
        mirror, third = Skill.MINER, Skill.BUILDER
    elif majority == Skill.MINER:
        mirror, third = Skill.CHOPPER, Skill.BUILDER
    else:
        mirror, third = Skill.CHOPPER, Skill.MINER
    ordered = [majority, mirror, third]
    counts = _largest_remainder(
        group_size, [MAJORITY_SHARE, MINORITY_SHARE, MINORITY_SHARE], tie_order=[0, 1, 2]
    )
    return {skill: n for skill, n in zip(ordered, counts)}


def validate_population_size(size: int) -> None:
    if size in CANONICAL_SIZES:
        return
    if size >= 12 and size % 12 == 0:
        return
    raise PopulationError(
        f"population size must be one of {CANONICAL_SIZES} or a multiple of 12 "
        f"(exact thirds with in-group quarters); got {size}"
    )


def _sample_unused(rng: np.random.Generator, n_bits: int, used: set[int]) -> int:
    """Rejection-sample an integer in [0, 2**n_bits) not yet in ``used``."""
    space = 1 << n_bits
    if len(used) >= space:
        raise PopulationError(f"exhausted the {n_bits}-bit code space")
    while True:
        value = int(rng.integers(space))
        if value not in used:
            return value


def _bits_of(value: int, n_bits: int) -> tuple[int, ...]:
    return tuple((value >> (n_bits - 1 - i)) & 1 for i in range(n_bits))


class Population:
    """Roster, code registry, and probe sets for one run.

    Uniqueness is enforced across live agents, departed agents, replacement
    cohorts, and probes: a code is never reused.
    """

    def __init__(self, scheme: str):
        if scheme not in ("random", "correlated"):
            raise PopulationError(f"unknown population scheme: {scheme!r}")
        self.scheme = scheme
        self.records: list[AgentRecord] = []
        self.probe_sets: list[ProbeSet] = []
        self._used_suffixes: dict[Optional[GroupLabel], set[int]] = {}
        self._next_id = 0

    def _new_id(self) -> str:
        agent_id = f"a{self._next_id:04d}"
        self._next_id += 1
        return agent_id

    def _mint_code(self, group: Optional[GroupLabel], rng: np.random.Generator) -> IdentityCode:
        used = self._used_suffixes.setdefault(group, set())
        if group is None:
            value = _sample_unused(rng, CODE_LENGTH, used)
            used.add(value)
            return IdentityCode(_bits_of(value, CODE_LENGTH))
        value = _sample_unused(rng, SUFFIX_LENGTH, used)
        used.add(value)
        return IdentityCode(group.prefix + _bits_of(value, SUFFIX_LENGTH))

    def _add_agent(
        self, group: Optional[GroupLabel], skill: Skill, wave: int, rng: np.random.Generator
    ) -> AgentRecord:
        record = AgentRecord(self._new_id(), self._mint_code(group, rng), skill, group, wave)
        self.records.append(record)
        return record

    def group_records(self, group: Optional[GroupLabel]) -> list[AgentRecord]:
        return [r for r in self.records if r.group == group]

    def make_replacement_cohort(
        self, group: Optional[GroupLabel], count: int, wave: int, rng: np.random.Generator
    ) -> list[AgentRecord]:
        """Mint ``count`` newcomers for ``group``: half choppers, half miners.

        Newcomer codes are fresh draws from the group's unused code space, so
        the market maker has never observed them.
        """
        if count % 2 != 0:
            raise PopulationError(
                f"replacement cohort size must be even to split choppers and miners; got {count}"
            )
        cohort = []
        for i in range(count):
            skill = Skill.CHOPPER if i < count // 2 else Skill.MINER
            cohort.append(self._add_agent(group, skill, wave, rng))
        return cohort

    def make_probe_sets(self, per_group: int, rng: np.random.Generator) -> list[ProbeSet]:
        """Mint held-out probe identities, balanced between wood and stone skills."""
        if per_group % 2 != 0:
            raise PopulationError(f"probe count per group must be even; got {per_group}")
        if self.probe_sets:
            raise PopulationError("probe sets already generated for this population")
        groups: list[Optional[GroupLabel]]
        counts: list[int]
        if self.scheme == "correlated":
            groups = list(GroupLabel)
            counts = [per_group] * len(groups)
        else:
            groups = [None]
            counts = [per_group * len(GroupLabel)]
        for group, count in zip(groups, counts):
            probes = []
            for i in range(count):
                skill = Skill.CHOPPER if i % 2 == 0 else Skill.MINER
                probes.append(ProbeCode(self._mint_code(group, rng), skill))
            self.probe_sets.append(ProbeSet(group, probes))
        return self.probe_sets


def build_population(
    scheme: str,
    size: int,
    rng: np.random.Generator,
    probes_per_group: int = 10,
) -> Population:
    """Construct the founding roster for one run.

    ``random``: unique uniform 16-digit codes; balanced skill thirds assigned
    by a roster-wide shuffle so codes and ids carry no skill information.
    ``correlated``: three groups of near-equal size, one-hot group prefixes,
    unique 13-digit member suffixes, and the 50/25/25 skill split per group.
    """
    validate_population_size(size)
    pop = Population(scheme)
    if scheme == "random":
        counts = _largest_remainder(size, [1 / 3] * 3, tie_order=[0, 1, 2])
        skills = (
            [Skill.CHOPPER] * counts[0] + [Skill.MINER] * counts[1] + [Skill.BUILDER] * counts[2]
        )
        skills = [skills[i] for i in rng.permutation(len(skills))]
        for skill in skills:
            pop._add_agent(None, skill, 0, rng)
    else:
        for group, group_size in zip(GroupLabel, allocate_group_sizes(size)):
            for skill, n in allocate_skill_counts(group_size, group).items():
                for _ in range(n):
                    pop._add_agent(group, skill, 0, rng)
    pop.make_probe_sets(probes_per_group, rng)
    return pop


def write_manifest(records: list[AgentRecord], path) -> None:
    """Write the roster as CSV: id, code, group color, specialization, wave."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["agent_id", "code", "group", "specialization", "wave"])
        for r in records:
            writer.writerow(
                [
                    r.agent_id,
                    r.code.as_string,
                    r.group.color if r.group is not None else "all",
                    r.skill.name.lower(),
                    r.wave,
                ]
            )
