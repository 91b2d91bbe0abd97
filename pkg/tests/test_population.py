"""Roster construction: codes, group composition, cohorts, and probes."""

from collections import Counter

import numpy as np
import pytest

from prodtrade.env import Skill
from prodtrade.population import (
    CANONICAL_SIZES,
    CODE_LENGTH,
    GroupLabel,
    IdentityCode,
    PopulationError,
    allocate_group_sizes,
    allocate_skill_counts,
    build_population,
    validate_population_size,
    write_manifest,
)
from prodtrade.rng import make_stream


def skill_counts(records):
    return Counter(r.skill for r in records)


class TestApportionment:
    def test_group_sizes_exact_thirds(self):
        assert allocate_group_sizes(300) == (100, 100, 100)
        assert allocate_group_sizes(30) == (10, 10, 10)
        assert allocate_group_sizes(60) == (20, 20, 20)

    def test_group_sizes_remainders_go_forward(self):
        assert allocate_group_sizes(100) == (34, 33, 33)

    def test_skill_split_exact(self):
        counts = allocate_skill_counts(100, GroupLabel.PURPLE)
        assert counts == {Skill.CHOPPER: 50, Skill.MINER: 25, Skill.BUILDER: 25}
        counts = allocate_skill_counts(20, GroupLabel.YELLOW)
        assert counts == {Skill.MINER: 10, Skill.CHOPPER: 5, Skill.BUILDER: 5}

    def test_skill_split_rounding_prefers_majority_then_mirror(self):
        # 10 -> 5 majority / 2.5 / 2.5: the extra unit goes to the mirror skill
        counts = allocate_skill_counts(10, GroupLabel.PURPLE)
        assert counts == {Skill.CHOPPER: 5, Skill.MINER: 3, Skill.BUILDER: 2}
        # 33 -> 16.5 majority: its remainder is largest, so it rounds up
        counts = allocate_skill_counts(33, GroupLabel.YELLOW)
        assert counts == {Skill.MINER: 17, Skill.CHOPPER: 8, Skill.BUILDER: 8}

    def test_builder_group_mirror_is_chopper(self):
        counts = allocate_skill_counts(20, GroupLabel.CYAN)
        assert counts == {Skill.BUILDER: 10, Skill.CHOPPER: 5, Skill.MINER: 5}

    def test_majority_is_double_minority_when_divisible(self):
        for size in (20, 100):
            for group in GroupLabel:
                counts = allocate_skill_counts(size, group)
                majority = counts[group.majority_skill]
                others = [v for k, v in counts.items() if k != group.majority_skill]
                assert majority == 2 * others[0] == 2 * others[1]


class TestSizeValidation:
    @pytest.mark.parametrize("size", CANONICAL_SIZES + (12, 24, 60, 120))
    def test_accepted(self, size):
        validate_population_size(size)

    @pytest.mark.parametrize("size", (50, 7, 0, -12, 31))
    def test_rejected_with_guidance(self, size):
        with pytest.raises(PopulationError, match="multiple of 12"):
            validate_population_size(size)


class TestIdentityCode:
    def test_round_trip_and_obs(self):
        code = IdentityCode.from_string("1000000000000101")
        assert code.as_string == "1000000000000101"
        assert code.as_obs.shape == (CODE_LENGTH,)
        assert code.as_obs.dtype == np.float64
        np.testing.assert_array_equal(code.as_obs[:3], [1, 0, 0])
        assert code.group == GroupLabel.PURPLE

    def test_group_prefix_mapping(self):
        assert IdentityCode.from_string("0100000000000000").group == GroupLabel.YELLOW
        assert IdentityCode.from_string("0010000000000000").group == GroupLabel.CYAN
        assert IdentityCode.from_string("1100000000000000").group is None
        assert IdentityCode.from_string("0000000000000000").group is None

    def test_rejects_bad_codes(self):
        with pytest.raises(PopulationError):
            IdentityCode((0, 1))
        with pytest.raises(PopulationError):
            IdentityCode(tuple([2] * CODE_LENGTH))


class TestCorrelatedScheme:
    def test_composition_at_canonical_size(self):
        pop = build_population("correlated", 300, make_stream(1, "population"))
        assert len(pop.records) == 300
        for group in GroupLabel:
            members = pop.group_records(group)
            assert len(members) == 100
            counts = skill_counts(members)
            assert counts[group.majority_skill] == 50
            minorities = [v for k, v in counts.items() if k != group.majority_skill]
            assert sorted(minorities) == [25, 25]

    def test_prefixes_match_groups(self):
        pop = build_population("correlated", 60, make_stream(2, "population"))
        for record in pop.records:
            assert record.code.bits[:3] == record.group.prefix
            assert record.code.group == record.group

    def test_codes_unique_across_agents_and_probes(self):
        pop = build_population("correlated", 300, make_stream(3, "population"))
        codes = [r.code.bits for r in pop.records]
        probe_codes = [p.code.bits for ps in pop.probe_sets for p in ps.probes]
        combined = codes + probe_codes
        assert len(set(combined)) == len(combined)

    def test_probe_sets_per_group(self):
        pop = build_population("correlated", 30, make_stream(4, "population"))
        assert len(pop.probe_sets) == 3
        for ps in pop.probe_sets:
            assert len(ps.probes) == 10
            assert ps.truth_mix == 0.5
            counts = Counter(p.skill for p in ps.probes)
            assert counts[Skill.CHOPPER] == 5 and counts[Skill.MINER] == 5
            for p in ps.probes:
                assert p.code.group == ps.group


class TestRandomScheme:
    def test_balanced_thirds(self):
        pop = build_population("random", 30, make_stream(5, "population"))
        counts = skill_counts(pop.records)
        assert counts == {Skill.CHOPPER: 10, Skill.MINER: 10, Skill.BUILDER: 10}
        assert all(r.group is None for r in pop.records)

    def test_codes_unique(self):
        pop = build_population("random", 600, make_stream(6, "population"))
        codes = {r.code.bits for r in pop.records}
        assert len(codes) == 600

    def test_single_pooled_probe_set(self):
        pop = build_population("random", 30, make_stream(7, "population"))
        assert len(pop.probe_sets) == 1
        assert pop.probe_sets[0].group is None
        assert len(pop.probe_sets[0].probes) == 30

    def test_codes_carry_no_skill_information(self):
        # first-bit frequency among choppers pools to one half across seeds
        values = []
        for seed in range(80):
            pop = build_population("random", 30, make_stream(seed, "population"))
            values.extend(r.code.bits[0] for r in pop.records if r.skill == Skill.CHOPPER)
        assert abs(np.mean(values) - 0.5) < 0.05


class TestReplacementCohorts:
    def test_cohort_composition(self):
        rng = make_stream(8, "population")
        pop = build_population("correlated", 60, rng)
        before = len(pop.records)
        cohort = pop.make_replacement_cohort(GroupLabel.YELLOW, 4, wave=1, rng=rng)
        assert len(cohort) == 4
        assert len(pop.records) == before + 4
        counts = Counter(r.skill for r in cohort)
        assert counts == {Skill.CHOPPER: 2, Skill.MINER: 2}
        for r in cohort:
            assert r.group == GroupLabel.YELLOW
            assert r.wave == 1
            assert r.code.bits[:3] == GroupLabel.YELLOW.prefix

    def test_cohort_codes_are_fresh(self):
        rng = make_stream(9, "population")
        pop = build_population("correlated", 60, rng)
        existing = {r.code.bits for r in pop.records}
        existing |= {p.code.bits for ps in pop.probe_sets for p in ps.probes}
        cohort = pop.make_replacement_cohort(GroupLabel.PURPLE, 10, wave=2, rng=rng)
        assert all(r.code.bits not in existing for r in cohort)

    def test_odd_cohort_rejected(self):
        rng = make_stream(10, "population")
        pop = build_population("correlated", 60, rng)
        with pytest.raises(PopulationError, match="even"):
            pop.make_replacement_cohort(GroupLabel.PURPLE, 3, wave=1, rng=rng)

    def test_ids_continue(self):
        rng = make_stream(11, "population")
        pop = build_population("correlated", 30, rng)
        cohort = pop.make_replacement_cohort(GroupLabel.CYAN, 2, wave=1, rng=rng)
        ids = [r.agent_id for r in pop.records]
        assert len(set(ids)) == len(ids)
        assert cohort[0].agent_id == "a0030"


class TestDeterminism:
    def test_same_seed_same_roster(self):
        a = build_population("correlated", 100, make_stream(42, "population"))
        b = build_population("correlated", 100, make_stream(42, "population"))
        assert [(r.agent_id, r.code.bits, r.skill) for r in a.records] == [
            (r.agent_id, r.code.bits, r.skill) for r in b.records
        ]

    def test_different_seeds_differ(self):
        a = build_population("random", 30, make_stream(1, "population"))
        b = build_population("random", 30, make_stream(2, "population"))
        assert [r.code.bits for r in a.records] != [r.code.bits for r in b.records]


class TestManifest:
    def test_manifest_round_trip(self, tmp_path):
        pop = build_population("correlated", 30, make_stream(12, "population"))
        path = tmp_path / "manifest.csv"
        write_manifest(pop.records, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "agent_id,code,group,specialization,wave"
        assert len(lines) == 31
        first = lines[1].split(",")
        assert first[0] == "a0000"
        assert len(first[1]) == 16
        assert first[2] in ("purple", "yellow", "cyan")
