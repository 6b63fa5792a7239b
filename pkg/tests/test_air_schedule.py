import numpy as np
import pytest

from aircell.air_schedule import (
    DATA,
    DISTRIBUTED,
    INDEX,
    NONE,
    ONCE_PER_CYCLE,
    PAD,
    IndexScheme,
    NotApplicable,
    NotBroadcast,
    build_program,
    expected_index_wait,
    locate,
    next_index_read_end,
    one_m,
)

OBJS4 = ["a", "b", "c", "d"]


def kinds(program, channel=0):
    return [s.kind for s in program.channels[channel]]


class TestLayouts:
    def test_no_indexing(self):
        p = build_program(OBJS4, 1, NONE)
        assert p.cycle_len_slots == 4
        assert kinds(p) == [DATA] * 4
        assert [s.object_id for s in p.channels[0]] == OBJS4

    def test_distributed_alternates(self):
        p = build_program(OBJS4, 1, DISTRIBUTED)
        assert p.cycle_len_slots == 8
        assert kinds(p) == [INDEX, DATA] * 4

    def test_once_per_cycle(self):
        p = build_program(OBJS4, 1, ONCE_PER_CYCLE)
        assert p.cycle_len_slots == 5
        assert kinds(p) == [INDEX] + [DATA] * 4

    def test_two_replica_layout(self):
        p = build_program(OBJS4, 1, one_m(2))
        assert p.cycle_len_slots == 6
        assert kinds(p) == [INDEX, DATA, DATA, INDEX, DATA, DATA]
        assert [s.object_id for s in p.channels[0] if s.kind == DATA] == OBJS4

    def test_four_replica_layout(self):
        p = build_program(OBJS4, 1, one_m(4))
        assert p.cycle_len_slots == 8
        assert kinds(p) == [INDEX, DATA] * 4

    def test_replicas_capped_at_object_count(self):
        p = build_program(["a", "b"], 1, one_m(5))
        assert p.index_segment_count() == 2

    def test_invalid_scheme_rejected(self):
        with pytest.raises(ValueError):
            IndexScheme("bogus")
        with pytest.raises(ValueError):
            one_m(0)


class TestLengthRelations:
    @pytest.mark.parametrize("n", [4, 6, 8])
    def test_ordering_across_schemes(self, n):
        objs = [f"o{i}" for i in range(n)]
        l_none = build_program(objs, 1, NONE).cycle_len_slots
        l_dist = build_program(objs, 1, DISTRIBUTED).cycle_len_slots
        lengths = [build_program(objs, 1, one_m(m)).cycle_len_slots for m in range(1, n + 1)]
        assert all(l_none <= lm <= l_dist for lm in lengths)
        assert all(b > a for a, b in zip(lengths, lengths[1:]))


class TestMultiChannel:
    def test_round_robin_and_padding(self):
        objs = [f"o{i}" for i in range(10)]
        p = build_program(objs, 3, NONE)
        assert p.n_channels == 3
        assert len({len(ch) for ch in p.channels}) == 1
        placed = [s.object_id for ch in p.channels for s in ch if s.kind == DATA]
        assert sorted(placed) == sorted(objs)
        assert p.directory["o0"] == (0, 0)
        assert p.directory["o1"] == (1, 0)
        assert p.directory["o2"] == (2, 0)
        assert p.directory["o3"] == (0, 1)
        assert sum(1 for ch in p.channels for s in ch if s.kind == PAD) == 2

    def test_index_positions_agree_across_channels(self):
        objs = [f"o{i}" for i in range(10)]
        p = build_program(objs, 3, one_m(2))
        positions = {tuple(p.index_slots(ch)) for ch in range(3)}
        assert len(positions) == 1

    def test_dedicated_index_channel(self):
        objs = [f"o{i}" for i in range(6)]
        p = build_program(objs, 3, one_m(2), dedicated_index_channel=True)
        assert all(s.kind == INDEX for s in p.channels[0])
        assert all(s.kind != INDEX for ch in p.channels[1:] for s in ch)
        assert p.index_segment_count() == p.cycle_len_slots
        assert expected_index_wait(p) == 0.5


class TestIndexWait:
    def test_formula_values(self):
        six = [f"o{i}" for i in range(6)]
        p2 = build_program(six, 1, one_m(2))
        assert p2.cycle_len_slots == 8
        assert expected_index_wait(p2) == 2.0
        seven = [f"o{i}" for i in range(7)]
        p1 = build_program(seven, 1, ONCE_PER_CYCLE)
        assert p1.cycle_len_slots == 8
        assert expected_index_wait(p1) == 4.0

    def test_not_applicable_without_aggregate_index(self):
        for scheme in (NONE, DISTRIBUTED):
            p = build_program(OBJS4, 1, scheme)
            with pytest.raises(NotApplicable):
                expected_index_wait(p)

    @pytest.mark.parametrize("m", [1, 2, 4])
    def test_empirical_wait_matches_formula(self, m, rng):
        objs = [f"o{i}" for i in range(8)]
        p = build_program(objs, 1, one_m(m))
        length = p.cycle_len_slots
        positions = np.array(p.index_slots(0))
        starts = rng.uniform(0, length, size=50_000)
        waits = np.min((positions[None, :] - starts[:, None]) % length, axis=1)
        assert abs(waits.mean() - expected_index_wait(p)) / expected_index_wait(p) < 0.02

    def test_empirical_data_wait_is_half_cycle(self, rng):
        objs = [f"o{i}" for i in range(8)]
        p = build_program(objs, 1, NONE)
        length = p.cycle_len_slots
        slot = p.directory["o3"][1]
        starts = rng.uniform(0, length, size=50_000)
        waits = (slot - starts) % length
        assert abs(waits.mean() - length / 2) / (length / 2) < 0.02


class TestLocate:
    def test_same_cycle(self):
        p = build_program(OBJS4, 1, NONE)
        entry = locate(p, index_read_slot=0, object_id="d")
        assert (entry.channel, entry.slot) == (0, 3)

    def test_wraps_to_next_cycle(self):
        p = build_program(OBJS4, 1, NONE)
        entry = locate(p, index_read_slot=2, object_id="b")
        assert entry.slot == p.cycle_len_slots + 1

    def test_strictly_after_read(self):
        p = build_program(OBJS4, 1, NONE)
        entry = locate(p, index_read_slot=1, object_id="b")
        assert entry.slot == p.cycle_len_slots + 1

    def test_unknown_object(self):
        p = build_program(OBJS4, 1, NONE)
        with pytest.raises(NotBroadcast):
            locate(p, 0, "zzz")

    def test_every_object_locatable_from_every_slot(self):
        objs = [f"o{i}" for i in range(9)]
        p = build_program(objs, 3, one_m(3))
        for read_end in range(2 * p.cycle_len_slots):
            for obj in objs:
                entry = locate(p, read_end, obj)
                assert entry.slot > read_end
                channel, cycle_slot = p.directory[obj]
                assert entry.channel == channel
                assert entry.slot % p.cycle_len_slots == cycle_slot

    def test_next_index_read_end(self):
        p = build_program([f"o{i}" for i in range(6)], 1, one_m(2))
        assert p.index_slots(0) == [0, 4]
        assert next_index_read_end(p, 0) == 0
        assert next_index_read_end(p, 1) == 4
        assert next_index_read_end(p, 5) == 8
        with pytest.raises(NotApplicable):
            next_index_read_end(build_program(OBJS4, 1, NONE), 0)
