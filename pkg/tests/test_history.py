from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fmkit.history import (
    AppendError,
    HistoryError,
    ReplacementLog,
    ReplacementRecord,
    UnknownSlotError,
    parse_timestamp,
)


def rec(slot, unit, action, at, performer="al", contractor="acme", note=None):
    return ReplacementRecord(slot, unit, action, at, performer, contractor, note)


def pump_log():
    """The P101 example: pump-1 serves, is replaced by pump-2."""
    log = ReplacementLog()
    log.append(rec("P101", "pump-1", "receive", "2021-03-01T08:00:00Z"))
    log.append(rec("P101", "pump-1", "install", "2021-03-02T09:30:00Z"))
    log.append(rec("P101", "pump-2", "receive", "2023-06-10T10:00:00Z"))
    log.append(rec("P101", "pump-1", "remove", "2023-06-11T07:15:00Z"))
    log.append(rec("P101", "pump-2", "install", "2023-06-11T13:45:00Z"))
    return log


def test_receive_then_install_accepted():
    log = ReplacementLog()
    log.append(rec("P101", "pump-1", "receive", "2021-03-01T08:00:00Z"))
    log.append(rec("P101", "pump-1", "install", "2021-03-02T09:30:00Z"))
    assert len(log.records) == 2


def test_install_while_occupied_rejected():
    log = ReplacementLog()
    log.append(rec("P101", "pump-1", "receive", "2021-03-01T08:00:00Z"))
    log.append(rec("P101", "pump-1", "install", "2021-03-02T09:30:00Z"))
    log.append(rec("P101", "pump-2", "receive", "2021-04-01T08:00:00Z"))
    with pytest.raises(AppendError) as exc:
        log.append(rec("P101", "pump-2", "install", "2021-04-02T08:00:00Z"))
    assert exc.value.code == "E_OCCUPIED"


def test_replacement_sequence_accepted():
    log = pump_log()
    assert [r.action for r in log.timeline("P101")] == [
        "receive", "install", "receive", "remove", "install",
    ]


def test_install_before_receive_rejected():
    log = ReplacementLog()
    with pytest.raises(AppendError) as exc:
        log.append(rec("P101", "pump-9", "install", "2021-03-02T09:30:00Z"))
    assert exc.value.code == "E_ORDER"


def test_remove_before_install_rejected():
    log = ReplacementLog()
    log.append(rec("P101", "pump-1", "receive", "2021-03-01T08:00:00Z"))
    with pytest.raises(AppendError) as exc:
        log.append(rec("P101", "pump-1", "remove", "2021-03-02T09:30:00Z"))
    assert exc.value.code == "E_ORDER"


def test_duplicate_record_rejected():
    log = ReplacementLog()
    log.append(rec("P101", "pump-1", "receive", "2021-03-01T08:00:00Z"))
    with pytest.raises(AppendError) as exc:
        log.append(rec("P101", "pump-1", "receive", "2021-03-01T08:00:00Z"))
    assert exc.value.code == "E_DUP"


def test_rejected_append_leaves_log_identical():
    log = pump_log()
    before = log.to_lines()
    with pytest.raises(AppendError):
        log.append(rec("P101", "pump-3", "install", "2024-01-01T00:00:00Z"))
    assert log.to_lines() == before


def test_installed_at_between_installs():
    log = pump_log()
    assert log.installed_at("P101", "2022-01-01T00:00:00Z") == "pump-1"


def test_installed_at_before_any_install():
    log = pump_log()
    assert log.installed_at("P101", "2020-01-01T00:00:00Z") is None


def test_installed_at_after_replacement():
    log = pump_log()
    assert log.installed_at("P101", "2024-01-01T00:00:00Z") == "pump-2"


def test_installed_at_during_swap_gap():
    log = pump_log()
    assert log.installed_at("P101", "2023-06-11T10:00:00Z") is None


def test_timeline_unknown_slot():
    log = pump_log()
    with pytest.raises(UnknownSlotError):
        log.timeline("P999")
    with pytest.raises(UnknownSlotError):
        log.installed_at("P999", "2024-01-01T00:00:00Z")


def test_two_slots_partition():
    log = pump_log()
    log.append(rec("V300", "valve-7", "receive", "2022-01-01T00:00:00Z"))
    log.append(rec("V300", "valve-7", "install", "2022-01-02T00:00:00Z"))
    assert {r.slot for r in log.timeline("P101")} == {"P101"}
    assert {r.slot for r in log.timeline("V300")} == {"V300"}
    assert len(log.timeline("V300")) == 2


def test_round_trip_lines():
    log = pump_log()
    text = log.to_lines()
    again = ReplacementLog.from_lines(text)
    assert again.to_lines() == text


def test_note_optional_and_preserved():
    log = ReplacementLog()
    log.append(rec("P101", "pump-1", "receive", "2021-03-01T08:00:00Z", note="spare from store"))
    reloaded = ReplacementLog.from_lines(log.to_lines())
    assert reloaded.records[0].note == "spare from store"


def test_bad_timestamp_rejected():
    with pytest.raises(HistoryError):
        rec("P101", "pump-1", "receive", "not-a-time")


def test_append_timestamped_between_existing_records():
    # A late-arriving record slots into the timeline by its timestamp; it
    # is accepted only when the rewritten history still follows the
    # lifecycle rules.
    log = ReplacementLog()
    log.append(rec("P101", "pump-1", "receive", "2021-03-01T00:00:00Z"))
    log.append(rec("P101", "pump-1", "install", "2021-03-03T00:00:00Z"))
    log.append(rec("P101", "pump-2", "receive", "2021-03-02T00:00:00Z"))
    assert [r.unit for r in log.timeline("P101")] == ["pump-1", "pump-2", "pump-1"]
    with pytest.raises(AppendError) as exc:
        # A removal dated before the install would corrupt the history.
        log.append(rec("P101", "pump-1", "remove", "2021-03-02T12:00:00Z"))
    assert exc.value.code == "E_ORDER"


def test_single_occupancy_sweep():
    log = pump_log()
    stamps = [r.timestamp for r in log.timeline("P101")]
    probes = []
    for ts in stamps:
        probes.extend([ts, ts.replace(second=(ts.second + 1) % 60)])
    for probe in probes:
        installed = [
            u for u in {"pump-1", "pump-2"}
            if log.installed_at("P101", probe) == u
        ]
        assert len(installed) <= 1


ACTIONS_FOR_UNITS = st.lists(
    st.tuples(
        st.sampled_from(["u1", "u2", "u3"]),
        st.sampled_from(["receive", "install", "remove"]),
        st.integers(0, 40),
    ),
    max_size=25,
)


def naive_installed_at(records, when):
    occupant = None
    for r in sorted(records, key=lambda r: r.timestamp):
        if r.timestamp > when:
            break
        if r.action == "install":
            occupant = r.unit
        elif r.action == "remove":
            occupant = None
    return occupant


@settings(max_examples=120, deadline=None)
@given(ACTIONS_FOR_UNITS, st.integers(0, 40))
def test_installed_at_matches_linear_scan(moves, probe_hour):
    log = ReplacementLog()
    for unit, action, hour in moves:
        try:
            log.append(rec("S", unit, action, f"2024-01-01T{hour % 24:02d}:{hour % 60:02d}:00Z"))
        except AppendError:
            pass
    when = parse_timestamp(f"2024-01-01T{probe_hour % 24:02d}:{probe_hour % 60:02d}:30Z")
    if not log.records:
        return
    assert log.installed_at("S", when) == naive_installed_at(log.records, when)
