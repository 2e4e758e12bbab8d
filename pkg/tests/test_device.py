import random

import pytest

from spreadmenot.beacon import gen_beacon, gen_key, test_beacon as owns
from spreadmenot.device import (ContactRecord, DeviceAgent, DeviceConfig, Disposition, check_exposure,
                                load_contacts, prepare_report, save_contacts)
from spreadmenot.ecc import SECP128R1, SECP256K1, TOY, count_scalar_muls
from spreadmenot.pool import precompute_pool_fill
from spreadmenot.signed import SignedBeacon, encode_signed_beacon
from spreadmenot.wire import DecodeError, Location

T0 = 1_700_000_000
HERE = Location.from_degrees(45.0, 7.0)
FAR = Location.from_degrees(45.1, 7.0)  # about 11 km north


def agent(params=SECP128R1, seed=0, **kw):
    rng = random.Random(seed)
    return DeviceAgent(gen_key(params, rng), rng=rng, **kw)


def feed(receiver, sender, start, count, step=150, distance=1.0, where=HERE):
    out = []
    for i in range(count):
        t = start + i * step
        sb = sender.broadcast(t, where)
        out.append(receiver.on_receive(encode_signed_beacon(sb), t, where, distance))
    return out


def test_promotion_after_enough_receptions_and_time():
    a, b = agent(seed=1), agent(seed=2)
    # 5 receptions spanning 600 s
    disps = feed(b, a, T0, 5)
    assert disps[:4] == [Disposition.ACCEPTED_STAGED] * 4
    assert disps[4] is Disposition.PROMOTED
    assert len(b.contacts) == 1
    rec = next(iter(b.contacts.values()))
    assert rec.reception_count == 5 and rec.first_seen == T0 and rec.last_seen == T0 + 600
    assert owns(rec.beacon, a.keypair.x)
    # later receptions refresh the stored contact
    assert feed(b, a, T0 + 750, 1) == [Disposition.CONTACT_REFRESHED]


def test_many_receptions_in_short_time_stay_staged():
    a, b = agent(seed=1), agent(seed=2)
    assert set(feed(b, a, T0, 20, step=10)) == {Disposition.ACCEPTED_STAGED}
    assert not b.contacts


def test_long_time_but_few_receptions_stay_staged():
    cfg = DeviceConfig(rotation_interval=3600)
    a, b = agent(seed=1, config=cfg), agent(seed=2, config=cfg)
    assert set(feed(b, a, T0, 4, step=300)) == {Disposition.ACCEPTED_STAGED}


def test_one_signature_verification_per_promotion():
    a, b = agent(seed=1), agent(seed=2)
    feed(b, a, T0, 4)
    assert b.signature_verifications == 0
    feed(b, a, T0 + 600, 1)
    assert b.signature_verifications == 1
    feed(b, a, T0 + 750, 3)
    assert b.signature_verifications == 1


def test_rejection_reasons():
    a, b = agent(seed=1), agent(seed=2)
    sb = a.broadcast(T0, HERE)
    raw = encode_signed_beacon(sb)
    assert b.on_receive(raw, T0 + 11, HERE, 1.0) is Disposition.REJECTED_STALE_TIMESTAMP
    assert b.on_receive(raw, T0 - 11, HERE, 1.0) is Disposition.REJECTED_STALE_TIMESTAMP
    assert b.on_receive(raw, T0 + 10, HERE, 1.0) is Disposition.ACCEPTED_STAGED
    assert b.on_receive(raw, T0, FAR, 1.0) is Disposition.REJECTED_REMOTE_LOCATION
    assert b.on_receive(raw, T0, HERE, 2.5) is Disposition.REJECTED_TOO_FAR
    assert b.on_receive(raw[:-1], T0, HERE, 1.0) is Disposition.REJECTED_MALFORMED
    assert Disposition.REJECTED_TOO_FAR.reason == "too-far"
    assert Disposition.PROMOTED.reason is None


def test_forged_signature_rejected_at_promotion():
    a, b = agent(seed=1), agent(seed=2)
    for i in range(5):
        t = T0 + i * 150
        sb = a.broadcast(t, HERE)
        forged = SignedBeacon(sb.location, sb.timestamp, sb.beacon, (sb.sigma[0], sb.sigma[1] ^ 1))
        disp = b.on_receive(forged, t, HERE, 1.0)
    assert disp is Disposition.REJECTED_BAD_SIGNATURE
    assert not b.contacts and not b.pending


def test_ablation_switches_accept_everything():
    a = agent(seed=1)
    b = agent(seed=2, check_freshness=False, check_location=False, check_signature=False)
    sb = a.broadcast(T0, HERE)
    for i in range(5):
        forged = SignedBeacon(sb.location, sb.timestamp, sb.beacon, (1, 1))
        disp = b.on_receive(forged, T0 + 3600 + i * 150, FAR, 0.5)
    assert disp is Disposition.PROMOTED
    assert b.signature_verifications == 0
    assert not next(iter(b.contacts.values())).verified


def test_rotation_schedule():
    a = agent(seed=1)
    first = a.broadcast(T0, HERE).beacon
    assert a.broadcast(T0 + 899, HERE).beacon == first
    assert a.broadcast(T0 + 900, HERE).beacon != first
    with pytest.raises(ValueError):
        a.rotate_beacon(T0 + 901, HERE)


def test_each_transmission_is_freshly_signed():
    a = agent(seed=1)
    s1, s2 = a.broadcast(T0, HERE), a.broadcast(T0 + 2, HERE)
    assert s1.beacon == s2.beacon
    assert s1.timestamp != s2.timestamp and s1.sigma != s2.sigma


def test_pool_backed_rotation_and_online_fallback():
    kp = gen_key(SECP256K1, random.Random(1))
    pool = precompute_pool_fill(kp, 1, random.Random(2))
    a = DeviceAgent(kp, rng=random.Random(3), pool=pool)
    with count_scalar_muls() as c:
        a.rotate_beacon(T0, HERE)
    assert c.count == 0
    a.rotate_beacon(T0 + 900, HERE)  # pool is empty now
    assert owns(a.current, kp.x)


def test_staged_sightings_are_evicted():
    a, b = agent(seed=1), agent(seed=2)
    feed(b, a, T0, 2)
    assert len(b.pending) == 1
    assert b.evict_stale(T0 + 3 * 900 + 1) == 1
    assert not b.pending


def test_contacts_expire_after_retention_window():
    a, b = agent(seed=1), agent(seed=2)
    feed(b, a, T0, 5)
    last = T0 + 600
    assert b.expire_contacts(last + 14 * 86400) == 0
    assert b.expire_contacts(last + 14 * 86400 + 1) == 1
    assert not b.contacts


def test_stored_beacons_are_rerandomized_once():
    a, b = agent(seed=1), agent(seed=2)
    feed(b, a, T0, 5)
    received = next(iter(b.contacts))
    b.maintain(T0 + 900)
    stored = b.contacts[received].beacon
    assert stored.to_bytes() != received
    assert owns(stored, a.keypair.x)
    assert b.refresh_stored_beacons() == 0
    # the original bytes still key the record, so later receptions refresh it
    assert feed(b, a, T0 + 700, 1) == [Disposition.CONTACT_REFRESHED]


def records_for(owner_keys, per_key, rng, params=SECP128R1):
    out = []
    for kp in owner_keys:
        for _ in range(per_key):
            out.append(ContactRecord(gen_beacon(kp.P, rng)[0], T0, T0 + 600, 5))
    return out


def test_prepare_report_is_permuted_rerandomized_and_bare():
    rng = random.Random(5)
    keys = [gen_key(SECP128R1, rng) for _ in range(4)]
    records = records_for(keys, 5, rng)
    report = prepare_report(records, rng)
    assert len(report) == 20
    original = {r.beacon.to_bytes() for r in records}
    assert not original & {e.to_bytes() for e in report.entries}
    for kp in keys:
        assert sum(owns(e, kp.x) for e in report.entries) == 5
    assert report.report_id is None and report.published_at is None


def test_prepare_report_on_toy_avoids_stored_bytes():
    rng = random.Random(6)
    kp = gen_key(TOY, rng)
    records = [ContactRecord(gen_beacon(kp.P, r=r)[0], 0, 0, 1) for r in range(1, 31)]
    stored = {r.beacon.to_bytes() for r in records}
    report = prepare_report(records, rng)
    assert not stored & {e.to_bytes() for e in report.entries}


def test_prepare_report_terminates_when_collisions_are_unavoidable():
    # all 100 beacons of one toy key stored: every re-randomization hits one
    kp = gen_key(TOY, x=4)
    records = [ContactRecord(gen_beacon(kp.P, r=r)[0], 0, 0, 1) for r in range(1, TOY.q)]
    report = prepare_report(records, random.Random(1))
    assert len(report) == TOY.q - 1
    assert all(owns(e, kp.x) for e in report.entries)


def test_check_exposure_finds_only_own_entries():
    rng = random.Random(7)
    me, other = gen_key(SECP128R1, rng), gen_key(SECP128R1, rng)
    records = records_for([me], 2, rng) + records_for([other], 3, rng)
    report = prepare_report(records, rng)
    report.report_id = "r1"
    hits = check_exposure(me, [report])
    assert len(hits) == 2 and all(rid == "r1" for rid, _ in hits)
    assert all(owns(report.entries[i], me.x) for _, i in hits)
    fresh = gen_key(SECP128R1, rng)
    assert check_exposure(fresh, [report]) == []


def test_reporter_never_matches_itself():
    a, b = agent(seed=1), agent(seed=2)
    feed(b, a, T0, 5)
    feed(a, b, T0, 5)
    report = b.prepare_report()
    assert b.check_exposure([report]) == []
    assert len(a.check_exposure([report])) == 1


def test_contact_file_round_trip(tmp_path):
    rng = random.Random(8)
    kp = gen_key(SECP256K1, rng)
    records = records_for([kp], 3, rng)
    records[1].verified = False
    path = tmp_path / "contacts.bin"
    save_contacts(path, SECP256K1, records)
    params, back = load_contacts(path)
    assert params is SECP256K1
    assert back == records


def test_contact_file_errors(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"nope")
    with pytest.raises(DecodeError):
        load_contacts(path)
    good = tmp_path / "good.bin"
    save_contacts(good, TOY, [ContactRecord(gen_beacon(TOY.G, r=3)[0], 0, 0, 1)])
    good.write_bytes(good.read_bytes()[:-2])
    with pytest.raises(DecodeError):
        load_contacts(good)
    b = agent(params=SECP128R1)
    save_contacts(tmp_path / "toy.bin", TOY, [])
    with pytest.raises(ValueError):
        b.load_contacts(tmp_path / "toy.bin")


def test_config_validation():
    with pytest.raises(ValueError):
        DeviceConfig(proximity_threshold=0)
    with pytest.raises(ValueError):
        DeviceConfig(significance_min_duration=30 * 86400)
    assert DeviceConfig().staging_lifetime == 2700
