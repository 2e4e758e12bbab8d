import json
import random
import struct
import threading
import urllib.request

import pytest
from hypothesis import given, strategies as st

from spreadmenot.authority import (AuthorityClient, CurveMismatch, InvalidCursor, ReportStore,
                                   ServiceConfig, Unauthorized, decode_frames, encode_frames,
                                   serve_in_thread)
from spreadmenot.authority.http import ServiceUnavailable
from spreadmenot.authority.store import StoredReport
from spreadmenot.beacon import gen_beacon, gen_key
from spreadmenot.ecc import SECP128R1, SECP256K1, TOY
from spreadmenot.report import PublishedReport
from spreadmenot.wire import MalformedEntry, encode_report_body

TOKEN = "t0ken"
DAY = 86_400


def entries(params, n, seed=0):
    rng = random.Random(seed)
    kp = gen_key(params, rng)
    return [gen_beacon(kp.P, rng)[0] for _ in range(n)]


def toy_body(seed, n):
    rng = random.Random(seed)
    x = rng.randrange(1, TOY.q)
    return encode_report_body(gen_beacon(x * TOY.G, r=rng.randrange(1, TOY.q))[0] for _ in range(n))


def test_submit_and_fetch():
    store = ReportStore(SECP128R1, tokens={TOKEN})
    es = entries(SECP128R1, 4)
    rid = store.submit_report(TOKEN, es, now=1000)
    page, cursor = store.fetch_reports(0)
    assert [r.report_id for r in page] == [rid]
    assert page[0].entries == es and page[0].entry_count == 4
    assert page[0].published_at == 1000
    assert store.fetch_reports(cursor) == ([], cursor)
    assert store.total_entries == 4 and len(store) == 1


def test_stored_record_has_no_identity_fields():
    assert set(StoredReport.__dataclass_fields__) == {"report_id", "seq", "published_at", "body", "params"}


def test_authorization_and_validation():
    store = ReportStore(SECP128R1, tokens={TOKEN})
    with pytest.raises(Unauthorized):
        store.submit_report("wrong", entries(SECP128R1, 1))
    with pytest.raises(Unauthorized):
        store.submit_report(None, entries(SECP128R1, 1))
    with pytest.raises(CurveMismatch):
        store.submit_report(TOKEN, entries(SECP256K1, 2))
    with pytest.raises(CurveMismatch):
        store.submit_report(TOKEN, encode_report_body(entries(SECP256K1, 2)))
    body = bytearray(encode_report_body(entries(SECP128R1, 3)))
    body[4 + 2 * 34 + 17] = 0x09  # V prefix of entry 2
    with pytest.raises(MalformedEntry) as info:
        store.submit_report(TOKEN, bytes(body))
    assert info.value.index == 2
    assert len(store) == 0


def test_duplicate_submission_is_idempotent():
    store = ReportStore(TOY, tokens={TOKEN})
    body = toy_body(1, 5)
    a = store.submit_report(TOKEN, body, now=100)
    assert store.submit_report(TOKEN, body, now=200) == a
    assert len(store) == 1
    # outside the dedup window it is a new publication
    assert store.submit_report(TOKEN, body, now=100 + 2 * DAY) != a


def test_invalid_cursors():
    store = ReportStore(TOY, tokens={TOKEN})
    store.submit_report(TOKEN, toy_body(1, 2))
    with pytest.raises(InvalidCursor):
        store.fetch_reports(-1)
    with pytest.raises(InvalidCursor):
        store.fetch_reports(99)
    with pytest.raises(ValueError):
        store.fetch_reports(0, 0)


@given(st.integers(min_value=1, max_value=40), st.integers(min_value=1, max_value=15))
def test_pagination_visits_each_report_once(n, page_size):
    store = ReportStore(TOY, tokens={TOKEN})
    for i in range(n):
        store.submit_report(TOKEN, toy_body(i, 1 + i % 3), now=i)
    seen, cursor = [], 0
    while True:
        page, cursor = store.fetch_reports(cursor, page_size)
        if not page:
            break
        seen.extend(r.seq for r in page)
        assert len(page) <= page_size
    assert seen == sorted(seen) and len(seen) == len(set(seen)) == n


def test_retention_purge():
    store = ReportStore(TOY, tokens={TOKEN}, retention_window=14 * DAY)
    old = store.submit_report(TOKEN, toy_body(1, 2), now=0)
    new = store.submit_report(TOKEN, toy_body(2, 2), now=10 * DAY)
    assert store.purge_expired(now=14 * DAY) == 0
    assert store.purge_expired(now=14 * DAY + 1) == 1
    assert [r.report_id for r in store.iter_reports()] == [new]
    assert old not in {r.report_id for r in store.iter_reports()}


def test_cursor_survives_purge():
    store = ReportStore(TOY, tokens={TOKEN}, retention_window=DAY)
    for i in range(5):
        store.submit_report(TOKEN, toy_body(i, 1), now=i * DAY)
    page, cursor = store.fetch_reports(0, 2)
    store.purge_expired(now=4 * DAY)
    rest = list(store.iter_reports(cursor))
    assert [r.seq for r in rest] == [4, 5]


def test_log_replay_restores_state(tmp_path):
    path = tmp_path / "reports.log"
    with ReportStore(TOY, tokens={TOKEN}, log_path=path, retention_window=DAY) as store:
        ids = [store.submit_report(TOKEN, toy_body(i, 3), now=i * DAY) for i in range(4)]
        store.purge_expired(now=3 * DAY)
        before = [(r.report_id, r.seq, r.published_at, r.body) for r in store.iter_reports()]
    with ReportStore(TOY, tokens={TOKEN}, log_path=path, retention_window=DAY) as again:
        after = [(r.report_id, r.seq, r.published_at, r.body) for r in again.iter_reports()]
        assert after == before and [a[0] for a in after] == ids[2:]
        nxt = again.submit_report(TOKEN, toy_body(9, 1), now=5 * DAY)
        assert again.fetch_reports(4)[0][0].report_id == nxt


def test_truncated_log_tail_is_ignored(tmp_path):
    path = tmp_path / "reports.log"
    with ReportStore(TOY, tokens={TOKEN}, log_path=path) as store:
        store.submit_report(TOKEN, toy_body(1, 2), now=1)
        store.submit_report(TOKEN, toy_body(2, 2), now=2)
    data = path.read_bytes()
    path.write_bytes(data[:-3])
    with ReportStore(TOY, tokens={TOKEN}, log_path=path) as again:
        assert len(again) == 1


def test_readers_see_consistent_snapshots_during_writes():
    store = ReportStore(TOY, tokens={TOKEN})
    stop = threading.Event()
    problems = []

    def reader():
        while not stop.is_set():
            seqs = [r.seq for r in store.iter_reports(page_size=7)]
            if seqs != sorted(set(seqs)) or seqs != list(range(1, len(seqs) + 1)):
                problems.append(seqs)

    threads = [threading.Thread(target=reader) for _ in range(3)]
    for t in threads:
        t.start()
    writers = [threading.Thread(target=lambda k=k: [store.submit_report(TOKEN, toy_body(k * 1000 + i, 2), now=k)
                                                    for i in range(50)]) for k in range(3)]
    for w in writers:
        w.start()
    for w in writers:
        w.join()
    stop.set()
    for t in threads:
        t.join()
    assert not problems
    assert len(store) == 150


def test_frame_codec_round_trip():
    store = ReportStore(SECP128R1, tokens={TOKEN})
    for i in range(3):
        store.submit_report(TOKEN, entries(SECP128R1, i + 1, seed=i), now=50 + i)
    page, cursor = store.fetch_reports(0)
    reports, nxt = decode_frames(SECP128R1, encode_frames(page, cursor))
    assert nxt == cursor
    assert [(r.report_id, r.published_at, r.entries) for r in reports] == \
        [(s.report_id, s.published_at, s.entries) for s in page]


@pytest.fixture
def server():
    store = ReportStore(SECP128R1, tokens={TOKEN})
    srv, url = serve_in_thread(store)
    yield store, url
    srv.shutdown()
    srv.server_close()


def test_http_round_trip(server):
    store, url = server
    up = AuthorityClient(url, SECP128R1, TOKEN)
    ids = [up.submit(PublishedReport(entries(SECP128R1, 3, seed=i))) for i in range(5)]
    down = AuthorityClient(url, SECP128R1)
    reports, cursor = down.fetch_all(limit=2)
    assert [r.report_id for r in reports] == ids
    assert reports[0].entries == entries(SECP128R1, 3, seed=0)
    assert down.fetch(cursor) == ([], cursor)


def test_http_errors(server):
    store, url = server
    with pytest.raises(Unauthorized):
        AuthorityClient(url, SECP128R1, "nope").submit(entries(SECP128R1, 1))
    with pytest.raises(CurveMismatch):
        AuthorityClient(url, SECP256K1, TOKEN).submit(entries(SECP256K1, 1))
    with pytest.raises(InvalidCursor):
        AuthorityClient(url, SECP128R1).fetch(cursor=12)
    body = bytearray(encode_report_body(entries(SECP128R1, 2)))
    body[4 + 34] = 0x01
    with pytest.raises(MalformedEntry) as info:
        AuthorityClient(url, SECP128R1, TOKEN).submit(bytes(body))
    assert info.value.index == 1


def test_health_endpoint(server):
    store, url = server
    with urllib.request.urlopen(f"{url}/v1/health") as resp:
        doc = json.loads(resp.read())
    assert doc["curve"] == "secp128r1"


def test_unreachable_service():
    with pytest.raises(ServiceUnavailable):
        AuthorityClient("http://127.0.0.1:9", SECP128R1, timeout=2).fetch()


def test_service_config(tmp_path):
    path = tmp_path / "svc.yaml"
    path.write_text("curve: toy\nretention_days: 7\nlisten: 0.0.0.0:9000\ntokens: [a, b]\n")
    cfg = ServiceConfig.load(path, env={})
    assert (cfg.curve, cfg.retention_days, cfg.host_port, cfg.tokens) == ("toy", 7, ("0.0.0.0", 9000), ["a", "b"])
    cfg = ServiceConfig.load(path, env={"SPREADMENOT_TOKENS": "x,y", "SPREADMENOT_RETENTION_DAYS": "3"})
    assert cfg.tokens == ["x", "y"] and cfg.retention_days == 3.0
    path.write_text("colour: blue\n")
    with pytest.raises(ValueError):
        ServiceConfig.load(path, env={})
    with pytest.raises(ValueError):
        ServiceConfig.load(None, env={"SPREADMENOT_CURVE": "p256"})


def test_frames_header_layout():
    assert encode_frames([], 7) == struct.pack(">QI", 7, 0)
