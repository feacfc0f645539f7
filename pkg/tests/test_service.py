import json
import threading
import time
from pathlib import Path

import pytest
import requests

from oddgrid import gridsynth, icons, service
from oddgrid.service import (
    AnnotationResponse,
    AnnotationService,
    DuplicateResponse,
    IncompleteSession,
    InsufficientSamples,
    OutOfBoundsCell,
    OutOfOrder,
    create_session,
    human_report,
    load_sessions,
    record_response,
)

from conftest import asset_from_svg, blob_svg

BANNED_KEYS = {
    "odd_row", "odd_col", "types", "delta_e", "base_lab", "odd_lab",
    "scale", "angle_deg", "dx_frac", "dy_frac",
}


@pytest.fixture(scope="module")
def universe(tmp_path_factory):
    """35 test records (5 per type) + 10 val records, images rendered."""
    out = tmp_path_factory.mktemp("svcdata")
    assets = [asset_from_svg(blob_svg(300 + i), icon_id=f"svc{i}") for i in range(3)]
    manifest = icons.IconManifest(source=icons.Source.TEST_VAL, assets=assets)
    plan = {
        "test": [(t, 5) for t in gridsynth.TYPE_KEYS],
        "val": [("Color", 5), ("Size", 5)],
    }
    records = gridsynth.build_dataset(777, {"test": manifest, "val": manifest}, plan=plan)
    by_id = {a.id: a for a in assets}
    for rec in records:
        gridsynth.write_image(rec, by_id[rec.icon_id], out)
    return out, records, {r.id: r for r in records}


def answer(session, records_by_id, correct=True):
    sid = session.items[session.cursor][0]
    rec = records_by_id[sid]
    if correct:
        row, col = rec.odd_row, rec.odd_col
    else:
        row = rec.odd_row % rec.grid.rows + 1
        col = rec.odd_col % rec.grid.cols + 1
    return AnnotationResponse(sid, row, col, latency_ms=10.0, timestamp=time.time())


def complete(session, records_by_id, wrong_every=0):
    i = 0
    while not session.completed:
        wrong = wrong_every and (i % wrong_every == 0)
        record_response(session, answer(session, records_by_id, correct=not wrong), records_by_id)
        i += 1


def test_create_session_composition(universe):
    _, records, by_id = universe
    s = create_session(records, "ann1", seed=5, per_type=3, practice_count=2)
    assert s.total == 23 and len(s.scored_ids()) == 21
    assert [p for _, p in s.items[:2]] == [True, True]
    from oddgrid.gridsynth import record_type_label

    labels = [record_type_label(by_id[sid]) for sid in s.scored_ids()]
    assert {labels.count(t) for t in gridsynth.TYPE_KEYS} == {3}
    practice_ids = [sid for sid, p in s.items if p]
    assert all(by_id[sid].split == "val" for sid in practice_ids)


def test_same_seed_same_items_across_annotators(universe):
    _, records, _ = universe
    a = create_session(records, "ann1", seed=9, per_type=2, practice_count=1)
    b = create_session(records, "ann2", seed=9, per_type=2, practice_count=1)
    c = create_session(records, "ann1", seed=10, per_type=2, practice_count=1)
    assert a.items == b.items
    assert a.items != c.items


def test_insufficient_samples(universe):
    _, records, _ = universe
    with pytest.raises(InsufficientSamples, match="Rotation|Color"):
        create_session(records, "x", seed=1, per_type=6, practice_count=0)
    test_only = [r for r in records if r.split == "test"]
    with pytest.raises(InsufficientSamples, match="practice"):
        create_session(test_only, "x", seed=1, per_type=2, practice_count=1)


def test_record_response_state_machine(universe):
    _, records, by_id = universe
    s = create_session(records, "sm", seed=3, per_type=2, practice_count=1)
    first = answer(s, by_id)
    assert record_response(s, first, by_id) == 1
    with pytest.raises(DuplicateResponse):
        record_response(s, first, by_id)
    future = AnnotationResponse(s.items[5][0], 1, 1, 0.0, time.time())
    with pytest.raises(OutOfOrder):
        record_response(s, future, by_id)
    sid = s.items[s.cursor][0]
    rec = by_id[sid]
    oob = AnnotationResponse(sid, rec.grid.rows + 3, 1, 0.0, time.time())
    with pytest.raises(OutOfBoundsCell):
        record_response(s, oob, by_id)
    assert s.cursor == 1  # failed submissions never advance


def test_persistence_survives_reload(universe, tmp_path):
    _, records, by_id = universe
    sessions_dir = tmp_path / "sessions"
    s = create_session(records, "crash", seed=4, per_type=2, practice_count=1)
    service.persist_created(sessions_dir, s)
    for _ in range(3):
        r = answer(s, by_id)
        record_response(s, r, by_id)
        service.persist_response(sessions_dir, s.session_id, r)
    loaded = load_sessions(sessions_dir)[s.session_id]
    assert loaded.cursor == 3
    assert loaded.items == s.items
    assert [r.stimulus_id for r in loaded.responses] == [r.stimulus_id for r in s.responses]


def test_human_report_means(universe):
    _, records, by_id = universe
    sessions = []
    for name, wrong_every in [("a1", 0), ("a2", 5), ("a3", 2)]:
        s = create_session(records, name, seed=6, per_type=3, practice_count=2)
        complete(s, by_id, wrong_every=wrong_every)
        sessions.append(s)
    hr = human_report(sessions, by_id)
    assert hr.per_annotator["a1"]["total"] == 1.0
    expected = (
        hr.per_annotator["a1"]["total"]
        + hr.per_annotator["a2"]["total"]
        + hr.per_annotator["a3"]["total"]
    ) / 3
    assert hr.mean_total == pytest.approx(expected)
    assert set(hr.mean_per_type) == set(gridsynth.TYPE_KEYS)


def test_practice_items_excluded_from_scoring(universe):
    _, records, by_id = universe
    s = create_session(records, "pr", seed=6, per_type=3, practice_count=2)
    # answer every practice item wrong, every scored item right
    while not s.completed:
        practice = s.items[s.cursor][1]
        record_response(s, answer(s, by_id, correct=not practice), by_id)
    hr = human_report([s], by_id)
    assert hr.per_annotator["pr"]["total"] == 1.0


def test_human_report_guards(universe):
    _, records, by_id = universe
    s = create_session(records, "inc", seed=6, per_type=2, practice_count=0)
    with pytest.raises(IncompleteSession):
        human_report([s], by_id)
    with pytest.raises(IncompleteSession):
        human_report([], by_id)
    s2 = create_session(records, "u1", seed=6, per_type=2, practice_count=0)
    s3 = create_session(records, "u2", seed=7, per_type=2, practice_count=0)
    complete(s2, by_id)
    complete(s3, by_id)
    with pytest.raises(ValueError, match="different stimulus"):
        human_report([s2, s3], by_id)


@pytest.fixture()
def live_service(universe, tmp_path):
    data_dir, records, _ = universe
    svc = AnnotationService(records, data_dir=data_dir, sessions_dir=tmp_path / "sessions")
    server = service.serve(svc, port=0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    host, port = server.server_address
    yield f"http://{host}:{port}", svc
    server.shutdown()
    server.server_close()


def test_http_full_session(live_service, universe):
    base, _ = live_service
    _, records, by_id = universe
    created = requests.post(
        f"{base}/sessions",
        json={"annotator_id": "web1", "seed": 12, "per_type": 2, "practice_count": 1},
    )
    assert created.status_code == 201
    sid = created.json()["session_id"]
    total = created.json()["total"]
    assert total == 15 and created.json()["practice_count"] == 1

    answered = 0
    while True:
        nxt = requests.get(f"{base}/sessions/{sid}/next").json()
        assert set(nxt) <= service.NEXT_PAYLOAD_KEYS
        assert not (set(nxt) & BANNED_KEYS)
        if nxt.get("done"):
            break
        img = requests.get(f"{base}{nxt['image_url']}")
        assert img.status_code == 200 and img.content[:4] == b"\x89PNG"
        rec = by_id[nxt["stimulus_id"]]
        assert (nxt["rows"], nxt["cols"]) == (rec.grid.rows, rec.grid.cols)
        resp = requests.post(
            f"{base}/sessions/{sid}/responses",
            json={"stimulus_id": nxt["stimulus_id"], "row": rec.odd_row,
                  "col": rec.odd_col, "latency_ms": 5},
        )
        assert resp.status_code == 200
        answered += 1
    assert answered == total
    status = requests.get(f"{base}/sessions/{sid}/status").json()
    assert status["completed"] is True and status["cursor"] == total


def test_http_error_statuses(live_service, universe):
    base, _ = live_service
    _, records, by_id = universe
    sid = requests.post(
        f"{base}/sessions",
        json={"annotator_id": "web2", "seed": 13, "per_type": 2, "practice_count": 0},
    ).json()["session_id"]
    nxt = requests.get(f"{base}/sessions/{sid}/next").json()
    rec = by_id[nxt["stimulus_id"]]
    bad = requests.post(
        f"{base}/sessions/{sid}/responses",
        json={"stimulus_id": nxt["stimulus_id"], "row": 99, "col": 1},
    )
    assert bad.status_code == 422
    ok = requests.post(
        f"{base}/sessions/{sid}/responses",
        json={"stimulus_id": nxt["stimulus_id"], "row": rec.odd_row, "col": rec.odd_col},
    )
    assert ok.status_code == 200
    dup = requests.post(
        f"{base}/sessions/{sid}/responses",
        json={"stimulus_id": nxt["stimulus_id"], "row": rec.odd_row, "col": rec.odd_col},
    )
    assert dup.status_code == 409
    assert requests.get(f"{base}/sessions/nope/status").status_code == 404


def test_http_payload_never_leaks_ground_truth(live_service):
    base, svc = live_service
    sid = requests.post(
        f"{base}/sessions",
        json={"annotator_id": "leakcheck", "seed": 14, "per_type": 1, "practice_count": 1},
    ).json()["session_id"]
    payload = requests.get(f"{base}/sessions/{sid}/next").json()
    assert set(payload) <= service.NEXT_PAYLOAD_KEYS
    raw = json.dumps(payload)
    for key in BANNED_KEYS:
        assert key not in raw
