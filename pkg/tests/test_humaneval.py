import json

import pytest
from fastapi.testclient import TestClient

from finextract.backend import MockBackend, run_batch
from finextract.corpus import CorpusSpec, generate_corpus
from finextract.errors import DegenerateInputError, DuplicateRatingError
from finextract.humaneval import (RatingRecord, RatingStore, aggregate,
                                  build_manifest, sample_instances,
                                  save_manifest)
from finextract.humaneval.server import create_app
from finextract.structout import Prediction, parse_output


@pytest.fixture()
def dataset():
    return generate_corpus(CorpusSpec(n_instances=30, seed=51))


def predictions_for(dataset, mode):
    outs = run_batch(MockBackend(mode=mode), dataset)
    by_id = {i.id: i for i in dataset}
    return [Prediction(instance_id=o.instance_id, raw_output=o.raw_text,
                       parsed=parse_output(o.raw_text, by_id[o.instance_id].text))
            for o in outs]


@pytest.fixture()
def run_dir(tmp_path, dataset):
    preds = {"modelx": predictions_for(dataset, "echo"),
             "modely": predictions_for(dataset, "empty")}
    manifest, key = build_manifest(dataset, preds, n=10, seed=3)
    save_manifest(manifest, key, tmp_path)
    return tmp_path


class TestSampling:
    def test_full_sample_is_permutation(self, dataset):
        got = sample_instances(dataset, len(dataset), seed=1)
        assert sorted(i.id for i in got) == sorted(i.id for i in dataset)

    def test_deterministic_in_seed(self, dataset):
        a = [i.id for i in sample_instances(dataset, 10, seed=5)]
        b = [i.id for i in sample_instances(dataset, 10, seed=5)]
        assert a == b

    def test_different_seeds_differ(self):
        big = generate_corpus(CorpusSpec(n_instances=1000, seed=8))
        a = [i.id for i in sample_instances(big, 100, seed=1)]
        b = [i.id for i in sample_instances(big, 100, seed=2)]
        assert a != b

    def test_oversample_rejected(self, dataset):
        with pytest.raises(ValueError):
            sample_instances(dataset, len(dataset) + 1, seed=0)

    def test_blinding_map_bijective_and_round_trips(self, dataset):
        preds = {"sysa": predictions_for(dataset, "echo"),
                 "sysb": predictions_for(dataset, "empty")}
        manifest, key = build_manifest(dataset, preds, n=12, seed=9)
        for sample in manifest:
            mapping = key[sample.sample_id]
            assert set(mapping) == {"A", "B"}
            assert set(mapping.values()) == {"sysa", "sysb"}

    def test_blinding_not_constant(self, dataset):
        preds = {"sysa": predictions_for(dataset, "echo"),
                 "sysb": predictions_for(dataset, "empty")}
        _, key = build_manifest(dataset, preds, n=20, seed=4)
        labels = {m["A"] for m in key.values()}
        assert labels == {"sysa", "sysb"}


class TestRatingStore:
    def test_score_out_of_range(self, tmp_path):
        store = RatingStore(tmp_path / "r.jsonl")
        with pytest.raises(ValueError):
            store.record(RatingRecord("s0", "ann1", "A", 6))

    def test_duplicate_rejected(self, tmp_path):
        store = RatingStore(tmp_path / "r.jsonl")
        store.record(RatingRecord("s0", "ann1", "A", 4))
        with pytest.raises(DuplicateRatingError):
            store.record(RatingRecord("s0", "ann1", "A", 2))

    def test_persisted_append_only_and_reloadable(self, tmp_path):
        path = tmp_path / "r.jsonl"
        store = RatingStore(path)
        store.record(RatingRecord("s0", "ann1", "A", 4))
        store.record(RatingRecord("s0", "ann1", "B", 2))
        reloaded = RatingStore(path)
        assert len(reloaded.ratings()) == 2
        with pytest.raises(DuplicateRatingError):
            reloaded.record(RatingRecord("s0", "ann1", "A", 5))


class TestAggregate:
    def test_direct_arithmetic(self, tmp_path):
        store = RatingStore(tmp_path / "r.jsonl")
        key = {"s0": {"A": "gen", "B": "base"},
               "s1": {"A": "base", "B": "gen"}}
        store.record(RatingRecord("s0", "ann1", "A", 5))
        store.record(RatingRecord("s1", "ann1", "B", 4))
        store.record(RatingRecord("s0", "ann2", "A", 3))
        report = aggregate(store, key)
        gen = report.systems["gen"]
        assert gen.average == 4.0
        assert gen.pct_ge4 == pytest.approx(66.7)

    def test_all_fives(self, tmp_path):
        store = RatingStore(tmp_path / "r.jsonl")
        key = {"s0": {"A": "gen", "B": "base"}}
        store.record(RatingRecord("s0", "a1", "A", 5))
        store.record(RatingRecord("s0", "a2", "A", 5))
        report = aggregate(store, key)
        assert report.systems["gen"].average == 5.0
        assert report.systems["gen"].pct_ge4 == 100.0

    def test_empty_store_degenerate(self, tmp_path):
        store = RatingStore(tmp_path / "r.jsonl")
        with pytest.raises(DegenerateInputError):
            aggregate(store, {})

    def test_insertion_order_invariant(self, tmp_path):
        ratings = [("s0", "a1", "A", 5), ("s0", "a2", "A", 3),
                   ("s1", "a1", "B", 4), ("s1", "a2", "B", 2)]
        key = {"s0": {"A": "gen", "B": "base"},
               "s1": {"A": "base", "B": "gen"}}
        reports = []
        for order in (ratings, ratings[::-1]):
            store = RatingStore(tmp_path / f"r{len(reports)}.jsonl")
            for rec in order:
                store.record(RatingRecord(*rec))
            reports.append(aggregate(store, key).to_dict()["systems"])
        assert reports[0] == reports[1]


class TestServer:
    def client(self, run_dir, allow_report=False):
        return TestClient(create_app(run_dir, allow_report=allow_report))

    def test_sample_payloads_contain_no_deblinding_data(self, run_dir):
        client = self.client(run_dir)
        key = json.loads((run_dir / "key.json").read_text())
        system_names = {name for m in key.values() for name in m.values()}
        listing = client.get("/api/samples", params={"annotator": "a1"}).json()
        for item in listing:
            sample = client.get(f"/api/samples/{item['sample_id']}",
                                params={"annotator": "a1"})
            blob = sample.text
            for name in system_names:
                assert name not in blob

    def test_post_rating_and_progress(self, run_dir):
        client = self.client(run_dir)
        listing = client.get("/api/samples", params={"annotator": "a1"}).json()
        sid = listing[0]["sample_id"]
        for label in ("A", "B"):
            resp = client.post("/api/ratings", json={
                "sample_id": sid, "annotator_id": "a1",
                "system_label": label, "score": 4})
            assert resp.status_code == 201
        progress = client.get("/api/progress", params={"annotator": "a1"}).json()
        assert progress == {"rated": 1, "total": 10}

    def test_duplicate_rating_conflict(self, run_dir):
        client = self.client(run_dir)
        body = {"sample_id": "s0000", "annotator_id": "a1",
                "system_label": "A", "score": 5}
        assert client.post("/api/ratings", json=body).status_code == 201
        assert client.post("/api/ratings", json=body).status_code == 409

    def test_invalid_score_422(self, run_dir):
        client = self.client(run_dir)
        resp = client.post("/api/ratings", json={
            "sample_id": "s0000", "annotator_id": "a1",
            "system_label": "A", "score": 9})
        assert resp.status_code == 422

    def test_report_gated_by_flag(self, run_dir):
        client = self.client(run_dir)
        assert client.get("/api/report").status_code == 403

    def test_report_when_allowed(self, run_dir):
        client = self.client(run_dir, allow_report=True)
        client.post("/api/ratings", json={
            "sample_id": "s0000", "annotator_id": "a1",
            "system_label": "A", "score": 5})
        report = client.get("/api/report")
        assert report.status_code == 200
        assert "systems" in report.json()

    def test_annotators_never_see_each_others_ratings(self, run_dir):
        client = self.client(run_dir)
        client.post("/api/ratings", json={
            "sample_id": "s0000", "annotator_id": "a1",
            "system_label": "A", "score": 5})
        sample = client.get("/api/samples/s0000",
                            params={"annotator": "a2"}).json()
        assert sample["own_ratings"] == {}
        listing = client.get("/api/samples", params={"annotator": "a2"}).json()
        assert listing[0]["rated"] == {"A": False, "B": False}
