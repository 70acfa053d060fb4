"""Service layer, HTTP API over a live socket, and the command line: shared
payloads, error mapping, exit codes, and the written report files."""

import json
import threading
import urllib.error
import urllib.request
from datetime import datetime, timedelta, timezone
from types import SimpleNamespace

import numpy as np
import pytest

from loadcast import api, cli
from loadcast.config import EngineConfig, ModelParams
from loadcast.csvio import series_to_csv
from loadcast.errors import (InsufficientDataError, InvalidInputError,
                             NotFoundError)
from loadcast.series import VERTICAL_LOAD, LoadObservation, LoadSeries
from loadcast.service import Service, evaluation_doc
from loadcast.store import DocumentStore
from synth import synthetic_hourly_series

UTC = timezone.utc
HOUR = timedelta(hours=1)
LAND = "TESTLAND"
START = datetime(2015, 3, 2, tzinfo=UTC)  # a Monday

TINY = ModelParams(n_trees=2, learning_rate=0.5, max_depth=2, min_samples_leaf=5)
TINY_DOC = TINY.to_doc()


def tiny_service(data_dir, **over):
    settings = dict(data_dir=data_dir, countries=(LAND,), timezones={LAND: "UTC"},
                    basic=TINY, advanced=TINY, decile=TINY)
    settings.update(over)
    config = EngineConfig(**settings)
    return Service(store=DocumentStore(config.data_dir), config=config)


def synth_csv(hours=504, country=LAND, seed=11):
    series = synthetic_hourly_series(country, START, hours,
                                     np.random.default_rng(seed))
    return series_to_csv(series)


def plain_series(indices, value, country=LAND):
    obs = [LoadObservation(country=country, interval_start=START + i * HOUR,
                           interval_end=START + (i + 1) * HOUR,
                           day_ahead_forecast=value(i) + 10.0,
                           actual_load=value(i))
           for i in indices]
    return LoadSeries(country=country, frequency="hourly", observations=obs)


class TestIngest:
    def test_fresh_ingest_summary(self, tmp_path):
        service = tiny_service(tmp_path)
        summary = service.ingest_csv(LAND, synth_csv(hours=48))
        assert summary["country"] == LAND
        assert summary["rows"] == 48
        assert summary["stored_rows"] == 48
        assert summary["frequency"] == "hourly"
        assert summary["period"]["start"] == "2015-03-02T00:00:00+00:00"

    def test_overlapping_ingest_merges_new_rows_win(self, tmp_path):
        service = tiny_service(tmp_path)
        service.ingest_csv(LAND, series_to_csv(plain_series(range(100), lambda i: 1000.0 + i)))
        summary = service.ingest_csv(
            LAND, series_to_csv(plain_series(range(50, 150), lambda i: 2000.0 + i)))
        assert summary["rows"] == 100
        assert summary["stored_rows"] == 150
        stored = service.store.load_series(LAND)
        actuals = stored.actuals_by_time()
        assert actuals[START + 30 * HOUR] == 1030.0   # untouched old row
        assert actuals[START + 60 * HOUR] == 2060.0   # overlap replaced
        assert actuals[START + 140 * HOUR] == 2140.0  # new tail

    def test_reingest_is_idempotent(self, tmp_path):
        service = tiny_service(tmp_path)
        data = synth_csv(hours=72)
        first = service.ingest_csv(LAND, data)
        before = service.store.load_series(LAND)
        second = service.ingest_csv(LAND, data)
        assert second["stored_rows"] == first["stored_rows"]
        assert service.store.load_series(LAND) == before

    def test_frequency_change_rejected(self, tmp_path):
        service = tiny_service(tmp_path)
        service.ingest_csv(LAND, synth_csv(hours=24))
        quarter = ("interval_start,interval_end,day_ahead_forecast,actual_load\n"
                   "2015-04-01T00:00Z,2015-04-01T00:15Z,1,1\n"
                   "2015-04-01T00:15Z,2015-04-01T00:30Z,1,1\n")
        with pytest.raises(InvalidInputError) as err:
            service.ingest_csv(LAND, quarter)
        assert "quarter-hourly" in err.value.message

    def test_sources_kept_separate(self, tmp_path):
        service = tiny_service(tmp_path)
        service.ingest_csv(LAND, synth_csv(hours=24))
        service.ingest_csv(LAND, synth_csv(hours=12), source=VERTICAL_LOAD)
        assert len(service.store.load_series(LAND)) == 24
        assert len(service.store.load_series(LAND, VERTICAL_LOAD)) == 12

    def test_bytes_and_text_bodies_equivalent(self, tmp_path):
        text = synth_csv(hours=24)
        a = tiny_service(tmp_path / "a").ingest_csv(LAND, text)
        b = tiny_service(tmp_path / "b").ingest_csv(LAND, text.encode("utf-8"))
        assert a == b


class TestCountriesSummary:
    def test_catalogue_fields(self, tmp_path):
        service = tiny_service(tmp_path)
        service.ingest_csv(LAND, synth_csv(hours=200))
        entry, = service.countries_summary()
        assert entry["country"] == LAND
        assert entry["frequency"] == "hourly"
        assert entry["sources"] == ["total_load"]
        assert entry["latest_model_trained_at"] is None
        service.rebuild(LAND, now=START + 200 * HOUR, horizons=(1,))
        entry, = service.countries_summary()
        assert entry["latest_model_trained_at"] == "2015-03-10T08:00:00+00:00"


class TestForecastLifecycle:
    @pytest.fixture()
    def ready(self, tmp_path):
        service = tiny_service(tmp_path)
        service.ingest_csv(LAND, synth_csv())
        rebuild = service.rebuild(LAND, now=START + 503 * HOUR)
        return SimpleNamespace(service=service, rebuild=rebuild,
                               now=START + 479 * HOUR + timedelta(minutes=30))

    def test_rebuild_counts(self, ready):
        assert ready.rebuild["counts"] == {"basic": 24, "advanced": 24}
        assert ready.rebuild["warnings"] == []
        assert ready.rebuild["trained_at"] == "2015-03-22T23:00:00+00:00"

    def test_decile_counts_included_when_enabled(self, tmp_path):
        service = tiny_service(tmp_path, deciles=True)
        service.ingest_csv(LAND, synth_csv(hours=336))
        payload = service.rebuild(LAND, horizons=(1,))
        assert payload["counts"] == {"basic": 1, "advanced": 1, "decile": 9}

    def test_issue_and_default_window(self, ready):
        payload = ready.service.issue_forecast(LAND, now=ready.now)
        assert len(payload["records"]) == 24
        assert payload["horizon_errors"] == {}
        docs = ready.service.forecast_window(LAND)
        assert len(docs) == 24
        assert [d["horizon"] for d in docs] == list(range(1, 25))
        targets = [d["target_time"] for d in docs]
        assert targets == sorted(targets)

    def test_window_hours_and_from(self, ready):
        ready.service.issue_forecast(LAND, now=ready.now)
        one = ready.service.forecast_window(LAND, hours=1)
        assert len(one) == 1
        assert one[0]["horizon"] == 1
        later = ready.service.forecast_window(
            LAND, from_="2015-03-22T12:00:00Z", hours=6)
        assert len(later) == 6
        assert later[0]["target_time"] == "2015-03-22T12:00:00+00:00"

    def test_second_issuance_takes_over_shared_targets(self, ready):
        ready.service.issue_forecast(LAND, now=ready.now)
        ready.service.issue_forecast(LAND, now=ready.now + HOUR)
        docs = ready.service.forecast_window(LAND)
        # every served target now comes from the newer batch
        issued = {d["issued_at"] for d in docs}
        assert issued == {"2015-03-22T00:30:00+00:00"}
        assert [d["horizon"] for d in docs] == list(range(1, 25))

    def test_window_validation(self, ready):
        with pytest.raises(InvalidInputError):
            ready.service.forecast_window(LAND, hours=0)
        with pytest.raises(InvalidInputError):
            ready.service.forecast_window(LAND, hours=25)
        with pytest.raises(InvalidInputError):
            ready.service.forecast_window(LAND, hours="soon")

    def test_unknown_country_and_no_forecasts(self, ready):
        with pytest.raises(NotFoundError):
            ready.service.forecast_window("NOWHERELAND")
        with pytest.raises(InsufficientDataError):
            ready.service.forecast_window(LAND)  # ready but nothing issued yet

    def test_window_outside_coverage(self, ready):
        ready.service.issue_forecast(LAND, now=ready.now)
        with pytest.raises(InsufficientDataError):
            ready.service.forecast_window(LAND, from_="2016-01-01T00:00:00Z")

    def test_issue_without_models_fails_with_detail(self, tmp_path):
        service = tiny_service(tmp_path)
        service.ingest_csv(LAND, synth_csv(hours=400))
        with pytest.raises(InsufficientDataError) as err:
            service.issue_forecast(LAND, now=START + 400 * HOUR)
        assert err.value.detail["1"].startswith("no usable model")


class TestQualityReports:
    def test_all_countries_reported(self, tmp_path):
        service = tiny_service(tmp_path)
        service.ingest_csv(LAND, synth_csv(hours=48))
        service.ingest_csv("OTHERLAND", synth_csv(hours=48, country="OTHERLAND"))
        reports = service.quality_reports("2015-03-02T00:00:00Z", "2015-03-04T00:00:00Z")
        assert sorted(r.country for r in reports) == ["OTHERLAND", LAND]
        assert all(r.expected_slots == 48 for r in reports)

    def test_both_bounds_required(self, tmp_path):
        service = tiny_service(tmp_path)
        with pytest.raises(InvalidInputError):
            service.quality_reports(None, "2015-03-04T00:00:00Z")
        with pytest.raises(InvalidInputError):
            service.quality_reports("2015-03-02T00:00:00Z", None)


@pytest.fixture(scope="class")
def evaluated(tmp_path_factory):
    """A store with 504h of data, tiny models, and six replayed issuances."""
    service = tiny_service(tmp_path_factory.mktemp("evaluated") / "data")
    service.ingest_csv(LAND, synth_csv())
    service.rebuild(LAND, now=START + 470 * HOUR)
    for k in range(6):
        service.issue_forecast(LAND, now=START + (474 + k) * HOUR)
    return service


class TestEvaluate:
    def test_bundle_structure(self, evaluated):
        bundle = evaluated.evaluate(LAND, horizon=24)
        result = bundle["result"]
        assert result.n_pairs == 6
        assert result.horizon == 24
        assert 0.0 <= result.mape < 100.0
        assert bundle["benchmark"] is not None
        assert bundle["comparison"] is not None
        assert bundle["comparison"].delta(LAND, "2015-03") is not None
        assert bundle["horizon_table"].countries == (LAND,)
        assert sum(d["count"] for d in bundle["histogram"]) == 6

    def test_all_horizons(self, evaluated):
        bundle = evaluated.evaluate(LAND, horizon=None)
        assert bundle["result"].n_pairs == 144  # 6 batches x 24 horizons
        assert bundle["horizon_table"].horizons == list(range(1, 25))

    def test_doc_is_json_clean(self, evaluated):
        doc = evaluation_doc(evaluated.evaluate(LAND, horizon=24))
        parsed = json.loads(api.to_json(doc))
        assert parsed["result"]["pairs"] == 6
        assert parsed["benchmark"]["pairs"] > 0
        assert "2015-03" in parsed["comparison"]["columns"]
        assert parsed["horizon_mape"]["24"] is not None

    def test_window_filter(self, evaluated):
        bundle = evaluated.evaluate(LAND, from_="2015-03-22T19:00:00Z", horizon=24)
        assert bundle["result"].n_pairs < 6
        with pytest.raises(InsufficientDataError):
            evaluated.evaluate(LAND, to="2015-03-01T00:00:00Z")

    def test_bad_horizon_rejected(self, evaluated):
        with pytest.raises(InvalidInputError):
            evaluated.evaluate(LAND, horizon=25)

    def test_unknown_country_rejected(self, evaluated):
        with pytest.raises(NotFoundError):
            evaluated.evaluate("NOWHERELAND")


# -- HTTP API over a live socket ----------------------------------------------

def http(base, method, path, body=None):
    request = urllib.request.Request(base + path, method=method, data=body)
    try:
        with urllib.request.urlopen(request, timeout=30) as response:
            return response.status, response.read()
    except urllib.error.HTTPError as err:
        return err.code, err.read()


def serve_in_thread(service):
    server = api.make_server(service, port=0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    host, port = server.server_address[:2]
    return server, f"http://{host}:{port}"


@pytest.fixture(scope="class")
def live(tmp_path_factory):
    service = tiny_service(tmp_path_factory.mktemp("live") / "data")
    server, base = serve_in_thread(service)
    yield SimpleNamespace(base=base, service=service, store=service.store)
    server.shutdown()
    server.server_close()


class TestHttpApi:
    def test_round_trip(self, live):
        csv_body = synth_csv().encode("utf-8")

        status, body = http(live.base, "POST", f"/data/{LAND}", csv_body)
        assert status == 200
        first = json.loads(body)
        assert first["rows"] == 504
        assert first["frequency"] == "hourly"

        # idempotent re-ingest
        status, body = http(live.base, "POST", f"/data/{LAND}", csv_body)
        assert status == 200
        assert json.loads(body)["stored_rows"] == first["stored_rows"]

        status, body = http(live.base, "POST", f"/models/{LAND}/rebuild")
        assert status == 200
        rebuilt = json.loads(body)
        assert rebuilt["counts"] == {"basic": 24, "advanced": 24}

        status, body = http(live.base, "POST", f"/forecast/{LAND}/issue")
        assert status == 200
        issued = json.loads(body)
        assert len(issued["records"]) == 24
        assert issued["horizon_errors"] == {}

        status, body = http(live.base, "GET", f"/forecast/{LAND}?hours=24")
        assert status == 200
        docs = json.loads(body)
        assert len(docs) == 24
        assert [d["horizon"] for d in docs] == list(range(1, 25))

        status, body = http(live.base, "GET", f"/forecast/{LAND}?hours=1")
        assert status == 200
        assert [d["horizon"] for d in json.loads(body)] == [1]

        status, body = http(live.base, "GET", "/countries")
        assert status == 200
        catalogue = json.loads(body)
        assert catalogue[0]["country"] == LAND
        assert catalogue[0]["latest_model_trained_at"] is not None

        status, body = http(live.base, "GET",
                            "/quality?from=2015-03-02T00:00:00Z&to=2015-03-09T00:00:00Z")
        assert status == 200
        reports = json.loads(body)
        assert reports[0]["expected_slots"] == 168

    def test_reads_never_write(self, live):
        before = live.store.checksum()
        http(live.base, "GET", "/countries")
        http(live.base, "GET", f"/forecast/{LAND}?hours=24")
        http(live.base, "GET",
             "/quality?from=2015-03-02T00:00:00Z&to=2015-03-03T00:00:00Z")
        http(live.base, "GET", "/forecast/NOWHERELAND")
        assert live.store.checksum() == before

    def test_error_statuses(self, live):
        status, body = http(live.base, "GET", "/forecast/NOWHERELAND")
        assert status == 404
        assert json.loads(body)["error"]["code"] == "not_found"

        status, body = http(live.base, "GET", f"/forecast/{LAND}?hours=25")
        assert status == 400
        assert json.loads(body)["error"]["code"] == "invalid_input"

        status, body = http(live.base, "POST", f"/data/{LAND}", b"not,a,load,csv\n1,2,3,4\n")
        assert status == 400
        payload = json.loads(body)
        assert payload["error"]["code"] == "invalid_input"
        assert payload["error"]["detail"]["row"] == 1

        status, body = http(live.base, "GET", "/nope/nothing")
        assert status == 404

        status, body = http(live.base, "POST", f"/forecast/{LAND}")  # no /issue
        assert status == 404

        status, body = http(live.base, "GET", "/quality?from=2015-03-02T00:00:00Z")
        assert status == 400

        status, body = http(live.base, "GET", f"/forecast/{LAND}?hours=1&hours=2")
        assert status == 400
        assert "more than once" in json.loads(body)["error"]["message"]

        status, body = http(live.base, "POST", f"/data/{LAND}?source=guesswork", b"x")
        assert status == 400

    def test_series_without_forecasts_maps_to_422(self, live):
        http(live.base, "POST", "/data/OTHERLAND",
             synth_csv(hours=48, country="OTHERLAND").encode("utf-8"))
        status, body = http(live.base, "GET", "/forecast/OTHERLAND")
        assert status == 422
        assert json.loads(body)["error"]["code"] == "insufficient_data"

    def test_corrupt_store_maps_to_500(self, tmp_path):
        service = tiny_service(tmp_path / "data")
        service.ingest_csv(LAND, synth_csv(hours=24))
        docs_path = tmp_path / "data" / "series" / f"{LAND}.docs"
        docs_path.write_text(docs_path.read_text() + "{half a doc\n")
        server, base = serve_in_thread(service)
        try:
            status, body = http(base, "GET", "/countries")
            assert status == 500
            assert json.loads(body)["error"]["code"] == "internal"
        finally:
            server.shutdown()
            server.server_close()


# -- command line --------------------------------------------------------------

def write_config(tmp_path, **extra):
    doc = {"countries": [LAND], "timezones": {LAND: "UTC"},
           "basic": TINY_DOC, "advanced": TINY_DOC, "decile": TINY_DOC}
    doc.update(extra)
    path = tmp_path / "loadcast.json"
    path.write_text(json.dumps(doc))
    return path


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestCli:
    def test_full_workflow(self, tmp_path, capsys, monkeypatch):
        monkeypatch.chdir(tmp_path)
        config = write_config(tmp_path)
        data_dir = tmp_path / "data"
        csv_file = tmp_path / "load.csv"
        csv_file.write_text(synth_csv())
        base = ["--config", str(config), "--data-dir", str(data_dir)]

        code, out, _ = run_cli(capsys, *base, "ingest", str(csv_file),
                               "--country", LAND)
        assert code == 0
        assert json.loads(out)["rows"] == 504

        code, out, _ = run_cli(capsys, *base, "audit",
                               "--from", "2015-03-02T00:00:00Z",
                               "--to", "2015-03-09T00:00:00Z")
        assert code == 0
        assert out.splitlines()[0].startswith("Code")
        assert LAND in out

        code, out, _ = run_cli(capsys, *base, "train", "--country", LAND)
        assert code == 0
        assert json.loads(out)["counts"] == {"basic": 24, "advanced": 24}

        # both issuances sit 24h before the series end so the default
        # evaluation horizon (24) finds an actual for every target
        for now in ("2015-03-21T22:00:00Z", "2015-03-21T23:00:00Z"):
            code, out, _ = run_cli(capsys, *base, "forecast", "--country", LAND,
                                   "--now", now)
            assert code == 0
            assert len(json.loads(out)["records"]) == 24

        report_dir = tmp_path / "report"
        code, out, _ = run_cli(capsys, *base, "evaluate", "--country", LAND,
                               "--out", str(report_dir))
        assert code == 0
        assert "MAPE" in out
        assert "report files:" in out
        names = sorted(p.name for p in report_dir.iterdir())
        assert names == ["error_histogram.csv", "error_histogram.png",
                         "error_stats.csv", "evaluation.json", "horizon_mape.csv",
                         "horizon_mape.png", "monthly_mape.csv", "monthly_mape.png"]
        header = (report_dir / "monthly_mape.csv").read_text().splitlines()[0]
        assert header == "month,model,benchmark,delta"

        code, out, _ = run_cli(capsys, *base, "evaluate", "--country", LAND,
                               "--out", str(tmp_path / "plain"),
                               "--no-figures")
        assert code == 0
        assert not list((tmp_path / "plain").glob("*.png"))

        code, out, _ = run_cli(capsys, *base, "evaluate", "--country", LAND,
                               "--json")
        assert code == 0
        doc = json.loads(out)
        assert doc["result"]["country"] == LAND
        assert doc["result"]["pairs"] == 2

    def test_serve_accepts_config_after_subcommand(self):
        args = cli.build_parser().parse_args(
            ["serve", "--config", "x.json", "--data-dir", "d", "--port", "9"])
        assert (args.config, args.data_dir, args.port) == ("x.json", "d", 9)
        before = cli.build_parser().parse_args(["--config", "y.json", "serve"])
        assert before.config == "y.json"
        bare = cli.build_parser().parse_args(["serve"])
        assert bare.config is None and bare.data_dir is None

    def test_missing_file_exits_one(self, tmp_path, capsys):
        code, _, err = run_cli(capsys, "--data-dir", str(tmp_path / "d"),
                               "ingest", str(tmp_path / "absent.csv"),
                               "--country", LAND)
        assert code == 1
        assert json.loads(err)["error"]["code"] == "invalid_input"

    def test_unknown_country_exits_one(self, tmp_path, capsys):
        code, _, err = run_cli(capsys, "--data-dir", str(tmp_path / "d"),
                               "evaluate", "--country", "NOWHERELAND")
        assert code == 1
        assert json.loads(err)["error"]["code"] == "not_found"

    def test_bad_horizon_exits_one(self, tmp_path, capsys):
        code, _, err = run_cli(capsys, "--data-dir", str(tmp_path / "d"),
                               "evaluate", "--country", LAND,
                               "--horizon", "sometimes")
        assert code == 1
        assert "1..24" in json.loads(err)["error"]["message"]

    def test_corrupt_store_exits_two(self, tmp_path, capsys):
        config = write_config(tmp_path)
        data_dir = tmp_path / "data"
        csv_file = tmp_path / "load.csv"
        csv_file.write_text(synth_csv(hours=24))
        base = ["--config", str(config), "--data-dir", str(data_dir)]
        assert run_cli(capsys, *base, "ingest", str(csv_file), "--country", LAND)[0] == 0
        docs_path = data_dir / "series" / f"{LAND}.docs"
        docs_path.write_text(docs_path.read_text() + "{broken\n")
        code, _, err = run_cli(capsys, *base, "audit",
                               "--from", "2015-03-02T00:00:00Z",
                               "--to", "2015-03-03T00:00:00Z")
        assert code == 2
        assert json.loads(err)["error"]["code"] == "internal"


class TestCliHttpParity:
    def test_quality_payload_is_byte_identical(self, tmp_path, capsys):
        service = tiny_service(tmp_path / "data")
        service.ingest_csv(LAND, synth_csv(hours=48))
        server, base = serve_in_thread(service)
        try:
            status, http_body = http(
                base, "GET",
                "/quality?from=2015-03-02T00:00:00Z&to=2015-03-04T00:00:00Z")
            assert status == 200
        finally:
            server.shutdown()
            server.server_close()
        code, out, _ = run_cli(capsys, "--data-dir", str(tmp_path / "data"),
                               "audit", "--from", "2015-03-02T00:00:00Z",
                               "--to", "2015-03-04T00:00:00Z", "--json")
        assert code == 0
        assert out.encode("utf-8") == http_body

    def test_ingest_payload_is_byte_identical(self, tmp_path, capsys):
        body = synth_csv(hours=36)
        service = tiny_service(tmp_path / "http-data")
        server, base = serve_in_thread(service)
        try:
            status, http_body = http(base, "POST", f"/data/{LAND}",
                                     body.encode("utf-8"))
            assert status == 200
        finally:
            server.shutdown()
            server.server_close()
        csv_file = tmp_path / "load.csv"
        csv_file.write_text(body)
        code, out, _ = run_cli(capsys, "--data-dir", str(tmp_path / "cli-data"),
                               "ingest", str(csv_file), "--country", LAND)
        assert code == 0
        assert out.encode("utf-8") == http_body
