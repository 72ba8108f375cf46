"""stationprint command line: pipeline stages, queries and servers."""

import argparse
import json
import logging
import sys
import urllib.parse
import urllib.request
from datetime import date
from pathlib import Path

from stationprint.errors import ConfigError, StageError, StationprintError

log = logging.getLogger("stationprint")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stationprint",
        description="Audio fingerprints and recommendations for internet radio stations.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("crawl", help="record scheduled snippets for a station catalog")
    p.add_argument("--catalog", help="catalog JSON file")
    p.add_argument("--out", required=True, help="snippet store root")
    p.add_argument("--day", default=None, help="schedule day YYYY-MM-DD (default: today)")
    p.add_argument("--hours", default="0:24", help="hour range A:B (default 0:24)")
    p.add_argument("--mock-server", default=None, help="host:port of a mock catalog/stream server")
    p.add_argument("--real-clock", action="store_true", help="wall-clock capture instead of simulated time")

    p = sub.add_parser("spectrogram", help="turn recorded snippets into a spectrogram archive")
    p.add_argument("--in", dest="snippets", required=True, help="snippet store root")
    p.add_argument("--out", required=True, help="spectrogram archive path")

    p = sub.add_parser("train", help="train the sequence autoencoder")
    p.add_argument("--in", dest="spectrograms", required=True)
    p.add_argument("--out", required=True, help="model file path")
    p.add_argument("--profile", choices=("paper", "desk"), default="desk")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=0, help="override profile epoch count")
    p.add_argument("--max-samples", type=int, default=0, help="cap on training samples")

    p = sub.add_parser("encode", help="embed spectrograms with a trained encoder")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="spectrograms", required=True)
    p.add_argument("--out", required=True, help="embedding archive path")

    p = sub.add_parser("fingerprint", help="cluster embeddings and build station fingerprints")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--model-out", required=True, help="cluster model output path")
    p.add_argument("--out", required=True, help="fingerprint store path")
    p.add_argument("--k-range", default="9:16", help="cluster count range A:B (inclusive)")
    p.add_argument("--snippets", default=None, help="snippet root (for complete-station manifests)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timezone", default="UTC", help="schedule timezone for day-time partitions")

    p = sub.add_parser("recommend", help="query similar stations")
    p.add_argument("--store", help="fingerprint store file")
    p.add_argument("--station", required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--radius", type=float, default=None)
    p.add_argument("--partition", default="whole_day",
                   choices=("whole_day", "night", "morning", "day"))
    p.add_argument("--catalog", default=None, help="catalog JSON to attach names/genres")
    p.add_argument("--server", default=None,
                   help="host:port of a running service; queries over HTTP instead of a local store")

    p = sub.add_parser("analyze", help="archetypes, PCA projection and day-time analyses")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--archetypes", type=int, default=0, help="fixed archetype count")
    p.add_argument("--scree", default="2:8", help="inclusive scree range A:B when no fixed count")
    p.add_argument("--catalog", default=None)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("serve", help="run the recommendation HTTP service")
    p.add_argument("--config", default=None, help="pipeline config file")
    p.add_argument("--store", default=None)
    p.add_argument("--catalog", default=None)
    p.add_argument("--analysis", default=None)
    p.add_argument("--bind", default=None, help="host:port (default from config)")

    p = sub.add_parser("mock-server", help="serve mock catalog + ICY streams from fixtures")
    p.add_argument("--fixtures", required=True, help="directory with stations.json and WAV files")
    p.add_argument("--bind", default="127.0.0.1:0")

    p = sub.add_parser("run", help="run the full pipeline from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--mock-server", default=None, help="fetch the catalog from this mock server first")

    return parser


def cmd_crawl(args) -> int:
    from stationprint.collector.catalog import load_catalog
    from stationprint.collector.recorder import crawl, summarize_dataset
    from stationprint.collector.schedule import parse_hour_range
    from stationprint.service.pipeline import fetch_mock_catalog

    catalog_path = args.catalog
    if args.mock_server:
        catalog_path = Path(args.out) / "catalog.json"
        fetch_mock_catalog(args.mock_server, catalog_path)
    if not catalog_path:
        raise ConfigError("need --catalog or --mock-server")
    catalog = load_catalog(catalog_path)
    day = date.fromisoformat(args.day) if args.day else date.today()
    manifests = crawl(
        catalog, args.out, day,
        hours=parse_hour_range(args.hours),
        simulated=not args.real_clock,
    )
    print(json.dumps(summarize_dataset(manifests).to_json(), indent=2))
    return 0


def cmd_spectrogram(args) -> int:
    from stationprint.service.config import PipelineConfig
    from stationprint.service.pipeline import run_spectrograms

    config = PipelineConfig(
        snippet_root=Path(args.snippets), spectrogram_archive=Path(args.out)
    )
    print(json.dumps(run_spectrograms(config), indent=2))
    return 0


def cmd_train(args) -> int:
    from stationprint.service.config import PipelineConfig
    from stationprint.service.pipeline import run_train

    config = PipelineConfig(
        spectrogram_archive=Path(args.spectrograms),
        autoencoder_path=Path(args.out),
        autoencoder_profile=args.profile,
        autoencoder_seed=args.seed,
        autoencoder_epochs=args.epochs,
        autoencoder_max_samples=args.max_samples,
    )
    print(json.dumps(run_train(config), indent=2))
    return 0


def cmd_encode(args) -> int:
    from stationprint.service.config import PipelineConfig
    from stationprint.service.pipeline import run_encode

    config = PipelineConfig(
        spectrogram_archive=Path(args.spectrograms),
        autoencoder_path=Path(args.model),
        embedding_archive=Path(args.out),
    )
    print(json.dumps(run_encode(config), indent=2))
    return 0


def cmd_fingerprint(args) -> int:
    from stationprint.service.config import PipelineConfig
    from stationprint.service.pipeline import run_fingerprint

    k_min, k_max = (int(part) for part in args.k_range.split(":"))
    config = PipelineConfig(
        embedding_archive=Path(args.embeddings),
        cluster_model_path=Path(args.model_out),
        fingerprint_store=Path(args.out),
        snippet_root=Path(args.snippets) if args.snippets else Path("."),
        fingerprint_k_min=k_min,
        fingerprint_k_max=k_max,
        fingerprint_seed=args.seed,
        schedule_timezone=args.timezone,
    )
    print(json.dumps(run_fingerprint(config), indent=2))
    return 0


def cmd_recommend(args) -> int:
    if (args.k is None) == (args.radius is None):
        raise ConfigError("provide exactly one of --k or --radius")
    if args.server:
        query = {"partition": args.partition}
        if args.k is not None:
            query["k"] = str(args.k)
        else:
            query["radius"] = repr(args.radius)
        url = (
            f"http://{args.server}/stations/{urllib.parse.quote(args.station)}"
            f"/recommendations?{urllib.parse.urlencode(query)}"
        )
        with urllib.request.urlopen(url, timeout=30) as response:
            print(response.read().decode("utf-8"))
        return 0

    if not args.store:
        raise ConfigError("need --store (or --server)")
    from stationprint.collector.catalog import load_catalog
    from stationprint.recommend import FingerprintStore, nearest_k, within_radius

    catalog = load_catalog(args.catalog) if args.catalog else None
    store = FingerprintStore.from_file(args.store, catalog=catalog)
    if args.k is not None:
        results = nearest_k(store, args.station, args.k, args.partition)
    else:
        results = within_radius(store, args.station, args.radius, args.partition)
    print(json.dumps(
        [
            {"station_id": r.station_id, "distance": r.distance, "genres": list(r.genres)}
            for r in results
        ],
        indent=2,
    ))
    return 0


def cmd_analyze(args) -> int:
    from stationprint.service.config import PipelineConfig
    from stationprint.service.pipeline import run_analyze

    config = PipelineConfig(
        fingerprint_store=Path(args.store),
        analysis_dir=Path(args.out),
        analyze_archetypes=args.archetypes,
        analyze_scree=args.scree,
        analyze_seed=args.seed,
        catalog_path=Path(args.catalog) if args.catalog else None,
    )
    print(json.dumps(run_analyze(config), indent=2))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from stationprint.service.api import create_app
    from stationprint.service.config import load_config

    if args.config:
        config = load_config(args.config)
        store = args.store or config.fingerprint_store
        catalog = args.catalog or (config.catalog_path if config.catalog_path.exists() else None)
        analysis = args.analysis or config.analysis_dir
        bind = args.bind or config.service_bind
        token = config.service_reload_token
    else:
        if not args.store:
            raise ConfigError("need --store or --config")
        store, catalog, analysis = args.store, args.catalog, args.analysis
        bind = args.bind or "127.0.0.1:8787"
        token = ""
    app = create_app(store, catalog, analysis, reload_token=token)
    host, port = bind.rsplit(":", 1)
    uvicorn.run(app, host=host, port=int(port), log_level="info")
    return 0


def cmd_mock_server(args) -> int:
    import time

    from stationprint.service.mock_icy import MockIcyServer

    host, port = args.bind.rsplit(":", 1)
    server = MockIcyServer.from_fixture_dir(args.fixtures, bind=(host, int(port)))
    server.start()
    print(f"mock server on http://{server.address} (catalog at /services)")
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        server.stop()
    return 0


def cmd_run(args) -> int:
    from stationprint.service.config import load_config
    from stationprint.service.pipeline import fetch_mock_catalog, run_pipeline

    config = load_config(args.config)
    if args.mock_server:
        fetch_mock_catalog(args.mock_server, config.catalog_path)
    report = run_pipeline(config)
    print(json.dumps(report, indent=2))
    return 0


COMMANDS = {
    "crawl": cmd_crawl,
    "spectrogram": cmd_spectrogram,
    "train": cmd_train,
    "encode": cmd_encode,
    "fingerprint": cmd_fingerprint,
    "recommend": cmd_recommend,
    "analyze": cmd_analyze,
    "serve": cmd_serve,
    "mock-server": cmd_mock_server,
    "run": cmd_run,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"pipeline failure: {exc}", file=sys.stderr)
        return 3
    except StationprintError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
