"""Station catalog handling, ICY stream capture and snippet recording."""

from stationprint.collector.catalog import StationRecord, load_catalog
from stationprint.collector.icy import (
    IcyStreamHeader,
    MetadataEvent,
    IcyDemuxer,
    demux_icy,
    open_icy_stream,
)
from stationprint.collector.schedule import build_schedule, slot_name
from stationprint.collector.audio import decode_audio, read_wav, write_wav, StreamPcmDecoder
from stationprint.collector.recorder import (
    AudioSnippet,
    record_snippet,
    RecordingManifest,
    DatasetSummary,
    SimulatedClock,
    RealClock,
    record_station,
    crawl,
    load_manifests,
    summarize_dataset,
)

__all__ = [
    "StationRecord",
    "load_catalog",
    "IcyStreamHeader",
    "MetadataEvent",
    "IcyDemuxer",
    "demux_icy",
    "open_icy_stream",
    "build_schedule",
    "slot_name",
    "decode_audio",
    "read_wav",
    "write_wav",
    "StreamPcmDecoder",
    "AudioSnippet",
    "RecordingManifest",
    "DatasetSummary",
    "SimulatedClock",
    "RealClock",
    "record_snippet",
    "record_station",
    "crawl",
    "load_manifests",
    "summarize_dataset",
]
