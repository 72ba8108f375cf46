"""CSV and SVG exports backing the landscape plots."""

import csv
from pathlib import Path

from stationprint.errors import StationprintError

# color cycle for genre labels; "unknown" is reserved for unlabeled stations
PALETTE = (
    "#4477aa", "#ee6677", "#228833", "#ccbb44", "#66ccee",
    "#aa3377", "#bb5566", "#44aa99", "#999933", "#cc6644",
)
UNKNOWN_COLOR = "#bbbbbb"
UNKNOWN_GENRE = "unknown"


def _write_csv(path, header, rows):
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise StationprintError(f"cannot write {path}: {exc}") from exc


def _floats(*values):
    return [repr(float(v)) for v in values]


def genre_color(genre: str, palette_index: dict) -> str:
    if genre == UNKNOWN_GENRE:
        return UNKNOWN_COLOR
    return PALETTE[palette_index[genre] % len(PALETTE)]


def export_plot_data(projection, models, out_dir, *, scree=(), trajectories=None,
                     genres=None) -> list:
    """Write pca_points.csv, archetypes.csv, scree.csv, trajectories.csv and
    an SVG scatter of the station landscape; returns the written paths.

    `models` maps partition name -> ArchetypeModel (may be empty). Genre
    coloring uses each station's first listed genre; stations without genre
    labels fall into a reserved "unknown" bucket. Floats are written with
    full round-trip precision.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise StationprintError(f"cannot create {out}: {exc}") from exc
    genres = genres or {}
    trajectories = trajectories or {}

    station_rows = []
    first_genres = {}
    if projection is not None:
        for station_id, (x, y) in zip(projection.station_ids, projection.coords):
            labels = genres.get(station_id, ())
            first = labels[0] if labels else UNKNOWN_GENRE
            first_genres[station_id] = first
            station_rows.append([station_id, *_floats(x, y), ";".join(labels)])
    paths = [out / "pca_points.csv"]
    _write_csv(paths[-1], ["station_id", "x", "y", "genres"], station_rows)

    archetype_rows = []
    for partition in sorted(models):
        model = models[partition]
        coords = projection.project(model.archetypes) if projection is not None else []
        for index, (x, y) in enumerate(coords):
            archetype_rows.append([partition, index, *_floats(x, y)])
    paths.append(out / "archetypes.csv")
    _write_csv(paths[-1], ["partition", "index", "x", "y"], archetype_rows)

    paths.append(out / "scree.csv")
    _write_csv(paths[-1], ["k", "rss"], [[k, repr(float(r))] for k, r in scree])

    trajectory_rows = []
    for station_id in sorted(trajectories):
        for partition, (x, y) in trajectories[station_id]["points"]:
            trajectory_rows.append([station_id, partition, *_floats(x, y)])
    paths.append(out / "trajectories.csv")
    _write_csv(paths[-1], ["station_id", "partition", "x", "y"], trajectory_rows)

    paths.append(out / "landscape.svg")
    _write_svg(paths[-1], station_rows, first_genres, archetype_rows)
    return paths


def _write_svg(path, station_rows, first_genres, archetype_rows, size=720, margin=40):
    xs = [float(r[1]) for r in station_rows] + [float(r[2]) for r in archetype_rows]
    ys = [float(r[2]) for r in station_rows] + [float(r[3]) for r in archetype_rows]
    lo_x, hi_x = (min(xs), max(xs)) if xs else (0.0, 1.0)
    lo_y, hi_y = (min(ys), max(ys)) if ys else (0.0, 1.0)
    span = max(hi_x - lo_x, hi_y - lo_y, 1e-9)

    def place(x, y):
        px = margin + (x - lo_x) / span * (size - 2 * margin)
        py = size - margin - (y - lo_y) / span * (size - 2 * margin)
        return px, py

    palette_index = {
        g: i for i, g in enumerate(sorted({g for g in first_genres.values() if g != UNKNOWN_GENRE}))
    }
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    for row in station_rows:
        station_id, x, y = row[0], float(row[1]), float(row[2])
        px, py = place(x, y)
        color = genre_color(first_genres.get(station_id, UNKNOWN_GENRE), palette_index)
        parts.append(
            f'<circle cx="{px:.2f}" cy="{py:.2f}" r="4" fill="{color}" '
            f'fill-opacity="0.8"><title>{station_id}</title></circle>'
        )
    for row in archetype_rows:
        partition, index, x, y = row[0], row[1], float(row[2]), float(row[3])
        px, py = place(x, y)
        parts.append(
            f'<path d="M {px:.2f} {py - 7:.2f} L {px - 6:.2f} {py + 5:.2f} '
            f'L {px + 6:.2f} {py + 5:.2f} Z" fill="black">'
            f"<title>{partition} archetype {index}</title></path>"
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts), encoding="utf-8")
