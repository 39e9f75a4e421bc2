"""Write a random rectangular zone partition as GeoJSON for taz-shape runs.

A seeded kd-split of the study bbox: repeatedly pick a rectangle and cut
it at a random 30..70% point, alternating axis at random. The result is
an interior-disjoint cover of the bbox, which is all the pipeline needs
from a zone file.

Usage: python scripts/make_demo_taz.py --zones 40 --seed 7 --out demo_taz.json
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from maupscope.ingest import DEFAULT_BBOX
from maupscope.partition import ZoneScheme, zones_to_geojson


def rect_partition(bbox, n_zones: int, seed: int) -> ZoneScheme:
    rng = np.random.default_rng(seed)
    rects = [(bbox.lon_min, bbox.lon_max, bbox.lat_min, bbox.lat_max)]
    while len(rects) < n_zones:
        # split the widest rectangle (in normalized units) for evenness
        spans = [max((x1 - x0) / (bbox.lon_max - bbox.lon_min),
                     (y1 - y0) / (bbox.lat_max - bbox.lat_min))
                 for x0, x1, y0, y1 in rects]
        i = int(np.argmax(spans))
        x0, x1, y0, y1 = rects.pop(i)
        t = 0.3 + 0.4 * float(rng.random())
        wide = (x1 - x0) / (bbox.lon_max - bbox.lon_min) >= (y1 - y0) / (bbox.lat_max - bbox.lat_min)
        if wide:
            cut = x0 + t * (x1 - x0)
            rects += [(x0, cut, y0, y1), (cut, x1, y0, y1)]
        else:
            cut = y0 + t * (y1 - y0)
            rects += [(x0, x1, y0, cut), (x0, x1, cut, y1)]
    zones = []
    for zid, (x0, x1, y0, y1) in enumerate(rects):
        ring = [[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]
        zones.append((zid, [(ring, [])]))
    return ZoneScheme(zones)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--zones", type=int, default=40)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", default="demo_taz.json")
    args = ap.parse_args()

    scheme = rect_partition(DEFAULT_BBOX, args.zones, args.seed)
    Path(args.out).write_text(json.dumps(zones_to_geojson(scheme)), encoding="utf-8")
    print(f"wrote {args.zones} zones to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
