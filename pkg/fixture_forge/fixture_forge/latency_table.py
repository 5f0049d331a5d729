"""Recorded Wi-Fi sweep: measured totals per split point, as a planning fixture."""

import json

# Wi-Fi measurements (~50 Mbps), 10-run averages, milliseconds per split point.
SPLIT_TOTALS_MS = {
    1: 99.91, 2: 166.98, 3: 65.89, 4: 85.03, 5: 31.91,
    6: 20.07, 7: 60.88, 8: 40.98, 9: 55.93, 10: 37.96,
    11: 57.79, 12: 36.11, 13: 27.96, 14: 26.34, 15: 39.15,
    16: 34.57, 17: 31.75, 18: 36.04, 19: 36.67, 20: 36.59,
}


def export_split_latency_fixture(out_path):
    doc = {
        "description": (
            "Measured co-inference totals per candidate split point over "
            "Wi-Fi (~50 Mbps), 10-run averages, 20-layer chain."
        ),
        "unit": "ms",
        "totals_ms": {str(k): v for k, v in sorted(SPLIT_TOTALS_MS.items())},
    }
    with open(out_path, "w") as f:
        json.dump(doc, f, indent=2)
    return doc
