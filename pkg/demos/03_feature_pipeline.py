"""From raw logs to training-ready probability vectors.

Generates a small synthetic log corpus, parses the five CSV files,
aggregates per-user-day features, splits chronologically, normalizes
with training statistics only, and projects onto the simplex.
"""

import tempfile
from pathlib import Path

import numpy as np

from qbde.features import (
    FEATURE_NAMES,
    SynthConfig,
    attach_labels,
    extract_daily,
    normalize,
    parse_logs,
    read_labels_csv,
    split,
    synth_generate,
    to_simplex,
)

data_dir = Path(tempfile.mkdtemp()) / "logs"

# ---------------------------------------------------------------------
# Synthesize 60 days for one user with 10% anomalous days.  Each file
# follows the standard CSV schema (id, date, user, pc, ...).
# ---------------------------------------------------------------------
result = synth_generate(SynthConfig(n_users=1, n_days=60, anomaly_rate=0.1,
                                    seed=42, out_dir=data_dir))
print("rows per file:", result.row_counts)

events, report = parse_logs(data_dir)
print(f"parsed {report.total_events()} events "
      f"({sum(report.malformed.values())} malformed rows)")

# ---------------------------------------------------------------------
# One 16-feature vector per user-day.  The _on/_out split follows the
# 08:00-18:00 working window; size totals device-transfer bytes.
# ---------------------------------------------------------------------
rows = extract_daily(events)
attach_labels(rows, read_labels_csv(data_dir / "labels.csv"))
print(f"\n{len(rows)} user-days; features: {', '.join(FEATURE_NAMES)}")
example = rows[0]
print(f"raw counts for {example.user} {example.day}:")
print(" ", {name: int(x) for name, x in zip(FEATURE_NAMES, example.features)})

# ---------------------------------------------------------------------
# Chronological split (train = earliest days), abnormal days excluded
# from training, then per-user min-max normalization from train stats.
# ---------------------------------------------------------------------
dataset = normalize(split(rows, train_days=40, test_days=20))
print(f"\ntrain {len(dataset.train)} rows "
      f"(+{len(dataset.excluded)} abnormal excluded), test {len(dataset.test)} rows")
lo, hi = dataset.stats["U0000"]
print("training min/max for http_on:",
      (lo[FEATURE_NAMES.index("http_on")], hi[FEATURE_NAMES.index("http_on")]))
print(f"test values clipped into [0, 1]: {len(dataset.clipped)} "
      f"(out-of-range values are themselves anomaly evidence)")

# ---------------------------------------------------------------------
# Simplex projection: the generator outputs probability vectors, so the
# behavior vectors are L1-normalized to live on the same simplex.
# ---------------------------------------------------------------------
vec, scale = to_simplex(dataset.train[0].features)
print(f"\nsimplex projection of day 1: sum = {vec.sum():.12f}, "
      f"retained activity mass = {scale:.3f}")
abnormal = [r for r in dataset.test if r.label == "abnormal"]
if abnormal:
    mean = np.mean([to_simplex(r.features)[0] for r in dataset.train], axis=0)
    v = to_simplex(abnormal[0].features)[0]
    print(f"an abnormal day sits {np.abs(v - mean).sum():.3f} (L1) from the "
          f"training mean direction; typical normal days are much closer.")
