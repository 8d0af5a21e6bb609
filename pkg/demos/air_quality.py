"""
Training a DINN on Air Quality data
===================================

Prepares the data with the NOx uncertainty profile, warm-starts a 3x128
interval network from a real one and trains it with interval SGD.  Pass
the UCI CSV as the first argument; without one a synthetic file in the
same layout is generated.

    python demos/air_quality.py [AirQualityUCI.csv or ""] [epochs]
"""

import json
import sys
import tempfile
from pathlib import Path

import numpy as np

from dinn import harness as H
from dinn.data import air_quality_profile, make_surrogate_csv

root = Path(__file__).resolve().parents[1]
work = Path(tempfile.mkdtemp(prefix="dinn-demo-"))

csv_path = sys.argv[1] if len(sys.argv) > 1 and sys.argv[1] else make_surrogate_csv(work / "surrogate.csv")
epochs = int(sys.argv[2]) if len(sys.argv) > 2 else 20

profile = work / "profile.json"
profile.write_text(json.dumps(air_quality_profile().to_dict()))
train, test = H.prepare_data(csv_path, str(profile), 0.2, seed=0, out_dir=work / "prep")
print(f"{len(train)} train rows, {len(test)} test rows")

raw = H.load_config(root / "configs" / "air_quality_3x128.toml")
raw.update(seed=0, epochs=epochs)
cfg = H.RunConfig.from_dict(raw)

# the warm start copies a real network, so epoch 0 already predicts well;
# training then trades midpoint accuracy against interval width
result = H.run_training(cfg, train, work / "run")
report = H.evaluate(result.model, test, result.trace)
target_std = float(np.std(test.targets.midpoints()))
print("first/last epoch loss:", result.trace[0][1], result.trace[-1][1])
print(f"test interval MSE [{report.interval_mse.lo:.4g}, {report.interval_mse.hi:.4g}]")
print(f"midpoint MSE {report.midpoint_mse:.4g}, coverage {report.coverage:.3f}")
print(f"mean width {report.mean_width:.3g} ({report.mean_width / target_std:.2f} target std)")
print("outputs in", work)
