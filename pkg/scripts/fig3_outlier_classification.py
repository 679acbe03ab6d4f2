"""Logistic regression with a predicted temperature versus tau fixed at 1, 10% flipped cluster."""

import numpy as np

from _common import finish, parser
from fulllik import experiments as ex

args = parser(__doc__).parse_args()
rows = []
for seed in range(args.seeds):
    rows.append({"seed": seed, **ex.outlier_classification(seed)})
    print(rows[-1])
gain = [r["predicted_tau"] - r["fixed_tau"] for r in rows]
finish(args, rows, {"predicted >= fixed": f"{sum(g >= 0 for g in gain)}/{len(rows)}",
                    "mean gain (accuracy points)": 100 * float(np.mean(gain))})
