"""Test CAL of a predicted-sigma linear model versus sigma frozen at 1 on heteroskedastic data."""

import numpy as np

from _common import finish, parser
from fulllik import experiments as ex

args = parser(__doc__).parse_args()
rows = []
for seed in range(args.seeds):
    r = ex.heteroskedastic(seed)
    rows.append({"seed": seed, **r})
    print(seed, f"CAL fixed {r['fixed_sigma']['cal']:.4f}  predicted {r['predicted_sigma']['cal']:.4f}")
red = [1 - r["predicted_sigma"]["cal"] / r["fixed_sigma"]["cal"] for r in rows]
finish(args, rows, {"median CAL reduction": float(np.median(red))})
