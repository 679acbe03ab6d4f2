"""Slope recovery of predicted-sigma linear regression versus least squares, 20% gross outliers."""

from _common import finish, parser
from fulllik import experiments as ex

args = parser(__doc__).parse_args()
rows = []
for seed in range(args.seeds):
    rows.append({"seed": seed, **ex.robust_regression(seed)})
    r = rows[-1]
    print(seed, f"true {r['true_slope']:.3f}  ols {r['ols_slope']:.3f}  predicted-sigma {r['predicted_sigma_slope']:.3f}")
finish(args, rows, {"predicted-sigma error < OLS error":
                    f"{sum(r['predicted_sigma_error'] < r['ols_error'] for r in rows)}/{len(rows)}"})
