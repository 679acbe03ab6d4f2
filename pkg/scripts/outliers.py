"""PCA+S, AE+S and their squared-error baselines on contaminated Gaussians."""

import numpy as np

from _common import finish, parser
from fulllik import experiments as ex

ap = parser(__doc__, seeds=20)
ap.add_argument("--rank", type=int, help="inlier subspace rank (default: isotropic inliers)")
args = ap.parse_args()
rows = []
for seed in range(args.seeds):
    r = ex.outlier_suite(seed, rank=args.rank)
    rows.append({"seed": seed, **r})
    print(seed, {k: round(v["auc"], 4) for k, v in r.items()})
kinds = [k for k in rows[0] if k != "seed"]
summary = {f"median AUC {k}": float(np.median([r[k]["auc"] for r in rows])) for k in kinds}
summary["PCA+S >= PCA"] = f"{sum(r['pca_s']['auc'] >= r['pca_baseline']['auc'] for r in rows)}/{len(rows)}"
summary["PCA+S inlier error <= PCA"] = (
    f"{sum(r['pca_s']['inlier_reconstruction'] <= r['pca_baseline']['inlier_reconstruction'] for r in rows)}"
    f"/{len(rows)}")
finish(args, rows, summary)
