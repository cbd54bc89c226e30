"""Stage ablation on a synthetic world: centering + vMF (M1), + scene attention (M2), + pulling (M3).

Also reports class separability before and after centering.
"""

import argparse

import numpy as np

from geovad.config import PipelineConfig, apply_overrides, preset
from geovad.evalkit import average_precision, roc_auc, separability_stats
from geovad.pipeline import calibrate_priors, run_offline
from geovad.prototypes import calibrate
from geovad.sphere import center_many, normalize
from geovad.synthgen import angular_std_deg, preset_world

STAGES = {
    "M1": {"enable_hsa": False, "enable_sgp": False},
    "M2": {"enable_sgp": False},
    "M3": {},
}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--world", default="B", choices=["A", "B", "C", "D"])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--preset", default="default", help="config preset")
    args = ap.parse_args()
    base: PipelineConfig = preset(args.preset)
    print(f"world {args.world}: frame AP / AUC per stage")
    for seed in range(args.seeds):
        w = preset_world(args.world, seed)
        y = w.dataset.frame_labels()
        cells = []
        for name, over in STAGES.items():
            s = run_offline(w.dataset, w.syn_normal, w.syn_abn, apply_overrides(base, over)).frame_scores()
            cells.append(f"{name} {average_precision(s, y):.4f}/{roc_auc(s, y):.4f}")
        print(f"  seed {seed}: " + "  ".join(cells))

    w = preset_world(args.world, 0)
    main_f, _, _ = w.dataset.stacked()
    yc = w.clip_label_vector()
    raw = separability_stats(normalize(main_f), yc, calibrate(w.syn_normal, w.syn_abn, base.k_n, base.k_a, base.kappa))
    pri = calibrate_priors(w.dataset, w.syn_normal, w.syn_abn, base)
    cen, _ = center_many(pri.unified_mean, main_f)
    post = separability_stats(cen, yc, pri.bank)
    print("separability (seed 0)   delta_mu  sigma  fisher  overlap  angular_std")
    for tag, st, x in (("before centering", raw, main_f), ("after centering ", post, cen)):
        print(f"  {tag}   {st.delta_mu:8.2f} {st.sigma_delta:6.2f} {st.fisher:7.3f} {st.score_overlap:8.3f} "
              f"{angular_std_deg(x):8.2f}")


if __name__ == "__main__":
    main()
