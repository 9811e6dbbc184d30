import time

import numpy as np

from modir.hypervolume import nondominated_sort
from modir.metrics import set_report, spread_statistic
from modir.synth import SynthConfig, dataset
from modir.training import TrainConfig, train_grid, train_mo

pairs, train_idx, eval_idx = dataset(SynthConfig(seed=0), 10)
train_pairs = [pairs[i] for i in train_idx]
eval_pairs = [pairs[i] for i in eval_idx]

t0 = time.time()
cfg = TrainConfig(p=27, iterations=2000, seed=0)
params, trace = train_mo(cfg, train_pairs, eval_pairs)
t_mo = time.time() - t0
report = set_report(params, eval_pairs, cfg.ref_point, True)
print(f"MO run: {t_mo:.0f}s  HV0={trace.records[0].hv:.4f} HVend={trace.records[-1].hv:.4f}")
print(f"  pre_tre={report.pre_tre:.3f} min_tre={report.min_tre.mean_tre:.3f} (ratio {report.min_tre.mean_tre/report.pre_tre:.3f}) folding_at_min_tre={report.min_tre.folding_pct:.3f}%")
sols = report.mean_set.solutions
order = np.argsort([s.losses[1] for s in sols])
low_smooth = [sols[i] for i in order[:3]]
print("  low-smoothness folding:", [f"{s.folding_pct:.4f}%" for s in low_smooth])
front0 = nondominated_sort(report.mean_set.loss_matrix())[0]
print(f"  front0 size {len(front0)} / 27, spread={report.spread:.4f}, max_dice={report.max_dice.dice_pct:.2f}% fold@maxdice={report.max_dice.folding_pct:.3f}%")
print("  TRE per solution:", np.round([s.mean_tre for s in sols], 2).tolist())
print("  losses:", np.round(report.mean_set.loss_matrix(), 3).tolist())

t0 = time.time()
gparams, gtrace = train_grid(TrainConfig(p=27, iterations=2000, seed=0), train_pairs, eval_pairs)
t_g = time.time() - t0
greport = set_report(gparams, eval_pairs, cfg.ref_point, True)
gfront0 = nondominated_sort(greport.mean_set.loss_matrix())[0]
print(f"GRID run: {t_g:.0f}s HVend={gtrace.records[-1].hv:.4f} vs MO {trace.records[-1].hv:.4f}")
print(f"  spread grid={greport.spread:.4f} vs mo={report.spread:.4f}")
print(f"  grid min_tre={greport.min_tre.mean_tre:.3f} fold={greport.min_tre.folding_pct:.3f}")

t0 = time.time()
cfg_off = TrainConfig(p=27, iterations=2000, seed=0, guidance=False, ref_point=(1.0, 1.0))
oparams, otrace = train_mo(cfg_off, train_pairs, eval_pairs)
t_o = time.time() - t0
oreport = set_report(oparams, eval_pairs, (1.0, 1.0), False)
print(f"GUIDANCE-OFF run: {t_o:.0f}s")
print(f"  max_dice on={report.max_dice.dice_pct:.2f}% (fold {report.max_dice.folding_pct:.3f}%) off={oreport.max_dice.dice_pct:.2f}% (fold {oreport.max_dice.folding_pct:.3f}%)")
