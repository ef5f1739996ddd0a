"""
Training the split TENN at Re = 100 and exporting heatmaps
==========================================================

Trains the split variant (velocity heads plus a transport potential), compares
its vorticity with the analytic vortex on a 64 x 64 grid at five times, and
writes CSV and PGM heatmaps.  The acceptance suite runs 5000 epochs; the
default here is shorter.
"""

# %%
from pathlib import Path

from tenn.network import NetworkSpec, PeriodicDictionary
from tenn.report import (evaluate_grid, expected_decay_ratio, export_heatmaps, model_predictor,
                         write_summary_csv)
from tenn.train import TrainConfig, save_checkpoint, train

EPOCHS = 1000
RE = 100.0
OUT = Path("tenn_run")

# %%
network = NetworkSpec(PeriodicDictionary(2), ((48, "tanh"),) * 3, "tenn_split")
config = TrainConfig(model="tenn", variant="split", re=RE, epochs=EPOCHS,
                     interior_points=1024, ic_points=256, batch_size=1024, network=network)


def progress(epoch, row, total, params):
    if epoch % 200 == 0:
        print(f"epoch {epoch:5d}  total {total:.4g}")


params, report = train(config, callback=progress)

# %%
grid = evaluate_grid(model_predictor(params, network, "tenn", "split", RE), RE, 64, 64)
for t, err in zip(grid.times, grid.rel_l2_per_time):
    print(f"t={t:4.2f}  vorticity rel-L2 {err:.4f}")
print("overall", round(grid.rel_l2_overall, 4))
print("decay ratio", round(grid.decay_ratio("pred"), 3), "analytic",
      round(expected_decay_ratio(RE, 1.0), 3))
print("largest error at t=0.5:", grid.error_location(0.5))

# %%
OUT.mkdir(exist_ok=True)
save_checkpoint(OUT / "model.ckpt", params, network, config)
report.to_csv(OUT / "history.csv")
write_summary_csv(grid, OUT / "summary.csv")
export_heatmaps(grid, OUT, "csv")
export_heatmaps(grid, OUT / "pgm", "pgm")
print("wrote", OUT)
