"""Pilot training run: default config, periodic metric snapshots."""

import json
import sys
import time
from pathlib import Path

import torch

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from attrgan import synth, trainer
from attrgan.config import TrainConfig
from attrgan.evaluator import evaluate

torch.use_deterministic_algorithms(True)

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("runs/pilot")
steps = int(sys.argv[2]) if len(sys.argv) > 2 else 6000
out.mkdir(parents=True, exist_ok=True)

manifest = synth.DatasetManifest(
    generator_version=synth.GENERATOR_VERSION, num_attributes=4, image_size=32,
    count=2000, global_seed=0, train_count=1600,
)
config = TrainConfig(steps=steps, seed=0, checkpoint_interval=1000)
state = trainer.new_train_state(config)
data = trainer.TrainData(manifest)
print(f"training {steps} steps...", flush=True)
t0 = time.time()

while state.step < steps:
    chunk = min(state.step + 1000, steps)
    trainer.run_training(state, data, log_path=out / "train_log.csv",
                         checkpoint_dir=out, steps=chunk)
    report = evaluate(state.model, manifest, limit=100, theta_limit=25)
    state.model.train()
    snap = {
        "step": state.step,
        "minutes": round((time.time() - t0) / 60, 1),
        "acc": round(report.average_accuracy, 3),
        "keep": round(report.average_preservation, 3),
        "recon": round(report.reconstruction_mae, 4),
        "bg": round(report.mean_background_error, 4),
        "la_mean": round(report.latent_a_mean, 3),
        "la_var": round(report.latent_a_var, 3),
        "lb_bins": [round(b, 3) for b in report.latent_b_bins],
        "rho": round(report.mean_theta_rank_correlation, 3),
    }
    print(json.dumps(snap), flush=True)
    (out / f"eval_{state.step:06d}.json").write_text(report.to_json())

print("done", flush=True)
