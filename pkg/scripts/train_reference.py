"""Produce the committed reference checkpoint and locked evaluation report.

Deterministic end to end: fixed dataset manifest (2000 samples, seed 0,
80/20 split), fixed training config, seeded run. Outputs land in
acceptance/: train_config.json, reference.ckpt, train_log.csv,
eval_report.json, and one transfer grid image per attribute.
"""

import sys
import time
from pathlib import Path

import torch

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from attrgan import synth, trainer
from attrgan.checkpoint import save_model
from attrgan.config import TrainConfig, save_train_config
from attrgan.evaluator import evaluate, save_transfer_grids

torch.use_deterministic_algorithms(True)

STEPS = int(sys.argv[1]) if len(sys.argv) > 1 else 9000

out = ROOT / "acceptance"
out.mkdir(exist_ok=True)

manifest = synth.DatasetManifest(
    generator_version=synth.GENERATOR_VERSION, num_attributes=4, image_size=32,
    count=2000, global_seed=0, train_count=1600,
)
config = TrainConfig(steps=STEPS, seed=0, checkpoint_interval=1000)
save_train_config(config, out / "train_config.json")

state = trainer.new_train_state(config)
data = trainer.TrainData(manifest)
t0 = time.time()
trainer.run_training(state, data, log_path=out / "train_log.csv", quiet=False)
train_minutes = (time.time() - t0) / 60
print(f"training finished in {train_minutes:.1f} min", flush=True)

save_model(state.model, config, out / "reference.ckpt",
           extra_meta={"train_minutes": round(train_minutes, 1)})

model = state.model
model.eval()
report = evaluate(model, manifest)
report.save(out / "eval_report.json")
save_transfer_grids(model, manifest, out / "grids")
print(report.to_json())
print(f"total wall time {(time.time() - t0) / 60:.1f} min", flush=True)
