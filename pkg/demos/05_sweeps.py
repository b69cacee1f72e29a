"""
Depth and data-size sweeps through the command line
===================================================

The same workflow the ``dlrra`` command runs: generate a dataset file,
then train one model per hidden-layer count and one per training-set
size. Results land in CSV files next to a JSON summary.
"""

import csv
import tempfile
from pathlib import Path

from dlrra.cli import main

root = Path(__file__).resolve().parents[1]
work = Path(tempfile.mkdtemp(prefix="dlrra-sweeps-"))
data = work / "data.csv"
fast = work / "train.cfg"
fast.write_text("max_epochs = 100\n")

main(["generate", str(root / "configs" / "small.cfg"), "--samples", "1500", "--seed", "5", "--out", str(data)])
main(["sweep", "--data", str(data), "--train-config", str(fast), "--axis", "layers", "--values", "1,2,3,4",
      "--out", str(work / "layers.csv")])
main(["sweep", "--data", str(data), "--train-config", str(fast), "--axis", "samples", "--values", "150,300,600,1200",
      "--hidden", "42,64", "--out", str(work / "samples.csv")])

for name in ("layers.csv", "samples.csv"):
    with open(work / name, newline="") as fh:
        print(name)
        for row in csv.DictReader(fh):
            print(f"  {row['value']:>5}  train {float(row['train_accuracy']):.3f}  test {float(row['test_accuracy']):.3f}")
print("outputs in", work)
