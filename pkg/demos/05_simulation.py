# # A full simulation and a dishonesty sweep
#
# The bundled example mixes noisy and adversarial oracles with clusters that
# hold a few misbehaving devices.

# %%

import csv
import tempfile
from importlib.resources import files
from pathlib import Path

from shardledger import scenario_file
from shardledger.cli import main
from shardledger.sim import run

example = files("shardledger") / "data" / "example.json"
result = run(scenario_file.from_dict(scenario_file.load(example)))
m = result.summary
print("tx accuracy", float(m.tx_accuracy), "claim accuracy", float(m.claim_accuracy))
print("minted", m.minted, "burned", m.burned, "blocks", len(result.chain))

# %% [markdown]
# Sweep the number of always-flipping devices in clusters of nine. Accuracy
# holds at 1 up to three liars and collapses from four on.

# %%

out = Path(tempfile.mkdtemp())
main(["sweep", str(files("shardledger") / "data" / "bft_sweep.json"), "dishonest", "0..9", "--out", str(out)])
for row in csv.DictReader((out / "sweep.csv").open()):
    print(row["value"], row["tx_accuracy"])
