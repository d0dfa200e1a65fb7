"""Generate random MaxCut instances."""
import json
import os
import random

with open("config/experiment.json") as fh:
    cfg = json.load(fh)

rng = random.Random(cfg["seed"])
instances = []
for i in range(cfg["instances"]):
    n = cfg["qubits"]
    edges = [[a, b] for a in range(n) for b in range(a + 1, n) if rng.random() < cfg["edge_probability"]]
    instances.append({"id": i, "qubits": n, "edges": edges})

os.makedirs("out", exist_ok=True)
with open("out/instances.json", "w") as fh:
    json.dump(instances, fh, indent=1, sort_keys=True)
