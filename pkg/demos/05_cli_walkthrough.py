# coding: utf-8

# # From tweets to an averaged report
#
# The command line chains ingest, simulate and report. This notebook drives
# it from Python on the bundled synthetic corpus of 6,000 labelled posts, in a
# temporary directory. The same steps in a shell:
#
#     echosim --out run ingest tests/fixtures/synthetic_6000.jsonl
#     echosim --out run --config run.cfg simulate run/graph.json
#     echosim --out run/report report run/seed_*/metrics.csv

# In[1]:

import json
import tempfile
from pathlib import Path

from echosim.cli import main

corpus = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "synthetic_6000.jsonl"
out = Path(tempfile.mkdtemp(prefix="echosim-"))


# Ingest keeps the 200 most active users, links them by retweets and starts
# each one at the mean stance of their last ten posts.

# In[2]:

main(["--out", str(out), "ingest", str(corpus)])
g = json.loads((out / "graph.json").read_text())
print(len(g["users"]), "users,", len(g["edges"]), "edges")


# A config file holds any field of the simulation, ingest or run manifest.
# Three seeds of 1,000 steps with the mock engine keep this quick.

# In[3]:

cfg = out / "run.cfg"
cfg.write_text("engine = mock\nseeds = 1 2 3\nmax_steps = 1000\ncheckpoint_every = 250\n")
main(["--out", str(out), "--config", str(cfg), "simulate", str(out / "graph.json")])


# Each seed directory has a streamed event log, checkpoint metrics and a summary.

# In[4]:

print(sorted(p.name for p in (out / "seed_1").iterdir()))
print((out / "seed_1" / "metrics.csv").read_text())


# The report aligns checkpoints across seeds and gives mean and sample std.

# In[5]:

series = [str(out / f"seed_{s}" / "metrics.csv") for s in (1, 2, 3)]
main(["--out", str(out / "report"), "report", *series])
rep = json.loads((out / "report" / "report.json").read_text())
for cp in rep["checkpoints"]:
    m = cp["modularity"]
    print("step %4d  modularity %.3f +/- %.3f" % (cp["step"], m["mean"], m["std"]))
print("artifacts in", out)
