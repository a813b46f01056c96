# %% [markdown]
# # Efficiency curves at desk scale
#
# Samples random (k1, k2) with 5 <= k1 <= k2 <= 50 for each schedule, trains
# for a fixed sequence budget and plots test perplexity against sequences
# seen and against training time. The full-size experiment (100 runs per
# schedule, 500,000 sequences) is the same call with the defaults of
# `BenchPlan`, or `python -m charrnn bench`.

# %%
from pathlib import Path

from charrnn import Corpus, sample_corpus_path
from charrnn.bench import BenchPlan, render_curves, run_benchmark, write_csv

out = Path("bench_out")
out.mkdir(exist_ok=True)

corpus = Corpus.from_path(sample_corpus_path())
plan = BenchPlan(runs_per_schedule=2, sequence_budget=10_000, eval_every=1_000,
                 master_seed=0, eval_cap=500)

# %%
records = run_benchmark(plan, corpus)
write_csv(records, out / "curves.csv")
render_curves(records, "sequences", out / "by_sequences.svg")
render_curves(records, "wall_ms", out / "by_time.svg")

# %% Final perplexity per run
for r in records:
    if r.sequences_seen == plan.sequence_budget:
        print(f"run {r.run_id} schedule {r.schedule} k1={r.k1:2d} k2={r.k2:2d}  "
              f"ppl {r.test_perplexity:6.2f}  train {r.wall_ms / 1000:5.1f} s")
