# %% [markdown]
# # The four training and prediction schedules
#
# Each schedule trains the same LSTM (50 hidden units) on the bundled Macbeth
# text. Schedules 1 and 2 predict from a fresh k2-character window, while
# schedules 3 and 4 run one state through the whole test text.
#
# This script takes about a minute on a laptop core.

# %%
import time

from charrnn import Corpus, ScheduleConfig, ScheduleTrainer, adam_init, init_params, sample_corpus_path
from charrnn.data import make_lanes
from charrnn.schedules import evaluate

corpus = Corpus.from_path(sample_corpus_path(), test_fraction=0.01)
print(f"vocabulary {corpus.V}, train {len(corpus.train)} chars, test {len(corpus.test)} chars")

K1, K2, LANES, UPDATES = 10, 20, 50, 300

# %%
for schedule in (1, 2, 3, 4):
    cfg = ScheduleConfig(schedule, K1, K2, batch_lanes=LANES, seed=0)
    params = init_params(0, corpus.V, 50)
    trainer = ScheduleTrainer(cfg, make_lanes(corpus.train, LANES, K2), params, adam_init(params))
    t0 = time.perf_counter()
    for _ in range(UPDATES):
        loss = trainer.step()
    elapsed = time.perf_counter() - t0
    ppl = evaluate(cfg, trainer.params, corpus.test)
    print(f"schedule {schedule}: last train loss {loss:.3f}, test perplexity {ppl:.2f}, "
          f"{trainer.sequences_seen} sequences in {elapsed:.1f} s")

# %% [markdown]
# Schedules 1 and 3 share their training procedure exactly, so any gap
# between them comes from prediction alone.
