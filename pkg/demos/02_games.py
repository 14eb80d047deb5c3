# %% [markdown]
# Guessing games. A hidden coin picks the padding; detectors living on the
# local tape try to name it.

# %%
from relmachine import corpus
from relmachine.experiments import (
    double, midpoint_approximation, offset_approximation, run_measure_game, run_simtime_game,
)

TRIALS = 2000

# %%
for name, factory in corpus.DETECTORS.items():
    r = run_simtime_game(factory(), [1, 9], TRIALS, seed=42)
    lo, hi = r.interval
    print(f"{name:13s} acc={r.accuracy:.3f}  95% [{lo:.3f}, {hi:.3f}]  aborted={r.aborted}")

# %% [markdown]
# `timing_probe` walks off the end of its tape toward the scrap region and is
# stopped by the guard every time. `tell_me` is handed the answer by an oracle.

# %%
inside = run_measure_game(double, midpoint_approximation(double), 8, TRIALS, seed=1)
outside = run_measure_game(double, offset_approximation(double), 8, TRIALS, seed=1)
print("midpoint f~:", inside.accuracy, inside.interval)
print("f + 1     :", outside.extra["f_tilde_accuracy"], "on f~ trials")
