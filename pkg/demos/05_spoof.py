# %% [markdown]
# Spoof-accept: the global machine hunts for a tape that makes the local
# machine accept, then installs it between two local ticks.

# %%
from relmachine import corpus
from relmachine.relative_model import RelativeModel

m = RelativeModel(corpus.equality_checker(), "011", local_size=3)
res = m.spoof_accept(horizon=3, candidate_bound=8, width=3)
print(res)
print("outcome:", m.run_local(3), "tau:", m.tau, "t:", m.t)
