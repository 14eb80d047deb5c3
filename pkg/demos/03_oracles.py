# %% [markdown]
# Relative oracles: one local step per query however much global work it takes.

# %%
from relmachine.experiments import run_oracle_benchmark

sizes = {"identity": [4, 8, 16, 32], "parity": [4, 8, 16, 32], "schrodinger": [1, 2, 3, 4]}
for oid, prof in run_oracle_benchmark(list(sizes), sizes, seed=0).items():
    print(oid, "slope", round(prof.slope_estimate, 2))
    for row in prof.rows:
        print("   ", row.to_json())
