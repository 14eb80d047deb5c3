# %% [markdown]
# A local machine that asks the Schrödinger oracle for |psi(tau)> at each step.

# %%
import numpy as np

from relmachine.experiments import pauli_x_scenario, run_schrodinger_scenario

r = pauli_x_scenario()
print("Pauli-X, tau = pi/2:", np.round([complex(*z) for z in r["final_state"]], 12))
print("global steps per local step:", [row["global_steps"] for row in r["per_step"]])

# %%
for mode in ("restart", "step"):
    r = run_schrodinger_scenario(2, 10, 1e-9, 32, seed=3, mode=mode)
    print(f"{mode:8s} max evolve err {r['max_evolve_error']:.1e}  on-tape {r['max_tape_deviation']:.1e}")
