# %% [markdown]
# # Measurement histories as a tree
#
# Each measurement splits the current branch into one child per outcome that
# carries the state. Under the equal-weight rule every split is even.

# %%
import math

import numpy as np

from postlab.experiments import Evolve, Measure, branch_tree
from postlab.hilbert import PAULI, joint_decomposition
from postlab.measurement import APP, BORN

z = joint_decomposition([PAULI["z"]])
schedule = [Measure(z), Evolve(PAULI["x"], math.pi / 6), Measure(z), Evolve(PAULI["x"], 0.3), Measure(z)]
psi = np.array([1, 1]) / math.sqrt(2)

for rule in (BORN, APP):
    root = branch_tree(psi, schedule, rule)
    print(rule)
    for path, w in root.histories():
        print("  ", [int(lab[0]) for lab in path], f"{w:.4f}")
