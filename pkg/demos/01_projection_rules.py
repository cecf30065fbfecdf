# %% [markdown]
# # Three projection rules on one state
#
# A measurement is a set of commuting observables. Its outcomes are the
# common eigenspaces, and the projectors onto them form a complete orthogonal
# family. The rules differ only in how they weigh those projections.

# %%
import numpy as np

from postlab import APP, BORN, distribution, generalized, joint_decomposition, support_count
from postlab.measurement import collapse

Y = np.diag([1.0, 2.0, 3.0, 4.0, 5.0])
dec = joint_decomposition([Y])
psi = np.array([0.8, 0.4, 0.4, 0.2, 0.0])
psi = psi / np.linalg.norm(psi)

# %%
n, flags = support_count(psi, dec)
print("branches carrying the state:", n, flags)

for rule in (BORN, APP, generalized(0.5)):
    d = distribution(psi, dec, rule)
    print(f"{str(rule):>16}:", np.round(d.probabilities, 4))

# %% [markdown]
# The last branch has no amplitude, so every rule gives it probability 0.
# The equal-weight rule ignores the amplitudes otherwise: four live
# branches get 1/4 each.
#
# Collapse is identical for all rules.

# %%
post = collapse(psi, dec, 0)
print("after outcome y=1:", np.round(post, 4))
print("re-measured:", distribution(post, dec, APP).probabilities)
