# %% [markdown]
# # Repeated measurements with evolution in between
#
# Measure `sigma_z`, evolve under `H` for time `t`, measure `sigma_z` again.

# %%
import math

from postlab.experiments import ExperimentConfig, decorrelation_experiment
from postlab.hilbert import PAULI

cases = [{"hamiltonian": PAULI["x"], "t": t} for t in (0.1, math.pi / 6, 1.0)]
cases.append({"hamiltonian": PAULI["z"], "t": 1.0})
rep = decorrelation_experiment(ExperimentConfig("decorrelation", params={"cases": cases}, trials=20_000, seed=2))
for c in rep.analytic["cases"]:
    born, app = c["rules"]["born"], c["rules"]["app"]
    print(f"t={c['t']:.3f} commuting={c['commuting']!s:5}  "
          f"Born P(same)={born['p_same']:.3f} MI={born['mutual_information']:.3f}  "
          f"APP P(same)={app['p_same']:.3f} MI={app['mutual_information']:.1e}")

# %% [markdown]
# Unless `H` commutes with the observable, the equal-weight rule forgets the
# first result entirely: the joint distribution is a product.
