# %% [markdown]
# # Consistency checks
#
# Rotating state and observables with one unitary leaves every rule's
# predictions untouched, because each rule reads only the projections of
# the state. Two observable sets that induce the same projectors are
# indistinguishable for every rule.

# %%
import numpy as np

from postlab.experiments import PAPER_X, PAPER_Y, ExperimentConfig, equivalence_audit, invariance_audit
from postlab.measurement import APP, BORN, generalized

rules = (BORN, APP, generalized(0.25), generalized(0.75))
rep = invariance_audit(ExperimentConfig("invariance", rules=rules, seed=7, params={"unitary_count": 200}))
print(rep.analytic["max_deviation"])
print("support mismatches:", rep.analytic["support_mismatches"])

# %%
for a, b, tag in (([PAPER_X, PAPER_Y], [PAPER_Y], "{X,Y} vs {Y}"),
                  ([PAPER_X], [PAPER_X, PAPER_Y], "{X} vs {X,Y}"),
                  ([PAPER_X], [3 * PAPER_X - np.eye(5)], "{X} vs {3X-1}")):
    r = equivalence_audit(a, b, rules=rules)
    print(f"{tag:>14}: equivalent={r.analytic['equivalent']}", r.analytic.get("max_deviation", ""))
