# %% [markdown]
# # Coarse and fine measurements of the same quantity
#
# `X` takes the value 10 on the first level and 20 on the other four. `Y`
# resolves all five levels. Measuring `X` alone and measuring `{X, Y}` and
# reading `X` off the result are different measurements, and under the
# equal-weight rule they disagree.

# %%
from postlab.experiments import ExperimentConfig, contextuality_demo, noncontextuality_audit
from postlab.measurement import APP, BORN

rep = contextuality_demo(ExperimentConfig("contextuality", rules=(BORN, APP), trials=100_000, seed=1))
for rule, res in rep.analytic["rules"].items():
    print(f"{rule:>5}: P(X=10) alone = {res['alone'][0]:.3f}, via Y = {res['marginal'][0]:.3f}")
print("sampled (app):", rep.empirical["app"]["alone"]["frequencies"][0],
      rep.empirical["app"]["marginal_frequencies"][0])

# %% [markdown]
# Random contexts: fix a projector, split its complement in many ways, and
# look at the spread of the probability the rule assigns to it.

# %%
cfg = ExperimentConfig("noncontextuality", seed=3, params={"n_states": 10, "n_contexts": 30})
for rule in (BORN, APP):
    a = noncontextuality_audit(rule, cfg).analytic
    print(rule, "max spread", a["max_spread"], "counterexample", a["counterexample"])
