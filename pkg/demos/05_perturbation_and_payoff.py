# %% [markdown]
# # Discontinuity and payoffs
#
# Mixing a tiny amplitude `eps` into an empty branch barely moves the Born
# probability (it is `eps^2`) but switches the equal-weight probability
# from 0 to 1/2 as soon as `eps^2` clears the support threshold.

# %%
from postlab.experiments import ExperimentConfig, payoff_equivalence, perturbation_discontinuity

rep = perturbation_discontinuity(ExperimentConfig("perturbation", params={"epsilons": [0, 1e-9, 1e-4, 1e-2, 0.3]}))
for p in rep.analytic["points"]:
    print(f"eps={p['epsilon']:<7g} born={p['born']:.3e} app={p['app']}")

# %% [markdown]
# A bet pays 10 when `y = 1` and 20 otherwise. Paying `f(y)` after measuring
# `Y`, or measuring the coarser observable `f(Y)` directly, gives the same
# Born expectation but different equal-weight expectations.

# %%
rep = payoff_equivalence(ExperimentConfig("payoff"))
for rule, v in rep.analytic["rules"].items():
    print(f"{rule:>5}: fine route {v['fine_route']:.3f}, coarse route {v['coarse_route']:.3f}")
