"""Executable checks of the consistency theorems and the odd consequences of the equal-weight rule.

Every experiment takes an :class:`ExperimentConfig` and returns an
:class:`ExperimentReport` holding analytic results, optional Monte Carlo
estimates and a list of verdicts. Missing parameters fall back to the
five-level example: a coarse observable ``X = diag(10, 20, 20, 20, 20)``, a fine
observable ``Y = diag(1, 2, 3, 4, 5)`` and the uniform state.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import HardMismatch, LeafBudgetExceeded, PreconditionError
from .hilbert import (
    PAULI,
    TOL_CLUSTER,
    ProjectorDecomposition,
    as_hermitian,
    as_state,
    commutator_norm,
    evolve,
    joint_decomposition,
    max_entry,
    random_commuting_observables,
    random_state,
    random_unitary,
    uniform_state,
    basis_state,
)
from .measurement import (
    APP,
    BORN,
    TAU,
    MeasurementRule,
    collapse,
    distribution,
    projection_weights,
    sample_indices,
    support_count,
)
from .stats import (
    EmpiricalHistogram,
    RandomStream,
    chi_square_gof,
    mutual_information,
    z_scores,
)
log = logging.getLogger(__name__)

PAPER_X = np.diag([10.0, 20.0, 20.0, 20.0, 20.0]).astype(complex)
PAPER_Y = np.diag([1.0, 2.0, 3.0, 4.0, 5.0]).astype(complex)
PAPER_PAYOFF = {1.0: 10.0, 2.0: 20.0, 3.0: 20.0, 4.0: 20.0, 5.0: 20.0}
for _m in (PAPER_X, PAPER_Y):
    _m.flags.writeable = False

FLAG_SIGMA = 4.0
FAIL_SIGMA = 6.0
MAX_TREE_DEPTH = 8
MAX_LEAVES = 10**5

CLAIMS = {
    "unitary-invariance": "Distributions are unchanged when state and observables are rotated by the same unitary.",
    "support-conserved": "The number of nonvanishing projections is unchanged by a unitary rotation.",
    "collapse-covariant": "The post-measurement state of the rotated problem is the rotated post-measurement state.",
    "equivalence-decision": "Two observable sets are equivalent exactly when their projector families coincide up to relabeling.",
    "equivalent-same-distribution": "Equivalent observable sets give identical distributions under every rule.",
    "app-contextual": "Under the equal-weight rule the probability of a coarse value depends on whether a finer observable is measured too.",
    "born-noncontextual": "Under the Born rule coarse marginals are the same in every context.",
    "noncontextuality-iff-born": "A rule assigns context-independent probabilities to projectors only when it is the Born rule.",
    "full-rank-certain": "The identity projector has probability 1 in every context.",
    "commuting-correlated": "If every measured observable commutes with H, a repeated measurement reproduces the first result.",
    "app-decorrelated": "Without commutation the two results of the equal-weight rule are independent.",
    "born-state-dependent": "Without commutation the second Born result still depends on the first.",
    "app-jump": "An arbitrarily small admixture on an empty branch moves its equal-weight probability from 0 to 1/n.",
    "born-continuous": "The Born probability of the admixed branch stays equal to the admixture weight.",
    "born-payoff-equal": "Paying f(y) after the fine measurement and measuring f(Y) directly have the same Born expectation.",
    "app-payoff-differs": "For non-injective f the two payoff routes have different equal-weight expectations.",
    "injective-payoff-equal": "For injective f both payoff routes agree under every rule.",
    "leaf-weights-sum": "Leaf weights of the branch tree sum to 1.",
    "app-equal-siblings": "Under the equal-weight rule all on-support siblings have equal weight.",
    "certainty-eigenstate": "A common eigenvector yields its own outcome with probability 1 and is left unchanged.",
    "certainty-orthogonal": "A branch orthogonal to the state has probability 0.",
    "monte-carlo": "Sampled frequencies agree with the analytic distribution.",
}


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    dim: int | None = None
    rules: tuple = (BORN, APP)
    seed: int = 0
    trials: int = 0
    tau: float = TAU
    tol_cluster: float = TOL_CLUSTER
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.trials < 0:
            raise ValueError("trials must be >= 0")

    def param(self, key, default=None):
        return self.params.get(key, default)


@dataclass
class Verdict:
    claim: str
    status: str  # "pass", "flag", "fail" or "non-generic"
    margin: float
    detail: str = ""

    def __post_init__(self):
        if self.claim not in CLAIMS:
            raise KeyError(f"unknown claim {self.claim!r}")

    @property
    def passed(self):
        return self.status == "pass"


def _verdict(claim, ok, margin, detail=""):
    return Verdict(claim, "pass" if ok else "fail", float(margin), detail)


@dataclass
class ExperimentReport:
    name: str
    analytic: dict = field(default_factory=dict)
    empirical: dict = field(default_factory=dict)
    verdicts: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    @property
    def status(self) -> str:
        statuses = {v.status for v in self.verdicts}
        if "fail" in statuses:
            return "fail"
        if statuses - {"pass"}:
            return "flag"
        return "pass"

    def verdict(self, claim):
        return [v for v in self.verdicts if v.claim == claim]


def _labels(dec):
    return [list(lab) for lab in dec.labels]


def _streams(cfg):
    root = RandomStream(cfg.seed)
    return root.spawn(1), root.spawn(2)


def monte_carlo(probabilities, labels, trials, stream, name="") -> tuple[dict, Verdict]:
    """Sample ``trials`` outcomes and score them against ``probabilities``."""
    p = np.asarray(probabilities, dtype=float)
    idx = sample_indices(p, trials, stream)
    return score_histogram(EmpiricalHistogram.from_indices(idx, labels), p, name)


def score_histogram(hist, p, name=""):
    z = z_scores(hist, p)
    zmax = float(np.max(z))
    payload = {
        "trials": hist.total,
        "counts": hist.counts.tolist(),
        "frequencies": hist.frequencies().tolist(),
        "std_errors": np.sqrt(p * (1 - p) / max(hist.total, 1)).tolist(),
        "max_z": zmax,
    }
    try:
        gof = chi_square_gof(hist, p)
        payload["chi_square"] = {"statistic": gof.statistic, "dof": gof.dof, "band": gof.band}
    except HardMismatch as exc:
        return payload, Verdict("monte-carlo", "fail", math.inf, f"{name}: {exc}")
    except ValueError:
        payload["chi_square"] = None
    if zmax <= FLAG_SIGMA:
        status = "pass"
    elif zmax <= FAIL_SIGMA:
        status = "flag"
    else:
        status = "fail"
    return payload, Verdict("monte-carlo", status, FLAG_SIGMA - zmax, name)


def _restricted_random_state(dec, stream):
    """Random state supported on a random nonempty subset of branches."""
    n = dec.N
    k = int(stream.integers(1, n + 1))
    keep = stream.permutation(n)[:k]
    z = stream.complex_normal(dec.dim)
    v = sum(dec.projectors[i] @ z for i in keep)
    return as_state(v / np.linalg.norm(v))


# --------------------------------------------------------------------------
# unitary invariance


def invariance_audit(cfg: ExperimentConfig) -> ExperimentReport:
    """Compare measurements before and after a joint unitary rotation of state and observables."""
    stream, _ = _streams(cfg)
    obs = cfg.param("observables")
    dim = cfg.dim
    if obs is None:
        if dim in (None, 5):
            obs, dim = [PAPER_X, PAPER_Y], 5
        else:
            obs = random_commuting_observables(dim, 2, stream)
    dim = np.asarray(obs[0]).shape[0]
    dec = joint_decomposition(obs, cfg.tol_cluster)
    unitaries = cfg.param("unitaries")
    if unitaries is None:
        K = int(cfg.param("unitary_count", 100))
        unitaries = [random_unitary(dim, stream) for _ in range(K)]
    states = cfg.param("states")

    worst = {str(r): 0.0 for r in cfg.rules}
    worst_recomputed = {str(r): 0.0 for r in cfg.rules}
    worst_collapse = 0.0
    n_mismatch = 0
    changed = 0
    scale = max(1.0, max(max_entry(a) for a in obs))
    for k, u in enumerate(unitaries):
        psi = as_state(states[k % len(states)]) if states else _restricted_random_state(dec, stream)
        upsi = u @ psi
        dec_u = dec.conjugate(u)
        dec_re = joint_decomposition([u @ a @ u.conj().T for a in obs], cfg.tol_cluster)
        order = [dec_re.index(lab, atol=1e-6 * scale) for lab in dec.labels]
        n0, flags0 = support_count(psi, dec, cfg.tau)
        n1, flags1 = support_count(upsi, dec_u, cfg.tau)
        n2, _ = support_count(upsi, dec_re, cfg.tau)
        if not (n0 == n1 == n2 and np.array_equal(flags0, flags1)):
            n_mismatch += 1
        if n0 < dec.N:
            changed += 1
        for r in cfg.rules:
            p0 = distribution(psi, dec, r, cfg.tau).probabilities
            p1 = distribution(upsi, dec_u, r, cfg.tau).probabilities
            p2 = distribution(upsi, dec_re, r, cfg.tau).probabilities[order]
            worst[str(r)] = max(worst[str(r)], float(np.max(np.abs(p0 - p1))))
            worst_recomputed[str(r)] = max(worst_recomputed[str(r)], float(np.max(np.abs(p0 - p2))))
        for i in np.flatnonzero(flags0):
            dev = max_entry(collapse(upsi, dec_u, i, cfg.tau) - u @ collapse(psi, dec, i, cfg.tau))
            worst_collapse = max(worst_collapse, dev)

    rep = ExperimentReport("invariance")
    rep.analytic = {
        "dim": dim,
        "branches": dec.N,
        "unitaries": len(unitaries),
        "states_off_support": changed,
        "max_deviation": worst,
        "max_deviation_recomputed": worst_recomputed,
        "max_collapse_deviation": worst_collapse,
        "support_mismatches": n_mismatch,
    }
    dev = max(max(worst.values()), max(worst_recomputed.values()))
    rep.verdicts.append(_verdict("unitary-invariance", dev < 1e-8, 1e-8 - dev))
    rep.verdicts.append(_verdict("support-conserved", n_mismatch == 0, -n_mismatch))
    rep.verdicts.append(_verdict("collapse-covariant", worst_collapse < 1e-8, 1e-8 - worst_collapse))
    return rep


# --------------------------------------------------------------------------
# equivalence of measurements


def equivalence_audit(obs_a, obs_b, *, rules=(BORN, APP), n_states: int = 100, seed: int = 0,
                      tau: float = TAU, tol_cluster: float = TOL_CLUSTER, expect: bool | None = None) -> ExperimentReport:
    """Decide whether two observable sets are physically identical and check the consequence.

    Equivalence means the two projector families coincide up to a bijective
    relabeling of outcomes (max-entry distance below ``1e-7``). When they do,
    the distributions of ``n_states`` random states are compared per matched
    branch under every rule.
    """
    dec_a = joint_decomposition(obs_a, tol_cluster)
    dec_b = joint_decomposition(obs_b, tol_cluster)
    if dec_a.dim != dec_b.dim:
        raise PreconditionError("observable sets act on different dimensions")
    mapping = dec_a.match(dec_b)
    rep = ExperimentReport("equivalence")
    rep.analytic = {
        "equivalent": mapping is not None,
        "branches_a": dec_a.N,
        "branches_b": dec_b.N,
        "labels_a": _labels(dec_a),
        "labels_b": _labels(dec_b),
    }
    if mapping is not None:
        order = [mapping[i] for i in range(dec_a.N)]
        rep.analytic["relabeling"] = [[list(dec_a.labels[i]), list(dec_b.labels[j])] for i, j in enumerate(order)]
        stream = RandomStream(seed)
        worst = {str(r): 0.0 for r in rules}
        for s in range(n_states):
            psi = random_state(dec_a.dim, stream) if s % 2 == 0 else _restricted_random_state(dec_a, stream)
            for r in rules:
                pa = distribution(psi, dec_a, r, tau).probabilities
                pb = distribution(psi, dec_b, r, tau).probabilities[order]
                worst[str(r)] = max(worst[str(r)], float(np.max(np.abs(pa - pb))))
        rep.analytic["max_deviation"] = worst
        dev = max(worst.values())
        rep.verdicts.append(_verdict("equivalent-same-distribution", dev < 1e-12, 1e-12 - dev))
    if expect is not None:
        rep.verdicts.append(_verdict("equivalence-decision", (mapping is not None) == expect, 0.0,
                                     f"expected equivalent={expect}"))
    return rep


def equivalence_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    pairs = cfg.param("pairs")
    if pairs is None:
        pairs = [
            {"a": [PAPER_X, PAPER_Y], "b": [PAPER_Y], "expect": True},
            {"a": [PAPER_X], "b": [PAPER_X, PAPER_Y], "expect": False},
            {"a": [PAPER_X], "b": [2 * PAPER_X + np.eye(5)], "expect": True},
        ]
    rep = ExperimentReport("equivalence", analytic={"pairs": []})
    for k, pair in enumerate(pairs):
        sub = equivalence_audit(pair["a"], pair["b"], rules=cfg.rules, n_states=int(cfg.param("n_states", 100)),
                                seed=cfg.seed ^ k, tau=cfg.tau, tol_cluster=cfg.tol_cluster,
                                expect=pair.get("expect"))
        rep.analytic["pairs"].append(sub.analytic)
        for v in sub.verdicts:
            v.detail = f"pair {k}" + (f": {v.detail}" if v.detail else "")
            rep.verdicts.append(v)
    return rep


# --------------------------------------------------------------------------
# contextuality


def coarse_graining(fine: ProjectorDecomposition, coarse: ProjectorDecomposition) -> list[int]:
    """For each fine branch, the coarse branch whose projector contains it."""
    out = []
    for i, p in enumerate(fine.projectors):
        hits = [j for j, q in enumerate(coarse.projectors) if max_entry(q @ p - p) < 1e-8]
        if len(hits) != 1:
            raise PreconditionError(f"fine branch {fine.labels[i]} is not contained in a single coarse branch")
        out.append(hits[0])
    return out


def contextuality_demo(cfg: ExperimentConfig) -> ExperimentReport:
    """Probabilities of the coarse values measured alone and inferred from a finer measurement."""
    coarse_obs = cfg.param("coarse", [PAPER_X])
    fine_obs = cfg.param("fine", [PAPER_X, PAPER_Y])
    coarse = joint_decomposition(coarse_obs, cfg.tol_cluster)
    fine = joint_decomposition(fine_obs, cfg.tol_cluster)
    psi = as_state(cfg.param("state", uniform_state(coarse.dim)), coarse.dim)
    for d, tag in ((coarse, "coarse"), (fine, "fine")):
        n, _ = support_count(psi, d, cfg.tau)
        if n < d.N:
            raise PreconditionError(f"state is not generic with respect to the {tag} observables")
    groups = coarse_graining(fine, coarse)

    rules = tuple(cfg.rules)
    if BORN not in rules:
        rules = rules + (BORN,)
    rep = ExperimentReport("contextuality")
    rep.analytic = {"coarse_labels": _labels(coarse), "fine_labels": _labels(fine), "rules": {}}
    spreads = {}
    for r in rules:
        alone = distribution(psi, coarse, r, cfg.tau).probabilities
        fine_p = distribution(psi, fine, r, cfg.tau).probabilities
        marginal = np.bincount(groups, weights=fine_p, minlength=coarse.N)
        spreads[r] = float(np.max(np.abs(alone - marginal)))
        rep.analytic["rules"][str(r)] = {
            "alone": alone.tolist(),
            "fine": fine_p.tolist(),
            "marginal": marginal.tolist(),
            "max_difference": spreads[r],
        }
    rep.verdicts.append(_verdict("born-noncontextual", spreads[BORN] < 1e-10, 1e-10 - spreads[BORN]))
    if APP in spreads:
        rep.verdicts.append(_verdict("app-contextual", spreads[APP] > 1e-10, spreads[APP] - 1e-10))

    if cfg.trials > 0:
        _, mc = _streams(cfg)
        for r in rules:
            a = rep.analytic["rules"][str(r)]
            emp = {}
            for ctx, dec, p in (("alone", coarse, a["alone"]), ("fine", fine, a["fine"])):
                payload, v = monte_carlo(p, dec.labels, cfg.trials, mc, f"{r} {ctx}")
                emp[ctx] = payload
                rep.verdicts.append(v)
            emp["marginal_frequencies"] = np.bincount(
                groups, weights=np.asarray(emp["fine"]["frequencies"]), minlength=coarse.N).tolist()
            rep.empirical[str(r)] = emp
    return rep


def _random_context(projector_basis, complement_basis, stream):
    """A decomposition containing ``P`` plus a random partition of a rotated complement."""
    m = complement_basis.shape[1]
    rotated = complement_basis @ random_unitary(m, stream)
    nblocks = int(stream.integers(1, m + 1))
    assign = stream.integers(0, nblocks, size=m)
    assign[stream.permutation(m)[:nblocks]] = np.arange(nblocks)
    bases = [projector_basis] + [rotated[:, assign == b] for b in range(nblocks)]
    labels = [(float(k),) for k in range(len(bases))]
    return ProjectorDecomposition.from_bases(labels, bases)


def noncontextuality_audit(rule: MeasurementRule, cfg: ExperimentConfig) -> ExperimentReport:
    """Is the probability that ``rule`` assigns to a projector the same in every context?

    For each random state a random projector ``P`` is drawn; contexts are
    decompositions that contain ``P`` and split its complement differently
    (a random unitary on a fixed completion, then a random grouping).
    """
    stream, _ = _streams(cfg)
    dims = [cfg.dim] if cfg.dim else list(cfg.param("dims", [3, 4, 5, 6]))
    n_states = int(cfg.param("n_states", 20))
    n_contexts = int(cfg.param("n_contexts", 50))
    if min(dims) < 3:
        raise PreconditionError("contexts need dimension >= 3")
    worst = 0.0
    counterexample = None
    full_rank_dev = 0.0
    for s in range(n_states):
        d = dims[s % len(dims)]
        psi = random_state(d, stream)
        w = random_unitary(d, stream)
        r = int(stream.integers(1, d - 1))
        pb, comp = w[:, :r], w[:, r:]
        probs = []
        sizes = []
        for _ in range(n_contexts):
            ctx = _random_context(pb, comp, stream)
            probs.append(distribution(psi, ctx, rule, cfg.tau).probabilities[0])
            sizes.append(ctx.N)
        probs = np.array(probs)
        spread = float(probs.max() - probs.min())
        if spread > worst:
            worst = spread
            i, j = int(probs.argmax()), int(probs.argmin())
            counterexample = {
                "dim": d, "rank": r, "state_index": s,
                "contexts": [{"branches": sizes[i], "probability": float(probs[i])},
                             {"branches": sizes[j], "probability": float(probs[j])}],
            }
        ident = ProjectorDecomposition.from_bases([(1.0,)], [np.eye(d)])
        full_rank_dev = max(full_rank_dev, abs(distribution(psi, ident, rule, cfg.tau).probabilities[0] - 1.0))

    paper = None
    if cfg.param("include_example_contexts", True):
        psi = uniform_state(5)
        p_alone = distribution(psi, joint_decomposition([PAPER_X]), rule, cfg.tau)[(10.0,)]
        p_fine = distribution(psi, joint_decomposition([PAPER_Y]), rule, cfg.tau)[(1.0,)]
        paper = {"coarse_context": p_alone, "fine_context": p_fine}
        spread = abs(p_alone - p_fine)
        if spread > 1e-9:
            worst = max(worst, spread)
            counterexample = {
                "source": "example", "dim": 5, "rank": 1,
                "contexts": [{"branches": 2, "probability": p_alone}, {"branches": 5, "probability": p_fine}],
            }

    noncontextual = worst <= 1e-9
    rep = ExperimentReport("noncontextuality")
    rep.analytic = {
        "rule": str(rule),
        "states": n_states,
        "contexts_per_state": n_contexts,
        "max_spread": worst,
        "noncontextual": noncontextual,
        "counterexample": None if noncontextual else counterexample,
        "example_contexts": paper,
        "full_rank_deviation": full_rank_dev,
    }
    expected = rule.kind == "born" or (rule.kind == "generalized" and rule.alpha == 0.0)
    rep.verdicts.append(_verdict("noncontextuality-iff-born", noncontextual == expected, 1e-9 - worst,
                                 f"{rule}: expected noncontextual={expected}"))
    rep.verdicts.append(_verdict("full-rank-certain", full_rank_dev < 1e-12, 1e-12 - full_rank_dev))
    return rep


def noncontextuality_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    rep = ExperimentReport("noncontextuality", analytic={"rules": {}})
    for r in cfg.rules:
        sub = noncontextuality_audit(r, cfg)
        rep.analytic["rules"][str(r)] = sub.analytic
        rep.verdicts.extend(sub.verdicts)
    return rep


# --------------------------------------------------------------------------
# repeated measurements with evolution in between


def two_step_joint(state, dec, h, t, rule, tau=TAU):
    """Joint distribution of measure, evolve for ``t`` under ``h``, measure again.

    Returns ``(joint, post_states)`` where ``post_states[a]`` is the evolved
    collapsed state after first outcome ``a`` (None if ``a`` is off support).
    """
    p1 = distribution(state, dec, rule, tau).probabilities
    joint = np.zeros((dec.N, dec.N))
    posts = []
    for a in range(dec.N):
        if p1[a] == 0.0:
            posts.append(None)
            continue
        post = evolve(collapse(state, dec, a, tau), h, t)
        posts.append(post)
        joint[a] = p1[a] * distribution(post, dec, rule, tau).probabilities
    return joint, posts


def decorrelation_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Correlation between two identical measurements separated by unitary evolution."""
    obs = cfg.param("observables", [PAULI["z"]])
    dec = joint_decomposition(obs, cfg.tol_cluster)
    psi = as_state(cfg.param("state", uniform_state(dec.dim)), dec.dim)
    cases = cfg.param("cases")
    if cases is None:
        cases = [{"hamiltonian": PAULI["x"], "t": math.pi / 6}, {"hamiltonian": PAULI["z"], "t": math.pi / 6}]
    _, mc = _streams(cfg)
    rules = tuple(cfg.rules)
    rep = ExperimentReport("decorrelation", analytic={"labels": _labels(dec), "cases": []})
    for c, case in enumerate(cases):
        h = as_hermitian(case["hamiltonian"], dec.dim)
        t = float(case["t"])
        commuting = all(commutator_norm(a, h) < 1e-9 for a in obs)
        out = {"t": t, "commuting": commuting, "rules": {}}
        generic = True
        cond = {}
        for r in rules:
            joint, posts = two_step_joint(psi, dec, h, t, r, cfg.tau)
            same = float(np.trace(joint))
            mi = mutual_information(joint)
            out["rules"][str(r)] = {"joint": joint.tolist(), "p_same": same, "mutual_information": mi}
            for post in posts:
                if post is not None and support_count(post, dec, cfg.tau)[0] < dec.N:
                    generic = False
            cond[r] = [distribution(p, dec, r, cfg.tau).probabilities for p in posts if p is not None]
            if cfg.trials > 0:
                payload, v = _sample_two_step(psi, dec, h, t, r, cfg.tau, cfg.trials, mc, joint)
                v.detail = f"case {c} {r}"
                rep.empirical.setdefault(f"case{c}", {})[str(r)] = payload
                rep.verdicts.append(v)
        out["generic"] = generic
        rep.analytic["cases"].append(out)

        if commuting:
            dev = max(abs(out["rules"][str(r)]["p_same"] - 1.0) for r in rules)
            rep.verdicts.append(_verdict("commuting-correlated", dev < 1e-10, 1e-10 - dev, f"case {c}"))
            continue
        if not generic:
            rep.verdicts.append(Verdict("app-decorrelated", "non-generic", 0.0, f"case {c}: evolved state left the support"))
            continue
        if APP in rules:
            mi = out["rules"]["app"]["mutual_information"]
            rep.verdicts.append(_verdict("app-decorrelated", abs(mi) < 1e-9, 1e-9 - abs(mi), f"case {c}"))
        if BORN in rules:
            rows = cond[BORN]
            spread = max(max_entry(x - y) for x in rows for y in rows)
            rep.verdicts.append(_verdict("born-state-dependent", spread > 1e-9, spread - 1e-9, f"case {c}"))
    return rep


def _sample_two_step(psi, dec, h, t, rule, tau, trials, stream, joint):
    p1 = distribution(psi, dec, rule, tau).probabilities
    first = sample_indices(p1, trials, stream)
    second = np.empty(trials, dtype=np.int64)
    for a in range(dec.N):
        sel = np.flatnonzero(first == a)
        if sel.size == 0:
            continue
        post = evolve(collapse(psi, dec, a, tau), h, t)
        second[sel] = sample_indices(distribution(post, dec, rule, tau).probabilities, sel.size, stream)
    n = dec.N
    labels = [(a, b) for a in range(n) for b in range(n)]
    hist = EmpiricalHistogram.from_indices(first * n + second, labels)
    payload, v = score_histogram(hist, joint.ravel())
    payload["p_same"] = float(np.mean(first == second))
    return payload, v


# --------------------------------------------------------------------------
# discontinuity under small perturbations


DEFAULT_EPSILONS = (0.0, 1e-9, 1e-8, 1e-4, 1e-3, 1e-2, 1e-1)


def perturbation_discontinuity(cfg: ExperimentConfig) -> ExperimentReport:
    """Probability of an initially empty branch as a small amplitude is mixed into it."""
    obs = cfg.param("observables", [PAULI["z"]])
    dec = joint_decomposition(obs, cfg.tol_cluster)
    base = as_state(cfg.param("base_state", basis_state(dec.dim, 0)), dec.dim)
    n_base, flags = support_count(base, dec, cfg.tau)
    if n_base != 1:
        raise PreconditionError("base state must be an eigenvector of the decomposition")
    base_idx = int(np.flatnonzero(flags)[0])
    target = cfg.param("target_branch")
    target = next(i for i in range(dec.N) if i != base_idx) if target is None else int(target)
    if target == base_idx:
        raise PreconditionError("target branch must differ from the base branch")
    extra = dec.bases[target][:, 0]
    eps_list = [float(e) for e in cfg.param("epsilons", DEFAULT_EPSILONS)]
    lo, hi = math.sqrt(cfg.tau) / 10, 10 * math.sqrt(cfg.tau)

    rep = ExperimentReport("perturbation", analytic={
        "base_label": list(dec.labels[base_idx]), "target_label": list(dec.labels[target]), "points": []})
    jump_ok = True
    born_dev = 0.0
    saw_off = saw_on = False
    for eps in eps_list:
        ambiguous = lo <= abs(eps) <= hi
        if ambiguous:
            log.warning("epsilon %g lies in the threshold-straddling range [%g, %g]", eps, lo, hi)
        v = base + eps * extra
        psi = as_state(v / np.linalg.norm(v))
        point = {"epsilon": eps, "ambiguous": ambiguous}
        for r in cfg.rules:
            point[str(r)] = float(distribution(psi, dec, r, cfg.tau).probabilities[target])
        born = float(projection_weights(psi, dec)[target])
        exact = eps * eps / (1.0 + eps * eps)
        point["born_exact"] = exact
        rep.analytic["points"].append(point)
        if ambiguous:
            continue
        born_dev = max(born_dev, abs(born - exact))
        n, _ = support_count(psi, dec, cfg.tau)
        app = float(distribution(psi, dec, APP, cfg.tau).probabilities[target])
        if exact <= cfg.tau:
            saw_off = True
            jump_ok &= app == 0.0
        else:
            saw_on = True
            jump_ok &= abs(app - 1.0 / n) < 1e-15
    jumped = jump_ok and saw_off and saw_on
    rep.verdicts.append(_verdict("app-jump", jumped, 0.0,
                                 "" if saw_off and saw_on else "epsilon list does not bracket the threshold"))
    rep.verdicts.append(_verdict("born-continuous", born_dev < 1e-12, 1e-12 - born_dev))
    return rep


# --------------------------------------------------------------------------
# payoff equivalence


def _payoff_for(label, payoff, atol=1e-9):
    for key, val in payoff.items():
        k = tuple(np.atleast_1d(np.asarray(key, dtype=float)))
        if len(k) == len(label) and np.allclose(k, label, rtol=0.0, atol=atol):
            return float(val)
    raise PreconditionError(f"payoff map has no entry for fine outcome {label}")


def payoff_routes(state, fine: ProjectorDecomposition, payoff: dict, rule, tau=TAU, tol_cluster=TOL_CLUSTER):
    """Expected payoff when measuring fine and paying ``f(y)`` versus measuring ``f(Y)``.

    Returns ``(fine_route, coarse_route, coarse_decomposition)``.
    """
    values = np.array([_payoff_for(lab, payoff) for lab in fine.labels])
    f_op = np.tensordot(values, fine.projectors, axes=1)
    coarse = joint_decomposition([f_op], tol_cluster)
    e_fine = float(values @ distribution(state, fine, rule, tau).probabilities)
    coarse_vals = np.array([lab[0] for lab in coarse.labels])
    e_coarse = float(coarse_vals @ distribution(state, coarse, rule, tau).probabilities)
    return e_fine, e_coarse, coarse


def payoff_equivalence(cfg: ExperimentConfig) -> ExperimentReport:
    """Compare the two routes to an expected payoff under each rule."""
    fine_obs = cfg.param("fine", [PAPER_Y])
    payoff = cfg.param("payoff", PAPER_PAYOFF)
    fine = joint_decomposition(fine_obs, cfg.tol_cluster)
    psi = as_state(cfg.param("state", uniform_state(fine.dim)), fine.dim)
    values = [_payoff_for(lab, payoff) for lab in fine.labels]
    injective = len(set(values)) == len(values)
    generic = support_count(psi, fine, cfg.tau)[0] == fine.N

    rules = tuple(cfg.rules)
    rep = ExperimentReport("payoff", analytic={"injective": injective, "generic": generic, "rules": {}})
    diffs = {}
    coarse = None
    for r in rules:
        e_fine, e_coarse, coarse = payoff_routes(psi, fine, payoff, r, cfg.tau, cfg.tol_cluster)
        diffs[r] = e_fine - e_coarse
        rep.analytic["rules"][str(r)] = {"fine_route": e_fine, "coarse_route": e_coarse, "difference": diffs[r]}
    if BORN in diffs:
        d = abs(diffs[BORN])
        rep.verdicts.append(_verdict("born-payoff-equal", d < 1e-10, 1e-10 - d))
    if injective:
        d = max(abs(x) for x in diffs.values())
        f_op = coarse.operator()
        eq = fine.match(joint_decomposition([f_op], cfg.tol_cluster)) is not None
        rep.analytic["equivalent_measurements"] = eq
        rep.verdicts.append(_verdict("injective-payoff-equal", d < 1e-10 and eq, 1e-10 - d))
    elif APP in diffs:
        if generic:
            d = abs(diffs[APP])
            rep.verdicts.append(_verdict("app-payoff-differs", d > 1e-10, d - 1e-10))
        else:
            rep.verdicts.append(Verdict("app-payoff-differs", "non-generic", 0.0, "state is not generic"))
    return rep


# --------------------------------------------------------------------------
# branch trees


@dataclass(frozen=True)
class Measure:
    decomposition: ProjectorDecomposition


@dataclass(frozen=True)
class Evolve:
    hamiltonian: np.ndarray
    t: float


@dataclass(eq=False)
class BranchNode:
    depth: int
    labels: tuple | None
    weight: float
    state: np.ndarray
    children: list = field(default_factory=list)

    def leaves(self):
        if not self.children:
            yield self
            return
        for c in self.children:
            yield from c.leaves()

    def nodes(self):
        yield self
        for c in self.children:
            yield from c.nodes()

    def leaf_weights(self) -> list[float]:
        return [leaf.weight for leaf in self.leaves()]

    def histories(self):
        """``(labels along the path, weight)`` for every leaf."""
        def walk(node, path):
            path = path if node.labels is None else path + (node.labels,)
            if not node.children:
                yield path, node.weight
            for c in node.children:
                yield from walk(c, path)
        yield from walk(self, ())


def branch_tree(state, schedule, rule: MeasurementRule, tau: float = TAU, max_leaves: int = MAX_LEAVES) -> BranchNode:
    """Every measurement history of ``schedule`` with its weight under ``rule``.

    ``schedule`` is a sequence of :class:`Measure` and :class:`Evolve` steps.
    Only on-support branches become children.
    """
    psi = as_state(state)
    if sum(isinstance(s, Measure) for s in schedule) > MAX_TREE_DEPTH:
        raise PreconditionError(f"schedule has more than {MAX_TREE_DEPTH} measurements")
    root = BranchNode(0, None, 1.0, psi)
    frontier = [root]
    for step in schedule:
        if isinstance(step, Evolve):
            for node in frontier:
                node.state = evolve(node.state, step.hamiltonian, step.t)
            continue
        dec = step.decomposition
        nxt = []
        for node in frontier:
            p = distribution(node.state, dec, rule, tau).probabilities
            _, flags = support_count(node.state, dec, tau)
            for i in np.flatnonzero(flags):
                child = BranchNode(node.depth + 1, dec.labels[i], node.weight * float(p[i]),
                                   collapse(node.state, dec, i, tau))
                node.children.append(child)
                nxt.append(child)
            if len(nxt) > max_leaves:
                raise LeafBudgetExceeded(f"more than {max_leaves} leaves")
        frontier = nxt
    return root


def build_schedule(steps, tol_cluster=TOL_CLUSTER):
    """Turn ``{"measure": [ops]}`` / ``{"evolve": H, "t": t}`` dicts into schedule steps."""
    out = []
    for s in steps:
        if isinstance(s, (Measure, Evolve)):
            out.append(s)
        elif "measure" in s:
            out.append(Measure(joint_decomposition(s["measure"], tol_cluster)))
        elif "evolve" in s:
            out.append(Evolve(as_hermitian(s["evolve"]), float(s["t"])))
        else:
            raise ValueError(f"unknown schedule step {s!r}")
    return out


def default_schedule():
    return [{"measure": [PAULI["z"]]}, {"evolve": PAULI["x"], "t": math.pi / 6}, {"measure": [PAULI["z"]]}]


def check_tree(root: BranchNode, rule: MeasurementRule):
    """Largest deviations of (children sum vs parent weight) and of APP sibling equality."""
    sum_dev = 0.0
    sib_dev = 0.0
    for node in root.nodes():
        if not node.children:
            continue
        w = np.array([c.weight for c in node.children])
        sum_dev = max(sum_dev, abs(w.sum() - node.weight))
        if rule.kind == "app":
            sib_dev = max(sib_dev, float(w.max() - w.min()))
    return sum_dev, sib_dev


def branch_tree_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    schedule = build_schedule(cfg.param("schedule", default_schedule()), cfg.tol_cluster)
    dim = next(s.decomposition.dim for s in schedule if isinstance(s, Measure))
    psi = as_state(cfg.param("state", uniform_state(dim)), dim)
    rep = ExperimentReport("branch_tree", analytic={"rules": {}})
    for r in cfg.rules:
        root = branch_tree(psi, schedule, r, cfg.tau, int(cfg.param("max_leaves", MAX_LEAVES)))
        weights = root.leaf_weights()
        sum_dev, sib_dev = check_tree(root, r)
        total = abs(sum(weights) - 1.0)
        rep.analytic["rules"][str(r)] = {
            "leaves": [{"history": [list(l) for l in path], "weight": w} for path, w in root.histories()],
            "total_weight": sum(weights),
        }
        rep.verdicts.append(_verdict("leaf-weights-sum", total < 1e-9 and sum_dev < 1e-10, 1e-9 - total, str(r)))
        if r.kind == "app":
            rep.verdicts.append(_verdict("app-equal-siblings", sib_dev < 1e-12, 1e-12 - sib_dev))
    return rep


# --------------------------------------------------------------------------
# certainty


def certainty_audit(cfg: ExperimentConfig) -> ExperimentReport:
    """Eigenstates of random commuting sets: certain outcome, unchanged state, zero on orthogonal branches."""
    stream, _ = _streams(cfg)
    count = int(cfg.param("decompositions", 1000))
    dims = list(cfg.param("dims", range(2, 9))) if not cfg.dim else [cfg.dim]
    worst_p = 0.0
    worst_overlap = 0.0
    worst_orth = 0.0
    for k in range(count):
        d = dims[k % len(dims)]
        m = int(stream.integers(1, 4))
        dec = joint_decomposition(random_commuting_observables(d, m, stream), cfg.tol_cluster)
        i = int(stream.integers(0, dec.N))
        b = dec.bases[i]
        c = stream.complex_normal(b.shape[1])
        psi = as_state(b @ c / np.linalg.norm(c))
        for r in cfg.rules:
            p = distribution(psi, dec, r, cfg.tau).probabilities
            worst_p = max(worst_p, abs(p[i] - 1.0))
            post = collapse(psi, dec, i, cfg.tau)
            worst_overlap = max(worst_overlap, 1.0 - abs(np.vdot(psi, post)))
        if dec.N > 1:
            # a state with no component on branch j
            j = (i + 1) % dec.N
            z = stream.complex_normal(d)
            z = z - dec.projectors[j] @ z
            phi = as_state(z / np.linalg.norm(z))
            for r in cfg.rules:
                worst_orth = max(worst_orth, float(distribution(phi, dec, r, cfg.tau).probabilities[j]))
    rep = ExperimentReport("certainty", analytic={
        "decompositions": count,
        "max_probability_defect": worst_p,
        "max_overlap_defect": worst_overlap,
        "max_orthogonal_probability": worst_orth,
    })
    rep.verdicts.append(_verdict("certainty-eigenstate", worst_p < 1e-10 and worst_overlap < 1e-10, 1e-10 - max(worst_p, worst_overlap)))
    rep.verdicts.append(_verdict("certainty-orthogonal", worst_orth <= cfg.tau, cfg.tau - worst_orth))
    return rep


EXPERIMENTS: dict[str, Callable[[ExperimentConfig], ExperimentReport]] = {
    "invariance": invariance_audit,
    "equivalence": equivalence_experiment,
    "contextuality": contextuality_demo,
    "noncontextuality": noncontextuality_experiment,
    "decorrelation": decorrelation_experiment,
    "perturbation": perturbation_discontinuity,
    "payoff": payoff_equivalence,
    "branch_tree": branch_tree_experiment,
    "certainty": certainty_audit,
}

DESCRIPTIONS = {
    "invariance": ("unitary-invariance", "support-conserved", "collapse-covariant"),
    "equivalence": ("equivalence-decision", "equivalent-same-distribution"),
    "contextuality": ("app-contextual", "born-noncontextual"),
    "noncontextuality": ("noncontextuality-iff-born", "full-rank-certain"),
    "decorrelation": ("commuting-correlated", "app-decorrelated", "born-state-dependent"),
    "perturbation": ("app-jump", "born-continuous"),
    "payoff": ("born-payoff-equal", "app-payoff-differs", "injective-payoff-equal"),
    "branch_tree": ("leaf-weights-sum", "app-equal-siblings"),
    "certainty": ("certainty-eigenstate", "certainty-orthogonal"),
}

DEFAULT_SUITE = ("invariance", "equivalence", "contextuality", "noncontextuality",
                 "decorrelation", "perturbation", "payoff", "branch_tree")


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    try:
        fn = EXPERIMENTS[cfg.name]
    except KeyError:
        raise ValueError(f"unknown experiment {cfg.name!r}") from None
    return fn(cfg)
