"""Exit criteria for the package; each test logs one PASS/FAIL line in the terminal summary."""

import math
import time

import numpy as np
import pytest

from postlab.cli import main
from postlab.experiments import (
    PAPER_X,
    PAPER_Y,
    ExperimentConfig,
    branch_tree,
    build_schedule,
    certainty_audit,
    contextuality_demo,
    decorrelation_experiment,
    equivalence_audit,
    invariance_audit,
    noncontextuality_audit,
    payoff_equivalence,
    perturbation_discontinuity,
    Measure,
    Evolve,
)
from postlab.hilbert import PAULI, joint_decomposition, random_commuting_observables, random_state
from postlab.measurement import APP, BORN, generalized
from postlab.stats import RandomStream, binomial_margin

RULES = (BORN, APP, generalized(0.25), generalized(0.5), generalized(0.75))


@pytest.fixture
def criterion(acceptance_log):
    """Context manager-ish helper: times the body and logs PASS/FAIL."""
    class Run:
        def __init__(self, number, title, limit):
            self.number, self.title, self.limit = number, title, limit

        def __enter__(self):
            self.t0 = time.perf_counter()
            return self

        def __exit__(self, exc_type, exc, tb):
            dt = time.perf_counter() - self.t0
            ok = exc_type is None and dt < self.limit
            acceptance_log(f"criterion {self.number:>2} {'PASS' if ok else 'FAIL'}  {self.title}  ({dt:.2f}s, limit {self.limit}s)")
            if exc_type is None:
                assert dt < self.limit, f"runtime {dt:.2f}s exceeds {self.limit}s"
            return False

    return Run


def test_01_contextuality_reproduction(criterion):
    with criterion(1, "contextuality 0.5 vs 0.2", 1.0):
        rep = contextuality_demo(ExperimentConfig("contextuality", rules=(APP, BORN), seed=2024, trials=100_000))
        app = rep.analytic["rules"]["app"]
        assert abs(app["alone"][0] - 0.5) < 1e-12
        assert abs(app["marginal"][0] - 0.2) < 1e-12
        assert abs(app["marginal"][1] - 0.8) < 1e-12
        emp = rep.empirical["app"]
        f_alone = emp["alone"]["frequencies"][0]
        f_fine = emp["marginal_frequencies"][0]
        assert abs(f_alone - 0.5) < binomial_margin(0.5, 100_000, 4)
        assert abs(f_fine - 0.2) < binomial_margin(0.2, 100_000, 4)
        assert rep.status == "pass"


def test_02_born_noncontextuality(criterion):
    with criterion(2, "Born non-contextual, APP contextual", 10.0):
        rep = contextuality_demo(ExperimentConfig("contextuality", rules=(BORN,)))
        born = rep.analytic["rules"]["born"]
        assert np.max(np.abs(np.subtract(born["alone"], born["marginal"]))) < 1e-10
        cfg = ExperimentConfig("noncontextuality", seed=42,
                               params={"dims": [3, 4, 5, 6], "n_states": 20, "n_contexts": 50})
        b = noncontextuality_audit(BORN, cfg)
        assert b.analytic["noncontextual"] and b.analytic["max_spread"] < 1e-9
        a = noncontextuality_audit(APP, cfg)
        assert not a.analytic["noncontextual"]
        ce = a.analytic["counterexample"]
        p0, p1 = (c["probability"] for c in ce["contexts"])
        assert abs(p0 - p1) > 1e-9


def test_03_unitary_invariance(criterion):
    with criterion(3, "unitary invariance, dims 2-8", 10.0):
        for dim in range(2, 9):
            cfg = ExperimentConfig("invariance", dim=dim, rules=RULES, seed=dim, params={"unitary_count": 100})
            rep = invariance_audit(cfg)
            for r in RULES:
                assert rep.analytic["max_deviation"][str(r)] < 1e-8
                assert rep.analytic["max_deviation_recomputed"][str(r)] < 1e-8
            assert rep.analytic["support_mismatches"] == 0
            assert rep.passed


def test_04_certainty(criterion):
    with criterion(4, "certainty on eigenstates and orthogonal branches", 10.0):
        rep = certainty_audit(ExperimentConfig("certainty", rules=RULES, seed=4, params={"decompositions": 1000}))
        assert rep.analytic["max_probability_defect"] < 1e-10
        assert rep.analytic["max_overlap_defect"] < 1e-10
        assert rep.analytic["max_orthogonal_probability"] <= 1e-12
        assert rep.passed


def test_05_measurement_equivalence(criterion):
    with criterion(5, "measurement equivalence", 10.0):
        assert equivalence_audit([PAPER_X, PAPER_Y], [PAPER_Y], rules=RULES).analytic["equivalent"]
        assert not equivalence_audit([PAPER_X], [PAPER_X, PAPER_Y], rules=RULES).analytic["equivalent"]
        s = RandomStream(5)
        for k in range(100):
            d = int(s.integers(2, 8))
            ops = random_commuting_observables(d, 2, s)
            dec = joint_decomposition(ops)
            # relabel each outcome tuple with a fresh distinct value
            values = s.permutation(np.arange(1, dec.N + 1)).astype(float) * 3.5 - 7
            relabeled = np.tensordot(values, dec.projectors, axes=1)
            rep = equivalence_audit(ops, [relabeled], rules=RULES, n_states=20, seed=k, expect=True)
            assert rep.passed, [(v.claim, v.margin) for v in rep.verdicts]
            assert rep.analytic["max_deviation"]["app"] == 0.0


def test_06_decorrelation(criterion):
    with criterion(6, "decorrelation after evolution", 5.0):
        rep = decorrelation_experiment(ExperimentConfig(
            "decorrelation", rules=(BORN, APP), seed=6, trials=100_000,
            params={"cases": [{"hamiltonian": PAULI["x"], "t": math.pi / 6},
                              {"hamiltonian": PAULI["z"], "t": math.pi / 6}]}))
        nc, c = rep.analytic["cases"]
        assert abs(nc["rules"]["born"]["p_same"] - 0.75) < 1e-10
        assert np.max(np.abs(np.array(nc["rules"]["app"]["joint"]) - 0.25)) < 1e-12
        assert nc["rules"]["app"]["mutual_information"] < 1e-9
        for r in ("born", "app"):
            assert abs(c["rules"][r]["p_same"] - 1.0) < 1e-10
        mc = [v for v in rep.verdicts if v.claim == "monte-carlo"]
        assert len(mc) == 4 and all(v.margin > 0 for v in mc)
        assert abs(rep.empirical["case0"]["born"]["p_same"] - 0.75) < binomial_margin(0.75, 100_000, 4)
        assert abs(rep.empirical["case0"]["app"]["p_same"] - 0.5) < binomial_margin(0.5, 100_000, 4)
        assert rep.status == "pass"


def test_07_perturbation_discontinuity(criterion):
    with criterion(7, "APP jump 0 -> 0.5 at eps = 1e-4", 1.0):
        rep = perturbation_discontinuity(ExperimentConfig("perturbation", params={"epsilons": [0.0, 1e-4]}))
        off, on = rep.analytic["points"]
        assert off["app"] == 0.0
        assert on["app"] == 0.5
        assert abs(on["born"] - 1e-8) < 1e-12
        assert rep.passed


def test_08_payoff_nonequivalence(criterion):
    with criterion(8, "payoff routes 18 vs 15", 1.0):
        rep = payoff_equivalence(ExperimentConfig("payoff"))
        a = rep.analytic["rules"]
        assert abs(a["app"]["fine_route"] - 18.0) < 1e-10
        assert abs(a["app"]["coarse_route"] - 15.0) < 1e-10
        assert abs(a["app"]["difference"] - 3.0) < 1e-10
        assert abs(a["born"]["fine_route"] - 18.0) < 1e-10
        assert abs(a["born"]["coarse_route"] - 18.0) < 1e-10
        inj = payoff_equivalence(ExperimentConfig("payoff", rules=RULES,
                                                  params={"payoff": {float(y): 2.0 * y for y in range(1, 6)}}))
        assert all(abs(v["difference"]) < 1e-10 for v in inj.analytic["rules"].values())


def test_09_branch_tree(criterion):
    with criterion(9, "branch-tree leaf weights", 5.0):
        dec = joint_decomposition([PAULI["z"]])
        sched = [Measure(dec), Evolve(PAULI["x"], math.pi / 6), Measure(dec)]
        psi = np.array([1, 1]) / math.sqrt(2)
        app = branch_tree(psi, sched, APP).leaf_weights()
        born = branch_tree(psi, sched, BORN).leaf_weights()
        assert np.max(np.abs(np.array(app) - 0.25)) < 1e-10
        assert np.max(np.abs(np.array(born) - [0.375, 0.125, 0.125, 0.375])) < 1e-10
        s = RandomStream(9)
        for _ in range(20):
            d = int(s.integers(2, 4))
            steps = []
            for _ in range(5):
                steps.append({"measure": random_commuting_observables(d, 1, s)})
                z = s.complex_normal((d, d))
                steps.append({"evolve": (z + z.conj().T) / 2, "t": float(s.random()) * 3})
            sched = build_schedule(steps)
            for r in RULES:
                root = branch_tree(random_state(d, s), sched, r)
                assert abs(sum(root.leaf_weights()) - 1.0) < 1e-9


def test_10_determinism(criterion, tmp_path):
    with criterion(10, "demo suite byte-identical across runs", 30.0):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["demo", "--seed", "42", "--out", str(a)]) == 0
        assert main(["demo", "--seed", "42", "--out", str(b)]) == 0
        files = sorted(p.name for p in a.iterdir() if p.name != "manifest.yaml")
        assert len(files) == 17
        for name in files:
            assert (a / name).read_bytes() == (b / name).read_bytes(), name
