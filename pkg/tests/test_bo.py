import numpy as np
import pytest
from scipy.stats import norm

from ecgbo import bo, gp
from ecgbo.errors import ConfigError, DataError
from ecgbo.space import Dimension, SearchSpace, default_space
from ecgbo.trials import FitnessResult, best_so_far, load_trials

SPACE = default_space()
OPT = SPACE.encode({"drop_rate": 0.03, "n_dense": 2, "n_conv": 4,
                    "learning_rate": 0.02, "adam_decay": 3e-6})


def quadratic(params, seed):
    u = SPACE.encode(params)
    return float(((u - OPT) ** 2).sum())


# ---------------------------------------------------------------- expected improvement

def test_ei_closed_form_values():
    assert bo.expected_improvement(0.0, 1.0, 0.0) == pytest.approx(0.398942, abs=1e-6)
    assert bo.expected_improvement(10.0, 1.0, 0.0) < 1e-20
    assert bo.expected_improvement(0.2, 0.0, 1.0) == pytest.approx(0.8)
    assert bo.expected_improvement(2.0, 0.0, 1.0) == 0.0


def test_ei_matches_scipy_form():
    rng = np.random.default_rng(0)
    m, s, b = rng.normal(size=50), rng.uniform(0.1, 2, 50), rng.normal(size=50)
    z = (b - m) / s
    expect = (b - m) * norm.cdf(z) + s * norm.pdf(z)
    np.testing.assert_allclose(bo.expected_improvement(m, s ** 2, b), expect, rtol=1e-10, atol=1e-14)


def test_ei_continuous_at_zero_sigma():
    for mean, best in [(0.3, 1.0), (1.0, 0.3), (0.5, 0.5)]:
        ei = bo.expected_improvement(mean, 1e-26, best)  # sigma = 1e-13
        assert abs(ei - max(0.0, best - mean)) <= 1e-9


# ---------------------------------------------------------------- proposals

def test_proposal_finds_1d_minimum():
    space = SearchSpace([Dimension("u", "real", 0.0, 1.0)])
    X = space.sample(8, np.random.default_rng(1))
    y = ((X[:, 0] - 0.3) ** 2)
    model = gp.fit(X, y, rng=np.random.default_rng(0))
    u = bo.propose_next(model, space, 5, np.random.default_rng(2))
    assert abs(u[0] - 0.3) < 0.1


def test_proposal_explores_when_flat():
    space = SearchSpace([Dimension("a", "real", 0, 1), Dimension("b", "real", 0, 1)])
    X = 0.05 * np.random.default_rng(0).random((6, 2)) + 0.1  # one cluster in a corner
    model = gp.fit(X, np.zeros(6), kernel=gp.KernelParams(1.0, (0.3, 0.3), 1e-6))
    u = bo.propose_next(model, space, 3, np.random.default_rng(1))
    pair = np.linalg.norm(X[:, None] - X[None], axis=-1)[np.triu_indices(6, 1)]
    assert np.min(np.linalg.norm(X - u, axis=1)) > np.median(pair)


def test_proposal_deterministic():
    X = SPACE.sample(6, np.random.default_rng(3))
    y = np.array([quadratic(SPACE.decode(u), 0) for u in X])
    model = gp.fit(X, y)
    a = bo.propose_next(model, SPACE, 3, np.random.default_rng(9), n_candidates=256)
    b = bo.propose_next(model, SPACE, 3, np.random.default_rng(9), n_candidates=256)
    np.testing.assert_array_equal(a, b)


# ---------------------------------------------------------------- optimise

def test_budget_and_monotone_best(tmp_path):
    best, recs = bo.optimise(quadratic, SPACE, bo.BOConfig(budget=8, seed=1),
                             log_path=tmp_path / "t.jsonl")
    assert len(recs) == 8 == len(load_trials(tmp_path / "t.jsonl"))
    curve = best_so_far(recs)
    assert all(a >= b for a, b in zip(curve, curve[1:]))
    assert best.objective == curve[-1] <= min(r.objective for r in recs[:5])
    assert [r.source for r in recs] == ["initial_design"] * 5 + ["acquisition"] * 3
    for r in recs:
        SPACE.encode(r.params)  # raises if out of bounds
        assert (r.gp is not None) == (r.source == "acquisition")


def test_budget_equal_to_design_is_random_search():
    best, recs = bo.optimise(quadratic, SPACE, bo.BOConfig(budget=5, initial_design_size=5))
    assert len(recs) == 5 and best.objective == min(r.objective for r in recs)


def test_default_point_is_trial_zero():
    h = {"drop_rate": 0.05, "n_dense": 2, "n_conv": 3, "learning_rate": 1e-3, "adam_decay": 1e-6}
    _, recs = bo.optimise(quadratic, SPACE, bo.BOConfig(budget=6), default_point=h)
    assert recs[0].source == "default"
    assert recs[0].params["n_conv"] == 3 and recs[0].params["drop_rate"] == pytest.approx(0.05)


def test_identical_runs_identical_logs(tmp_path):
    for name in ("a", "b"):
        bo.optimise(quadratic, SPACE, bo.BOConfig(budget=7, seed=4), log_path=tmp_path / name)
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()


class Crash(BaseException):
    """Not an Exception, so the trial runner lets it through like a real kill."""


def test_resume_after_crash_matches_uninterrupted(tmp_path):
    cfg = bo.BOConfig(budget=9, seed=2)
    bo.optimise(quadratic, SPACE, cfg, log_path=tmp_path / "full.jsonl")
    calls = []

    def dying(params, seed):
        calls.append(1)
        if len(calls) == 7:
            raise Crash
        return quadratic(params, seed)

    with pytest.raises(Crash):
        bo.optimise(dying, SPACE, cfg, log_path=tmp_path / "part.jsonl")
    with open(tmp_path / "part.jsonl", "a") as fh:
        fh.write('{"index": 6, "sou')  # torn final line
    calls.clear()
    bo.optimise(quadratic, SPACE, cfg, log_path=tmp_path / "part.jsonl")
    assert (tmp_path / "part.jsonl").read_bytes() == (tmp_path / "full.jsonl").read_bytes()


def test_resume_with_other_config_is_refused(tmp_path):
    bo.optimise(quadratic, SPACE, bo.BOConfig(budget=6, seed=0), log_path=tmp_path / "t")
    with pytest.raises(DataError, match="diverges"):
        bo.optimise(quadratic, SPACE, bo.BOConfig(budget=7, seed=1), log_path=tmp_path / "t")


def test_failed_trials_score_failure_objective():
    def flaky(params, seed):
        if params["n_conv"] >= 4:
            raise RuntimeError("boom")
        return FitnessResult(0.5, val_accuracy=0.5)

    _, recs = bo.optimise(flaky, SPACE, bo.BOConfig(budget=7, seed=3))
    failed = [r for r in recs if r.error]
    assert failed and all(r.objective == 1.0 and "boom" in r.error for r in failed)


def test_config_validation():
    with pytest.raises(ConfigError):
        bo.BOConfig(budget=3, initial_design_size=5)
