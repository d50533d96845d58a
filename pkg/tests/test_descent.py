import numpy as np
import pytest

import frontdescent.descent as descent
from frontdescent.descent import (
    FPD,
    FPD_NMT,
    ConstantSigma,
    DriverConfig,
    GeometricSigma,
    InvariantChecker,
    InvariantViolation,
    MemoryWindow,
    Observer,
    ReferenceState,
    StoppingRule,
    build_reference_set,
    prune_keeping_cover,
    run,
)
from frontdescent.hypervolume import hypervolume
from frontdescent.linesearch import monotone_armijo, nonmonotone_armijo
from frontdescent.pareto import DecisionPoint, FrontSet, dominates
from frontdescent.problems import BoxBounds, FunctionProblem, get_problem


def quad_pair():
    return FunctionProblem(
        "quad_pair",
        lambda x: np.array([x[0] ** 2, (x[0] - 2) ** 2]),
        BoxBounds.uniform(1, -5, 5),
        jac=lambda x: np.array([[2 * x[0]], [2 * (x[0] - 2)]]),
    )


def half_square():
    return FunctionProblem("half_square", lambda x: np.array([0.5 * x[0] ** 2]),
                           BoxBounds.uniform(1, -5, 5), jac=lambda x: np.array([[x[0]]]))


def fs(*values):
    return FrontSet([DecisionPoint(np.zeros(1), np.array(v, float)) for v in values])


def sorted_rows(a):
    return sorted(map(tuple, np.asarray(a).tolist()))


class Recorder(Observer):
    def __init__(self):
        self.points, self.refined, self.references, self.ends = [], [], [], []

    def on_point(self, point):
        self.points.append(point)

    def on_refine(self, k, x, z, X_hat):
        self.refined.append((k, x, z))

    def on_reference(self, k, X, C, X_l, C_prev, zeta):
        self.references.append((k, X, C, X_l))

    def on_iteration_end(self, k, X, merged, X_next, refined):
        self.ends.append((k, X, merged, X_next))


class TestConfig:
    def test_defaults(self):
        cfg = DriverConfig()
        assert cfg.memory == 4 and cfg.crowding_cap == 100
        assert cfg.stop.max_iterations == 200 and cfg.stop.stall_window == 3
        assert GeometricSigma()(2) == pytest.approx(1e-2 * 0.81)

    @pytest.mark.parametrize("kw", [{"memory": 0}, {"crowding_cap": 1}, {"prune": "soft"},
                                    {"sigma": ConstantSigma(-1.0)}])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            DriverConfig(**kw)

    def test_bad_rho(self):
        with pytest.raises(ValueError):
            GeometricSigma(rho=1.0)

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            run(quad_pair(), method="SGD")


class TestHandTrace:
    def config(self, iters=1):
        return DriverConfig(sigma=ConstantSigma(1e-6), stop=StoppingRule(max_iterations=iters))

    def test_first_iteration(self):
        rec = Recorder()
        trace = run(quad_pair(), self.config(), FPD, initial_points=[[3.0]], observers=[rec])
        (k, x, z), = rec.refined
        np.testing.assert_array_equal(z.x, [2.0])
        np.testing.assert_array_equal(z.fx, [4.0, 0.0])
        assert trace.alphas == [0.5]
        # at z = 2 only f1 has a nonzero slope, so only I = {1} is explored:
        # alpha = 1 reaches x = -2 with F = (4, 16), rejected; alpha = 0.5
        # reaches x = 0 with F = (0, 4)
        assert sorted_rows(trace.snapshots[1]["X"]) == [(0.0, 4.0), (4.0, 0.0)]
        assert trace.records[0].refine_trials == 2
        assert trace.records[0].explore_trials == 2
        assert trace.records[1].f_evals == 1 + 2 + 2

    def test_stationary_fixed_point_m1(self):
        trace = run(half_square(), self.config(3), FPD, initial_points=[[0.0]])
        assert trace.final[0].x.tolist() == [0.0]
        assert trace.alphas == []

    def test_dominated_point_is_skipped(self):
        # x = 3 and x = -1 tie on theta; x = 3 goes first, and exploration
        # from z = 2 reaches x = 0 with F = (0, 4), which dominates F(-1) = (1, 9)
        trace = run(quad_pair(), self.config(), FPD, initial_points=[[3.0], [-1.0]])
        assert trace.records[0].processed == 1
        assert (0.0, 4.0) in sorted_rows(trace.snapshots[1]["X"])


class TestStopping:
    def test_zero_iterations(self):
        trace = run(quad_pair(), DriverConfig(stop=StoppingRule(max_iterations=0)), FPD,
                    initial_points=[[3.0]])
        assert len(trace.records) == 1 and trace.iterations == 0
        assert trace.stop_reason == "max_iterations"
        assert trace.records[0].f_evals == 1

    @pytest.mark.parametrize("method", [FPD, FPD_NMT])
    def test_stall_at_stationary_point(self, method):
        trace = run(quad_pair(), DriverConfig(), method, initial_points=[[1.0]])
        assert trace.stop_reason == "stationary"
        assert trace.iterations == 2
        assert all(r.big_theta >= -1e-4 for r in trace.records)

    def test_stall_disabled(self):
        cfg = DriverConfig(stop=StoppingRule(max_iterations=6, stall_window=None))
        trace = run(quad_pair(), cfg, FPD, initial_points=[[1.0]])
        assert trace.iterations == 6

    def test_geometric_sigma_never_stalls(self):
        cfg = DriverConfig(sigma=GeometricSigma(), stop=StoppingRule(max_iterations=4))
        assert run(quad_pair(), cfg, FPD, initial_points=[[1.0]]).stop_reason == "max_iterations"

    def test_time_budget(self):
        cfg = DriverConfig(stop=StoppingRule(max_iterations=10**6, time_budget=0.0,
                                             stall_window=None))
        trace = run(get_problem("ZDT_1", 5), cfg, FPD)
        assert trace.stop_reason == "time_budget" and trace.iterations == 0


class TestReferenceSet:
    def window(self, *sets):
        w = MemoryWindow(4)
        for k, s in enumerate(sets):
            w.push(k, s)
        return w

    def test_first_iteration_copies_x0(self):
        X = fs((1, 3), (2, 2), (3, 1))
        C, l_k, X_l = build_reference_set(X, self.window(X), ReferenceState(), np.array([4.0, 4.0]))
        assert C.ids == X.ids and l_k == 0 and X_l is X

    def test_hand_example(self):
        X_l = fs((2, 2))
        state = ReferenceState(current=fs((3, 1)))
        C, _, _ = build_reference_set(fs((1, 3)), self.window(X_l), state, np.array([5.0, 5.0]))
        assert sorted_rows(C.fx) == [(1, 3), (2, 2), (3, 1)]

    def test_extra_membership(self):
        # x joins when every member of C-bar beats it strictly somewhere:
        # (2, 3) joins; (1, 1) and a copy of (2, 2) do not
        X = fs((2, 3), (1, 1), (2, 2))
        C, _, _ = build_reference_set(X, self.window(fs((2, 2))), ReferenceState(),
                                      np.array([5.0, 5.0]))
        assert sorted_rows(C.fx) == [(2, 2), (2, 3)]

    def test_picks_min_hypervolume(self):
        zeta = np.array([10.0, 10.0])
        sets = [fs((7, 9)), fs((7.5, 9)), fs((7.3, 9))]
        assert [hypervolume(s, zeta) for s in sets] == pytest.approx([3.0, 2.5, 2.7])
        _, l_k, X_l = build_reference_set(sets[-1], self.window(*sets), ReferenceState(), zeta)
        assert l_k == 1 and X_l is sets[1]

    def test_ties_prefer_previous_pick_then_oldest(self):
        zeta = np.array([10.0, 10.0])
        sets = [fs((8, 9)), fs((9, 8)), fs((8, 9))]
        w = self.window(*sets)
        assert build_reference_set(sets[-1], w, ReferenceState(), zeta)[1] == 0
        w.prev_argmin = 2
        assert build_reference_set(sets[-1], w, ReferenceState(), zeta)[1] == 2

    def test_window_length(self):
        w = MemoryWindow(2)
        for k in range(6):
            w.push(k, fs((k, -k)))
        assert [k for k, _ in w.sets()] == [3, 4, 5]
        assert [k for k, _ in w.sets(last=2)] == [4, 5]


class TestPruneKeepingCover:
    def test_restores_cover(self):
        merged = fs((0, 4), (1, 3), (1.1, 2.9), (2, 2), (4, 0))
        obligations = fs((1.1, 3.5))
        out = prune_keeping_cover(merged, 3, obligations)
        fx = out.fx
        assert ((fx <= [1.1, 3.5]).all(axis=1)).any()
        assert len(out) == 4

    def test_no_obligations_is_plain_prune(self):
        merged = fs((0, 4), (1, 3), (2, 2), (3, 1), (4, 0))
        assert sorted_rows(prune_keeping_cover(merged, 3, FrontSet()).fx) == [(0, 4), (2, 2), (4, 0)]


class TestNonmonotoneDispatch:
    def test_first_point_uses_nonmonotone_search(self, monkeypatch):
        calls = []

        def spy(*args, **kwargs):
            calls.append(args[1].id)
            return nonmonotone_armijo(*args, **kwargs)

        monkeypatch.setattr(descent, "nonmonotone_armijo", spy)
        rec = Recorder()
        cfg = DriverConfig(stop=StoppingRule(max_iterations=1))
        run(get_problem("ZDT_1", 5), cfg, FPD_NMT, observers=[rec])
        first = rec.refined[0][1]
        assert calls and calls[0] == first.id

    def test_worse_reference_allows_longer_step(self):
        # x = 3 on the quad pair with a reference F(c) = F(x) + (40, 40)
        p = quad_pair()
        x = DecisionPoint(np.array([3.0]), p.evaluate(np.array([3.0])))
        c = DecisionPoint(np.zeros(1), x.fx + 40.0)
        mono = monotone_armijo(p, x, np.array([-2.0]), -4.0)
        nonmono = nonmonotone_armijo(p, x, np.array([-2.0]), -4.0, FrontSet([c]))
        assert (mono.alpha, nonmono.alpha) == (0.5, 1.0)


class TestInvariants:
    @pytest.mark.parametrize("name,n", [("ZDT_1", 5), ("JOS_1", 3), ("CEC09_2", 3),
                                        ("CEC09_8", 3)])
    def test_nmt_cover_mode(self, name, n):
        cfg = DriverConfig(prune="cover", crowding_cap=20, check_invariants=True,
                           stop=StoppingRule(max_iterations=8, stall_window=None))
        trace = run(get_problem(name, n), cfg, FPD_NMT)
        assert trace.iterations == 8

    @pytest.mark.parametrize("name", ["ZDT_3", "MAN"])
    def test_fpd_never_regresses(self, name):
        rec = Recorder()
        cfg = DriverConfig(crowding_cap=15, check_invariants=True,
                           stop=StoppingRule(max_iterations=8, stall_window=None))
        run(get_problem(name, 4), cfg, FPD, observers=[rec])
        for _, X, _, X_next in rec.ends:
            for y in X_next.fx:
                assert not any(dominates(x, y) for x in X.fx)

    def test_reference_values_nondecreasing(self):
        cfg = DriverConfig(prune="cover", crowding_cap=20,
                           stop=StoppingRule(max_iterations=10, stall_window=None))
        rec = Recorder()
        trace = run(get_problem("ZDT_1", 4), cfg, FPD_NMT, observers=[rec])
        zeta = trace.zeta
        values = [hypervolume(C, zeta) for _, _, C, _ in rec.references]
        assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))

    def test_reference_cover_persists(self):
        # some member of X^j, j in {k, k+1, k+2}, is no worse than each c in C^k
        cfg = DriverConfig(prune="cover", crowding_cap=20, snapshot_every=1,
                           stop=StoppingRule(max_iterations=10, stall_window=None))
        trace = run(get_problem("ZDT_3", 4), cfg, FPD_NMT)
        for k in range(trace.iterations - 2):
            C = trace.snapshots[k]["C"]
            for j in (k, k + 1, k + 2):
                X = trace.snapshots[j]["X"]
                assert (X[:, None, :] <= C[None, :, :]).all(axis=2).any(axis=0).all()

    def test_checker_catches_a_dominated_set(self):
        p = quad_pair()
        checker = InvariantChecker(p)
        bad = FrontSet([DecisionPoint(np.array([1.0]), np.array([1.0, 1.0])),
                        DecisionPoint(np.array([2.0]), np.array([4.0, 0.0])),
                        DecisionPoint(np.array([1.5]), np.array([2.25, 0.25])),
                        DecisionPoint(np.array([3.0]), np.array([9.0, 1.0]))])
        with pytest.raises(InvariantViolation):
            checker.on_iteration_end(0, bad, bad, bad, [])

    def test_checker_catches_infeasible_point(self):
        checker = InvariantChecker(quad_pair(), strict=False)
        checker.on_point(DecisionPoint(np.array([6.0]), np.array([36.0, 16.0])))
        assert checker.violations


class TestTrace:
    def test_counts_and_snapshots(self):
        cfg = DriverConfig(stop=StoppingRule(max_iterations=3, stall_window=None))
        p = get_problem("ZDT_1", 5)
        trace = run(p, cfg, FPD_NMT)
        assert trace.total_f_evals == p.counter.objective_evals
        assert sorted(trace.snapshots) == [0, 1, 2, 3]
        assert "C" in trace.snapshots[0] and "C" not in trace.snapshots[3]
        rec = trace.records
        assert [r.k for r in rec] == [0, 1, 2, 3]
        assert all(r.hv_reference is not None for r in rec[:-1])
        assert sum(r.alpha_count for r in rec) == len(trace.alphas)

    def test_deterministic(self):
        cfg = DriverConfig(stop=StoppingRule(max_iterations=4, stall_window=None))
        a = run(get_problem("ZDT_3", 5), cfg, FPD_NMT)
        b = run(get_problem("ZDT_3", 5), cfg, FPD_NMT)
        np.testing.assert_array_equal(a.final.fx, b.final.fx)
        assert a.alphas == b.alphas
