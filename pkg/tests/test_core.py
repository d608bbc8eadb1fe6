import json

import pytest
from hypothesis import given, settings, strategies as st

from devratio.core import (Arc, Commodity, Curve, Deviation, Flow, Instance,
                           ThresholdPair, enumerate_paths, path_latency,
                           social_cost, validate_deviation)
from devratio.errors import InvalidInstance, PathExplosion
from devratio.generators import braess


def two_parallel(l1: Curve, l2: Curve, demand: float = 1.0) -> Instance:
    return Instance(
        ["s", "t"],
        [Arc("a1", "s", "t", l1), Arc("a2", "s", "t", l2)],
        [Commodity("s", "t", demand)],
    )


class TestCurve:
    def test_poly_eval(self):
        c = Curve.poly([1.0, 2.0, 3.0])  # 1 + 2x + 3x^2
        assert c.eval(0.0) == 1.0
        assert c.eval(2.0) == 1.0 + 4.0 + 12.0

    def test_poly_integral(self):
        c = Curve.poly([0.0, 1.0])
        assert c.integral(2.0) == pytest.approx(2.0, abs=1e-12)
        c = Curve.poly([1.0, 0.0, 3.0])  # integral = x + x^3
        assert c.integral(2.0) == pytest.approx(10.0, abs=1e-12)

    def test_pwl_eval_and_extrapolation(self):
        c = Curve.pwl([(1.0, 0.0), (2.0, 4.0)])
        assert c.eval(0.5) == 0.0  # constant before the first breakpoint
        assert c.eval(1.5) == pytest.approx(2.0)
        assert c.eval(3.0) == pytest.approx(8.0)  # last slope continues

    def test_pwl_flat_tail(self):
        c = Curve.pwl([(1.0, 0.0), (1.5, 3.0), (2.5, 3.0)])
        assert c.eval(10.0) == pytest.approx(3.0)

    def test_pwl_integral(self):
        c = Curve.pwl([(1.0, 0.0), (2.0, 4.0)])
        # 0 on [0,1], triangle 0->4 on [1,2]
        assert c.integral(2.0) == pytest.approx(2.0, abs=1e-12)
        assert c.integral(0.5) == 0.0
        # beyond the last breakpoint the slope-4 line continues
        assert c.integral(3.0) == pytest.approx(2.0 + (4.0 + 8.0) / 2)

    def test_scale(self):
        assert Curve.poly([1.0, 2.0]).scale(3.0).eval(1.0) == 9.0
        assert Curve.pwl([(0.0, 0.0), (1.0, 2.0)]).scale(0.5).eval(1.0) == 1.0

    def test_json_round_trip(self):
        for c in (Curve.poly([1.0, 2.0]), Curve.pwl([(0.0, 1.0), (2.0, 3.0)])):
            again = Curve.from_json(c.to_json())
            assert again == c

    def test_pwl_rejects_unsorted(self):
        with pytest.raises(ValueError):
            Curve.pwl([(1.0, 0.0), (1.0, 2.0)])

    @given(st.lists(st.floats(0.0, 10.0), min_size=1, max_size=4),
           st.floats(0.0, 5.0), st.floats(0.0, 5.0))
    @settings(max_examples=100, deadline=None)
    def test_poly_monotone(self, coeffs, x1, x2):
        c = Curve.poly(coeffs)
        lo, hi = sorted((x1, x2))
        assert c.eval(lo) <= c.eval(hi) + 1e-12

    @given(st.lists(st.integers(0, 40), min_size=2, max_size=5,
                    unique=True),
           st.floats(0.1, 8.0))
    @settings(max_examples=100, deadline=None)
    def test_pwl_integral_matches_riemann(self, xs, upper):
        pts = [(x / 8.0, float(i)) for i, x in enumerate(sorted(xs))]
        c = Curve.pwl(pts)
        n = 4000
        approx = sum(c.eval((k + 0.5) * upper / n) * upper / n
                     for k in range(n))
        assert c.integral(upper) == pytest.approx(approx, rel=1e-3, abs=1e-3)


class TestLatencyValidation:
    def test_negative_poly_coefficient_rejected(self):
        with pytest.raises(InvalidInstance):
            two_parallel(Curve.poly([1.0, -1.0]), Curve.constant(1.0))

    def test_decreasing_pwl_rejected(self):
        with pytest.raises(InvalidInstance):
            two_parallel(Curve.pwl([(0.0, 2.0), (1.0, 1.0)]),
                         Curve.constant(1.0))


class TestInstance:
    def test_duplicate_arc_id_rejected(self):
        with pytest.raises(InvalidInstance):
            Instance(["s", "t"],
                     [Arc("a", "s", "t", Curve.constant(1.0)),
                      Arc("a", "s", "t", Curve.constant(1.0))],
                     [Commodity("s", "t", 1.0)])

    def test_duplicate_sinks_rejected(self):
        with pytest.raises(InvalidInstance):
            Instance(["s", "t", "u"],
                     [Arc("a", "s", "t", Curve.constant(1.0)),
                      Arc("b", "u", "t", Curve.constant(1.0))],
                     [Commodity("s", "t", 1.0), Commodity("u", "t", 1.0)])

    def test_zero_demand_rejected(self):
        with pytest.raises(InvalidInstance):
            Commodity("s", "t", 0.0)

    def test_common_source_flag(self):
        case = braess(3, 1.0)
        assert case.instance.common_source
        assert case.instance.source == "s"

    def test_json_round_trip(self):
        case = braess(3, 0.5)
        blob = json.dumps(case.instance.to_json())
        again = Instance.from_json(json.loads(blob))
        assert again.to_json() == case.instance.to_json()
        assert [a.id for a in again.arcs] == [a.id for a in case.instance.arcs]

    def test_dot_export_mentions_every_arc(self):
        case = braess(2, 1.0)
        dot = case.instance.to_dot()
        for arc in case.instance.arcs:
            assert arc.id in dot

    def test_threshold_assumption_check(self):
        inst = two_parallel(Curve.poly([0.0, 1.0]), Curve.constant(1.0))
        ok = Instance(inst.nodes, inst.arcs, inst.commodities,
                      ThresholdPair.alpha_beta(-0.5, 1.0))
        ok.check_threshold_assumption()  # l + alpha*l = l/2 >= 0


class TestEnumeratePaths:
    def test_two_parallel_arcs(self):
        inst = two_parallel(Curve.constant(1.0), Curve.constant(2.0))
        paths = enumerate_paths(inst, inst.commodities[0], cap=10)
        assert paths == [("a1",), ("a2",)]

    def test_single_arc(self):
        inst = Instance(["s", "t"], [Arc("a", "s", "t", Curve.constant(1.0))],
                        [Commodity("s", "t", 1.0)])
        assert enumerate_paths(inst, inst.commodities[0]) == [("a",)]

    def test_braess_m2_has_three_paths(self):
        case = braess(2, 1.0)
        paths = enumerate_paths(case.instance, case.instance.commodities[0])
        assert len(paths) == 3

    def test_cap_enforced(self):
        case = braess(4, 1.0)
        with pytest.raises(PathExplosion):
            enumerate_paths(case.instance, case.instance.commodities[0], cap=2)

    def test_order_is_deterministic(self):
        case = braess(4, 1.0)
        paths = enumerate_paths(case.instance, case.instance.commodities[0])
        assert paths == sorted(paths)


class TestFlow:
    def test_demand_mismatch_rejected(self):
        inst = two_parallel(Curve.constant(1.0), Curve.constant(1.0))
        with pytest.raises(InvalidInstance):
            Flow(inst, [{("a1",): 0.5}])

    def test_disconnected_path_rejected(self):
        case = braess(2, 1.0)
        with pytest.raises(InvalidInstance):
            Flow(case.instance, [{("s>v1", "w1>t"): 1.0}])

    def test_arc_view(self):
        inst = two_parallel(Curve.constant(1.0), Curve.constant(1.0))
        flow = Flow(inst, [{("a1",): 0.25, ("a2",): 0.75}])
        assert flow.arc_flow("a1") == 0.25
        assert flow.support() == {"a1", "a2"}

    def test_flow_json_round_trip(self):
        case = braess(3, 1.0)
        again = Flow.from_json(case.instance, case.z.to_json())
        assert again.arc_flows == pytest.approx(case.z.arc_flows)


class TestSocialCost:
    def test_single_arc_identity(self):
        inst = Instance(["s", "t"],
                        [Arc("a", "s", "t", Curve.poly([0.0, 1.0]))],
                        [Commodity("s", "t", 1.0)])
        flow = Flow(inst, [{("a",): 1.0}])
        assert social_cost(inst, flow) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("m", [2, 3, 5])
    def test_braess_original_cost_is_one(self, m):
        case = braess(m, 1.0)
        assert social_cost(case.instance, case.z) == pytest.approx(
            1.0, abs=1e-12)

    def test_braess_deviated_cost(self):
        case = braess(3, 1.0)
        assert social_cost(case.instance, case.x) == pytest.approx(
            4.0, rel=1e-12)

    @given(st.integers(0, 10**6))
    @settings(max_examples=40, deadline=None)
    def test_path_sum_equals_arc_sum(self, seed):
        import random
        from devratio.search import (random_common_source_instance,
                                     random_flow)
        rng = random.Random(seed)
        inst = random_common_source_instance(rng, max_nodes=6)
        flow = random_flow(rng, inst)
        arc_sum = social_cost(inst, flow)
        path_sum = sum(
            v * path_latency(inst, flow, p)
            for paths in flow.commodity_paths for p, v in paths.items())
        assert path_sum == pytest.approx(arc_sum, rel=1e-9)

    def test_invariant_under_redecomposition(self):
        # same arc flows through different path splits
        inst = Instance(
            ["s", "m", "t"],
            [Arc("a", "s", "m", Curve.poly([0.0, 1.0])),
             Arc("b", "s", "m", Curve.poly([0.0, 1.0])),
             Arc("c", "m", "t", Curve.constant(1.0))],
            [Commodity("s", "t", 2.0)])
        f1 = Flow(inst, [{("a", "c"): 1.0, ("b", "c"): 1.0}])
        f2 = Flow(inst, [{("a", "c"): 0.5, ("b", "c"): 1.5}])
        f2b = Flow(inst, [{("a", "c"): 1.0, ("b", "c"): 1.0}])
        assert social_cost(inst, f1) == pytest.approx(social_cost(inst, f2b))
        assert f1.arc_flows != pytest.approx(f2.arc_flows)


class TestPathLatency:
    def test_zero_deviation_matches_plain(self):
        case = braess(3, 1.0)
        path = ("s>v1", "v1>w1", "w1>t")
        plain = path_latency(case.instance, case.x, path)
        with_dev = path_latency(case.instance, case.x, path, Deviation.zero())
        assert plain == with_dev

    def test_additive_over_arcs(self):
        inst = Instance(
            ["s", "m", "t"],
            [Arc("a", "s", "m", Curve.poly([1.0, 2.0])),
             Arc("b", "m", "t", Curve.constant(3.0))],
            [Commodity("s", "t", 1.5)])
        flow = Flow(inst, [{("a", "b"): 1.5}])
        dev = Deviation.constants({"a": 0.5})
        assert path_latency(inst, flow, ("a", "b")) == pytest.approx(
            (1.0 + 3.0) + 3.0)
        assert path_latency(inst, flow, ("a", "b"), dev) == pytest.approx(
            (1.0 + 3.0) + 3.0 + 0.5)

    def test_carrying_paths_equalized_at_deviated_equilibrium(self):
        m, beta = 3, 1.0
        case = braess(m, beta)
        lats = {path_latency(case.instance, case.x, p, case.deviation)
                for p in case.x.commodity_paths[0]}
        assert max(lats) - min(lats) < 1e-9
        assert lats.pop() == pytest.approx(1.0 + beta * m, rel=1e-9)


class TestValidateDeviation:
    def test_zero_deviation_feasible(self):
        case = braess(3, 1.0)
        assert validate_deviation(case.instance, Deviation.zero()) == []

    def test_boundary_deviation_feasible(self):
        case = braess(3, 1.0)
        dev = Deviation({a.id: a.latency.scale(1.0)
                         for a in case.instance.arcs})
        assert validate_deviation(case.instance, dev) == []

    def test_oversized_deviation_reported(self):
        case = braess(3, 1.0)
        dev = Deviation({"v1>w1": Curve.constant(2.0)})  # theta_max = 1*l = 1
        report = validate_deviation(case.instance, dev)
        assert report and all(entry["arc"] == "v1>w1" for entry in report)
        assert all(entry["delta"] > entry["theta_max"] for entry in report)
