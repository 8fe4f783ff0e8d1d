import itertools
import math
import os
from collections import Counter

import numpy as np
import pytest

from dcn_robust.analytic import FailureType, normalized_time, normalized_time_table
from dcn_robust.simulation import (
    ElementClass,
    ExperimentPlan,
    UnsupportedPlanError,
    _alive_after,
    _critical_point,
    classed_sweep,
    confidence_interval,
    removal_count,
    resolve_workers,
    sample_rng,
    simulate_nmttf,
    survival_sweep,
    survival_sweep_2d,
    plan_from_doc,
    plan_to_doc,
)
from dcn_robust.topology import (
    TopologyKind,
    TopologyParams,
    build_topology,
)

from conftest import degraded_adjacency, oracle_accessible_servers


def plan_for(params, failure, **kw):
    kw.setdefault("samples", 50)
    kw.setdefault("master_seed", 1234)
    return ExperimentPlan(params=params, failures=(failure,), **kw)


BCUBE_2x2 = TopologyParams(kind=TopologyKind.BCUBE, n=2, l=1)
BCUBE_CELL = TopologyParams(kind=TopologyKind.BCUBE, n=2, l=0)
DCELL_SMALL = TopologyParams(kind=TopologyKind.DCELL, n=4, l=1)
THREE_LAYER_SMALL = TopologyParams(kind=TopologyKind.THREE_LAYER, n_a=3, n_e=4, pairs=2)


class TestConfidenceInterval:
    def test_constant_samples_have_zero_width(self):
        mean, half = confidence_interval([0.4] * 100)
        assert mean == pytest.approx(0.4)
        assert half == 0.0

    def test_bernoulli_example(self):
        values = [0.0, 1.0] * 1000
        mean, half = confidence_interval(values)
        assert mean == pytest.approx(0.5)
        expected = 1.96 * np.std(values, ddof=1) / math.sqrt(2000)
        assert half == pytest.approx(expected)
        assert half == pytest.approx(0.0219, abs=2e-4)

    def test_single_sample_has_no_interval(self):
        mean, half = confidence_interval([3.0])
        assert mean == 3.0
        assert half is None

    def test_empty(self):
        assert confidence_interval([]) == (None, None)


class TestSamplingUniformity:
    def test_removal_subsets_match_hypergeometric(self):
        # Every 2-subset of a 5-element universe should be equally likely.
        counts = Counter()
        trials = 20_000
        for k in range(trials):
            rng = sample_rng(99, 5, 0, k)
            subset = frozenset(rng.permutation(5)[:2].tolist())
            counts[subset] += 1
        assert len(counts) == 10
        expected = trials / 10
        chi2 = sum((n - expected) ** 2 / expected for n in counts.values())
        # 9 degrees of freedom, p=0.001 critical value
        assert chi2 < 27.88

    def test_streams_are_independent_of_order(self):
        a = sample_rng(7, 1, 3, 11).permutation(20)
        b = sample_rng(7, 1, 3, 11).permutation(20)
        c = sample_rng(7, 1, 3, 12).permutation(20)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)


class TestRemovalCount:
    def test_floor(self):
        assert removal_count(0.4, 6728) == 2691
        assert removal_count(0.0, 100) == 0
        assert removal_count(1.0, 100) == 100

    def test_exact_products_survive_float_noise(self):
        assert removal_count(0.3, 3630) == 1089  # 0.3*3630 == 1088.9999... in binary


def forward_critical_point(topo, failure, perm):
    """Oracle: re-check gateway reachability after every single removal."""
    for f in range(1, len(perm) + 1):
        node_alive, edge_alive = _alive_after(topo, failure, perm[:f])
        removed_switches = (
            set((topo.n_servers + perm[:f]).tolist())
            if failure is FailureType.SWITCH
            else set()
        )
        removed_links = set()
        if failure is FailureType.LINK:
            removed_links = {
                (int(topo.edges_u[i]), int(topo.edges_v[i])) for i in perm[:f]
            }
        adj = degraded_adjacency(topo, removed_links, removed_switches)
        accessible = oracle_accessible_servers(topo, adj, removed_switches)
        alive_servers = topo.n_servers - 0
        if len(accessible) < alive_servers:
            return f
    return len(perm)


class TestCriticalPoint:
    @pytest.mark.parametrize("params", [BCUBE_2x2, BCUBE_CELL, DCELL_SMALL, THREE_LAYER_SMALL])
    @pytest.mark.parametrize("failure", [FailureType.LINK, FailureType.SWITCH])
    def test_bisection_equals_per_removal_scan(self, params, failure):
        topo = build_topology(params)
        big_f = topo.n_links if failure is FailureType.LINK else topo.n_switches
        rng = np.random.default_rng(42)
        for _ in range(40):
            perm = rng.permutation(big_f)
            assert _critical_point(topo, failure, perm) == forward_critical_point(
                topo, failure, perm
            )


class TestSimulateNmttf:
    def test_single_cell_link_is_deterministic(self):
        # any first link removal disconnects one of the two servers
        res = simulate_nmttf(plan_for(BCUBE_CELL, FailureType.LINK, samples=20), workers=1)
        assert set(res.critical_points.tolist()) == {1}
        assert res.nmttf_sim == pytest.approx(normalized_time(1, 2))
        assert res.relative_error == pytest.approx(0.0)  # theo = 1/|S| = 1/2

    @pytest.mark.parametrize(
        "params,failure",
        [
            (BCUBE_2x2, FailureType.LINK),  # 8 links -> 40320 permutations
            (BCUBE_2x2, FailureType.SWITCH),  # 4 switches
            (TopologyParams(kind=TopologyKind.DCELL, n=2, l=1), FailureType.SWITCH),
        ],
    )
    def test_exhaustive_permutation_oracle_small(self, params, failure):
        topo = build_topology(params)
        big_f = topo.n_links if failure is FailureType.LINK else topo.n_switches
        table = normalized_time_table(big_f)
        total = 0.0
        count = 0
        for perm in itertools.permutations(range(big_f)):
            total += table[forward_critical_point(topo, failure, np.array(perm))]
            count += 1
        oracle = total / count
        res = simulate_nmttf(plan_for(params, failure, samples=400), workers=1)
        margin = res.ci95_half_width if res.ci95_half_width else 1e-12
        assert abs(res.nmttf_sim - oracle) <= margin

    def test_dcell2_switch_exactness_small(self):
        # a DCell with l=1: any two switch failures strand a server pair
        res = simulate_nmttf(plan_for(DCELL_SMALL, FailureType.SWITCH, samples=30), workers=1)
        assert set(res.critical_points.tolist()) == {2}
        assert res.nmttf_sim == pytest.approx(normalized_time(2, 5))
        assert res.theoretical_quality.value == "exact"
        assert res.nmttf_theoretical == pytest.approx(math.sqrt(4 * 20 + 1) / 20)

    def test_server_failures_rejected(self):
        with pytest.raises(UnsupportedPlanError):
            simulate_nmttf(plan_for(BCUBE_2x2, FailureType.SERVER))

    def test_dcell_l3_switch_has_no_analytic_reference(self):
        params = TopologyParams(kind=TopologyKind.DCELL, n=2, l=3)
        res = simulate_nmttf(plan_for(params, FailureType.SWITCH, samples=3), workers=1)
        assert res.nmttf_theoretical is None
        assert res.relative_error is None
        assert res.note and "l=3" in res.note

    def test_critical_fer_matches_critical_points(self):
        res = simulate_nmttf(plan_for(BCUBE_2x2, FailureType.LINK, samples=100), workers=1)
        assert res.critical_fer == pytest.approx(res.critical_points.mean() / 8)


class TestSurvivalSweep:
    def test_zero_fer_gives_perfect_metrics(self):
        plan = plan_for(
            DCELL_SMALL,
            FailureType.LINK,
            fer_grids=((0.0,),),
            samples=5,
            metrics=("asr", "sc"),
        )
        rows = survival_sweep(plan, workers=1)
        by_metric = {r.metric: r for r in rows}
        assert by_metric["asr"].mean == 1.0
        assert by_metric["sc"].mean == 1.0
        assert by_metric["asr"].ci95_half_width == 0.0
        assert by_metric["asr"].normalized_time == 0.0

    def test_rows_carry_grid_and_time(self):
        plan = plan_for(
            BCUBE_2x2,
            FailureType.LINK,
            fer_grids=((0.0, 0.25, 0.5),),
            samples=10,
            metrics=("asr",),
        )
        rows = survival_sweep(plan, workers=1)
        assert [r.fer_link for r in rows] == [0.0, 0.25, 0.5]
        table = normalized_time_table(8)
        assert rows[1].normalized_time == pytest.approx(table[2])
        assert all(r.fer_switch is None and r.fer_server is None for r in rows)

    def test_asr_means_match_oracle_estimates(self):
        plan = plan_for(
            DCELL_SMALL,
            FailureType.SWITCH,
            fer_grids=((0.4,),),
            samples=400,
            metrics=("asr",),
        )
        topo = build_topology(DCELL_SMALL)
        f = removal_count(0.4, topo.n_switches)
        rng = np.random.default_rng(8)
        oracle_values = []
        for _ in range(400):
            removed = set(
                (topo.n_servers + rng.permutation(topo.n_switches)[:f]).tolist()
            )
            adj = degraded_adjacency(topo, removed_switches=removed)
            oracle_values.append(
                len(oracle_accessible_servers(topo, adj, removed)) / topo.n_servers
            )
        row = survival_sweep(plan, workers=1)[0]
        se = 2 * math.hypot(
            np.std(oracle_values) / 20, row.ci95_half_width / 1.96 if row.ci95_half_width else 0
        )
        assert row.mean == pytest.approx(np.mean(oracle_values), abs=max(se, 0.02))

    def test_aspl_undefined_marker_row(self):
        # single-switch cell: removing the switch kills all gateway paths
        plan = plan_for(
            BCUBE_CELL,
            FailureType.SWITCH,
            fer_grids=((1.0,),),
            samples=4,
            metrics=("aspl",),
        )
        row = survival_sweep(plan, workers=1)[0]
        assert row.mean is None
        assert row.samples == 0

    def test_grid_validation(self):
        with pytest.raises(UnsupportedPlanError):
            plan_for(BCUBE_2x2, FailureType.LINK, fer_grids=((0.5, 0.1),))
        with pytest.raises(UnsupportedPlanError):
            plan_for(BCUBE_2x2, FailureType.LINK, fer_grids=((0.1, 1.2),))
        with pytest.raises(UnsupportedPlanError):
            plan_for(BCUBE_2x2, FailureType.LINK, samples=0)
        with pytest.raises(UnsupportedPlanError):
            plan_for(BCUBE_2x2, FailureType.LINK, metrics=("asr", "latency"))


class TestSweep2d:
    def test_origin_cell_is_perfect(self):
        plan = ExperimentPlan(
            params=DCELL_SMALL,
            failures=(FailureType.LINK, FailureType.SWITCH),
            fer_grids=((0.0, 0.3), (0.0, 0.4)),
            samples=8,
            master_seed=3,
            metrics=("asr",),
        )
        rows = survival_sweep_2d(plan, workers=1)
        assert len(rows) == 4
        origin = rows[0]
        assert (origin.fer_link, origin.fer_switch) == (0.0, 0.0)
        assert origin.mean == 1.0

    def test_bcube5_barely_degrades_over_the_grid(self):
        # The densest fabric stays near-perfect over most of the combined
        # range; at the extreme corner its loss is bounded by the direct
        # interface-severance arithmetic (1 - (1-0.6*0.6)^5 ~ 0.89), far
        # above where every other topology lands.
        plan = ExperimentPlan(
            params=TopologyParams(kind=TopologyKind.BCUBE, n=5, l=4),
            failures=(FailureType.LINK, FailureType.SWITCH),
            fer_grids=((0.0, 0.2, 0.4), (0.0, 0.2, 0.4)),
            samples=20,
            master_seed=99,
            metrics=("asr",),
        )
        rows = survival_sweep_2d(plan, workers=2)
        for row in rows:
            assert row.mean >= 0.87
            if row.fer_link <= 0.2 and row.fer_switch <= 0.2:
                assert row.mean > 0.99

    def test_marginal_row_consistent_with_1d(self):
        samples = 300
        plan2d = ExperimentPlan(
            params=DCELL_SMALL,
            failures=(FailureType.LINK, FailureType.SWITCH),
            fer_grids=((0.0,), (0.4,)),
            samples=samples,
            master_seed=21,
            metrics=("asr",),
        )
        row2d = survival_sweep_2d(plan2d, workers=1)[0]
        plan1d = plan_for(
            DCELL_SMALL,
            FailureType.SWITCH,
            fer_grids=((0.4,),),
            samples=samples,
            master_seed=22,
            metrics=("asr",),
        )
        row1d = survival_sweep(plan1d, workers=1)[0]
        margin = (row2d.ci95_half_width or 0) + (row1d.ci95_half_width or 0)
        assert abs(row2d.mean - row1d.mean) <= max(margin, 1e-9)


class TestClassedSweep:
    def test_all_zero_ratios_keep_everything(self):
        plan = plan_for(
            THREE_LAYER_SMALL,
            FailureType.SWITCH,
            fer_grids=((0.0,),),
            samples=4,
            metrics=("asr",),
        )
        ratios = {
            ElementClass.EDGE_SWITCH: None,
            ElementClass.AGG_SWITCH: 0.0,
            ElementClass.CORE_SWITCH: 0.0,
        }
        row = classed_sweep(plan, ratios, workers=1)[0]
        assert row.mean == 1.0
        assert row.failure_type == "edge-switch"

    def test_edge_switch_sweep_is_deterministic_fraction(self):
        # removing k of the E edge switches always removes k*n_e servers
        plan = plan_for(
            THREE_LAYER_SMALL,
            FailureType.SWITCH,
            fer_grids=((0.0, 0.5, 1.0),),
            samples=12,
            metrics=("asr",),
        )
        ratios = {
            ElementClass.EDGE_SWITCH: None,
            ElementClass.AGG_SWITCH: 0.0,
            ElementClass.CORE_SWITCH: 0.0,
        }
        rows = classed_sweep(plan, ratios, workers=1)
        edges_total = 6
        for row, fer in zip(rows, (0.0, 0.5, 1.0)):
            k = removal_count(fer, edges_total)
            assert row.mean == pytest.approx(1 - k / edges_total)
            assert row.ci95_half_width == 0.0

    def test_one_core_switch_down_changes_nothing(self):
        base = {
            ElementClass.EDGE_SWITCH: None,
            ElementClass.AGG_SWITCH: 0.0,
            ElementClass.CORE_SWITCH: 0.0,
        }
        one_core = dict(base, **{ElementClass.CORE_SWITCH: 0.5})
        plan = plan_for(
            THREE_LAYER_SMALL,
            FailureType.SWITCH,
            fer_grids=((0.0, 0.5),),
            samples=40,
            metrics=("asr",),
        )
        rows_a = classed_sweep(plan, base, workers=1)
        rows_b = classed_sweep(plan, one_core, workers=1)
        for a, b in zip(rows_a, rows_b):
            margin = (a.ci95_half_width or 0) + (b.ci95_half_width or 0)
            assert abs(a.mean - b.mean) <= max(margin, 1e-9)

    def test_rejects_other_topologies_and_bad_ratio_sets(self):
        plan = plan_for(
            BCUBE_2x2, FailureType.SWITCH, fer_grids=((0.1,),), metrics=("asr",)
        )
        with pytest.raises(UnsupportedPlanError):
            classed_sweep(plan, {ElementClass.EDGE_SWITCH: None}, workers=1)
        plan = plan_for(
            THREE_LAYER_SMALL, FailureType.SWITCH, fer_grids=((0.1,),), metrics=("asr",)
        )
        with pytest.raises(UnsupportedPlanError):
            classed_sweep(plan, {ElementClass.EDGE_SWITCH: 0.1}, workers=1)
        with pytest.raises(UnsupportedPlanError):
            classed_sweep(
                plan,
                {ElementClass.EDGE_SWITCH: None, ElementClass.AGG_LINK: 0.1},
                workers=1,
            )


class TestGatewayPolicySensitivity:
    def test_single_gateway_hurts_switch_survivability(self):
        from dcn_robust.topology import GatewayPolicy

        def asr_at_04(policy):
            params = TopologyParams(
                kind=TopologyKind.DCELL, n=4, l=1, gateway_policy=policy
            )
            plan = ExperimentPlan(
                params=params,
                failures=(FailureType.SWITCH,),
                fer_grids=((0.4,),),
                samples=300,
                master_seed=88,
                metrics=("asr",),
            )
            return survival_sweep(plan, workers=1)[0]

        full = asr_at_04(GatewayPolicy.max_density())
        single = asr_at_04(GatewayPolicy.min_density())
        # with one gateway, drawing it among the 2 removed switches of 5
        # zeroes the sample; with all five as gateways it rarely matters
        margin = (full.ci95_half_width or 0) + (single.ci95_half_width or 0)
        assert single.mean < full.mean - margin

    def test_link_failures_barely_affected_by_gpd(self):
        from dcn_robust.topology import GatewayPolicy

        params = TopologyParams(
            kind=TopologyKind.BCUBE, n=4, l=1, gateway_policy=GatewayPolicy.min_density()
        )
        plan = ExperimentPlan(
            params=params,
            failures=(FailureType.LINK,),
            fer_grids=((0.2,),),
            samples=200,
            master_seed=88,
            metrics=("asr",),
        )
        single = survival_sweep(plan, workers=1)[0]
        assert single.mean > 0.9


class TestDeterminismAndWorkers:
    def test_identical_results_across_worker_counts(self):
        plan = plan_for(DCELL_SMALL, FailureType.LINK, fer_grids=((0.2, 0.4),), samples=40)
        rows1 = survival_sweep(plan, workers=1)
        rows2 = survival_sweep(plan, workers=2)
        assert rows1 == rows2
        res1 = simulate_nmttf(plan_for(DCELL_SMALL, FailureType.LINK, samples=60), workers=1)
        res2 = simulate_nmttf(plan_for(DCELL_SMALL, FailureType.LINK, samples=60), workers=2)
        assert np.array_equal(res1.critical_points, res2.critical_points)
        assert res1.nmttf_sim == res2.nmttf_sim

    def test_resolve_workers_env(self, monkeypatch):
        monkeypatch.setenv("DCN_ROBUST_THREADS", "3")
        assert resolve_workers() == 3
        monkeypatch.setenv("DCN_ROBUST_THREADS", "0")
        assert resolve_workers() >= 1
        monkeypatch.delenv("DCN_ROBUST_THREADS")
        assert resolve_workers(2) == 2
        monkeypatch.setenv("DCN_ROBUST_THREADS", "lots")
        with pytest.raises(UnsupportedPlanError):
            resolve_workers()


class TestPlanDocuments:
    def test_round_trip(self):
        plan = ExperimentPlan(
            params=THREE_LAYER_SMALL,
            failures=(FailureType.SWITCH,),
            fer_grids=((0.0, 0.1),),
            samples=17,
            master_seed=99,
            metrics=("asr", "sc"),
        )
        assert plan_from_doc(plan_to_doc(plan)) == plan

    def test_bad_documents(self):
        with pytest.raises(UnsupportedPlanError):
            plan_from_doc({"failures": ["link"]})
        plan = plan_to_doc(plan_for(BCUBE_2x2, FailureType.LINK))
        plan["failures"] = ["meteor"]
        with pytest.raises(UnsupportedPlanError):
            plan_from_doc(plan)
