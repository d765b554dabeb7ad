# test_domain_algebra.py - link patterns, permutations, cross ratios and component splits

import math

import numpy as np
import pytest

from domain_algebra import (
    LinkPattern,
    component_report,
    component_split,
    components_of,
    compose_permutations,
    cross_ratio,
    cross_ratio_points,
    cycle_to_end,
    geodesic_trace,
    initial_state,
    is_link_pattern,
    link_root,
    permute,
    remove_link,
    tube_rectangles,
)
from errors import ConfigError, PatternError
from loewner_core import Trace
from schemas import ComponentKind, LinkStatus


class TestLinkPattern:
    def test_string_round_trip(self):
        pattern = LinkPattern.from_string("0,inf;1,2;-2,-1")
        assert pattern.n_links == 3
        assert pattern.to_string() == "0,inf;1,2;-2,-1"
        assert pattern.link(2) == (1.0, 2.0)

    def test_points_in_link_order(self, two_links):
        pts = two_links.points
        assert pts[0] == 0.0 and math.isinf(pts[1])
        assert pts[2:].tolist() == [1.0, 2.0]

    def test_link_index_out_of_range(self, two_links):
        with pytest.raises(PatternError) as info:
            two_links.link(3)
        assert info.value.indices == (3,)

    def test_bad_text(self):
        with pytest.raises(ConfigError):
            LinkPattern.from_string("0,1,2")
        with pytest.raises(ConfigError):
            LinkPattern.from_string("0,x")

    def test_mapped(self, two_links):
        scaled = two_links.mapped(2.0)
        assert scaled.points[2:].tolist() == [2.0, 4.0]
        assert math.isinf(scaled.points[1])
        with pytest.raises(PatternError):
            two_links.mapped(-1.0)

    def test_serialization_names_infinity(self, two_links):
        assert two_links.model_dump()["links"] == [[0.0, "inf"], [1.0, 2.0]]


class TestValidity:
    def test_nested_and_disjoint_links(self):
        assert is_link_pattern(LinkPattern.from_string("0,3;1,2")) == LinkStatus.LP
        assert is_link_pattern(LinkPattern.from_string("0,inf;1,2;-2,-1")) == LinkStatus.LP

    def test_crossing_links(self):
        assert is_link_pattern(LinkPattern.from_string("0,2;1,3")) == LinkStatus.CLP_ONLY

    def test_crossing_through_infinity(self):
        assert is_link_pattern(LinkPattern.from_string("0,inf;-1,1")) == LinkStatus.CLP_ONLY

    def test_coincident_points(self):
        with pytest.raises(PatternError) as info:
            is_link_pattern(LinkPattern.from_string("0,1;0,2"))
        assert info.value.indices == (0, 2)
        assert info.value.exit_code == 2


class TestPermutations:
    def test_permute(self):
        pattern = LinkPattern.from_string("0,1;2,3;4,5")
        moved = permute(pattern, [3, 1, 2])
        assert moved.links == (pattern.links[1], pattern.links[2], pattern.links[0])

    def test_not_a_permutation(self, two_links):
        with pytest.raises(PatternError):
            permute(two_links, [1, 1])

    def test_compose(self):
        assert compose_permutations([2, 1, 3], [1, 3, 2]) == [2, 3, 1]
        with pytest.raises(PatternError):
            compose_permutations([1, 2], [1, 2, 3])

    def test_composition_acts_like_successive_permutes(self):
        pattern = LinkPattern.from_string("0,1;2,3;4,5")
        first, second = [2, 3, 1], [1, 3, 2]
        assert permute(permute(pattern, second), first) == permute(pattern, compose_permutations(first, second))

    def test_cycle_to_end(self):
        assert cycle_to_end(1, 3) == [3, 1, 2]
        assert cycle_to_end(3, 3) == [1, 2, 3]
        with pytest.raises(PatternError):
            cycle_to_end(4, 3)

    def test_remove_link(self):
        pattern = LinkPattern.from_string("0,inf;1,2;-2,-1")
        assert remove_link(pattern, 2).to_string() == "0,inf;-2,-1"

    def test_link_root_avoids_infinity(self):
        pattern = LinkPattern.from_string("inf,0;1,2")
        assert link_root(pattern, 0) == (1, 0)
        assert link_root(pattern, 1) == (2, 3)


class TestCrossRatio:
    def test_through_infinity(self):
        assert cross_ratio_points(0.0, math.inf, 1.0, 2.0) == pytest.approx(0.5)

    def test_nested(self):
        assert cross_ratio_points(0.0, 3.0, 1.0, 2.0) == pytest.approx(0.25)

    def test_folded_into_unit_interval(self):
        assert cross_ratio_points(1.0, 2.0, 0.0, 3.0) == pytest.approx(0.25)

    def test_crossing_is_negative(self):
        assert cross_ratio_points(0.0, 2.0, 1.0, 3.0) == pytest.approx(-1.0 / 3.0)

    def test_chart_cross_ratio(self):
        state = initial_state(LinkPattern.from_string("0,2;1,3"))
        with pytest.raises(PatternError):
            cross_ratio(state.components[0].chart, (0, 1), (2, 3))


class TestSplits:
    def test_initial_state(self, three_links):
        state = initial_state(three_links)
        assert len(state.components) == 1
        assert state.components[0].kind == ComponentKind.ROOT
        assert state.same_component(0, 5)

    def test_components_of_initial_state(self, three_links):
        assert components_of(three_links) == {1: "0", 2: "0", 3: "0"}

    def test_geodesic_separates_left_and_right(self, three_links):
        state = initial_state(three_links)
        split = component_split(state, geodesic_trace(0.0, math.inf), endpoints=(0, 1))
        assert split.component("0.R").members == (2, 3)
        assert split.component("0.L").members == (4, 5)
        assert split.same_component(2, 3)
        assert not split.same_component(2, 4)
        assert split.component_of(0) is None
        right = split.component("0.R").chart
        assert right.image(2) < right.image(3)
        assert np.all(right.derivatives > 0)

    def test_hull_slit(self, two_links):
        state = initial_state(two_links)
        slit = Trace(points=np.array([5.0, 5.0 + 0.5j]), capacities=np.array([0.0, 0.0625]))
        split = component_split(state, slit)
        hull = split.component("0.H")
        assert hull.kind == ComponentKind.HULL
        assert hull.members == (0, 1, 2, 3)
        assert hull.chart.image(0) == pytest.approx(5.0 - math.sqrt(25.25), rel=1e-12)
        assert hull.chart.derivative(0) == pytest.approx(5.0 / math.sqrt(25.25), rel=1e-12)

    def test_component_report(self, three_links):
        state = initial_state(three_links)
        split = component_split(state, geodesic_trace(0.0, math.inf), endpoints=(0, 1))
        report = component_report(split)
        assert report["n_points"] == 6
        assert report["n_removed"] == 1
        kinds = sorted(c["kind"] for c in report["components"])
        assert kinds == ["left", "right"]

    @pytest.mark.slow
    def test_removal_order_does_not_matter(self):
        pattern = LinkPattern.from_string("0,5;1,2;3,4")
        curves = {(2, 3): geodesic_trace(1.0, 2.0, 2000), (4, 5): geodesic_trace(3.0, 4.0, 2000)}
        kernels = []
        for order in ([(2, 3), (4, 5)], [(4, 5), (2, 3)]):
            state = initial_state(pattern)
            for ends in order:
                comp = state.component_of(ends[0])
                state = component_split(state, curves[ends], endpoints=ends, component_id=comp.component_id)
            outer = state.component_of(0)
            assert set(outer.members) == {0, 1}
            chart = outer.chart
            # boundary Poisson kernel between 0 and 5 is independent of the chart
            kernels.append(chart.derivative(0) * chart.derivative(1) / (chart.image(0) - chart.image(1)) ** 2)
        assert kernels[0] == pytest.approx(kernels[1], rel=0.05)


class TestGeodesicsAndTubes:
    def test_geodesic_is_a_semicircle(self):
        pts = geodesic_trace(1.0, 3.0).points
        assert pts[0] == pytest.approx(1.0)
        assert np.allclose(np.abs(pts - 2.0), 1.0)

    def test_geodesic_from_infinity_is_vertical(self):
        pts = geodesic_trace(math.inf, 2.0).points
        assert np.allclose(pts.real, 2.0)

    def test_tubes_are_disjoint(self, three_links):
        tubes = tube_rectangles(three_links)
        assert len(tubes) == 3
        for i in range(3):
            for j in range(i + 1, 3):
                assert not tubes[i].intersects(tubes[j])

    def test_tubes_need_noncrossing_links(self):
        with pytest.raises(PatternError):
            tube_rectangles(LinkPattern.from_string("0,2;1,3"))
