"""
Equilibria, spacing constants and the lateral existence check.

"""
import numpy as np
import pytest

from laneless.engine import derive_graphs
from laneless.equilibrium import (
    OffsetTemplate,
    compute_C_from_template,
    compute_z_local,
    echelon_rank,
    lateral_levels,
    solve_x_equilibrium,
    solve_y_equilibrium,
    spacing_constants,
    template_positions,
    uniform_template,
    verify_existence,
)
from laneless.errors import DimensionMismatch, SingularLevel, ZeroSpacing
from laneless.formation import Axis, GeometryParams, reference_formation
from laneless.graph import InfluenceGraph, canonical_numbering, laplacian


def chain(weight=1.0):
    return InfluenceGraph(Axis.Y, 0, frozenset([0, 1, 2]), ((0, 1, weight), (1, 2, weight)))


def test_chain_equilibrium():
    bundle = laplacian(chain(), (0, 1, 2))
    assert np.allclose(solve_y_equilibrium(bundle, 50.0, 0.0), [0.0, -50.0, -100.0])
    assert np.allclose(solve_y_equilibrium(bundle, 50.0, 20.0), [20.0, -30.0, -80.0])


def test_weighted_leader_edge():
    bundle = laplacian(InfluenceGraph(Axis.Y, 0, frozenset([0, 1]), ((0, 1, 3.0),)), (0, 1))
    y = solve_y_equilibrium(bundle, 50.0, 0.0)
    assert y[0] - y[1] == pytest.approx(50.0 / 3.0)


def test_zero_gap_collapses():
    bundle = laplacian(chain(), (0, 1, 2))
    assert np.allclose(solve_y_equilibrium(bundle, 0.0, 7.0), 7.0)


def test_disconnected_car():
    graph = InfluenceGraph(Axis.Y, 0, frozenset([0, 1, 2]), ((0, 1, 1.0),))
    with pytest.raises(SingularLevel):
        solve_y_equilibrium(laplacian(graph, (0, 1, 2)), 50.0, 0.0)


def reference_x():
    snapshot = reference_formation()
    graphs = derive_graphs(snapshot, GeometryParams())
    bundle_x = laplacian(graphs.x, canonical_numbering(snapshot, graphs.levels))
    return snapshot, graphs, bundle_x


def test_constant_template_has_no_spacing():
    _, _, bundle_x = reference_x()
    assert np.allclose(compute_C_from_template(bundle_x, {car: 2.0 for car in bundle_x.ordering}).values, 0.0)
    assert np.allclose(compute_C_from_template(bundle_x, np.zeros(len(bundle_x.ordering))).values, 0.0)


def test_template_dimension():
    _, _, bundle_x = reference_x()
    with pytest.raises(DimensionMismatch):
        compute_C_from_template(bundle_x, np.zeros(3))


def test_uniform_template():
    levels = {1: 1, 2: 1, 3: 1, 4: 2, 5: 2}
    assert uniform_template((1, 2, 3, 4, 5), levels) == {1: 0.0, 2: 1.0, 3: 2.0, 4: 0.0, 5: 1.0}
    assert template_positions({1: 0.0, 2: 1.5}, 30.0, anchor=90.0) == {1: 90.0, 2: 45.0}


def test_uniform_spacing_equilibrium():
    """
    The reference formation already sits at the equilibrium of the
    uniform template.

    """
    snapshot, graphs, bundle_x = reference_x()
    C = spacing_constants(snapshot, graphs.x, bundle_x, graphs.levels, OffsetTemplate(), 30.0)
    inputs = {car: snapshot.car(car).x for car in bundle_x.input_ids}
    x = solve_x_equilibrium(bundle_x, C, 30.0, inputs)

    assert np.allclose(x, [snapshot.car(car).x for car in bundle_x.ordering], atol=1e-9)


def test_narrow_template_equilibrium():
    snapshot, graphs, bundle_x = reference_x()
    template = OffsetTemplate((0, 1, 2, 3, 0, 1, 2, 3, 0, 0.5, 1, 1.5, 0, 1, 2, 3))
    C = spacing_constants(snapshot, graphs.x, bundle_x, graphs.levels, template, 30.0)
    inputs = {car: snapshot.car(car).x for car in bundle_x.input_ids}
    x = dict(zip(bundle_x.ordering, solve_x_equilibrium(bundle_x, C, 30.0, inputs)))

    assert x[10] - x[11] == pytest.approx(15.0)
    assert x[11] - x[12] == pytest.approx(15.0)
    assert x[14] - x[15] == pytest.approx(30.0)


def random_lateral_graph(rng, n):
    edges = []
    for target in range(2, n + 1):
        sources = rng.choice(np.arange(1, n + 1), size=min(int(rng.integers(1, 4)), n), replace=False)
        edges.extend((int(s), target, float(rng.uniform(0.1, 2.0))) for s in sources if s != target)
        if not any(t == target for _, t, _ in edges):
            edges.append((1, target, 1.0))
    return InfluenceGraph(Axis.X, 1, frozenset(range(1, n + 1)), tuple(edges))


def test_local_constants_match_template():
    rng = np.random.default_rng(11)
    for _ in range(50):
        n = int(rng.integers(2, 13))
        graph = random_lateral_graph(rng, n)
        bundle = laplacian(graph, tuple(range(1, n + 1)))
        slots = {car: float(rng.uniform(0, 4)) for car in range(1, n + 1)}
        g_x = float(rng.uniform(5, 40))

        C = compute_C_from_template(bundle, slots)
        desired = template_positions(slots, g_x, anchor=float(rng.uniform(-50, 50)))
        for car in range(1, n + 1):
            assert compute_z_local(car, desired, graph.in_edges(car), g_x) == pytest.approx(C[car], abs=1e-10)


def test_local_constant_needs_spacing():
    with pytest.raises(ZeroSpacing):
        compute_z_local(2, {1: 0.0, 2: -30.0}, {1: 1.0}, 0.0)


def test_echelon_rank():
    rng = np.random.default_rng(5)
    for _ in range(30):
        rows, cols, rank = int(rng.integers(1, 7)), int(rng.integers(1, 7)), int(rng.integers(1, 5))
        matrix = rng.normal(size=(rows, rank)) @ rng.normal(size=(rank, cols))
        assert echelon_rank(matrix) == np.linalg.matrix_rank(matrix)

    assert echelon_rank(np.zeros((0, 3))) == 0
    assert echelon_rank(np.zeros((2, 2))) == 0


def test_existence_on_reference():
    _, graphs, bundle_x = reference_x()
    levels = lateral_levels(bundle_x, graphs.levels)
    assert levels == [1, 2, 3, 4]

    for level in levels:
        report = verify_existence(bundle_x, level, 30.0, graphs.levels)
        assert report.feasible
        assert report.rank == report.equations
        assert len(report.cars) == 4


def test_existence_single_car_level():
    graph = InfluenceGraph(Axis.X, 1, frozenset([1, 2]), ((1, 2, 1.0),))
    bundle = laplacian(graph, (1, 2))
    report = verify_existence(bundle, 2, 30.0, {1: 1, 2: 2})

    assert report.feasible
    assert report.cars == (2,)
    assert report.equations == 1
