import numpy as np
import pytest

from locrad.exceptions import CueInfeasible, InfeasibleParams, TooFewSamples
from locrad.graph import BEACON, TABLE, distances_from, restrict
from locrad.ingest import emit_json
from locrad.synthgen import (
    GeneratorParams,
    cue_label,
    generate_schema,
    inject_radius_cue,
    inject_radius_target,
    local_rule,
    local_task_dataset,
    realized_fk_degrees,
    total_variation,
    verify_feature_independence,
)

PROFILE = ((1, 0.5), (2, 0.3), (3, 0.2))


def test_minimal_schema():
    g = generate_schema(GeneratorParams(n_tables=1, attrs_per_table=(1, 1)))
    assert len(g.tables) == 1
    assert len(g.attributes) == 1
    assert len(g.candidate_edges) == 0


def test_same_seed_same_bytes():
    p = GeneratorParams(n_tables=20, seed=7)
    assert emit_json(generate_schema(p)) == emit_json(generate_schema(p))


def test_different_seed_differs():
    a = generate_schema(GeneratorParams(n_tables=20, seed=1))
    b = generate_schema(GeneratorParams(n_tables=20, seed=2))
    assert emit_json(a) != emit_json(b)


def test_counts_match_params():
    g = generate_schema(GeneratorParams(n_tables=12, attrs_per_table=(3, 3), seed=4))
    assert len(g.tables) == 12
    assert len(g.attributes) == 36


@pytest.mark.parametrize("seed", range(5))
def test_degree_profile_within_tv(seed):
    g = generate_schema(GeneratorParams(n_tables=50, degree_profile=PROFILE, seed=seed))
    assert total_variation(PROFILE, realized_fk_degrees(g)) <= 0.1


def test_total_variation_hand_value():
    # realized {1: .5, 2: .5} against {1: .5, 2: .3, 3: .2}: TV = (0.2 + 0.2) / 2
    assert total_variation(PROFILE, [1, 2, 1, 2]) == pytest.approx(0.2)


def test_candidates_are_type_compatible():
    from locrad.features import type_class

    g = generate_schema(GeneratorParams(n_tables=30, seed=3))
    fm = g.feature_map
    for e in g.candidate_edges:
        assert type_class(fm[e.src].data_type) == type_class(fm[e.dst].data_type)


@pytest.mark.parametrize(
    "bad",
    [
        dict(n_tables=0),
        dict(attrs_per_table=(3, 2)),
        dict(target_radius=7),
        dict(candidate_density=0.0),
        dict(positive_fraction=1.0),
        dict(degree_profile=((1, 0.5), (2, 0.4))),
    ],
)
def test_invalid_params(bad):
    with pytest.raises(InfeasibleParams):
        GeneratorParams(**bad).check()


def test_k0_labels_recompute_from_endpoints():
    g = generate_schema(GeneratorParams(n_tables=30, seed=5))
    ds = inject_radius_cue(g, 0, 0.5, seed=5)
    fm = ds.graph.feature_map
    for s in ds.samples:
        assert s.label == local_rule(fm[s.src], fm[s.dst])


def test_positive_fraction_half_on_200_candidates():
    g = generate_schema(GeneratorParams(n_tables=31, seed=0))
    n = len(g.candidate_edges)
    assert 180 <= n <= 220
    for k in (0, 1, 2):
        ds = inject_radius_cue(g, k, 0.5, seed=0)
        assert abs(ds.labels.sum() - n / 2) <= 0.05 * n


def test_cue_without_candidates():
    g = generate_schema(GeneratorParams(n_tables=1, attrs_per_table=(1, 1)))
    with pytest.raises(CueInfeasible):
        inject_radius_cue(g, 1, 0.5)


def _single_beacon(graph, beacon):
    return graph.with_roles({t.name: (BEACON if t.name == beacon else TABLE) for t in graph.tables})


def test_k2_relocating_beacon_flips_label():
    g = generate_schema(GeneratorParams(n_tables=40, seed=11))
    tables = {t.name for t in g.tables}
    for e in g.candidate_edges:
        dist = distances_from(g, (e.src, e.dst), 3)
        at2 = [t for t in tables if dist.get(t) == 2]
        at3 = [t for t in tables if dist.get(t) == 3]
        if at2 and at3:
            break
    else:
        pytest.skip("no edge with tables at distance 2 and 3")
    edge = (e.src, e.dst)
    assert cue_label(_single_beacon(g, at2[0]), edge, 2) == 1
    assert cue_label(_single_beacon(g, at3[0]), edge, 2) == 0


@pytest.mark.parametrize("k", [1, 2, 3])
def test_cue_labels_match_recompute(k):
    g = generate_schema(GeneratorParams(n_tables=40, seed=k))
    ds = inject_radius_cue(g, k, 0.3, seed=k)
    for s in ds.samples[:60]:
        assert cue_label(ds.graph, (s.src, s.dst), k) == s.label


@pytest.mark.parametrize("k", [1, 2])
def test_feature_permutation_keeps_structural_labels(k):
    g = generate_schema(GeneratorParams(n_tables=30, seed=k))
    ds = inject_radius_cue(g, k, 0.3, seed=k)
    attrs = [a.id for a in ds.graph.attributes]
    recs = [ds.graph.feature_map[a] for a in attrs]
    perm = np.random.default_rng(0).permutation(len(attrs))
    shuffled = ds.graph.with_features({a: recs[i] for a, i in zip(attrs, perm)})
    for s in ds.samples:
        assert cue_label(shuffled, (s.src, s.dst), k) == s.label


def test_feature_permutation_changes_local_labels():
    g = generate_schema(GeneratorParams(n_tables=30, seed=2))
    ds = inject_radius_cue(g, 0, 0.5, seed=2)
    attrs = [a.id for a in ds.graph.attributes]
    recs = [ds.graph.feature_map[a] for a in attrs]
    perm = np.random.default_rng(0).permutation(len(attrs))
    shuffled = ds.graph.with_features({a: recs[i] for a, i in zip(attrs, perm)})
    relabeled = [cue_label(shuffled, (s.src, s.dst), 0) for s in ds.samples]
    assert relabeled != [s.label for s in ds.samples]


@pytest.mark.parametrize("k", [1, 2])
def test_cue_locality_far_deletion(k):
    g = generate_schema(GeneratorParams(n_tables=30, seed=20 + k))
    ds = inject_radius_cue(g, k, 0.3, seed=k)
    graph = ds.graph
    attrs_of = graph.table_attributes
    for s in ds.samples[:15]:
        dist = distances_from(graph, (s.src, s.dst))
        far = [t.name for t in graph.tables if dist.get(t.name, 10**9) > k]
        for t in far[:3]:
            drop = {t, *attrs_of[t]}
            sub = restrict(graph, [n for n in graph.node_ids if n not in drop])
            assert cue_label(sub, (s.src, s.dst), k) == s.label


def test_target_labels_bounded_and_deterministic():
    g = generate_schema(GeneratorParams(n_tables=30, seed=1))
    a = inject_radius_target(g, 2, seed=1, beacon_fraction=0.5)
    b = inject_radius_target(g, 2, seed=1, beacon_fraction=0.5)
    assert np.array_equal(a.labels, b.labels)
    assert np.all(np.isfinite(a.labels)) and a.labels.min() >= 0
    assert a.is_regression and a.nominal_radius == 2


def test_local_task_dataset():
    g = generate_schema(GeneratorParams(n_tables=30, attrs_per_table=(4, 4), seed=3))
    ds = local_task_dataset(g, n_positives=40, seed=3)
    fm = ds.graph.feature_map
    assert ds.nominal_radius == 0
    assert int(ds.labels.sum()) == 40
    for s in ds.samples:
        assert s.label == local_rule(fm[s.src], fm[s.dst])
        assert ds.graph.table_of(s.src) != ds.graph.table_of(s.dst)
    assert len({(s.src, s.dst) for s in ds.samples}) == len(ds.samples)


def test_independence_constant_labels_p_one():
    g = generate_schema(GeneratorParams(n_tables=30, seed=1))
    ds = inject_radius_cue(g, 1, 0.3, seed=1)
    const = ds.replace(samples=tuple(s.__class__(s.src, s.dst, 1.0) for s in ds.samples))
    assert verify_feature_independence(const, 200) == 1.0


def test_independence_guards():
    g = generate_schema(GeneratorParams(n_tables=30, seed=1))
    ds = inject_radius_cue(g, 1, 0.3, seed=1)
    with pytest.raises(TooFewSamples):
        verify_feature_independence(ds, n_permutations=100)
    with pytest.raises(TooFewSamples):
        verify_feature_independence(ds.replace(samples=ds.samples[:10]), 200)


def test_independence_detects_local_dependence():
    g = generate_schema(GeneratorParams(n_tables=40, seed=4))
    ds = inject_radius_cue(g, 0, 0.3, seed=4)
    p = verify_feature_independence(ds, 400, seed=4)
    assert 1 / 401 <= p <= 0.05


def test_independence_p_in_range():
    g = generate_schema(GeneratorParams(n_tables=40, seed=4))
    ds = inject_radius_cue(g, 2, 0.3, seed=4)
    p = verify_feature_independence(ds, 300, seed=1)
    assert 1 / 301 <= p <= 1
