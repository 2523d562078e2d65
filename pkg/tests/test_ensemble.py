from collections import Counter

import numpy as np
import pytest

from ssi.classify import TrainedClassifier
from ssi.cluster import ClusterStat
from ssi.dataset import Dataset, StandardizationParams
from ssi.ensemble import (
    Detector,
    EnsembleModel,
    ExclusiveCluster,
    Rho,
    SSIConfig,
    TraceEvent,
    find_exclusive_clusters,
    fit,
    predict_instance,
    predict_subject,
    predict_subjects,
)
from ssi.synth import SynthConfig, generate


def stat(p, n):
    return ClusterStat(size=p + n, positives=p, negatives=n)


def threshold_model(thresholds, dim=1):
    """One linear detector per threshold: flags x[0] > thr (steep logistic)."""
    dets = []
    for k, thr in enumerate(thresholds):
        clf = TrainedClassifier(kind="linear", weights=np.r_[50.0, np.zeros(dim - 1)], bias=-50.0 * thr)
        src = ExclusiveCluster((), (), (0.0,) * dim, 1, 2, k)
        dets.append(Detector(clf, src, 1.0, True))
    return EnsembleModel(tuple(dets), StandardizationParams.identity(dim), {})


@pytest.mark.parametrize(
    "p, n, expect",
    [
        (6, 1, True),  # 1/6 < 0.2, 6 > 5
        (5, 0, False),  # not more than s
        (10, 2, False),  # ratio equals t
        (10, 1, True),
        (0, 0, False),
        (0, 3, False),
    ],
)
def test_exclusive_cluster_rule(p, n, expect):
    assert (find_exclusive_clusters([stat(p, n)], 0.2, 5) == [0]) is expect


def test_exclusive_cluster_indices():
    assert find_exclusive_clusters([stat(1, 9), stat(20, 0), stat(3, 30), stat(8, 1)], 0.2, 5) == [1, 3]


def test_defaults_resolve():
    cfg = SSIConfig()
    assert cfg.resolve_s(100) == 5 and cfg.resolve_s(1001) == 11
    assert cfg.resolve_rho(100, 5) == 12 and cfg.resolve_rho(1000, 5) == 50
    assert cfg.resolve_k_max(30) == 30 and cfg.resolve_k_max(400) == 50


def test_rho_parse():
    assert Rho.parse("20") == Rho(20) and Rho.parse("20").resolve(999) == 20
    r = Rho.parse("5%")
    assert r.fraction and r.resolve(400) == 20 and r.resolve(401) == 21
    assert str(r) == "5%" and str(Rho(20)) == "20"
    for bad in ("0", "150%", "2.5"):
        with pytest.raises(ValueError):
            Rho.parse(bad)


def test_single_detector_prediction():
    m = threshold_model([0.0])
    flag, probs = predict_instance(m, [1.0])
    assert flag and probs[0] > 0.99
    flag, probs = predict_instance(m, [-1.0])
    assert not flag and probs[0] < 0.01


def test_or_ensemble_flags_when_any_detector_fires():
    m = threshold_model([10.0, 0.0])
    flag, probs = predict_instance(m, [1.0])
    assert flag and probs[0] < 0.5 < probs[1]


def test_empty_ensemble_flags_nothing():
    m = EnsembleModel((), StandardizationParams.identity(2), {})
    assert not predict_instance(m, [0.0, 0.0])[0]
    assert not predict_subject(m, np.zeros((3, 2)))


def test_subject_any_instance():
    m = threshold_model([0.0])
    assert predict_subject(m, [[-3.0], [-2.0], [2.0]])
    assert not predict_subject(m, [[-3.0], [-2.0]])
    with pytest.raises(ValueError):
        predict_subject(m, np.zeros((0, 1)))


def test_adding_detector_never_unflags():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(500, 1)) * 3
    base = threshold_model([1.0, 2.0]).flags(X)
    more = threshold_model([1.0, 2.0, -0.5]).flags(X)
    assert np.all(more >= base)


def test_predict_subjects_matches_brute_force(two_subgroup_train):
    data, _ = two_subgroup_train
    model, _ = fit(data, SSIConfig())
    got = predict_subjects(model, data)
    for sid in set(data.subject_ids):
        bag = data.X[[i for i, s in enumerate(data.subject_ids) if s == sid]]
        assert got[sid] == any(predict_instance(model, x)[0] for x in bag)


def test_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension"):
        predict_instance(threshold_model([0.0]), [1.0, 2.0])


def test_two_subgroups_are_recovered(two_subgroup_train):
    data, truth = two_subgroup_train
    model, trace = fit(data, SSIConfig())
    assert len(model.detectors) == 2
    found = set()
    for det in model.detectors:
        groups = Counter(int(truth.subgroup[i]) for i in det.source.positive_members)
        g, top = groups.most_common(1)[0]
        assert g > 0 and top / det.source.n_pos >= 0.9
        found.add(g)
    assert found == {1, 2}


def test_single_blob_gives_one_detector():
    data, truth = generate(SynthConfig(n_subgroups=1, n_pos_subjects=30, seed=3))
    model, _ = fit(data, SSIConfig())
    assert len(model.detectors) == 1
    (det,) = model.detectors
    assert np.mean(truth.subgroup[list(det.source.positive_members)] == 1) >= 0.9


def test_no_subgroups_gives_few_small_detectors():
    counts = []
    for seed in range(10):
        data, _ = generate(SynthConfig(n_subgroups=0, inseparable_subject_fraction=0.0, seed=seed))
        cfg = SSIConfig()
        model, _ = fit(data, cfg)
        s = cfg.resolve_s(int(data.y.sum()))
        counts.append(len(model.detectors))
        assert all(d.source.n_pos < 2 * s for d in model.detectors)
    assert np.mean(counts) <= 1.0


def test_trace_invariants_and_replay(two_subgroup_train):
    data, _ = two_subgroup_train
    cfg = SSIConfig()
    model, trace = fit(data, cfg)
    s = model.config["resolved_min_positives"]
    for e in trace.exclusive_clusters():
        assert e.P_j > s and e.N_j / e.P_j < cfg.neg_tolerance
    removed = trace.removals()
    flat = [i for r in removed for i in r]
    assert len(flat) == len(set(flat))
    assert trace.replay_remaining() == trace.remaining_positives
    # lines round-trip
    assert [TraceEvent.from_line(line) for line in trace.to_lines()] == trace.events


def test_fit_is_deterministic(two_subgroup_train):
    data, _ = two_subgroup_train
    a, ta = fit(data, SSIConfig(seed=3))
    b, tb = fit(data, SSIConfig(seed=3, threads=4))
    assert ta.events == tb.events
    for da, db in zip(a.detectors, b.detectors):
        assert da.classifier.weights.tobytes() == db.classifier.weights.tobytes()


def test_remove_only_if_accepted_keeps_rejected_positives():
    data, _ = generate(SynthConfig(n_subgroups=0, inseparable_subject_fraction=0.0, seed=1))
    cfg = SSIConfig(remove_only_if_accepted=True, min_sensitivity=1.0)
    model, trace = fit(data, cfg)
    assert not model.detectors
    assert not trace.removals()
    assert trace.remaining_positives == trace.initial_positives


def test_gate_holdout_and_feature_selection(two_subgroup_train):
    data, _ = two_subgroup_train
    model, trace = fit(data, SSIConfig(gate_holdout_fraction=0.3, feature_select=1))
    assert model.detectors
    for det in model.detectors:
        assert det.selected_features is not None and len(det.selected_features) == 1
        assert det.gate_sensitivity > 0.9
    assert any(e.get("features") for e in trace.events if e.decision in ("accepted", "rejected"))


def test_kmax_warning():
    data, _ = generate(SynthConfig(n_subgroups=0, seed=2))
    _, trace = fit(data, SSIConfig(k_max=3, rho=Rho(1)))
    assert trace.warnings and "k_max" in trace.warnings[0]
    assert trace.events[-1].decision == "kmax_reached"


def test_requires_both_classes():
    d = Dataset(np.zeros((3, 1)), np.ones(3, bool), ("a", "b", "c"), ("f",))
    with pytest.raises(ValueError):
        fit(d)


@pytest.mark.parametrize(
    "kwargs",
    [{"min_positives": 0}, {"neg_tolerance": -1}, {"min_sensitivity": 1.5}, {"k_max": 1},
     {"gate_holdout_fraction": 1.0}, {"feature_select": 0}, {"threads": 0}],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SSIConfig(**kwargs)
