import numpy as np
import pytest

from cife.dataset_io import load_builtin, make_folds, two_blobs
from cife.learners import (
    KNN_KS,
    MULTI_TECHNIQUES,
    PERCEPTRON,
    PerceptronModel,
    Scaler,
    Technique,
    TrainedClassifier,
    build_pool,
    load_pool,
    predict,
    save_pool,
    train,
)


def gaussian_1d(n=100, seed=0):
    rng = np.random.default_rng(seed)
    y = np.repeat([0, 1], n // 2)
    x = np.where(y == 0, -5.0, 5.0) + rng.normal(size=n)
    return x[:, None], y


def test_technique_catalogue():
    assert len(MULTI_TECHNIQUES) == 11
    ks = [dict(t.params)["k"] for t in MULTI_TECHNIQUES if t.kind == "KNN"]
    assert tuple(ks) == KNN_KS
    with pytest.raises(ValueError):
        Technique("KNN", (("k", 4),))
    with pytest.raises(ValueError):
        Technique("SVM")


def test_gaussian_nb_separated_classes():
    X, y = gaussian_1d()
    clf = train(Technique("GaussianNB"), X, y, seed=0)
    assert np.mean(clf.predict(X) == y) >= 0.99


def test_knn1_recovers_training_labels():
    ds = load_builtin("wine")
    clf = train(Technique("KNN", (("k", 1),)), ds.features, ds.labels, seed=0)
    assert np.array_equal(clf.predict(ds.features), ds.labels)
    assert clf.predict(ds.features[5:6])[0] == ds.labels[5]


def test_single_class_gives_constant():
    X = np.random.default_rng(0).normal(size=(7, 3))
    clf = train(Technique("MLP"), X, np.full(7, 2), seed=1, n_classes=3)
    assert clf.predict(np.zeros((5, 3))).tolist() == [2] * 5


def test_train_errors():
    with pytest.raises(ValueError):
        train(PERCEPTRON, np.empty((0, 2)), np.empty(0, dtype=int), seed=0)
    with pytest.raises(ValueError):
        train(PERCEPTRON, np.array([[0.0, np.inf], [1.0, 2.0]]), np.array([0, 1]), seed=0)


def test_hand_built_perceptron():
    model = PerceptronModel([[1.0, 0.0]], [0.0], [0, 1])
    clf = TrainedClassifier(PERCEPTRON, model, Scaler.identity(2), 0, 2)
    assert predict(clf, np.array([[2.0, 7.0], [-2.0, 7.0]])).tolist() == [1, 0]


def test_width_mismatch():
    X, y = gaussian_1d()
    clf = train(PERCEPTRON, X, y, seed=0)
    with pytest.raises(ValueError):
        clf.predict(np.zeros((2, 3)))


@pytest.mark.parametrize("technique", MULTI_TECHNIQUES, ids=lambda t: t.label)
def test_every_technique_deterministic_and_in_range(technique):
    ds = load_builtin("wine")
    a = train(technique, ds.features, ds.labels, seed=11, n_classes=3)
    b = train(technique, ds.features, ds.labels, seed=11, n_classes=3)
    pa, pb = a.predict(ds.features), b.predict(ds.features)
    assert np.array_equal(pa, pb)
    assert pa.min() >= 0 and pa.max() < 3
    assert a.to_dict() == b.to_dict()
    assert np.mean(pa == ds.labels) > 0.8


@pytest.mark.parametrize("technique", MULTI_TECHNIQUES, ids=lambda t: t.label)
def test_serialisation_roundtrip(technique):
    ds = two_blobs(80)
    clf = train(technique, ds.features, ds.labels, seed=2)
    back = TrainedClassifier.from_dict(clf.to_dict())
    assert np.array_equal(back.predict(ds.features), clf.predict(ds.features))


@pytest.mark.parametrize("k", KNN_KS)
def test_knn_matches_reference_library(k):
    sklearn = pytest.importorskip("sklearn.neighbors")
    ds = load_builtin("ionosphere")
    split = make_folds(ds, 6, 0)[0]
    clf = train(Technique("KNN", (("k", k),)), ds.features[split.train_idx], ds.labels[split.train_idx], seed=0)
    sc = Scaler.fit(ds.features[split.train_idx])
    ref = sklearn.KNeighborsClassifier(n_neighbors=k).fit(sc(ds.features[split.train_idx]), ds.labels[split.train_idx])
    ours = clf.predict(ds.features[split.test_idx])
    theirs = ref.predict(sc(ds.features[split.test_idx]))
    assert np.mean(ours == theirs) >= 0.99


def test_scaler_fitted_on_training_rows():
    X = np.array([[0.0, 10.0], [2.0, 10.0], [4.0, 10.0]])
    clf = train(PERCEPTRON, X, np.array([0, 1, 1]), seed=0)
    assert clf.scaler.mean.tolist() == [2.0, 10.0]
    assert clf.scaler.scale[1] == 1.0  # constant column keeps unit scale


def test_pool_without_pruning_is_sorted():
    ds = load_builtin("wine")
    split = make_folds(ds, 6, 0)[0]
    pool = build_pool("P", split, ds, pool_size=3, candidates=3, seed=1)
    assert len(pool) == 3
    assert np.all(np.diff(pool.val1_accuracy) <= 0)
    assert sorted(pool.candidate_index.tolist()) == [0, 1, 2]


def test_pool_keeps_the_best_candidates():
    ds = load_builtin("wine")
    split = make_folds(ds, 6, 0)[0]
    pool = build_pool("M", split, ds, pool_size=20, candidates=66, seed=4)
    everything = build_pool("M", split, ds, pool_size=66, candidates=66, seed=4)
    kept = set(pool.candidate_index.tolist())
    discarded = [a for i, a in zip(everything.candidate_index, everything.val1_accuracy) if i not in kept]
    assert pool.val1_accuracy.min() >= max(discarded)
    # ties go to the lower candidate index
    for a, b in zip(pool.candidate_index[:-1], pool.candidate_index[1:]):
        ia, ib = np.flatnonzero(everything.candidate_index == a)[0], np.flatnonzero(everything.candidate_index == b)[0]
        assert ia < ib


def test_mode_m_cycles_techniques():
    ds = two_blobs(60)
    split = make_folds(ds, 6, 0)[0]
    pool = build_pool("M", split, ds, pool_size=22, candidates=22, seed=0)
    counts = {}
    for m in pool.members:
        counts[m.technique.label] = counts.get(m.technique.label, 0) + 1
    assert len(counts) == 11 and set(counts.values()) == {2}


def test_pool_cached_predictions_match_recomputation():
    ds = load_builtin("wine")
    split = make_folds(ds, 6, 2)[3]
    pool = build_pool("M", split, ds, pool_size=15, candidates=33, seed=9)
    for n, member in enumerate(pool.members):
        assert np.array_equal(member.predict(ds.features[split.val2_idx]), pool.predictions["val2"][n])
        assert np.array_equal(member.predict(ds.features[split.test_idx]), pool.predictions["test"][n])
    acc = np.mean(pool.predictions["val1"] == ds.labels[split.val1_idx][None, :], axis=1)
    assert np.allclose(acc, pool.val1_accuracy)


def test_pool_determinism_and_errors():
    ds = two_blobs(60)
    split = make_folds(ds, 6, 0)[0]
    a = build_pool("M", split, ds, 5, 11, seed=3)
    b = build_pool("M", split, ds, 5, 11, seed=3)
    assert a.checksum() == b.checksum()
    assert [m.to_dict() for m in a.members] == [m.to_dict() for m in b.members]
    with pytest.raises(ValueError):
        build_pool("P", split, ds, 12, 11, seed=3)
    with pytest.raises(ValueError):
        build_pool("Q", split, ds, 5, 11, seed=3)


def test_pool_file_roundtrip(tmp_path):
    ds = load_builtin("wine")
    split = make_folds(ds, 6, 0)[0]
    pool = build_pool("M", split, ds, 8, 22, seed=5)
    save_pool(pool, tmp_path / "pool.json")
    back = load_pool(tmp_path / "pool.json")
    assert back.checksum() == pool.checksum()
    X = ds.features[split.test_idx]
    for m, n in zip(pool.members, back.members):
        assert np.array_equal(m.predict(X), n.predict(X))


def test_pool_file_tamper_detected(tmp_path):
    import json

    ds = two_blobs(60)
    pool = build_pool("P", make_folds(ds, 6, 0)[0], ds, 3, 3, seed=0)
    save_pool(pool, tmp_path / "pool.json")
    payload = json.loads((tmp_path / "pool.json").read_text())
    payload["predictions"]["test"][0][0] ^= 1
    (tmp_path / "pool.json").write_text(json.dumps(payload))
    with pytest.raises(ValueError, match="checksum"):
        load_pool(tmp_path / "pool.json")
