import numpy as np
import pytest

from dpareto.mechanisms import datasets, svt, training
from dpareto.mechanisms.training import TrainingHyperparams
from dpareto import privacy


def plain_minibatch_sgd(data, epochs, m, lr, seed):
    """Textbook mini-batch logistic regression SGD with the same lot draws."""
    rng = np.random.default_rng(seed)
    X, y = data.x_train, data.y_train
    w = np.zeros(X.shape[1])
    for _ in range(epochs * (len(y) // m)):
        lot = rng.choice(len(y), size=m, replace=False)
        Xl, yl = X[lot], y[lot]
        sig = 1.0 / (1.0 + np.exp(yl * (Xl @ w)))
        w = w - lr * np.mean((-yl * sig)[:, None] * Xl, axis=0)
    return w


# -- SVT ------------------------------------------------------------------

def test_workload_examples():
    w = svt.make_svt_workload(100, 10, 5)
    assert w.positives == 10 and w.m == 100
    assert svt.make_svt_workload(5, 0, 1).positives == 0
    np.testing.assert_array_equal(svt.make_svt_workload(100, 10, 9).truth, svt.make_svt_workload(100, 10, 9).truth)
    with pytest.raises(ValueError):
        svt.make_svt_workload(5, 6, 0)


def test_svt_noiseless_limit_marks_first_true_queries():
    rng = np.random.default_rng(0)
    w = svt.make_svt_workload(100, 10, 3)
    for C in (1, 3, 10, 15):
        order = rng.permutation(100)
        out = svt.run_svt(w, 1e-6, C, order, rng)
        first_true = [i for i in order if w.truth[i]][:C]
        expected = np.zeros(100, dtype=int)
        expected[first_true] = 1
        np.testing.assert_array_equal(out, expected)


def test_svt_never_exceeds_bound():
    rng = np.random.default_rng(1)
    w = svt.make_svt_workload(100, 10, 3)
    for _ in range(200):
        C = int(rng.integers(1, 30))
        b = float(np.exp(rng.uniform(np.log(1e-2), np.log(1e2))))
        assert svt.run_svt(w, b, C, rng.permutation(100), rng).sum() <= C


def test_svt_preconditions():
    w = svt.make_svt_workload(10, 2, 0)
    with pytest.raises(ValueError):
        svt.run_svt(w, 1.0, 0, np.arange(10), 0)
    with pytest.raises(ValueError):
        svt.run_svt(w, 1.0, 1, np.arange(9), 0)


def test_f1_examples():
    truth = np.zeros(100, dtype=int)
    truth[:10] = 1
    assert svt.f1_score(truth, truth) == 1.0
    assert svt.f1_score(truth, np.zeros(100)) == 0.0
    pred = np.zeros(100, dtype=int)
    pred[:5] = 1
    pred[50:55] = 1
    assert svt.f1_score(truth, pred) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        svt.f1_score(truth, pred[:5])


def test_f1_removing_true_positive_never_helps():
    rng = np.random.default_rng(2)
    for _ in range(200):
        truth = (rng.random(30) < 0.3).astype(int)
        pred = (rng.random(30) < 0.4).astype(int)
        f = svt.f1_score(truth, pred)
        assert 0.0 <= f <= 1.0
        for i in np.flatnonzero(truth & pred):
            worse = pred.copy()
            worse[i] = 0
            assert svt.f1_score(truth, worse) <= f


def test_svt_utility_oracle_examples():
    w = svt.make_svt_workload(100, 10, 4)
    a = svt.svt_utility_oracle(w, 2.0, 5, 1, 7)
    assert a == svt.svt_utility_oracle(w, 2.0, 5, 1, 7)
    mean, runs = svt.svt_utility_oracle(w, 1e-6, 12, 20, 0)
    assert mean == 1.0 and runs == [1.0] * 20
    mean, runs = svt.svt_utility_oracle(w, 1e-6, 5, 20, 0)
    assert mean == pytest.approx(2 / 3)
    assert mean == pytest.approx(np.mean(runs))
    with pytest.raises(ValueError):
        svt.svt_utility_oracle(w, 1.0, 5, 0, 0)


# -- training -----------------------------------------------------------------

def test_clip_examples():
    np.testing.assert_array_equal(training.clip([0.3, 0.4], 1), [0.3, 0.4])
    np.testing.assert_allclose(training.clip([3, 4], 1), [0.6, 0.8])
    np.testing.assert_array_equal(training.clip([0, 0], 1), [0, 0])


def test_noiseless_unclipped_equals_plain_sgd():
    data = datasets.synthetic_separable(100, 20, dim=3, rng=4)
    hp = TrainingHyperparams(epochs=5, lot_size=10, learning_rate=0.5, noise_variance=0.0, clip_norm=np.inf)
    w = training.dp_sgd_train(data, hp, rng=np.random.default_rng(8))
    np.testing.assert_allclose(w, plain_minibatch_sgd(data, 5, 10, 0.5, 8), atol=1e-12, rtol=0)


def test_clipped_gradients_respect_bound():
    data = datasets.synthetic_separable(200, 20, dim=4, rng=1)
    for loss in ("logistic", "hinge"):
        for L in (0.01, 0.1, 0.5):
            norms = []
            hp = TrainingHyperparams(3, 16, 0.1, 1.0, L)
            training.dp_sgd_train(data, hp, loss, rng=2,
                                  monitor=lambda G, noise: norms.append(np.linalg.norm(G, axis=1).max()))
            assert max(norms) <= L * (1 + 1e-12)


def test_noise_std_matches_formula():
    data = datasets.synthetic_separable(1000, 10, dim=2, rng=0)
    hp = TrainingHyperparams(epochs=100, lot_size=20, learning_rate=0.01, noise_variance=2.25, clip_norm=0.7)
    noise = []
    training.dp_sgd_train(data, hp, rng=3, monitor=lambda G, z: noise.append(z))
    z = np.concatenate(noise)
    assert len(z) >= 10_000
    expected = 2 * 0.7 * 1.5 / 20
    assert abs(np.std(z) / expected - 1) < 0.05


def test_adam_first_step_is_sign_step():
    X = np.array([[0.6, -0.8]])
    data = datasets.Dataset(np.vstack([X, X]), np.array([1.0, 1.0]), 2)
    hp = TrainingHyperparams(epochs=1, lot_size=2, learning_rate=0.01, noise_variance=0.0, clip_norm=np.inf)
    w = training.dp_adam_train(data, hp, rng=0)
    g = training.per_example_grads(X, np.array([1.0]), np.zeros(2), "logistic")[0]
    np.testing.assert_allclose(w, -0.01 * g / (np.abs(g) + training.ADAM_KAPPA), rtol=1e-12)


def test_trainers_deterministic():
    data = datasets.synthetic_separable(200, 50, rng=2)
    hp = TrainingHyperparams(2, 20, 0.1, 1.0, 1.0)
    for train in (training.dp_sgd_train, training.dp_adam_train):
        np.testing.assert_array_equal(train(data, hp, rng=5), train(data, hp, rng=5))
    a = training.output_perturbed_logreg_train(data, 0.01, 0.5, rng=5)
    np.testing.assert_array_equal(a, training.output_perturbed_logreg_train(data, 0.01, 0.5, rng=5))


def test_dp_sgd_accuracy_on_separable_data():
    data = datasets.synthetic_separable(1000, 400, rng=0)
    hp = TrainingHyperparams(epochs=10, lot_size=50, learning_rate=0.5, noise_variance=1.0, clip_norm=1.0)
    eps = privacy.dpsgd_privacy_oracle(50, 10, 1.0, 1000, 1e-6)
    assert eps <= 15
    w = training.dp_sgd_train(data, hp, rng=1)
    assert training.accuracy(data.x_test, data.y_test, w) >= 0.9


def test_output_perturbation_limits():
    data = datasets.synthetic_separable(300, 50, rng=3)
    w0 = training.projected_sgd_logreg(data, 0.01, rng=np.random.default_rng(4))
    w = training.output_perturbed_logreg_train(data, 0.01, 1e-12, rng=np.random.default_rng(4))
    np.testing.assert_allclose(w, w0, atol=1e-10)
    assert np.linalg.norm(w0) <= 1 / 0.01 + 1e-9
    regs = [1e-3, 1e-2, 1e-1, 1.0]
    eps = [privacy.output_perturbation_epsilon(0.5, r, data.n_train) for r in regs]
    assert all(a > b for a, b in zip(eps, eps[1:]))


def test_hinge_subgradient_zero_at_margin():
    X = np.array([[1.0, 0.0]])
    g = training.per_example_grads(X, np.array([1.0]), np.array([1.0, 0.0]), "hinge")
    np.testing.assert_array_equal(g, [[0.0, 0.0]])


def test_accuracy_oracle():
    X = np.array([[1.0, 0.0], [0.5, 0.1], [0.2, 0.3]])
    data = datasets.Dataset(np.vstack([X, X]), np.ones(6), 3)
    mean, runs = training.accuracy_utility_oracle(lambda d, hp, rng: np.zeros(2), data, None, 2, 0)
    assert mean == 1.0 and runs == [1.0, 1.0]
    data = datasets.synthetic_separable(300, 100, rng=1)
    hp = TrainingHyperparams(2, 30, 0.5, 4.0, 1.0)
    mean, runs = training.accuracy_utility_oracle(
        lambda d, h, rng: training.dp_sgd_train(d, h, rng=rng), data, hp, 3, 11)
    assert len(runs) == 3 and mean == pytest.approx(sum(runs) / 3, abs=0)


def test_more_noise_does_not_help():
    data = datasets.synthetic_separable(500, 400, noise=0.3, rng=6)
    means = []
    for nv in (1, 2, 4, 8, 16):
        hp = TrainingHyperparams(3, 25, 0.5, nv * 4.0, 1.0)
        mean, _ = training.accuracy_utility_oracle(
            lambda d, h, rng: training.dp_sgd_train(d, h, rng=rng), data, hp, 20, 0)
        means.append(mean)
    inversions = sum(b > a for a, b in zip(means, means[1:]))
    assert inversions <= 1


# -- datasets -----------------------------------------------------------------

def test_csv_fixture_exact(tmp_path):
    path = tmp_path / "tiny.csv"
    path.write_text("a,b,label\n0.5,0,1\n0,0.25,0\n-0.5,0.5,1\n")
    X, labels = datasets.read_csv(path)
    np.testing.assert_array_equal(X, [[0.5, 0], [0, 0.25], [-0.5, 0.5]])
    np.testing.assert_array_equal(labels, [1, 0, 1])
    d = datasets.load_dataset(path, preprocessing=datasets.Preprocessing(n_train=2, n_test=1, shuffle=False,
                                                                         normalize=False))
    np.testing.assert_array_equal(d.features, [[0.5, 0], [0, 0.25], [-0.5, 0.5]])
    np.testing.assert_array_equal(d.labels, [1, -1, 1])


def test_rows_normalized(tmp_path):
    path = tmp_path / "wide.csv"
    path.write_text("a,b,label\n0,2,1\n1,0,0\n")
    d = datasets.load_dataset(path, preprocessing=datasets.Preprocessing(n_train=1, n_test=1))
    assert np.max(np.linalg.norm(d.features, axis=1)) <= 1 + 1e-12


def test_subsample_deterministic():
    path = datasets.bundled_path("binary_features.csv")
    prep = datasets.Preprocessing(n_train=1000, n_test=100, seed=7)
    a = datasets.load_dataset(path, preprocessing=prep)
    b = datasets.load_dataset(path, preprocessing=prep)
    np.testing.assert_array_equal(a.features, b.features)
    assert a.n_train == 1000 and a.n_test == 100


def test_parse_errors_name_lines(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,label\n1,0\nx,1\n")
    with pytest.raises(datasets.DatasetError, match=":3:"):
        datasets.read_csv(path)
    path.write_text("a,b\n1,0\n")
    with pytest.raises(datasets.DatasetError, match="label"):
        datasets.read_csv(path)
    path.write_text("a,b,label\n1,0\n")
    with pytest.raises(datasets.DatasetError, match=":2:"):
        datasets.read_csv(path)


def test_libsvm(tmp_path):
    path = tmp_path / "d.libsvm"
    path.write_text("+1 1:0.5 3:1\n-1 2:1\n")
    X, labels = datasets.read_libsvm(path)
    np.testing.assert_array_equal(X, [[0.5, 0, 1], [0, 1, 0]])
    np.testing.assert_array_equal(labels, [1, -1])
    with pytest.raises(datasets.DatasetError):
        datasets.read_libsvm(path, n_features=2)
