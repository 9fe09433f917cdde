import numpy as np
import pytest

from taam.classifier import (UnifiedClassifier, class_weights, expand_classifier,
                             masked_weighted_ce, predict)

from oracles import central_diff, rel_err


def test_expand_copies_old_columns():
    cf = expand_classifier(UnifiedClassifier(4), [0, 1, 2], seed=0)
    old = cf.W.copy()
    cf2 = expand_classifier(cf, [3, 4], seed=1)
    assert cf2.W.shape == (4, 5)
    assert np.array_equal(cf2.W[:, :3], old)
    assert cf2.class_to_task == {0: 0, 1: 0, 2: 0, 3: 1, 4: 1}
    assert np.abs(cf2.W[:, 3:]).max() <= np.sqrt(6 / (4 + 2))


def test_expand_first_task():
    cf = expand_classifier(UnifiedClassifier(4), [0, 1], seed=3)
    assert cf.W.shape == (4, 2) and np.abs(cf.W).max() > 0
    again = expand_classifier(UnifiedClassifier(4), [0, 1], seed=3)
    assert np.array_equal(cf.W, again.W)


def test_expand_rejects():
    cf = expand_classifier(UnifiedClassifier(4), [0, 1], seed=0)
    with pytest.raises(ValueError, match="already present"):
        expand_classifier(cf, [1, 2], seed=0)
    with pytest.raises(ValueError, match="contiguous"):
        expand_classifier(cf, [3, 4], seed=0)


def test_class_weights():
    assert class_weights([0, 0, 1], [0, 1]) == {0: 0.5, 1: 1.0}
    assert class_weights([3, 4, 3, 4], [3, 4]) == {3: 0.5, 4: 0.5}
    assert class_weights([2, 2, 2, 2], [2]) == {2: 0.25}
    with pytest.raises(ValueError):
        class_weights([0, 0], [0, 1])
    with pytest.raises(ValueError):
        class_weights([0, 5], [0, 1])


def test_ce_uniform():
    loss, _ = masked_weighted_ce(np.zeros((1, 2)), [0], {0: 1.0, 1: 1.0}, [0, 1])
    assert loss == pytest.approx(0.6931471805599453, abs=1e-15)


def test_ce_saturated():
    logits = np.array([[50.0, 0.0]])
    loss, _ = masked_weighted_ce(logits, [0], {0: 1.0, 1: 1.0}, [0, 1])
    assert 0.0 <= loss < 1e-20


def test_ce_ignores_inactive_columns():
    logits = np.array([[100.0, 0.0, 0.0], [-3.0, 1.0, 2.0]])
    loss, d = masked_weighted_ce(logits, [1, 2], {1: 1.0, 2: 1.0}, [1, 2])
    ref = np.log(2) + (np.log(np.exp(1) + np.exp(2)) - 2)
    assert loss == pytest.approx(ref, rel=1e-12)
    assert np.all(d[:, 0] == 0.0)


def test_ce_errors():
    with pytest.raises(ValueError):
        masked_weighted_ce(np.zeros((1, 3)), [0], {0: 1.0}, [1, 2])


@pytest.mark.parametrize("reduction", ["sum", "mean"])
@pytest.mark.parametrize("seed", range(20))
def test_ce_gradient_finite_differences(seed, reduction):
    rng = np.random.default_rng(seed)
    n, C = int(rng.integers(1, 6)), int(rng.integers(3, 7))
    active = sorted(rng.choice(C, size=int(rng.integers(2, C + 1)), replace=False).tolist())
    labels = rng.choice(active, size=n).tolist()
    weights = {c: float(rng.uniform(0.1, 2)) for c in active}
    logits = rng.normal(scale=2.0, size=(n, C))
    loss, d = masked_weighted_ce(logits, labels, weights, active, reduction)
    fd = central_diff(lambda: masked_weighted_ce(logits, labels, weights, active, reduction)[0],
                      logits)
    assert rel_err(d, fd) < 1e-4
    inactive = [c for c in range(C) if c not in active]
    assert np.all(d[:, inactive] == 0.0)
    assert loss >= 0


def test_ce_weighted_sum_oracle():
    rng = np.random.default_rng(0)
    logits = rng.normal(size=(4, 3))
    labels = [0, 1, 1, 2]
    w = {0: 1.0, 1: 0.5, 2: 1.0}
    loss, _ = masked_weighted_ce(logits, labels, w, [0, 1, 2])
    ref = -sum(w[y] * np.log(np.exp(z[y]) / np.exp(z).sum()) for z, y in zip(logits, labels))
    assert loss == pytest.approx(ref, rel=1e-12)


def test_predict():
    cf = UnifiedClassifier(3, np.eye(3), {0: 0, 1: 0, 2: 1})
    H = np.array([[0.1, 2.0, 0.3], [5.0, 0.0, 1.0]])
    assert predict(H, cf).tolist() == [1, 0]
    assert predict(H, cf, [2]).tolist() == [2, 2]
    assert predict(7.5 * H, cf).tolist() == [1, 0]
    assert predict(np.zeros((1, 3)), cf).tolist() == [0]  # tie -> smallest id
    assert predict(H, cf, [1, 2]).tolist() == [1, 2]
    with pytest.raises(ValueError):
        predict(H, cf, [])


def test_classifier_json_round_trip():
    cf = expand_classifier(expand_classifier(UnifiedClassifier(5), [0, 1], 0), [2, 3, 4], 1)
    back = UnifiedClassifier.from_json(cf.to_json())
    assert np.array_equal(back.W, cf.W) and back.class_to_task == cf.class_to_task
