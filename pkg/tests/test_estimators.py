import numpy as np
import pytest
from sklearn.base import clone

from modir.estimators import GridSearchRegistration, HypervolumeRegistration, check_pairs
from modir.synth import SynthConfig, dataset


@pytest.fixture(scope="module")
def tiny_pairs():
    pairs, train_idx, eval_idx = dataset(SynthConfig(seed=0), 4)
    return [pairs[i] for i in train_idx], [pairs[i] for i in eval_idx]


class TestEstimatorApi:
    def test_get_set_params_and_clone(self):
        est = HypervolumeRegistration(p=5, iterations=10, seed=3)
        params = est.get_params()
        assert params["p"] == 5 and params["seed"] == 3
        est2 = clone(est)
        assert est2.get_params() == params
        est.set_params(lr=5e-4)
        assert est.lr == 5e-4

    def test_fit_predict_transform_score(self, tiny_pairs):
        train, evals = tiny_pairs
        est = HypervolumeRegistration(p=2, iterations=5, eval_every=5, seed=0)
        est.fit(train, eval_pairs=evals)
        dvfs = est.predict(evals[0])
        assert dvfs.shape == (2, 2, 64, 64)
        warped = est.transform(evals[0])
        assert warped.shape == (2, 1, 64, 64)
        assert np.isfinite(est.score(evals))

    def test_unfitted_predict_raises(self, tiny_pairs):
        _, evals = tiny_pairs
        with pytest.raises(RuntimeError):
            HypervolumeRegistration().predict(evals[0])

    def test_grid_estimator_is_fixed_shape(self):
        est = GridSearchRegistration(iterations=3)
        assert est.p == 27 and est.guidance is True
        assert "iterations" in est.get_params()

    def test_check_pairs_rejects_foreign_objects(self):
        with pytest.raises(TypeError):
            check_pairs([object()])
        with pytest.raises(ValueError):
            check_pairs([])

    def test_fit_returns_self_and_sets_suffixed_attrs(self, tiny_pairs):
        train, evals = tiny_pairs
        est = HypervolumeRegistration(p=1, iterations=2, eval_every=2)
        out = est.fit(train, eval_pairs=evals)
        assert out is est
        assert hasattr(est, "params_") and hasattr(est, "trace_")
        assert est.n_objectives_ == 3
