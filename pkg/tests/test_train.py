import numpy as np
import pytest

from fidilab import (
    Adam,
    ConfigError,
    NumericError,
    SgdMomentum,
    SynthConfig,
    TrainConfig,
    generate_synthetic,
    load_history,
    save_history,
    train,
)
from fidilab.train import TrainingDiverged, make_optimizer

EASY = SynthConfig(num_identity_pairs=8, samples_per_identity=10, feature_dim=8,
                   pair_separation=4.0, intra_noise=0.15, camera_count=2,
                   camera_offset_scale=0.0, seed=77)


def test_sgd_hand_update():
    params = {"p": np.array([1.0])}
    opt = SgdMomentum(lr=0.1, momentum=0.0)
    opt.step(params, {"p": np.array([2.0])})
    assert abs(params["p"][0] - 0.8) < 1e-15


def test_zero_gradient_leaves_params_unchanged():
    for opt in (SgdMomentum(lr=0.5), Adam(lr=0.5)):
        params = {"p": np.array([3.0, -1.0])}
        opt.step(params, {"p": np.zeros(2)})
        assert np.array_equal(params["p"], np.array([3.0, -1.0]))


def test_adam_first_step_magnitude_is_lr():
    # bias correction makes the first step ~lr regardless of gradient scale
    for scale in (1e-3, 1.0, 1e6):
        params = {"p": np.array([0.0])}
        opt = Adam(lr=0.01)
        opt.step(params, {"p": np.array([scale])})
        assert abs(abs(params["p"][0]) - 0.01) < 1e-4


def test_sgd_momentum_accumulates():
    params = {"p": np.array([0.0])}
    opt = SgdMomentum(lr=1.0, momentum=0.5)
    opt.step(params, {"p": np.array([1.0])})   # v=1, p=-1
    opt.step(params, {"p": np.array([1.0])})   # v=1.5, p=-2.5
    assert abs(params["p"][0] + 2.5) < 1e-15


def test_optimizer_rejects_non_finite_gradient():
    for opt in (SgdMomentum(lr=0.1), Adam(lr=0.1)):
        with pytest.raises(NumericError, match="w0"):
            opt.step({"w0": np.ones(2)}, {"w0": np.array([1.0, np.nan])})


def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(iterations=0)
    with pytest.raises(ConfigError):
        TrainConfig(learning_rate=0.0)
    with pytest.raises(ConfigError):
        TrainConfig(loss_kind="center")
    with pytest.raises(ConfigError):
        TrainConfig(optimizer="lbfgs")


def test_history_length_matches_iterations():
    data = generate_synthetic(EASY)
    cfg = TrainConfig(iterations=1, p_identities=4, k_instances=4,
                      hidden_dims=(8,), embed_dim=4, seed=3)
    _, hist = train(data, cfg)
    assert len(hist) == 1


def test_train_is_bit_deterministic():
    data = generate_synthetic(EASY)
    cfg = TrainConfig(iterations=40, p_identities=4, k_instances=4,
                      hidden_dims=(8,), embed_dim=4, seed=5)
    m1, h1 = train(data, cfg)
    m2, h2 = train(data, cfg)
    for k in m1.params:
        assert np.array_equal(m1.params[k], m2.params[k])
    assert h1.metric_loss == h2.metric_loss
    assert h1.total == h2.total


def test_every_loss_kind_descends_on_easy_data():
    data = generate_synthetic(EASY)
    for kind in ("fidi", "btl", "tl", "bcl", "cl"):
        cfg = TrainConfig(loss_kind=kind, iterations=500, p_identities=6,
                          k_instances=6, hidden_dims=(16,), embed_dim=8, seed=2)
        _, hist = train(data, cfg)
        start = float(np.mean(hist.metric_loss[:50]))
        end = float(np.mean(hist.metric_loss[-50:]))
        assert end < start, f"{kind}: {start} -> {end}"


@pytest.mark.filterwarnings("ignore:overflow:RuntimeWarning")
@pytest.mark.filterwarnings("ignore:invalid value:RuntimeWarning")
def test_training_divergence_aborts_with_iteration():
    data = generate_synthetic(EASY)
    cfg = TrainConfig(optimizer="sgd_momentum", learning_rate=1e12,
                      iterations=200, p_identities=4, k_instances=4,
                      hidden_dims=(8,), embed_dim=4, seed=1)
    with pytest.raises(TrainingDiverged) as exc_info:
        train(data, cfg)
    assert 0 <= exc_info.value.iteration < 200


def test_history_csv_round_trip(tmp_path):
    data = generate_synthetic(EASY)
    cfg = TrainConfig(iterations=5, p_identities=4, k_instances=4,
                      hidden_dims=(8,), embed_dim=4, seed=3)
    _, hist = train(data, cfg)
    path = tmp_path / "history.csv"
    save_history(hist, path)
    assert path.read_text().splitlines()[0] == "iter,metric_loss,cls_loss,total"
    loaded = load_history(path)
    assert loaded.iteration == hist.iteration
    assert loaded.metric_loss == hist.metric_loss
    assert loaded.total == hist.total


def test_make_optimizer_dispatch():
    assert isinstance(make_optimizer(TrainConfig(optimizer="adam")), Adam)
    assert isinstance(make_optimizer(TrainConfig(optimizer="sgd_momentum")),
                      SgdMomentum)
