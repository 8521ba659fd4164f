import pytest

from uep_trainer.training import TrainConfig, train


@pytest.fixture(scope="session")
def tiny_bundle(tmp_path_factory):
    """A deliberately under-trained bundle for wiring tests (seconds, not minutes)."""
    cfg = TrainConfig(
        dataset="mnist",
        data_source="synthetic",
        epochs=1,
        train_samples=1280,
        test_samples=128,
        seed=1,
    )
    bundle = train(cfg)
    path = tmp_path_factory.mktemp("bundle") / "tiny"
    bundle.save(path)
    return bundle, path
