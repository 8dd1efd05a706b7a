"""Shared fixtures.

The expensive artifacts (the 5,000-row dataset, the fully trained default
classifier, its retrieval index) are session-scoped and built once; the
trained-model fixture also records its wall-clock training time so the
runtime gate can assert on it without retraining.
"""

from __future__ import annotations

import time

import pytest

from helpsys import datagen, harness, models, retrieval, textnorm
from helpsys.models import ModelKind, TrainConfig
from helpsys.pos_mapper import load_responses

DATA_SEED = 0
DATASET_SIZE = 5000


@pytest.fixture(scope="session")
def desk_dataset():
    return datagen.generate_dataset(datagen.desk_templates(), DATASET_SIZE, seed=DATA_SEED)


@pytest.fixture(scope="session")
def desk_split(desk_dataset):
    return harness.split_dataset(desk_dataset, seed=DATA_SEED)


@pytest.fixture(scope="session")
def desk_cfg():
    return TrainConfig()


@pytest.fixture(scope="session")
def trained_run(desk_split, desk_cfg):
    """(model, history, train_seconds) for the default classifier."""
    start = time.perf_counter()
    model, history = models.train(
        list(desk_split.train), list(desk_split.validation), ModelKind.C_BILSTM, desk_cfg
    )
    seconds = time.perf_counter() - start
    return model, history, seconds


@pytest.fixture(scope="session")
def trained_model(trained_run):
    return trained_run[0]


@pytest.fixture(scope="session")
def query_index(trained_model, desk_split):
    return harness.build_query_index(trained_model, desk_split.train)


@pytest.fixture(scope="session")
def responses():
    return load_responses()


@pytest.fixture(scope="session")
def artifacts_dir(tmp_path_factory, trained_model, query_index, responses):
    """Model checkpoint and index written to disk, as the CLI/service use them."""
    path = tmp_path_factory.mktemp("artifacts")
    models.save_model(trained_model, str(path / "model.ckpt"))
    retrieval.save_index(query_index, responses, str(path / "queries.idx"))
    return path


@pytest.fixture(scope="session")
def pipeline(artifacts_dir):
    return harness.load_pipeline(
        str(artifacts_dir / "model.ckpt"), str(artifacts_dir / "queries.idx")
    )


# --- small fixtures for unit tests ---


@pytest.fixture(scope="session")
def mini_cfg():
    return TrainConfig(
        maxlen=6,
        embed_dim=4,
        trigram_buckets=16,
        filter_count=3,
        filter_len=2,
        pool_width=2,
        pool_stride=2,
        hidden=3,
        seed=7,
    )


@pytest.fixture(scope="session")
def mini_norm():
    return textnorm.default_config(maxlen=6)


@pytest.fixture(scope="session")
def norm_cfg():
    return textnorm.default_config()
