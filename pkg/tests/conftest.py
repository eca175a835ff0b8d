import numpy as np
import pytest

from envcontours.decluster import DeclusterConfig, decluster
from envcontours.ingest import generate_synthetic_dataset
from envcontours.pipeline import default_synthesis_config, default_synthetic_params
from envcontours import dependence as dep


@pytest.fixture(scope="session")
def small_dataset():
    """Three years of hourly synthetic data, shared across read-only tests."""
    cfg = default_synthesis_config(3.0)
    return generate_synthetic_dataset(cfg, 42)


@pytest.fixture(scope="session")
def small_events(small_dataset):
    return decluster(small_dataset, "hs", DeclusterConfig())


@pytest.fixture(scope="session")
def small_margins(small_dataset, small_events):
    variables = ["hs", "ws", "cs"]
    ref = {
        v: small_dataset.columns[v][np.isfinite(small_dataset.columns[v])]
        for v in variables
    }
    return dep.fit_margins(small_events, variables, threshold_quantile=0.99, reference=ref)


@pytest.fixture(scope="session")
def params():
    return default_synthetic_params()
