import numpy as np
import pytest

from tandemgnn import generate_sbm
from tandemgnn.model import ModelConfig, init_params


@pytest.fixture(scope="session")
def toy_graph():
    """12 nodes, 3 blocks, strong structure; small enough for finite
    differences over every parameter."""
    return generate_sbm(
        blocks=3, nodes_per_block=4, p_intra=0.9, q_inter=0.15,
        feature_dim=5, feature_noise=0.5, seed=3,
        train_per_class=2, val_size=2, test_size=4,
    )


@pytest.fixture
def toy_config():
    return ModelConfig(
        num_clusters=6, alpha=0.5, hidden_dim=6, embed_dim=5,
        aux_hidden_dim=6, aux_embed_dim=5,
    )


@pytest.fixture
def toy_params(toy_graph, toy_config):
    return init_params(
        toy_graph.num_features, toy_graph.num_classes, toy_config,
        np.random.default_rng(0),
    )
