import pytest

from meb.data.generator import generate
from meb.data.records import label_index
from meb.experts.model import build_experts
from tests.stubs import TINY_CONFIG_TOML, tiny_architectures, tiny_generator


@pytest.fixture
def tiny_domains():
    return generate(tiny_generator())


@pytest.fixture
def tiny_experts(tiny_domains):
    source, _ = tiny_domains
    _, classes = label_index(source.train.identities)
    return build_experts(tiny_architectures(), seed=11, input_dim=source.input_dim, num_source_classes=classes.size)


@pytest.fixture
def tiny_config_path(tmp_path):
    path = tmp_path / "tiny.toml"
    path.write_text(TINY_CONFIG_TOML, encoding="utf-8")
    return path
