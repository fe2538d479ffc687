import json

import numpy as np
import pytest

from meb.core.errors import ConfigError, NonFiniteError, TrainingAborted
from meb.trainloop import supervised
from meb.trainloop.supervised import pretrain_source, train_supervised
from tests.stubs import PublisherStub, tiny_pretrain


def _snapshot(experts):
    return [{k: v.data.copy() for k, v in m.theta.items()} for m in experts]


def test_zero_epochs_only_syncs_the_average(tiny_experts, tiny_domains):
    source, _ = tiny_domains
    for t in tiny_experts[0].theta_avg.values():
        t.data = t.data + 1.0
    before = _snapshot(tiny_experts)
    history = pretrain_source(tiny_experts, source, tiny_pretrain(epochs=0), seed=0)
    assert history == []
    for m, saved in zip(tiny_experts, before):
        for name, value in saved.items():
            np.testing.assert_array_equal(m.theta[name].data, value)
            np.testing.assert_array_equal(m.theta_avg[name].data, value)


def test_each_epoch_publishes_a_record_per_expert(tiny_experts, tiny_domains):
    source, _ = tiny_domains
    before = _snapshot(tiny_experts)
    publisher = PublisherStub()
    history = pretrain_source(tiny_experts, source, tiny_pretrain(), seed=0, publisher=publisher)

    payloads = publisher.payloads()
    assert payloads == history
    assert [(p["expert"], p["epoch"]) for p in payloads] == [
        ("tiny-mlp", 1), ("tiny-mlp", 2), ("tiny-res", 1), ("tiny-res", 2),
    ]
    for record in payloads:
        assert record["stage"] == "pretrain"
        assert set(record["metrics"]) == {"mAP", "cmc1", "cmc5", "cmc10"}
        assert record["losses"]["total"] == pytest.approx(record["losses"]["id"] + record["losses"]["tri"])
    assert not np.array_equal(tiny_experts[0].theta["embed.weight"].data, before[0]["embed.weight"])
    for m in tiny_experts:
        for name in m.theta:
            np.testing.assert_array_equal(m.theta[name].data, m.theta_avg[name].data)


def test_training_is_deterministic(tiny_domains, tiny_experts):
    from meb.experts.model import clone_experts

    source, _ = tiny_domains
    first, second = clone_experts(tiny_experts), clone_experts(tiny_experts)
    a = pretrain_source(first, source, tiny_pretrain(), seed=5)
    b = pretrain_source(second, source, tiny_pretrain(), seed=5)
    assert a == b
    np.testing.assert_array_equal(first[1].theta["embed.weight"].data, second[1].theta["embed.weight"].data)


def test_wrong_domain_is_rejected(tiny_experts, tiny_domains):
    source, target = tiny_domains
    with pytest.raises(ConfigError):
        pretrain_source(tiny_experts, target, tiny_pretrain(), seed=0)
    with pytest.raises(ConfigError):
        train_supervised(tiny_experts, source, tiny_pretrain(), seed=0)


def test_supervised_upper_bound_trains_on_target(tiny_experts, tiny_domains):
    _, target = tiny_domains
    history = train_supervised(tiny_experts, target, tiny_pretrain(epochs=1), seed=0)
    assert {r["stage"] for r in history} == {"supervised"}


def test_non_finite_loss_aborts_with_a_dump(tiny_experts, tiny_domains, tmp_path, monkeypatch):
    source, _ = tiny_domains

    def exploding(*args, **kwargs):
        raise NonFiniteError("tensor <unnamed> holds non-finite values")

    monkeypatch.setattr(supervised, "source_loss", exploding)
    with pytest.raises(TrainingAborted) as exc_info:
        pretrain_source(tiny_experts, source, tiny_pretrain(), seed=0, out_dir=tmp_path)
    dump = json.loads((tmp_path / "abort.json").read_text(encoding="utf-8"))
    assert dump["stage"] == "pretrain"
    assert dump["expert"] == "tiny-mlp"
    assert dump["epoch"] == 1
    assert exc_info.value.dump_path == str(tmp_path / "abort.json")
