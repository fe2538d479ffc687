import json

import pytest

from meb.core.errors import ConfigError
from meb.schemas.enums import Ablation, variant_name
from meb.schemas.experiment import ExperimentConfig, SweepConfig, load_experiment_config


def test_tiny_config_loads(tiny_config_path):
    cfg = load_experiment_config(tiny_config_path)
    assert cfg.seed == 3
    assert [a.name for a in cfg.experts] == ["tiny-mlp", "tiny-res"]
    assert cfg.adapt.cluster.iters == 5
    assert cfg.sweep.variant_names == ["full", "voting_only"]


def test_shipped_configs_load():
    desk = load_experiment_config("configs/desk.toml")
    assert desk.adapt.epochs == 25
    assert desk.adapt.iterations_per_epoch == 50
    assert desk.adapt.num_clusters == 20
    full = load_experiment_config("configs/full.toml")
    assert full.adapt.iterations_per_epoch == 800
    assert len(desk.sweep.variants) == 8


def test_unknown_toml_key_names_its_line(tmp_path, tiny_config_path):
    text = tiny_config_path.read_text(encoding="utf-8").replace("alpha = 0.9", "alpha = 0.9\nbogus = 1")
    path = tmp_path / "bad.toml"
    path.write_text(text, encoding="utf-8")
    line = text.splitlines().index("bogus = 1") + 1
    with pytest.raises(ConfigError) as exc_info:
        load_experiment_config(path)
    assert f"{path}:{line}: unknown key 'adapt.bogus'" in exc_info.value.detail


def test_unknown_json_key_names_its_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"seed": 1, "pretrain": {"epochs": 2, "speed": 3}}, indent=2), encoding="utf-8")
    with pytest.raises(ConfigError) as exc_info:
        load_experiment_config(path)
    assert f"{path}:5: unknown key 'pretrain.speed'" in exc_info.value.detail


def test_invalid_value_is_reported(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[adapt]\nalpha = 2.0\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="adapt.alpha"):
        load_experiment_config(path)


def test_missing_file_is_a_config_error(tmp_path):
    with pytest.raises(ConfigError, match="does not exist"):
        load_experiment_config(tmp_path / "absent.toml")


def test_variants_accept_names_and_flag_lists():
    sweep = SweepConfig(variants=["full", "no_ema+no_ar", ["voting_only"]])
    assert sweep.variants == [[], [Ablation.NO_EMA, Ablation.NO_AR], [Ablation.VOTING_ONLY]]
    assert sweep.variant_names == ["full", "no_ar+no_ema", "voting_only"]
    with pytest.raises(ValueError):
        SweepConfig(variants=["no_such_thing"])


def test_variant_name_is_order_independent():
    assert variant_name([Ablation.NO_MID, Ablation.NO_EMA]) == variant_name(["no_ema", "no_mid"]) == "no_ema+no_mid"
    assert variant_name([]) == "full"


def test_seed_override_reaches_every_stage():
    cfg = ExperimentConfig().with_seed(9)
    assert cfg.generator.seed == 9
    assert cfg.stage_seed("pretrain") != cfg.stage_seed("adapt")
    assert cfg.stage_seed("adapt") == ExperimentConfig(seed=9).stage_seed("adapt")


def test_a_single_expert_is_rejected():
    with pytest.raises(ValueError):
        ExperimentConfig(experts=ExperimentConfig().experts[:1])
