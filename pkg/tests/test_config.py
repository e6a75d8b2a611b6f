import copy
import json

import pytest

from pbnn.config import (
    DEFAULTS,
    ConfigError,
    build_arch,
    build_chain,
    build_pendulum,
    build_plan,
    build_prior,
    config_hash,
    load_config,
)


class TestLoadConfig:
    def test_defaults_pass_validation_and_are_not_mutated(self):
        before = copy.deepcopy(DEFAULTS)
        cfg = load_config()
        assert cfg == DEFAULTS
        assert cfg is not DEFAULTS
        assert DEFAULTS == before

    def test_file_overrides_merge_into_defaults(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps({"chain": {"n_steps": 500_000}, "seed": 7}))
        cfg = load_config(p)
        assert cfg["chain"]["n_steps"] == 500_000
        assert cfg["chain"]["burn_in"] == DEFAULTS["chain"]["burn_in"]
        assert cfg["seed"] == 7

    def test_unknown_file_key_is_rejected_with_its_path(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps({"chain": {"n_step": 5000}}))
        with pytest.raises(ConfigError, match="chain.n_step"):
            load_config(p)

    def test_missing_file_is_a_config_error(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "absent.json")

    def test_malformed_json_is_a_config_error(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text("{not json")
        with pytest.raises(ConfigError, match="JSON"):
            load_config(p)

    def test_non_object_root_is_rejected(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text("[1, 2]")
        with pytest.raises(ConfigError, match="object"):
            load_config(p)

    def test_dotted_overrides(self):
        cfg = load_config(None, {"plan.batch_size": 15, "sampler": "sgld"})
        assert cfg["plan"]["batch_size"] == 15
        assert cfg["sampler"] == "sgld"

    def test_none_overrides_are_skipped(self):
        cfg = load_config(None, {"plan.batch_size": None})
        assert cfg["plan"]["batch_size"] == DEFAULTS["plan"]["batch_size"]

    def test_unknown_dotted_override_is_rejected(self):
        with pytest.raises(ConfigError, match="plan.size"):
            load_config(None, {"plan.size": 3})

    def test_flag_overrides_win_over_the_file(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps({"seed": 5}))
        assert load_config(p, {"seed": 9})["seed"] == 9


class TestConfigHash:
    def test_stable_across_key_order(self):
        cfg = load_config()
        reordered = json.loads(json.dumps(cfg, sort_keys=True))
        assert config_hash(cfg) == config_hash(reordered)

    def test_twelve_hex_digits(self):
        h = config_hash(load_config())
        assert len(h) == 12
        int(h, 16)

    def test_sensitive_to_any_value(self):
        a = load_config()
        b = load_config(None, {"seed": 1})
        assert config_hash(a) != config_hash(b)


class TestTypedViews:
    def test_pendulum_observation_count_round_trips(self):
        cfg = load_config()
        params, state = build_pendulum(cfg)
        assert params.n_obs == cfg["data"]["n_obs"] == 9999
        assert params.n_steps == (9999 - 1) * 10
        assert state.phi1 == 2.0 and state.phi2 == 2.5

    def test_pendulum_requires_two_observations(self):
        cfg = load_config()
        cfg["data"]["n_obs"] = 1
        with pytest.raises(ConfigError):
            build_pendulum(cfg)

    def test_arch_width_follows_the_lag_count(self):
        cfg = load_config(None, {"data.lags": [1, 2, 3]})
        arch = build_arch(cfg)
        assert arch.input_dim == 12
        assert arch.hidden == (10, 10)
        assert arch.output_dim == 4

    def test_prior_and_plan(self):
        cfg = load_config()
        assert build_prior(cfg).lam == 1e-5
        plan = build_plan(cfg, batch_size=30)
        assert plan.batch_size == 30
        assert plan.num_batches == 100

    def test_chain_for_noisy_samplers_uses_the_batch_as_its_own_scale(self):
        cfg = load_config()
        chain = build_chain(cfg, "pbnn", seed=3, step=0.02, batch_size=15)
        assert chain.target_n == 15
        assert chain.proposal.step == 0.02
        assert chain.seed == 3
        assert chain.plan.batch_size == 15

    def test_chain_for_tempered_keeps_the_configured_target(self):
        cfg = load_config()
        chain = build_chain(cfg, "tempered", seed=0)
        assert chain.target_n == 60
        # no tuned or configured step: a small placeholder is used
        assert chain.proposal.step == 0.05


class TestValidation:
    @pytest.mark.parametrize(
        "override",
        [
            {"sampler": "hmc"},
            {"workers": 0},
            {"data.lags": []},
            {"data.lags": [3, 1]},
            {"data.n_train": 0},
            {"chain.thin": 0},
            {"chain.n_steps": 10, "chain.burn_in": 50},
            {"plan.num_batches": 1},
            {"prior.lam": 0.0},
            {"proposal.kind": "cauchy"},
            {"tune.target": 1.5},
            {"pretrain.lr": 0.0},
            {"benchmark.seeds": []},
            {"benchmark.samplers": ["pbnn", "nuts"]},
            {"sweep.batch_sizes": []},
            {"sweep.batch_sizes": [0]},
        ],
    )
    def test_bad_values_raise_config_error(self, override):
        with pytest.raises(ConfigError):
            load_config(None, override)
