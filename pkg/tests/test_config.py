import pytest

from bagselect.config import ExperimentConfig, parse_config_text


class TestParsing:
    def test_dotted_keys_and_json_scalars(self):
        text = """
        # a comment
        representation = "bag"
        train.learning_rate = 0.05
        train.batch = 64
        chain.early_stop = true
        seeds = [0, 1, 2]
        """
        m = parse_config_text(text)
        assert m["representation"] == "bag"
        assert m["train.learning_rate"] == 0.05
        assert m["train.batch"] == 64
        assert m["chain.early_stop"] is True
        assert m["seeds"] == [0, 1, 2]

    def test_malformed_line(self):
        with pytest.raises(ValueError):
            parse_config_text("train.batch 64")

    def test_unquoted_string_falls_back(self):
        # values that fail JSON parsing are kept as bare strings, so
        # `representation = bag` works without quoting
        m = parse_config_text("representation = bag")
        assert m["representation"] == "bag"

    def test_non_numeric_numeric_field_is_a_violation(self):
        cfg = ExperimentConfig.from_mapping({"train.batch": "sixty-four"})
        assert any("train.batch" in p for p in cfg.violations())


class TestExperimentConfig:
    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError, match="unknown config keys"):
            ExperimentConfig.from_mapping({"train.momentum": 0.9})

    def test_round_trip_through_text(self):
        cfg = ExperimentConfig.from_mapping({"representation": "image",
                                             "train.tau": 1.5})
        again = ExperimentConfig.from_mapping(parse_config_text(cfg.to_text()))
        assert again == cfg

    def test_defaults_valid(self):
        assert ExperimentConfig().violations() == []

    def test_violations_reported(self):
        cfg = ExperimentConfig.from_mapping({
            "representation": "video",
            "train.learning_rate": -1,
            "train.tau": 0,
            "chain.generations": 0,
            "metrics.threshold": 2.0,
        })
        problems = "\n".join(cfg.violations())
        assert "representation" in problems
        assert "train.learning_rate" in problems
        assert "train.tau" in problems
        assert "chain.generations" in problems
        assert "metrics.threshold" in problems

    def test_hyper_carries_training_fields(self):
        cfg = ExperimentConfig.from_mapping({"train.learning_rate": 0.05,
                                             "train.tau": 2.5,
                                             "train.clip_norm": 10.0,
                                             "model.hidden": 48})
        h = cfg.hyper()
        assert h.learning_rate == 0.05
        assert h.tau == 2.5
        assert h.clip_norm == 10.0
        assert h.hidden == 48
