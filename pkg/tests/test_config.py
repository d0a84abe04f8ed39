import pytest

from mpsdetect.config import Config, dump_config, load_config


class TestConfig:
    def test_defaults_round_trip(self, tmp_path):
        cfg = Config()
        path = tmp_path / "cfg.txt"
        path.write_text(dump_config(cfg))
        assert load_config(path) == cfg

    def test_override_and_hash(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("cluster.max_cluster_size = 7\ndecide.utility_threshold = 1.2\n")
        cfg = load_config(path)
        assert cfg.cluster.max_cluster_size == 7
        assert cfg.decide.utility_threshold == 1.2
        assert cfg.config_hash() != Config().config_hash()

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("cluster.max_size = 7\n")
        with pytest.raises(ValueError, match="unknown config key"):
            load_config(path)

    def test_comments_and_blanks(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("# a comment\n\nroi.max_events = 30  # inline\n")
        assert load_config(path).roi.max_events == 30

    def test_bool_parsing(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("verify.single_precision = false\n")
        assert load_config(path).verify.single_precision is False

    def test_bad_value(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("roi.max_events = many\n")
        with pytest.raises(ValueError):
            load_config(path)

    def test_hash_stable_across_instances(self):
        assert Config().config_hash() == Config().config_hash()

    def test_paper_constants_present(self):
        cfg = Config()
        assert cfg.cluster.ici_min_s == 0.4
        assert cfg.cluster.ici_max_s == 2.0
        assert cfg.cluster.consistency_max == 0.15
        assert cfg.cluster.max_cluster_size == 25
        assert cfg.roi.snr_threshold_db == 23.0
        assert cfg.roi.max_events == 45
        assert cfg.verify.mps_max_s == 0.040
        assert cfg.ingest.buffer_len_s == 10.0
