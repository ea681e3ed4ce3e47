import pytest

from hazgate.campaign import SOUNDNESS_REQUIREMENTS, run_random_campaign
from hazgate.datafiles import data_path
from hazgate.executive import ExecConfig
from hazgate.model import load_model


@pytest.fixture(scope="module")
def mammobot():
    return load_model(data_path("mammobot.proc"))


@pytest.fixture(scope="module")
def config():
    return ExecConfig.load(data_path("exec_config.json"))


class TestCampaign:
    def test_single_scenario(self, mammobot, config):
        report = run_random_campaign(mammobot, config, 1, seed=1)
        assert report.n == 1
        assert sum(report.outcomes.values()) == 1

    def test_n_zero_rejected(self, mammobot, config):
        with pytest.raises(ValueError):
            run_random_campaign(mammobot, config, 0, seed=1)

    def test_same_seed_identical_reports(self, mammobot, config):
        first = run_random_campaign(mammobot, config, 300, seed=99)
        second = run_random_campaign(mammobot, config, 300, seed=99)
        assert first.to_json() == second.to_json()

    def test_different_seeds_differ(self, mammobot, config):
        first = run_random_campaign(mammobot, config, 300, seed=1)
        second = run_random_campaign(mammobot, config, 300, seed=2)
        assert first.to_json() != second.to_json()

    def test_protected_campaign_is_sound(self, mammobot, config):
        report = run_random_campaign(mammobot, config, 1500, seed=7)
        assert report.violated_count(SOUNDNESS_REQUIREMENTS) == 0, report.violations[:5]
        assert report.injections_applied > 0

    def test_unprotected_campaign_finds_hazards(self, mammobot, config):
        report = run_random_campaign(mammobot, config, 300, seed=7,
                                     executive_enabled=False)
        assert report.violated_count() > 0
        assert report.outcomes.get("Violation", 0) > 0

    def test_soundness_set(self):
        assert SOUNDNESS_REQUIREMENTS == ("R14", "R20", "R21", "R23", "R24", "R25")
