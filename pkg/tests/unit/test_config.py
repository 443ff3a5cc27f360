"""
Tests for experiment configuration files, overrides and experiment defaults.
"""

import click
import pytest

from kawlab.common.errors import ConfigError
from kawlab.common.models import ExperimentConfig
from kawlab.cli.config import apply_overrides, dump_config, load_config, parse_sections, read_config
from kawlab.cli.experiments import EXPERIMENTS, get_experiment, resolve_params, with_defaults

SAMPLE = """\
# tumour run
[experiment]
name = tumor-demo
seed = 3

[operator]
kind = fourier
r = 7
budgets = 1, 1, 2, 4, 8, 8, 12

[adam]
lr = 0.01

[params]
width = 8
eta = 1e-5
network = plateau
"""


class TestParsing:

    def test_sections_keep_line_numbers(self):
        sections = parse_sections(SAMPLE)
        assert sections["experiment"]["seed"] == ("3", 4)
        assert sections["params"]["network"][0] == "plateau"

    def test_load(self):
        cfg = load_config(SAMPLE)
        assert cfg.experiment == "tumor-demo"
        assert cfg.seed == 3
        assert cfg.operator.kind == "fourier"
        assert cfg.operator.budgets == [1, 1, 2, 4, 8, 8, 12]
        assert cfg.train.adam.lr == 0.01
        assert cfg.params == {"width": 8, "eta": 1e-5, "network": "plateau"}

    def test_dump_round_trip(self):
        cfg = load_config(SAMPLE)
        assert load_config(dump_config(cfg)).model_dump() == cfg.model_dump()

    def test_name_from_argument(self):
        assert load_config("[operator]\nr = 4\n", experiment="coherence").experiment == "coherence"

    def test_missing_name(self):
        with pytest.raises(ConfigError):
            load_config("[operator]\nr = 4\n")

    @pytest.mark.parametrize("text, line", [
        ("[experiment]\nname = x\n[bogus]\na = 1\n", 4),
        ("[experiment]\nname = x\ncolour = red\n", 3),
        ("[experiment]\nname = x\n[operator]\nr = 40\n", 4),
        ("[experiment]\nname = x\n[operator]\nkind = radon\n", 4),
        ("[experiment]\nname = x\nnot a pair\n", 3),
        ("[experiment]\nname = x\n[adam]\nbeta1 = 2\n", 4),
    ])
    def test_errors_name_the_line(self, text, line):
        with pytest.raises(ConfigError, match=f"^line {line}: "):
            load_config(text)

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_sections("[a]\nk = 1\nk = 2\n")

    def test_budgets_and_omega_conflict(self):
        with pytest.raises(ConfigError):
            load_config("[experiment]\nname = x\n[operator]\nbudgets = 1 1\nomega = 1 2\n")

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(ConfigError):
            read_config(tmp_path / "missing.cfg")


class TestOverrides:

    def test_command_line_wins(self):
        cfg = apply_overrides(load_config(SAMPLE), seed=9, out="elsewhere", params=("width=4",), r=6)
        assert cfg.seed == 9
        assert cfg.output.directory == "elsewhere"
        assert cfg.params["width"] == 4
        assert cfg.operator.r == 6
        assert cfg.operator.kind == "fourier"

    def test_no_overrides_returns_same(self):
        cfg = load_config(SAMPLE)
        assert apply_overrides(cfg) is cfg

    def test_bad_set_item(self):
        with pytest.raises(click.BadParameter):
            apply_overrides(load_config(SAMPLE), params=("width",))

    def test_bad_kind(self):
        with pytest.raises(click.BadParameter):
            apply_overrides(load_config(SAMPLE), kind="radon")


class TestExperimentDefaults:

    def test_registry(self):
        assert "tumor-demo" in EXPERIMENTS
        assert "thm-demo dl-vs-cs" in EXPERIMENTS
        assert len(EXPERIMENTS) >= 10

    def test_unknown_experiment(self):
        with pytest.raises(ConfigError):
            get_experiment("fourier-party")

    def test_defaults_fill_unset_fields(self):
        experiment = get_experiment("coherence")
        cfg = with_defaults(ExperimentConfig(experiment="coherence"), experiment)
        assert cfg.operator.kind == "walsh"
        assert cfg.operator.r == 5

    def test_explicit_values_beat_defaults(self):
        experiment = get_experiment("coherence")
        base = load_config("[experiment]\nname = coherence\n[operator]\nkind = fourier\n")
        assert with_defaults(base, experiment).operator.kind == "fourier"

    def test_resizing_drops_per_level_defaults(self):
        experiment = get_experiment("tumor-demo")
        base = load_config("[experiment]\nname = tumor-demo\n[operator]\nr = 5\n")
        cfg = with_defaults(base, experiment)
        assert cfg.operator.r == 5
        assert cfg.operator.budgets is None

    def test_params_are_coerced(self):
        experiment = get_experiment("coherence")
        params = resolve_params(ExperimentConfig(experiment="coherence", params={"decay_limit": 3}), experiment)
        assert params["decay_limit"] == 3.0
        assert isinstance(params["decay_limit"], float)

    def test_unknown_param(self):
        experiment = get_experiment("coherence")
        with pytest.raises(ConfigError, match="unknown parameter"):
            resolve_params(ExperimentConfig(experiment="coherence", params={"speed": 1}), experiment)

    def test_param_type_checked(self):
        experiment = get_experiment("transforms-check")
        with pytest.raises(ConfigError):
            resolve_params(ExperimentConfig(experiment="transforms-check", params={"max_r": "big"}), experiment)
