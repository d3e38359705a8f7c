import pytest

from config import PRESETS_DIR
from core.errors import ConfigError
from parsers import load_config, parse_config

SWEEP = """
schema_version: 1
experiment: le_sweep
model:
  kind: mbl
  M: 6
  W_grid: [1, 4.5]
sampling:
  n_disorder: 2
  n_traj: 3
"""


def test_sweep_defaults():
    cfg = parse_config(SWEEP)
    assert cfg.experiment_kind == "le_sweep"
    assert cfg.W_values == (1.0, 4.5)
    assert (cfg.model.J, cfg.model.U, cfg.model.gamma) == (1.0, 1.0, 0.1)
    assert cfg.lyapunov.delta0 == 1e-6
    assert cfg.lyapunov.tau == 10.0
    assert cfg.lyapunov.observable_kind == "model_hamiltonian"
    assert cfg.trajectory.dt == 0.01
    assert cfg.output.formats == ("csv", "json")


def test_integrable_defaults():
    cfg = parse_config("""
schema_version: 1
experiment: le_distribution
model: {kind: integrable_b1, M: 4}
""")
    assert cfg.model.gamma == 1.0
    assert cfg.lyapunov.tau == 5.0
    assert cfg.lyapunov.observable_kind == "goe_random"


def test_odd_chain_rejected():
    with pytest.raises(ConfigError) as info:
        parse_config(SWEEP.replace("M: 6", "M: 5"))
    assert any(e.startswith("model.M") for e in info.value.errors)


def test_unknown_key_is_named():
    with pytest.raises(ConfigError) as info:
        parse_config(SWEEP + "  n_traject: 4\n")
    assert "sampling.n_traject: unknown key" in info.value.errors


def test_all_errors_reported_together():
    text = SWEEP.replace("M: 6", "M: 5").replace("n_traj: 3", "n_traj: -1") + "extra: 1\n"
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert len(info.value.errors) == 3
    assert "extra: unknown key" in str(info.value)


def test_yaml_syntax_error_has_location():
    with pytest.raises(ConfigError) as info:
        parse_config("schema_version: 1\nmodel: [unclosed\n")
    assert "line" in info.value.errors[0]


def test_tau_must_be_multiple_of_dt():
    with pytest.raises(ConfigError) as info:
        parse_config(SWEEP + "lyapunov:\n  tau: 0.125\n")
    assert any(e.startswith("lyapunov.tau") for e in info.value.errors)


def test_bisect_tol_is_optional():
    assert parse_config(SWEEP).lyapunov.bisect_tol is None
    cfg = parse_config(SWEEP + "lyapunov:\n  bisect_tol: 1.0e-8\n")
    assert cfg.lyapunov.bisect_tol == 1e-8
    assert cfg.config_hash() != parse_config(SWEEP).config_hash()
    with pytest.raises(ConfigError) as info:
        parse_config(SWEEP + "lyapunov:\n  delta0: 1.0e-6\n  bisect_tol: 1.0e-5\n")
    assert any(e.startswith("lyapunov.bisect_tol") for e in info.value.errors)


def test_integrable_rejects_model_hamiltonian_observable():
    with pytest.raises(ConfigError):
        parse_config("""
schema_version: 1
experiment: le_distribution
model: {kind: integrable_b1, M: 4}
lyapunov: {observable_kind: model_hamiltonian}
""")


def test_superoperator_budget_checked_up_front():
    with pytest.raises(ConfigError):
        parse_config("schema_version: 1\nexperiment: csr_experiment\nmodel: {kind: integrable_b1, M: 7}\n")


def test_unraveling_check_needs_trajectories():
    with pytest.raises(ConfigError):
        parse_config("schema_version: 1\nexperiment: unraveling_check\nmodel: {kind: mbl, M: 4}\n")


def test_wrong_schema_version():
    with pytest.raises(ConfigError):
        parse_config(SWEEP.replace("schema_version: 1", "schema_version: 2"))


def test_hash_and_overrides():
    cfg = parse_config(SWEEP)
    assert cfg.config_hash() == parse_config(SWEEP).config_hash()
    other = cfg.with_overrides(master_seed=5, out_dir="elsewhere")
    assert other.sampling.master_seed == 5
    assert other.output.directory == "elsewhere"
    assert other.config_hash() != cfg.config_hash()


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        load_config(PRESETS_DIR / "does_not_exist.yaml")


@pytest.mark.parametrize("path", sorted(PRESETS_DIR.glob("*.yaml")), ids=lambda p: p.stem)
def test_presets_are_valid(path):
    assert load_config(path).experiment_kind
