import math

import pytest

from sshmc.config import MODELS, parse_config, parse_override, preset, render_config
from sshmc.errors import ConfigError


def _minimal(model, sampler="sshmc", extra=""):
    return f"[experiment]\nmodel = {model}\nsampler = {sampler}\n{extra}"


def test_funnel_preset_step_counts():
    cfg = parse_config(_minimal("funnel"))
    abla = cfg.sampler_config().abla
    assert (abla.steps_theta, abla.steps_phi) == (2, 1)
    assert abla.eps_phi == pytest.approx(abla.eps_theta / math.sqrt(100 + 1 / 9))


def test_sv_preset_step_counts():
    abla = parse_config(_minimal("sv")).sampler_config().abla
    assert (abla.steps_theta, abla.steps_phi) == (5, 2)


def test_lgcpp_preset_alba_steps():
    abla = parse_config(_minimal("lgcpp")).sampler_config().abla
    assert (abla.steps_theta, abla.steps_phi, abla.alba_steps) == (2, 1, 10)


def test_protocol_defaults():
    cfg = parse_config(_minimal("funnel"))
    sc = cfg.sampler_config()
    assert (sc.n_iter, sc.burn_in, sc.thin, sc.retained) == (6000, 1000, 1, 5000)
    assert parse_config(_minimal("lgcpp")).sampler_config().retained == 2000


@pytest.mark.parametrize("model", MODELS)
@pytest.mark.parametrize("sampler", ["sshmc", "hmc", "hmc-gibbs"])
def test_every_preset_builds(model, sampler):
    cfg = parse_config(_minimal(model, sampler))
    assert cfg.sampler_config().kind == sampler


def test_unknown_key_is_named_with_line():
    with pytest.raises(ConfigError, match=r"unknown key sshmc\.eps_thta \(line 5\)"):
        parse_config(_minimal("funnel", extra="[sshmc]\neps_thta = 0.1\n"))


def test_unknown_section_and_all_problems_listed():
    text = _minimal("funnel", extra="[nuts]\nx = 1\n[sshmc]\nbogus = 1\nsteps_theta = two\n")
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    msg = str(info.value)
    assert "unknown section [nuts]" in msg
    assert "sshmc.bogus" in msg
    assert "sshmc.steps_theta" in msg


def test_missing_or_bad_model():
    with pytest.raises(ConfigError, match="experiment.model is required"):
        parse_config("[experiment]\nsampler = hmc\n")
    with pytest.raises(ConfigError, match="must be one of"):
        parse_config(_minimal("ising"))


def test_syntax_error():
    with pytest.raises(ConfigError, match="parse error"):
        parse_config("model = funnel\n")


@pytest.mark.parametrize(
    "extra",
    [
        "n_iter = 100\nburn_in = 100\n",
        "thin = 0\n",
        "seed = -3\n",
        "histogram_bins = 1\n",
        "sampler = nuts\n",
    ],
)
def test_validation_errors(extra):
    text = "[experiment]\nmodel = funnel\n" + ("sampler = sshmc\n" if "sampler" not in extra else "") + extra
    with pytest.raises(ConfigError):
        parse_config(text)


def test_model_value_validation():
    with pytest.raises(ConfigError):
        parse_config(_minimal("sv", extra="[model]\nphi_ar = 1.5\n"))
    with pytest.raises(ConfigError):
        parse_config(_minimal("lgcpp", extra="[model]\nd = 1\n"))


@pytest.mark.parametrize("model", MODELS)
def test_round_trip(model):
    cfg = parse_config(_minimal(model, extra="seed = 17\n[sshmc]\neps_theta = 0.123\n"))
    again = parse_config(render_config(cfg))
    assert again == cfg
    assert again.digest() == cfg.digest()


def test_overrides_apply_and_change_digest():
    base = parse_config(_minimal("funnel"))
    cfg = parse_config(_minimal("funnel"), overrides=["experiment.seed=5", "hmc.steps=10"])
    assert cfg.experiment["seed"] == 5
    assert cfg.sections["hmc"]["steps"] == 10
    assert cfg.digest() != base.digest()
    assert base.with_overrides(["experiment.seed=5", "hmc.steps=10"]) == cfg


@pytest.mark.parametrize("bad", ["seed=5", "experiment.seed", ".=1"])
def test_override_syntax(bad):
    with pytest.raises(ConfigError):
        parse_config(_minimal("funnel"), overrides=[bad])


def test_parse_override_splits_on_last_dot():
    assert parse_override("hmc-gibbs.eps_phi = 0.2") == ("hmc-gibbs", "eps_phi", "0.2")


def test_optional_values():
    cfg = parse_config(_minimal("lgcpp", extra="[model]\nmu = none\n"))
    assert cfg.model_params["mu"] is None
    cfg = parse_config(_minimal("funnel", "hmc", extra="[hmc]\nmass_diag = none\n"))
    assert cfg.sampler_config().hmc_mass_diag is None


def test_preset_rejects_unknown_model():
    with pytest.raises(ConfigError):
        preset("ising")


def test_funnel_eps_phi_follows_n():
    cfg = parse_config(_minimal("funnel", extra="[model]\nn = 10\n"))
    assert cfg.sections["sshmc"]["eps_phi"] == pytest.approx(0.1 / math.sqrt(10 + 1 / 9))
