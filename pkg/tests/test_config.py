import math

import numpy as np
import pytest

from stochch.config import InitialCondition, load_config, parse_config
from stochch.errors import ConfigurationError
from stochch.spectral import build_space

MINIMAL = """
galerkin.N = [8, 16]
galerkin.N_ref = 64
time.dt = 1e-4
time.T = 0.1
diffusion.kind = "sublinear"
diffusion.sigma = 0.5
diffusion.alpha = 0.5
"""


def test_minimal_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.Ns == [8, 16] and cfg.N_ref == 64
    assert cfg.mg_factor == 4
    assert cfg.K == 4 * 64
    assert cfg.scheme.scheme == "exp_euler"
    assert cfg.L == pytest.approx(math.pi)
    assert cfg.potential.derivative == (0.0, -1.0, 0.0, 1.0)
    assert cfg.seed == 0
    assert cfg.stiffness == pytest.approx(1e-4 * 64 ** 4)


def test_single_N_and_no_reference():
    cfg = parse_config(MINIMAL.replace("galerkin.N = [8, 16]", "galerkin.N = 32").replace(
        "galerkin.N_ref = 64", ""))
    assert cfg.Ns == [32] and cfg.N_ref is None and cfg.K == 128


def test_section_tables_are_equivalent_to_dotted_keys():
    text = """
    [galerkin]
    N = [8, 16]
    N_ref = 64
    [time]
    dt = 1e-4
    T = 0.1
    [diffusion]
    kind = "sublinear"
    sigma = 0.5
    alpha = 0.5
    """
    assert parse_config(text).config_hash() == parse_config(MINIMAL).config_hash()


@pytest.mark.parametrize("line,match", [
    ("diffusion.alpha = 1.0", r"alpha must lie in \[0,1\)"),
    ("galerkin.N_ref = 16", "galerkin.N_ref.*galerkin.N"),
    ("galerkin.Nref = 16", "unknown config key galerkin.Nref"),
    ("tiem.dt = 1", "unknown config section"),
    ("colour = 1", "unknown config key"),
    ("galerkin.mg_factor = 2", "3N"),
    ("galerkin.K = 32", "galerkin.K"),
    ("time.scheme = 'rk4'", "time.scheme"),
    ("experiment.norm = 'L7'", "experiment.norm"),
    ("experiment.quantities = ['sup-X-2']", "quantity"),
    ("experiment.gammas = [2.5]", "gammas"),
    ("seed = -3", "seed"),
    ("galerkin.N = [16, 8]", "increasing"),
])
def test_invalid_configs(line, match):
    key = line.split("=")[0].strip()
    lines = [ln for ln in MINIMAL.splitlines() if not ln.startswith(key + " ")]
    with pytest.raises(ConfigurationError, match=match):
        parse_config("\n".join(lines) + "\n" + line)


@pytest.mark.parametrize("key", ["galerkin.N", "time.dt", "time.T", "diffusion.kind"])
def test_missing_required(key):
    text = "\n".join(ln for ln in MINIMAL.splitlines() if not ln.startswith(key + " "))
    with pytest.raises(ConfigurationError, match=f"missing required config key {key}"):
        parse_config(text)


def test_malformed_text():
    with pytest.raises(ConfigurationError, match="malformed"):
        parse_config("galerkin.N = [")


def test_hash_ignores_output_block_but_not_seed():
    a = parse_config(MINIMAL)
    b = parse_config(MINIMAL + 'output.directory = "elsewhere"')
    assert a.config_hash() == b.config_hash()
    assert a.with_seed(5).config_hash() != a.config_hash()
    assert a.with_seed(5).seed == 5


def test_mode_initial_condition():
    cfg = parse_config(MINIMAL + "initial.modes = [[1, 1.0], [3, -0.5], [40, 2.0]]")
    s = build_space(math.pi, 4)
    np.testing.assert_array_equal(cfg.initial.coefficients(s), [1, 0, -0.5, 0])


def test_bump_initial_condition_is_consistent_across_N():
    cfg = parse_config(MINIMAL + "initial.kind = 'bump'\ninitial.center = 1.5\ninitial.width = 0.7")
    c8 = cfg.initial.coefficients(build_space(math.pi, 8))
    c32 = cfg.initial.coefficients(build_space(math.pi, 32))
    np.testing.assert_allclose(c32[:8], c8, rtol=1e-12)
    # the bump integrates against e_1 like a positive bump should
    assert c8[0] > 0
    with pytest.raises(ConfigurationError):
        parse_config(MINIMAL + "initial.kind = 'bump'")


def test_file_initial_condition(tmp_path):
    x = np.linspace(0, math.pi, 401)[1:-1]
    path = tmp_path / "u0.txt"
    np.savetxt(path, np.column_stack([x, math.sqrt(2 / math.pi) * np.sin(2 * x)]))
    cfg = parse_config(MINIMAL + f"initial.kind = 'file'\ninitial.path = '{path}'")
    c = cfg.initial.coefficients(build_space(math.pi, 4))
    np.testing.assert_allclose(c, [0, 1, 0, 0], atol=1e-4)
    with pytest.raises(ConfigurationError):
        parse_config(MINIMAL + f"initial.kind = 'file'\ninitial.path = '{tmp_path / 'missing.txt'}'")


def test_initial_condition_validation():
    with pytest.raises(ConfigurationError):
        InitialCondition("spline")
    with pytest.raises(ConfigurationError):
        InitialCondition("bump", width=0.0)
    with pytest.raises(ConfigurationError):
        parse_config(MINIMAL + "initial.modes = [[0, 1.0]]")


def test_load_config(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text(MINIMAL)
    assert load_config(p).config_hash() == parse_config(MINIMAL).config_hash()
