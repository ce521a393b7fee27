import json

import pytest

from multibump.config import RunConfig, load_file, parse_sweep, resolve
from multibump.errors import ConfigError


def test_defaults():
    cfg = resolve("radius")
    assert (cfg.dim, cfg.p, cfg.alpha, cfg.a1, cfg.k) == (2, 3.0, 3.0, 1.0, 8)
    assert cfg.out == "results" and cfg.jobs >= 1


def test_command_defaults_for_two_ring():
    cfg = resolve("two-ring")
    assert (cfg.dim, cfg.p, cfg.alpha, cfg.n) == (4, 2.0, 5.0, 32)


def test_precedence_flag_over_file_over_default():
    cfg = resolve("two-ring", {"alpha": 6.0, "n": 48}, {"alpha": 7.0, "n": None})
    assert cfg.alpha == 7.0
    assert cfg.n == 48
    assert cfg.dim == 4


@pytest.mark.parametrize("text,expected", [
    ("8,12,16", (8, 12, 16)),
    ("8:20", (8, 12, 16, 20)),
    ("8:20:6", (8, 14, 20)),
    ([32, 48], (32, 48)),
])
def test_parse_sweep(text, expected):
    assert parse_sweep(text) == expected


@pytest.mark.parametrize("text", ["", "8:x", "1:2:3:4", "8:20:0"])
def test_parse_sweep_rejects(text):
    with pytest.raises(ConfigError, match="^sweep"):
        parse_sweep(text)


def test_file_grid_and_unknown_keys(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"k": 12, "grid": {"h": 0.04}}))
    assert load_file(path) == {"k": 12, "h": 0.04}
    path.write_text(json.dumps({"kk": 12}))
    with pytest.raises(ConfigError, match="^kk: unknown key"):
        load_file(path)
    path.write_text(json.dumps({"grid": {"dx": 1}}))
    with pytest.raises(ConfigError, match="grid.dx"):
        load_file(path)
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="^config"):
        load_file(path)


def test_manifest_is_a_config(tmp_path):
    cfg = resolve("solve", flags={"k": 12, "h": 0.04})
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps({"command": "solve", "config": cfg.to_dict()}))
    assert resolve("solve", load_file(path)) == cfg


@pytest.mark.parametrize("command,flags,key", [
    ("radius", {"alpha": 1.5}, "alpha"),
    ("radius", {"p": 7.0, "dim": 3}, "p"),
    ("radius", {"a1": -1.0}, "a1"),
    ("radius", {"beta": 0.9}, "beta"),
    ("radius", {"k": 1}, "k"),
    ("radius", {"dim": 1}, "dim"),
    ("solve", {"h": 0.2}, "h"),
    ("solve", {"tau": 1.5}, "tau"),
    ("solve", {"dim": 3}, "dim"),
    ("spectrum", {"num_eigs": 20}, "num_eigs"),
    ("two-ring", {"dim": 2, "p": 3.0, "alpha": 3.0}, "dim"),
    ("two-ring", {"n": 33}, "n"),
    ("two-ring", {"k": 7}, "k"),
    ("radius", {"jobs": 0}, "jobs"),
    ("radius", {"k": 2.5}, "k"),
    ("radius", {"all_pairs": "yes"}, "all_pairs"),
])
def test_validation_names_the_key(command, flags, key):
    with pytest.raises(ConfigError, match=f"^{key}"):
        resolve(command, flags=flags)


def test_to_dict_round_trip():
    cfg = resolve("radius", flags={"sweep": "8,12"})
    assert RunConfig(**{**cfg.to_dict(), "sweep": tuple(cfg.to_dict()["sweep"])}) == cfg
