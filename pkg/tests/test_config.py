import pytest

from groundcut.config import (
    KNOWN_KEYS,
    PipelineConfig,
    apply_overrides,
    dump_config,
    load_config,
    parse_assignments,
)
from groundcut.errors import ConfigError


def test_defaults():
    cfg = load_config()
    assert cfg == PipelineConfig()
    assert cfg.stage == "full" and cfg.sectors == 360 and cfg.h_thresh == 0.3
    assert cfg.mark == "both" and cfg.mrf.seed_ratio == 0.5


def test_file_and_overrides(tmp_path):
    path = tmp_path / "g.ini"
    path.write_text("[pipeline]\nstage = adjacency  # comment\nrows = 2:40\n\n[mrf]\nlambda = 2.5\n")
    cfg = load_config(path, {"grid.sectors": "90"})
    assert cfg.stage == "adjacency" and cfg.rows == (2, 40)
    assert cfg.mrf.lam == 2.5 and cfg.sectors == 90
    assert load_config(path, {"pipeline.stage": "coarse"}).stage == "coarse"


def test_sensor_path_is_relative_to_the_file(tmp_path):
    path = tmp_path / "g.ini"
    path.write_text("[sensor]\nmodel = lidar.txt\n")
    assert load_config(path).sensor == str(tmp_path / "lidar.txt")


@pytest.mark.parametrize(
    "key,value",
    [
        ("grid.nope", "1"),
        ("grid.sectors", "abc"),
        ("grid.sectors", "0"),
        ("pipeline.stage", "fine"),
        ("pipeline.rows", "5:2"),
        ("adjacency.mark", "near"),
        ("adjacency.k_deg", "90"),
        ("mrf.seed_ratio", "1.5"),
        ("mrf.lambda", "-1"),
    ],
)
def test_bad_values(key, value):
    with pytest.raises(ConfigError):
        apply_overrides(PipelineConfig(), {key: value})


def test_rows_beyond_the_sensor():
    cfg = apply_overrides(PipelineConfig(), {"pipeline.rows": "0:80"})
    with pytest.raises(ConfigError):
        cfg.check_rows(64)
    assert apply_overrides(cfg, {"pipeline.rows": "all"}).rows is None


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.ini")


def test_assignments():
    assert parse_assignments(["mrf.sigma=2", "grid.h_thresh = 0.2"]) == {"mrf.sigma": "2", "grid.h_thresh": " 0.2"}
    with pytest.raises(ConfigError):
        parse_assignments(["mrf.sigma"])


def test_dump_round_trip(tmp_path):
    cfg = apply_overrides(PipelineConfig(), {"pipeline.rows": "1:9", "mrf.sigma": "0.25", "adjacency.mark": "far"})
    path = tmp_path / "d.ini"
    path.write_text(dump_config(cfg))
    assert load_config(path) == cfg
    written = {line.split(" = ")[0] for line in dump_config(cfg).splitlines() if " = " in line}
    assert len(written) == len(KNOWN_KEYS)
