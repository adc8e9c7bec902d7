"""Config parsing, canonical serialization, and the CLI surface."""

import json
from math import pi
from pathlib import Path

import numpy as np
import pytest

from minl2.cli import main
from minl2.config import (ConfigError, config_hash, load_config,
                          parse_config_text, serialize_config)

RICH_TEXT = """
[run]
label = "rich"
op = "extension-check"

[domain]
kind = "polydisc"
n = 2
radii = [2.0, 1.0]
pole_codim = 1

[phi]
family = "radial_power"
coeff = 0.5

[ideal]
order = 2

[weight]
family = "exp_rate"
alpha = 0.25

[datum]
terms = [{index = [1, 0], value = [0.5, -0.25]}, {index = [0, 0], value = 2.0}]

[grid]
t_min = 0.5
t_max = 6.0
count = 12
spacing = "log"

[solver]
resolution = 48
degree = 6
method = "quadrature"
angular_nodes = 24

[tolerances]
check = 1e-7
pythagoras = 1e-9

[extension]
t0 = 1.5
widths = [0.5]
pole_weighted = false

[output]
csv = "rich_curve.csv"
json = "rich_report.json"
"""


class TestConfigParsing:
    def test_defaults(self):
        cfg = parse_config_text('[domain]\nkind = "disk"\n')
        assert cfg.label == "experiment"
        assert cfg.op is None
        assert cfg.domain.kind == "disk"
        assert cfg.phi.tag == "zero"
        assert cfg.ideal_order == 1
        assert cfg.weights[0].family == "constant"
        assert cfg.datum == (((0,), 1.0 + 0.0j),)
        assert cfg.grid.count == 81
        assert cfg.tol("check") == 1e-8
        assert cfg.tol("layer_cake") == 1e-6

    def test_rich_round_trip(self):
        cfg = parse_config_text(RICH_TEXT)
        again = parse_config_text(serialize_config(cfg))
        assert again == cfg
        assert config_hash(again) == config_hash(cfg)

    def test_hash_ignores_formatting(self):
        a = parse_config_text('[domain]\nkind = "disk"\n')
        b = parse_config_text('# comment\n[domain]\nkind   = "disk"  # x\n')
        assert config_hash(a) == config_hash(b)

    def test_grid_values(self):
        cfg = parse_config_text(
            '[grid]\nt_min = 1.0\nt_max = 4.0\ncount = 4\nspacing = "log"\n')
        np.testing.assert_allclose(cfg.t_values(),
                                   np.geomspace(1.0, 4.0, 4))

    def test_weights_list(self):
        cfg = parse_config_text("""
[[weights]]
family = "constant"

[[weights]]
family = "rational"
num = [1.0]
den = [1.0, 0.0, 1.0]
""")
        assert len(cfg.weights) == 2
        c = cfg.weight(1)
        assert c(0.0) == pytest.approx(1.0)
        assert c(1.0) == pytest.approx(0.5)

    @pytest.mark.parametrize("text,fragment", [
        ("[oops]\nx = 1\n", "unknown section"),
        ('[domain]\nkind = "disk"\nextra = 1\n', "unknown key"),
        ('[run]\nop = "fly"\n', "op must be one of"),
        ('[domain]\nkind = "torus"\n', "unknown kind"),
        ('[domain]\nkind = "ball"\n', "requires n"),
        ('[grid]\ncount = 0\n', "empty t grid"),
        ('[grid]\nt_min = -1.0\n', "t_min"),
        ('[grid]\nt_min = 2.0\nt_max = 1.0\n', "t_max"),
        ('[grid]\nspacing = "cubic"\n', "spacing"),
        ('[grid]\nt_min = 0.0\nspacing = "log"\n', "log spacing"),
        ('[tolerances]\ncheck = 0.0\n', "positive"),
        ('[tolerances]\nbogus = 1.0\n', "unknown key"),
        ('[solver]\nmethod = "magic"\n', "method"),
        ('[solver]\nresolution = 1\n', "resolution"),
        ('[ideal]\norder = 0\n', "positive integer"),
        ('[datum]\nterms = [{index = [0, 0], value = 1.0}]\n', "index"),
        ('[datum]\nterms = [{index = [0], value = "x"}]\n', "value"),
        ('[extension]\nwidths = []\n', "widths"),
        ('[weight]\nfamily = "splines"\n', "weight family"),
        ('[weight]\nfamily = "exp_rate"\n', "alpha"),
        ("not toml [ at all\n", "<config>"),
    ])
    def test_rejects(self, text, fragment):
        with pytest.raises(ConfigError) as err:
            parse_config_text(text)
        assert fragment.lower() in str(err.value).lower()

    def test_duplicate_datum_index(self):
        with pytest.raises(ConfigError):
            parse_config_text('[datum]\nterms = [{index = [0], value = 1.0},'
                              ' {index = [0], value = 2.0}]\n')

    def test_weight_and_weights_conflict(self):
        with pytest.raises(ConfigError):
            parse_config_text('[weight]\nfamily = "constant"\n\n'
                              '[[weights]]\nfamily = "constant"\n')

    def test_tabulated_weight(self, tmp_path):
        (tmp_path / "table.csv").write_text(
            "t,c\n0.0,1.0\n1.0,1.5\n2.0,1.75\n3.0,1.8\n")
        (tmp_path / "cfg.toml").write_text(
            '[weight]\nfamily = "tabulated"\npath = "table.csv"\n')
        cfg = load_config(tmp_path / "cfg.toml")
        w = cfg.weight()
        assert w(1.0) == pytest.approx(1.5)
        assert w(10.0) == pytest.approx(1.8)

    def test_tabulated_missing_file(self, tmp_path):
        (tmp_path / "cfg.toml").write_text(
            '[weight]\nfamily = "tabulated"\npath = "nope.csv"\n')
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "cfg.toml")

    def test_tabulated_bad_header(self, tmp_path):
        (tmp_path / "table.csv").write_text("time,value\n0,1\n1,2\n")
        (tmp_path / "cfg.toml").write_text(
            '[weight]\nfamily = "tabulated"\npath = "table.csv"\n')
        with pytest.raises(ConfigError, match="header"):
            load_config(tmp_path / "cfg.toml")

    def test_label_defaults_to_file_stem(self, tmp_path):
        path = tmp_path / "my_run.toml"
        path.write_text('[domain]\nkind = "disk"\n')
        assert load_config(path).label == "my_run"


def write_cfg(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


DISK_COMPUTE = """
[run]
op = "compute-g"

[grid]
t_min = 0.0
t_max = 4.0
count = 11
"""


class TestCli:
    def test_compute_g_disk(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, DISK_COMPUTE)
        out = tmp_path / "out"
        assert main(["compute-g", "--config", cfg, "--out", str(out)]) == 0
        lines = (out / "cfg.csv").read_text().strip().splitlines()
        assert lines[0] == "t,r,G,basis_degree,converged"
        for line in lines[1:]:
            t, r, g, deg, conv = line.split(",")
            assert abs(float(g) / float(r) - pi) <= 1e-8 * pi
            assert conv == "true"
        report = json.loads((out / "cfg.json").read_text())
        assert report["passed"] is True
        assert report["config_hash"] == config_hash(load_config(cfg))
        assert "PASS" in capsys.readouterr().out

    def test_empty_grid_exits_2_without_artifacts(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, '[run]\nop = "compute-g"\n\n'
                                  '[grid]\ncount = 0\n')
        out = tmp_path / "out"
        assert main(["compute-g", "--config", cfg, "--out", str(out)]) == 2
        assert not out.exists()
        assert "config error" in capsys.readouterr().err

    def test_missing_config_exits_2(self, tmp_path):
        assert main(["compute-g", "--config",
                     str(tmp_path / "nope.toml")]) == 2

    def test_verify_ode_artifact(self, tmp_path):
        cfg = write_cfg(tmp_path, """
[run]
op = "verify-ode"

[weight]
family = "rational"
num = [1.0]
den = [1.0, 0.0, 1.0]

[grid]
t_min = 0.1
t_max = 10.0
count = 50
""")
        out = tmp_path / "out"
        assert main(["verify-ode", "--config", cfg, "--out", str(out)]) == 0
        lines = (out / "cfg.csv").read_text().strip().splitlines()
        assert lines[0] == "t,res1,res2,min_pos"
        body = np.array([[float(v) for v in line.split(",")]
                         for line in lines[1:]])
        assert body[:, 1:3].max() < 1e-8
        assert body[:, 3].min() > 0

    def test_reruns_are_byte_identical(self, tmp_path):
        cfg = write_cfg(tmp_path, DISK_COMPUTE)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(["compute-g", "--config", cfg, "--out", str(out_a)]) == 0
        assert main(["compute-g", "--config", cfg, "--out", str(out_b)]) == 0
        for name in ("cfg.csv", "cfg.json"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    def test_failing_verdict_exits_1(self, tmp_path, capsys):
        # second-order jet with the first-power transform: convex curve
        cfg = write_cfg(tmp_path, """
[run]
op = "check-concavity"

[ideal]
order = 2

[datum]
terms = [{index = [1], value = 1.0}]

[grid]
t_min = 0.0
t_max = 4.0
count = 21
""")
        out = tmp_path / "out"
        assert main(["check-concavity", "--config", cfg,
                     "--out", str(out)]) == 1
        report = json.loads((out / "cfg.json").read_text())
        assert report["passed"] is False
        assert report["verdicts"]["concave"] is False
        assert "concave" in capsys.readouterr().err

    def test_grid_below_weight_origin_exits_2(self, tmp_path):
        cfg = write_cfg(tmp_path, """
[run]
op = "bergman-ratio"

[weight]
family = "constant"
T = 0.5

[grid]
t_min = 0.0
t_max = 2.0
count = 3
""")
        assert main(["bergman-ratio", "--config", cfg,
                     "--out", str(tmp_path / "out")]) == 2

    def test_bad_overrides_exit_2(self, tmp_path):
        cfg = write_cfg(tmp_path, DISK_COMPUTE)
        assert main(["compute-g", "--config", cfg, "--tol", "-1"]) == 2
        assert main(["compute-g", "--config", cfg, "--resolution", "1"]) == 2

    def test_unknown_subcommand_usage_error(self):
        with pytest.raises(SystemExit) as exits:
            main(["frobnicate", "--config", "x"])
        assert exits.value.code == 2


class TestSuite:
    def test_malformed_member_is_isolated(self, tmp_path, capsys):
        cfgs = tmp_path / "configs"
        cfgs.mkdir()
        (cfgs / "a_good.toml").write_text(DISK_COMPUTE)
        (cfgs / "b_bad.toml").write_text("[grid]\ncount = 0\n")
        (cfgs / "c_good.toml").write_text("""
[run]
op = "check-linearity"

[grid]
t_min = 0.0
t_max = 4.0
count = 21
""")
        out = tmp_path / "out"
        assert main(["suite", "--config", str(cfgs),
                     "--out", str(out)]) == 1
        summary = json.loads((out / "suite_summary.json").read_text())
        status = {k: v["status"] for k, v in summary["configs"].items()}
        assert status == {"a_good": "pass", "b_bad": "config-error",
                          "c_good": "pass"}

    def test_member_without_op_is_config_error(self, tmp_path):
        cfgs = tmp_path / "configs"
        cfgs.mkdir()
        (cfgs / "no_op.toml").write_text('[domain]\nkind = "disk"\n')
        out = tmp_path / "out"
        assert main(["suite", "--config", str(cfgs), "--out", str(out)]) == 1
        summary = json.loads((out / "suite_summary.json").read_text())
        assert summary["configs"]["no_op"]["status"] == "config-error"

    def test_empty_directory_warns_and_passes(self, tmp_path, capsys):
        cfgs = tmp_path / "configs"
        cfgs.mkdir()
        out = tmp_path / "out"
        assert main(["suite", "--config", str(cfgs), "--out", str(out)]) == 0
        assert "warning" in capsys.readouterr().err
        summary = json.loads((out / "suite_summary.json").read_text())
        assert summary["configs"] == {}

    def test_non_directory_exits_2(self, tmp_path):
        cfg = write_cfg(tmp_path, DISK_COMPUTE)
        assert main(["suite", "--config", cfg]) == 2

    def test_reference_suite_passes(self, tmp_path):
        root = Path(__file__).resolve().parent.parent
        out = tmp_path / "out"
        assert main(["suite", "--config", str(root / "configs"),
                     "--out", str(out)]) == 0
        summary = json.loads((out / "suite_summary.json").read_text())
        assert len(summary["configs"]) == 9
        assert all(v["status"] == "pass"
                   for v in summary["configs"].values())
