import io
import json
import subprocess
import sys
import time

import pytest

from kkflat import catalog as C
from kkflat import cli
from kkflat import verification as V
from kkflat.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, ConfigError, RunConfig, main


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


class TestRunConfig:
    @pytest.mark.parametrize("kwargs", [
        {"command": "verify", "solution": "sol1_static", "tol": -1.0},
        {"command": "verify", "solution": "sol1_static", "points": 0},
        {"command": "verify", "solution": "nope"},
        {"command": "verify"},
        {"command": "launch", "solution": "flat"},
        {"command": "verify", "solution": "flat", "backend": "gpu"},
        {"command": "verify", "solution": "flat", "format": "xml"},
        {"command": "scan", "solution": "random"},
        {"command": "reduce", "solution": "random", "params": {"n": 7}},
    ])
    def test_rejected(self, kwargs):
        with pytest.raises((ConfigError, C.CatalogError)):
            RunConfig(**kwargs).validate()

    def test_defaults(self):
        cfg = RunConfig("scan", "dilaton_2d", {"model": "I2", "Y": "0.5:2:3"}).validate()
        assert cfg.output_format == "csv" and cfg.point_count() == cli.DEFAULT_SCAN_POINTS
        assert RunConfig("verify", "flat").output_format == "json"
        assert RunConfig("verify", "flat", backend="finite-diff").backend_name == "fd"

    def test_round_trip(self):
        cfg = RunConfig("verify", "sol1_static", {"A": 1.0, "B": 0.5}, points=7, seed=3, tol=1e-7)
        again = RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
        assert again == cfg

    def test_grid(self):
        assert cli.parse_grid("Y", "0:1:3") == [0.0, 0.5, 1.0]
        assert cli.parse_grid("Y", "2") == [2.0]
        with pytest.raises(ConfigError):
            cli.parse_grid("Y", "0:1")
        names, cells = cli.scan_grid({"model": "I2", "Y": "0:1:2", "M": "0:1:3"})
        assert names == ["Y", "M"] and cells[:3] == [(0.0, 0.0), (0.0, 0.5), (0.0, 1.0)]

    def test_oversized_grid(self):
        with pytest.raises(ConfigError):
            cli.scan_grid({"Y": "0:1:101", "M": "0:1:100"})


class TestVerify:
    def test_sol1_passes(self):
        code, out, _ = run("verify", "--solution", "sol1_static", "--param", "A=1", "--param", "B=0.5",
                           "--param", "a=4")
        doc = json.loads(out)
        assert code == EXIT_OK and doc["passed"]
        assert doc["schema"] == cli.SCHEMA and doc["schema_version"] == cli.SCHEMA_VERSION
        assert len(doc["reports"]) >= 8
        assert all(r["pass"] and r["reference"] for r in doc["reports"])

    def test_perturbed_fails(self):
        code, out, _ = run("verify", "--solution", "sol2_static", "--param", "perturb=0.01")
        assert code == EXIT_FAIL
        assert not json.loads(out)["passed"]

    def test_negative_tol(self):
        code, _, err = run("verify", "--solution", "sol1_static", "--tol", "-1")
        assert code == EXIT_USAGE and "tolerance" in err

    @pytest.mark.parametrize("argv", [
        ["verify", "--solution", "bogus"], ["frobnicate"], ["verify", "--solution", "flat", "--points", "x"],
        ["verify", "--solution", "sol1_static", "--param", "Z=1"], ["verify", "--solution", "flat", "--param", "oops"],
    ])
    def test_usage_errors(self, argv):
        assert run(*argv)[0] == EXIT_USAGE

    def test_csv_format(self):
        code, out, _ = run("verify", "--solution", "const_phi", "--format", "csv", "--points", "4")
        assert code == EXIT_OK
        lines = out.split("\r\n")
        assert lines[0].startswith("name,n_points,max_abs,max_rel,tolerance,pass")

    def test_fd_backend(self):
        code, out, _ = run("verify", "--solution", "max_sym_3d", "--backend", "fd", "--points", "3", "--tol", "1e-5")
        assert code == EXIT_OK, out

    def test_config_file(self, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"solution": "sol2_ef", "A": 0.3, "B": 0.2, "points": 4}))
        out = tmp_path / "report.json"
        code, _, _ = run("verify", "--config", str(cfg), "--out", str(out))
        doc = json.loads(out.read_text())
        assert code == EXIT_OK and doc["config"]["points"] == 4

    def test_nested_config_rejected(self, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"solution": "flat", "params": {"A": 1}}))
        assert run("verify", "--config", str(cfg))[0] == EXIT_USAGE

    @pytest.mark.parametrize("model", ["I1", "I1_dual", "I2", "I2_dual"])
    def test_dilaton_models(self, model):
        assert run("verify", "--solution", "dilaton_2d", "--param", f"model={model}")[0] == EXIT_OK


class TestCurvature:
    def test_sol2_row(self):
        code, out, _ = run("curvature", "--solution", "sol2_ef", "--param", "A=0", "--points", "5")
        doc = json.loads(out)
        assert code == EXIT_OK
        for row in doc["rows"]:
            assert row["abs_diff"] <= 1e-9 * (1 + abs(row["closed_form"]))
        rows = cli.curvature_rows(C.instantiate("sol2_ef", {"A": 0.0}), 1, 0, "jets")
        assert rows[0]["closed_form"] == pytest.approx(5 * rows[0]["coords"][1] ** 2)

    def test_flat_zero(self):
        code, out, _ = run("curvature", "--solution", "flat", "--format", "csv", "--points", "3")
        assert code == EXIT_OK
        for line in out.strip().split("\r\n")[1:]:
            fields = line.split(",")
            assert all(float(v) == 0.0 for v in fields[2:])


class TestReduce:
    def test_const_phi(self):
        code, out, _ = run("reduce", "--solution", "const_phi", "--points", "3", "--tol", "1e-9")
        doc = json.loads(out)
        assert code == EXIT_OK
        for pt in doc["points"]:
            assert max(b["max_abs_delta"] for b in pt["blocks"].values()) <= 1e-9

    def test_zero_vector_mixed_blocks(self):
        code, out, _ = run("reduce", "--solution", "max_sym_3d", "--points", "2")
        assert code == EXIT_OK
        doc = json.loads(out)
        for pt in doc["points"]:
            for key in ("riemann_mixed", "ricci_mixed"):
                assert max(abs(v) for v in _flatten(pt["blocks"][key]["reduced"])) == 0.0

    def test_n5_random_fast(self):
        start = time.perf_counter()
        code, out, _ = run("reduce", "--solution", "random", "--param", "n=5", "--points", "10")
        assert code == EXIT_OK
        assert time.perf_counter() - start < 10.0
        assert json.loads(out)["n"] == 5

    def test_csv_dump(self):
        code, out, _ = run("reduce", "--solution", "random", "--format", "csv", "--points", "1")
        assert code == EXIT_OK
        assert out.startswith("point,block,index,reduced,direct,delta\r\n")

    def test_dilaton_rejected(self):
        assert run("reduce", "--solution", "dilaton_2d")[0] == EXIT_USAGE


def _flatten(x):
    for v in x:
        if isinstance(v, list):
            yield from _flatten(v)
        else:
            yield v


class TestScan:
    def test_horizon_counts(self):
        code, out, _ = run("scan", "--solution", "dilaton_2d", "--param", "model=I2",
                           "--param", "Y=0.5:2:5", "--param", "M=-1:1:5", "--points", "3")
        lines = out.strip().split("\r\n")
        header = lines[0].split(",")
        idx = header.index("horizon_count")
        counts = {int(line.split(",")[idx]) for line in lines[1:]}
        assert len(lines) == 26 and counts <= {0, 1, 2}
        assert code in (EXIT_OK, EXIT_FAIL)

    def test_single_cell_matches_verify(self):
        code, out, _ = run("scan", "--solution", "sol2_ef", "--param", "A=0.3", "--param", "B=0.2", "--points", "5")
        ok = out.strip().split("\r\n")[1].split(",")[-1]
        verdict = V.all_passed(V.verify_instance(C.instantiate("sol2_ef", {"A": 0.3, "B": 0.2}), 5))
        assert ok == str(verdict).lower() and (code == EXIT_OK) == verdict

    def test_deterministic_bytes(self, tmp_path):
        args = ["scan", "--solution", "sol2_ef", "--param", "A=-2:0.5:3", "--param", "B=0.2:1:2", "--seed", "4"]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run(*args, "--out", str(a))
        run(*args, "--out", str(b), "--jobs", "2")
        assert a.read_bytes() == b.read_bytes()

    def test_oversized(self):
        assert run("scan", "--solution", "sol2_ef", "--param", "A=0:1:200", "--param", "B=0:1:100")[0] == EXIT_USAGE


class TestCatalog:
    def test_listing(self):
        code, out, _ = run("catalog")
        doc = json.loads(out)
        assert code == EXIT_OK and "sol1" in out
        for fam in doc["families"]:
            assert fam["printed_gauge"]
            cfg = RunConfig.from_dict(fam["config"]).validate()
            assert cfg.solution == fam["family"]

    def test_csv(self):
        code, out, _ = run("catalog", "--format", "csv")
        assert code == EXIT_OK and out.count("\r\n") == len(C.FAMILIES) + 1


class TestConsoleScript:
    def test_module_entry(self):
        res = subprocess.run([sys.executable, "-m", "kkflat", "verify", "--solution", "flat", "--tol", "0"],
                             capture_output=True, text=True)
        assert res.returncode == EXIT_USAGE and "tolerance" in res.stderr
