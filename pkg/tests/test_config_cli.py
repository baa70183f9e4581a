import io
import json
import os
import subprocess
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from sublim.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, EXIT_VIOLATION, main
from sublim.config import dump_config, parse_config
from sublim.errors import ConfigError

CONFIGS = Path(__file__).resolve().parents[1] / "scripts" / "configs"

TWO_RADEMACHER = {
    "family": [{"atoms": [[-1], [1]], "weights": [0.5, 0.5]}, {"atoms": [[-2], [2]], "weights": [0.5, 0.5]}],
    "function": "cos(x)",
}


def write(tmp_path, obj, name="cfg.json"):
    path = tmp_path / name
    path.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(path)


def run(argv):
    buf = io.StringIO()
    code = main(argv, out=buf)
    return code, buf.getvalue()


class TestConfig:
    def test_defaults(self):
        cfg = parse_config(json.dumps(TWO_RADEMACHER))
        assert cfg.params.n_list == [4, 16, 64, 256] and cfg.command is None

    def test_builtin_expands(self):
        cfg = parse_config(json.dumps({**TWO_RADEMACHER, "function": {"builtin": "cos", "params": {"k": 2}}}))
        assert cfg.function_source() == "cos(2.0 * x)"

    def test_round_trip_idempotent(self):
        for path in CONFIGS.glob("*.json"):
            once = dump_config(parse_config(path.read_text()))
            assert dump_config(parse_config(once)) == once

    @given(
        st.lists(st.integers(1, 500), min_size=1, max_size=5, unique=True).map(sorted),
        st.floats(1e-3, 1.0),
        st.sampled_from(["x", "cos(x)", {"builtin": "abs_clamped", "params": {"cap": 3}}]),
    )
    def test_round_trip_generated(self, n_list, dx, function):
        raw = {**TWO_RADEMACHER, "function": function, "params": {"n_list": n_list, "dx": dx}}
        once = dump_config(parse_config(json.dumps(raw)))
        assert dump_config(parse_config(once)) == once

    def test_json_error_position(self):
        with pytest.raises(ConfigError, match="line 2 column"):
            parse_config('{"family": [],\n  oops}')

    @pytest.mark.parametrize(
        "patch, where",
        [
            ({"family": [{"atoms": [[0]], "weights": ["a"]}]}, "family[0].weights[0]"),
            ({"family": [{"atoms": [[0], [1]], "weights": [0.5, 0.6]}]}, "family[0]"),
            ({"function": "x +"}, "function"),
            ({"function": {"builtin": "nope"}}, "function.builtin"),
            ({"params": {"n_list": [4, 2]}}, "params.n_list"),
            ({"params": {"pde": {"gamma": 2}}}, "params.pde.gamma"),
            ({"params": {"events": [{"norm_gt": 1, "norm_ge": 1}]}}, "params.events[0]"),
            ({"params": {"bogus": 1}}, "params"),
            ({"command": "run"}, "command"),
        ],
    )
    def test_schema_error_paths(self, patch, where):
        with pytest.raises(ConfigError) as info:
            parse_config(json.dumps({**TWO_RADEMACHER, **patch}))
        assert str(info.value).startswith(where + ":")

    @settings(suppress_health_check=[HealthCheck.function_scoped_fixture])
    @given(st.binary(max_size=200))
    def test_fuzzed_bytes_exit_config(self, tmp_path, data):
        path = tmp_path / "fuzz.json"
        path.write_bytes(data)
        assert run(["expect", str(path)])[0] == EXIT_CONFIG

    @given(st.recursive(st.none() | st.booleans() | st.floats() | st.text(max_size=5), lambda s: st.lists(s) | st.dictionaries(st.text(max_size=8), s), max_leaves=10))
    def test_fuzzed_json_values(self, value):
        try:
            parse_config(json.dumps(value))
        except ConfigError:
            pass


class TestCommands:
    def test_expect(self):
        code, text = run(["expect", str(CONFIGS / "skewed_pair.json")])
        report = json.loads(text)
        assert code == EXIT_OK
        assert report["upper_expectation"] == pytest.approx(0.4, abs=1e-12)
        assert report["argmax_index"] == 0
        assert report["events"][0]["capacity"] == 1.0 and report["events"][1]["polar"]
        assert report["tightness"]["verified"]

    def test_clt_constant_zero_deltas(self, tmp_path):
        path = write(tmp_path, {**TWO_RADEMACHER, "function": "0.75", "params": {"n_list": [1, 2, 4, 8], "dx": 0.05}})
        code, text = run(["clt", path, "-o", str(tmp_path / "o")])
        lines = text.splitlines()
        assert code == EXIT_OK and lines[0] == "n,value,delta"
        assert all(line.split(",")[2] == "0" for line in lines[1:])
        assert (tmp_path / "o" / "clt.csv").read_text() == text

    def test_clt_exact_accepts_growth(self, tmp_path):
        path = write(tmp_path, {**TWO_RADEMACHER, "function": "x^2", "params": {"n_list": [1, 3], "mode": "exact"}})
        code, text = run(["clt", path])
        assert code == EXIT_OK and text.splitlines()[1].startswith("1,4,")

    def test_clt_dp_rejects_growth(self, tmp_path):
        path = write(tmp_path, {**TWO_RADEMACHER, "function": "x", "params": {"n_list": [1, 2]}})
        assert run(["clt", path])[0] == EXIT_CONFIG

    def test_pde_outputs(self, tmp_path):
        cfg = {**TWO_RADEMACHER, "params": {"pde": {"dx": 0.05, "T": 0.5, "snapshot_times": [0, 0.25, 0.5]}}}
        out = tmp_path / "o"
        code, text = run(["pde", write(tmp_path, cfg), "-o", str(out)])
        manifest = json.loads(text)
        assert code == EXIT_OK and manifest["solver"] == "gheat" and manifest["bounds"]["sampled"]
        assert [s["file"] for s in manifest["snapshots"]] == ["snapshot_000.tsv", "snapshot_001.tsv", "snapshot_002.tsv"]
        rows = (out / "snapshot_000.tsv").read_text().splitlines()
        assert all(len(r.split("\t")) == 2 for r in rows)
        assert json.loads((out / "manifest.json").read_text()) == manifest

    def test_pde_drift_uses_hjb(self, tmp_path):
        fam = [{"atoms": [[-1, 0.5], [1, 0.5]], "weights": [0.5, 0.5]}, {"atoms": [[-2, 0], [2, 0]], "weights": [0.5, 0.5]}]
        cfg = {"family": fam, "function": "cos(x)", "params": {"pde": {"dx": 0.05, "T": 0.2}}}
        code, text = run(["pde", write(tmp_path, cfg), "-o", str(tmp_path / "o")])
        assert code == EXIT_OK and json.loads(text)["solver"] == "ghjb"

    def test_compare_outputs(self, tmp_path):
        cfg = {**TWO_RADEMACHER, "params": {"n_list": [2, 8], "dx": 0.05, "pde": {"dx": 0.05}}}
        out = tmp_path / "o"
        code, text = run(["compare", write(tmp_path, cfg), "-o", str(out)])
        assert code == EXIT_OK and text.splitlines()[0] == "n,dp,pde,abs_err"
        plot = (out / "compare_loglog.tsv").read_text().splitlines()
        assert len(plot) == 2 and all(len(r.split("\t")) == 2 for r in plot)

    def test_check_passes(self, tmp_path):
        cfg = {**TWO_RADEMACHER, "params": {"instances": 20, "dx": 0.05, "pde": {"dx": 0.05}, "dictionary_size": 2}}
        code, text = run(["check", write(tmp_path, cfg)])
        assert code == EXIT_OK
        assert all(v["violations"] == 0 for v in json.loads(text).values())

    def test_check_reports_violation(self, monkeypatch, tmp_path):
        import sublim.cli as cli

        monkeypatch.setattr(cli, "run_checks", lambda cfg: {"semigroup": [{"residual": 1.0}]})
        assert run(["check", write(tmp_path, TWO_RADEMACHER)])[0] == EXIT_VIOLATION


    def test_command_mismatch(self, tmp_path):
        assert run(["clt", write(tmp_path, {**TWO_RADEMACHER, "command": "expect"})])[0] == EXIT_CONFIG

    def test_missing_file_and_bad_args(self, tmp_path):
        assert run(["expect", str(tmp_path / "none.json")])[0] == EXIT_CONFIG
        assert run(["frobnicate"])[0] == EXIT_CONFIG

    def test_numeric_error(self, tmp_path):
        path = write(tmp_path, {**TWO_RADEMACHER, "function": "exp(1000 * x)", "params": {"n_list": [1], "mode": "exact"}})
        assert run(["clt", path])[0] == EXIT_NUMERIC

    def test_threads_validated(self, monkeypatch, tmp_path):
        path = str(CONFIGS / "skewed_pair.json")
        monkeypatch.setenv("SUBLIM_THREADS", "many")
        assert run(["expect", path])[0] == EXIT_CONFIG
        monkeypatch.setenv("SUBLIM_THREADS", "-1")
        assert run(["expect", path])[0] == EXIT_CONFIG
        monkeypatch.setenv("SUBLIM_THREADS", "2")
        assert run(["expect", path])[0] == EXIT_OK


@pytest.mark.parametrize("command", ["expect", "clt", "pde", "compare", "check"])
def test_byte_identical_runs(tmp_path, command):
    cfg = {
        **TWO_RADEMACHER,
        "params": {"n_list": [1, 4], "dx": 0.05, "instances": 5, "dictionary_size": 2, "pde": {"dx": 0.05, "T": 1.0, "snapshot_times": [0.5, 1.0]}},
    }
    path = write(tmp_path, cfg)
    results = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        code, text = run([command, path, "-o", str(out)])
        files = {p.name: p.read_bytes() for p in sorted(out.glob("*"))} if out.exists() else {}
        results.append((code, text, files))
    assert results[0] == results[1]


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "sublim", "expect", str(CONFIGS / "skewed_pair.json")],
        capture_output=True, text=True, env={**os.environ, "SUBLIM_THREADS": "0"},
    )
    assert proc.returncode == 0 and json.loads(proc.stdout)["argmax_index"] == 0
