import json

import h5py
import numpy as np
import pytest

from promptground.cli import main
from promptground.mockserver import MockModelServer

from test_bench import write_suite

CORRECT_SCRIPT = "```python\n#: exit 0\n#: artifact plot.png\n```"
FAILING_SCRIPT = "```python\n#: exit 1\n#: stderr SENTINEL-ERR bad path\n```"


@pytest.fixture
def h5_file(tmp_path):
    p = tmp_path / "sample.h5"
    with h5py.File(p, "w") as f:
        ds = f.create_dataset("/measurements/temperature", data=np.arange(4.0))
        ds.attrs["units"] = "K"
    return p


def kb_jsonl(tmp_path):
    lines = []
    for i, kind in enumerate(["access", "preprocess", "visualize"]):
        lines.append(
            json.dumps(
                {
                    "id": f"kb{i}",
                    "index": kind,
                    "title": f"{kind} example",
                    "description": f"how to {kind} things",
                    "code": "print('hi')",
                }
            )
        )
    p = tmp_path / "kb.jsonl"
    p.write_text("\n".join(lines))
    return p


def test_schema_command_prints_manifest(h5_file, capsys):
    assert main(["schema", "--data", str(h5_file)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["datasets"][0]["path"] == "/measurements/temperature"


def test_schema_command_missing_file(tmp_path, capsys):
    assert main(["schema", "--data", str(tmp_path / "none.h5")]) == 2
    assert "error" in capsys.readouterr().err


def test_disambiguate_command_text_output(h5_file, capsys):
    rc = main(
        [
            "disambiguate",
            "--prompt",
            "visualize the temperature data",
            "--schema",
            str(h5_file),
        ]
    )
    assert rc == 0
    out = capsys.readouterr().out
    assert out.startswith("visualize the temperature data\n\n")
    assert "/measurements/temperature" in out


def test_disambiguate_command_json_output(h5_file, capsys):
    rc = main(
        [
            "disambiguate",
            "--prompt",
            "visualize the temperature data",
            "--schema",
            str(h5_file),
            "--json",
        ]
    )
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["original"] == "visualize the temperature data"
    assert doc["matches"]
    assert doc["matches"][0]["path"] == "/measurements/temperature"
    assert {"token", "path", "kind", "score", "fuzzy_pass"} <= set(doc["matches"][0])


def test_disambiguate_reads_prompt_from_file(h5_file, tmp_path, capsys):
    prompt_file = tmp_path / "prompt.txt"
    prompt_file.write_text("show the temperature trend")
    rc = main(
        ["disambiguate", "--prompt", str(prompt_file), "--schema", str(h5_file)]
    )
    assert rc == 0
    assert "/measurements/temperature" in capsys.readouterr().out


def test_kb_build_and_retrieve(tmp_path, capsys):
    kb = kb_jsonl(tmp_path)
    index = tmp_path / "index.bin"
    rc = main(
        ["kb", "build", "--kb", str(kb), "--out", str(index), "--hash-embedder"]
    )
    assert rc == 0
    sizes = json.loads(capsys.readouterr().out)["sizes"]
    assert sizes == {"access": 1, "preprocess": 1, "visualize": 1}

    rc = main(
        [
            "retrieve",
            "--prompt",
            "plot temperature",
            "--kb",
            str(index),
            "--hash-embedder",
        ]
    )
    assert rc == 0
    out = capsys.readouterr().out
    assert out.startswith("plot temperature\n\n")
    assert out.count("```python") == 3
    for kind in ("access", "preprocess", "visualize"):
        assert f"[{kind}]" in out


def write_config(tmp_path, server_url, **overrides):
    cfg = {
        "model": "mock",
        "server_url": server_url,
        "runner_cmd": "stub",
        "max_iterations": 3,
        **overrides,
    }
    p = tmp_path / "config.json"
    p.write_text(json.dumps(cfg))
    return p


def test_bench_run_and_report_over_http(tmp_path, capsys):
    suite = write_suite(tmp_path, 2)
    with MockModelServer(
        rules=[("SENTINEL-ERR", CORRECT_SCRIPT), ("TASK:t1 ", CORRECT_SCRIPT)],
        default_reply=FAILING_SCRIPT,
    ) as server:
        cfg = write_config(tmp_path, server.base_url)
        out = tmp_path / "report.json"
        rc = main(
            [
                "bench",
                "run",
                "--suite",
                str(suite),
                "--config",
                str(cfg),
                "--out",
                str(out),
                "--workdir",
                str(tmp_path / "work"),
            ]
        )
        assert rc == 0
        report = json.loads(out.read_text())
        assert len(report["traces"]) == 2
        outcomes = {t["task_id"]: t["terminal_outcome"] for t in report["traces"]}
        assert outcomes["t1"] == "Correct"
        assert outcomes["t2"] == "Correct"  # fixed via error feedback
        t2 = next(t for t in report["traces"] if t["task_id"] == "t2")
        assert t2["iterations_used"] == 2

    capsys.readouterr()
    rc = main(["bench", "report", "--in", str(out), "--format", "csv"])
    assert rc == 0
    csv = capsys.readouterr().out
    assert csv.splitlines()[0] == "config,iteration,correct_pct,runnable_pct,failed_pct"
    assert len(csv.strip().splitlines()) == 4  # header + 3 iterations

    rc = main(["bench", "report", "--in", str(out), "--format", "markdown"])
    assert rc == 0
    assert "| iteration |" in capsys.readouterr().out


def test_bench_run_with_retrieval_over_http(tmp_path, capsys):
    suite = write_suite(tmp_path, 1)
    kb = kb_jsonl(tmp_path)
    index = tmp_path / "index.bin"
    main(["kb", "build", "--kb", str(kb), "--out", str(index), "--hash-embedder"])
    capsys.readouterr()
    with MockModelServer(default_reply=CORRECT_SCRIPT) as server:
        cfg = write_config(
            tmp_path,
            server.base_url,
            retrieval=True,
            kb_index=str(index),
            max_iterations=2,
        )
        out = tmp_path / "report.json"
        rc = main(
            [
                "bench", "run",
                "--suite", str(suite),
                "--config", str(cfg),
                "--out", str(out),
                "--workdir", str(tmp_path / "work"),
            ]
        )
        assert rc == 0
        report = json.loads(out.read_text())
        assert report["traces"][0]["terminal_outcome"] == "Correct"
        # the served prompt carried both context blocks in order
        final_prompt = server.seen_prompts[-1]
        assert final_prompt.startswith("TASK:t1 ")
        assert "Dataset context (from the file):" in final_prompt
        assert "Reference examples:" in final_prompt
        assert final_prompt.index("Dataset context") < final_prompt.index(
            "Reference examples:"
        )


def test_bench_multi_config_file(tmp_path, capsys):
    suite = write_suite(tmp_path, 1)
    with MockModelServer(default_reply=CORRECT_SCRIPT) as server:
        cfg = tmp_path / "configs.json"
        cfg.write_text(
            json.dumps(
                {
                    "configs": [
                        {
                            "name": "a",
                            "server_url": server.base_url,
                            "runner_cmd": "stub",
                            "max_iterations": 1,
                        },
                        {
                            "name": "b",
                            "server_url": server.base_url,
                            "runner_cmd": "stub",
                            "max_iterations": 2,
                        },
                    ]
                }
            )
        )
        out = tmp_path / "report.json"
        rc = main(
            [
                "bench", "run",
                "--suite", str(suite),
                "--config", str(cfg),
                "--out", str(out),
                "--workdir", str(tmp_path / "w"),
            ]
        )
        assert rc == 0
        report = json.loads(out.read_text())
        assert {t["config"] for t in report["traces"]} == {"a", "b"}
