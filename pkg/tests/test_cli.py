import json
import struct

import pytest

from driftids.cli import main, parse_config
from driftids.evaluate import SCHEMA_VERSION
from driftids.features import FEATURE_CSV_COLUMNS, read_feature_csv
from driftids.packets import build_ethernet_ipv4, write_packet_csv, write_pcap
from driftids.synth import dump_spec, gen_packet_trace, read_boundaries, mixed_dataset1_spec


@pytest.fixture
def trace_pcap(tmp_path):
    packets = gen_packet_trace(n_packets=500, seed=1)
    path = tmp_path / "t.pcap"
    write_pcap([(p.timestamp_us, build_ethernet_ipv4(p)) for p in packets], path)
    return path


def test_extract_pcap(tmp_path, trace_pcap, capsys):
    out = tmp_path / "f.csv"
    assert main(["extract", "--in", str(trace_pcap), "--out", str(out)]) == 0
    msg = capsys.readouterr().out
    assert "packets read: 500" in msg and "skipped: 0" in msg
    assert len(read_feature_csv(out)) > 0


def test_extract_packet_csv(tmp_path, capsys):
    src = tmp_path / "p.csv"
    write_packet_csv(gen_packet_trace(n_packets=200, seed=2), src)
    out = tmp_path / "f.csv"
    assert main(["extract", "--in", str(src), "--out", str(out)]) == 0
    # labels survive the CSV path, so the windows are labeled too
    labels = {str(v.label) for v in read_feature_csv(out)}
    assert labels == {"benign", "malicious"}


def test_extract_bad_magic(tmp_path, capsys):
    bad = tmp_path / "bad.pcap"
    bad.write_bytes(struct.pack("<I", 0xDEADBEEF) + bytes(20))
    assert main(["extract", "--in", str(bad), "--out", str(tmp_path / "f.csv")]) == 2
    assert "BadMagic" in capsys.readouterr().err


def test_extract_empty_capture(tmp_path):
    empty = tmp_path / "e.pcap"
    write_pcap([], empty)
    out = tmp_path / "f.csv"
    assert main(["extract", "--in", str(empty), "--out", str(out)]) == 0
    assert out.read_text() == ",".join(FEATURE_CSV_COLUMNS) + "\n"


def test_extract_missing_file(tmp_path):
    assert main(["extract", "--in", str(tmp_path / "nope.pcap"), "--out", str(tmp_path / "f")]) == 2


def test_synth_mixed_dataset(tmp_path, capsys):
    spec = tmp_path / "d1.spec"
    spec.write_text(dump_spec(mixed_dataset1_spec(shuffle_seed=5)))
    out = tmp_path / "stream.csv"
    args = ["synth", "--spec", str(spec), "--pools", "synthetic:1", "--out", str(out)]
    assert main(args) == 0
    assert len(read_feature_csv(out)) == 19_622
    assert read_boundaries(tmp_path / "stream.boundaries") == (5441, 10688, 14972)
    first = out.read_bytes()
    assert main(args) == 0
    assert out.read_bytes() == first


def test_synth_errors(tmp_path):
    spec = tmp_path / "bad.spec"
    spec.write_text("phase = A | x | 1 | 1\n")
    assert main(["synth", "--spec", str(spec), "--pools", "synthetic",
                 "--out", str(tmp_path / "s.csv")]) == 3
    spec.write_text(dump_spec(mixed_dataset1_spec(shuffle_seed=1)))
    pools = tmp_path / "pools"
    pools.mkdir()
    # pool directory without the needed files -> InsufficientPool
    assert main(["synth", "--spec", str(spec), "--pools", str(pools),
                 "--out", str(tmp_path / "s.csv")]) == 3


def _config(tmp_path, **over):
    cfg = {"learner": "arf", "repetitions": 5, "seed": 3, "samples_per_phase": 150}
    cfg.update(over)
    if cfg["learner"] == "arf":
        cfg.setdefault("param.n_trees", 3)
    path = tmp_path / "exp.cfg"
    path.write_text("".join(f"{k} = {v}\n" for k, v in cfg.items()))
    return path


def test_run_writes_one_file_per_rep(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", str(_config(tmp_path)), "--out-dir", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == sorted([f"run_{i:02d}.json" for i in range(1, 6)]
                           + [f"run_{i:02d}_trace.csv" for i in range(1, 6)]
                           + ["aggregate.json"])
    agg = json.loads((out / "aggregate.json").read_text())
    assert agg["runs"] == 5 and agg["kind"] == "aggregate"
    assert agg["drift_events"]["best"] or agg["drift_events"]["worst"]


def test_run_flag_overrides(tmp_path):
    out = tmp_path / "out"
    cfg = _config(tmp_path, learner="nb")
    assert main(["run", "--config", str(cfg), "--out-dir", str(out), "--reps", "2",
                 "--seed", "9"]) == 0
    run = json.loads((out / "run_02.json").read_text())
    assert run["config"]["seed"] == 9 and run["config"]["repetition"] == 2
    assert not (out / "run_03.json").exists()


def test_run_single_rep_cannot_aggregate(tmp_path):
    cfg = _config(tmp_path, repetitions=1)
    assert main(["run", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == 4


def test_run_single_rep_without_aggregate(tmp_path):
    cfg = _config(tmp_path, repetitions=1, aggregate="false", learner="hat")
    assert main(["run", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == 0


def test_run_batch_reference(tmp_path):
    cfg = _config(tmp_path, learner="batch-rf", repetitions=2, **{"param.n_trees": 4})
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--out-dir", str(out)]) == 0
    run = json.loads((out / "run_01.json").read_text())
    assert "validation" in run


def test_run_with_spec_and_stream(tmp_path):
    spec = tmp_path / "s.spec"
    spec.write_text(dump_spec(mixed_dataset1_spec()))
    cfg = _config(tmp_path, learner="nb", repetitions=2, spec="s.spec", pools="synthetic:2")
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--out-dir", str(out)]) == 0
    assert json.loads((out / "run_01.json").read_text())["samples"] == 19_622

    stream = tmp_path / "stream.csv"
    assert main(["synth", "--spec", str(spec), "--pools", "synthetic:2", "--out", str(stream)]) == 0
    cfg = _config(tmp_path, learner="nb", repetitions=2, stream="stream.csv")
    assert main(["run", "--config", str(cfg), "--out-dir", str(tmp_path / "o2")]) == 0


def test_run_evaluation_error_exit(tmp_path):
    cfg = _config(tmp_path, **{"param.no_such_option": 1})
    assert main(["run", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == 4


@pytest.mark.parametrize("text", ["learner = svm\n", "repetitions = 0\n", "colour = red\n",
                                  "seed = abc\n"])
def test_bad_config_is_usage_error(tmp_path, text):
    path = tmp_path / "c.cfg"
    path.write_text(text)
    assert main(["run", "--config", str(path), "--out-dir", str(tmp_path / "o")]) == 1


def test_parse_config_values():
    cfg = parse_config("learner = hat  # comment\nscale = false\nparam.grace_period = 50\n"
                       "param.split_confidence = 1e-5\n")
    assert cfg.learner == "hat" and cfg.scale is False
    assert cfg.params == {"grace_period": 50, "split_confidence": 1e-5}


def test_report(tmp_path, capsys):
    out = tmp_path / "o"
    main(["run", "--config", str(_config(tmp_path, repetitions=2)), "--out-dir", str(out)])
    nb_cfg = _config(tmp_path, learner="nb", repetitions=2)
    main(["run", "--config", str(nb_cfg), "--out-dir", str(tmp_path / "nb")])
    capsys.readouterr()
    assert main(["report", str(out / "aggregate.json"), str(tmp_path / "nb" / "aggregate.json")]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("Algorithm")
    assert len(lines) == 4
    assert lines[2].startswith("ARF") and lines[3].startswith("Naive Bayes")
    assert "±" in lines[2]


def test_report_errors(tmp_path, capsys):
    assert main(["report"]) == 1
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    base = {"kind": "run", "learner": "nb", "metrics": {}, "timing": {}}
    a.write_text(json.dumps(dict(base, schema_version=SCHEMA_VERSION)))
    b.write_text(json.dumps(dict(base, schema_version=SCHEMA_VERSION + 1)))
    capsys.readouterr()
    assert main(["report", str(a), str(b)]) == 1
    assert "SchemaVersionError" in capsys.readouterr().err
    junk = tmp_path / "junk.json"
    junk.write_text("{not json")
    assert main(["report", str(junk)]) == 1


def test_usage_errors(capsys):
    assert main([]) == 1
    with pytest.raises(SystemExit) as info:
        main(["run"])
    assert info.value.code == 1
