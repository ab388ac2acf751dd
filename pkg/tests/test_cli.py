import numpy as np
import pytest

from motioninpaint import cli, io, metrics, synth
from motioninpaint.errors import NumericalError

FAST = ["--levels", "2", "--iterations", "20", "--flow-iterations", "20"]


@pytest.fixture
def corpus(tmp_path):
    assert cli.main(["synth", "-o", str(tmp_path / "s"), "--height", "24", "--width", "24", "--frames", "3"]) == 0
    assert cli.main(["degrade", str(tmp_path / "s/frames"), "-o", str(tmp_path / "d"),
                     "--mask-output", str(tmp_path / "m"), "--size", "0.15", "0.2"]) == 0
    return tmp_path


def test_synth_writes_frames_and_flows(tmp_path):
    assert cli.main(["synth", "-o", str(tmp_path), "--kind", "rotating", "--frames", "4", "--height", "16",
                     "--width", "16"]) == 0
    assert io.read_sequence(tmp_path / "frames").shape == (4, 16, 16, 1)
    _, v, w = synth.rotating_sequence(16, 16, 4)
    assert np.allclose(io.read_flow(tmp_path / "forward_flow"), v, atol=1e-6)
    assert np.allclose(io.read_flow(tmp_path / "backward_flow"), w, atol=1e-6)


def test_inpaint_end_to_end(corpus, capsys):
    t = corpus
    assert cli.main(["inpaint", str(t / "d"), str(t / "m"), "-o", str(t / "r"), "--forward-flow", str(t / "v"),
                     "--backward-flow", str(t / "w"), "--trace", str(t / "trace.txt"), *FAST]) == 0
    degraded = io.read_sequence(t / "d")
    restored = io.read_sequence(t / "r")
    mask = io.read_mask(t / "m")
    assert np.array_equal(restored[~mask], degraded[~mask])
    trace = io.read_trace(t / "trace.txt")
    assert [lev for lev, _ in trace] == [1, 0]
    capsys.readouterr()
    assert cli.main(["metrics", "--restored", str(t / "r"), "--reference", str(t / "s/frames"), "--mask", str(t / "m"),
                     "--flow", str(t / "v"), "--flow-reference", str(t / "s/forward_flow")]) == 0
    report = dict(line.split(": ") for line in capsys.readouterr().out.splitlines())
    expected = metrics.endpoint_error(io.read_flow(t / "v"), io.read_flow(t / "s/forward_flow"))
    assert float(report["epe"]) == expected
    before = metrics.image_metrics(degraded, io.read_sequence(t / "s/frames"), mask)["mse_omega"]
    assert float(report["mse_omega"]) < before


def test_empty_mask_returns_input(corpus):
    t = corpus
    io.write_mask(t / "empty", np.zeros((3, 24, 24), bool))
    assert cli.main(["inpaint", str(t / "d"), str(t / "empty"), "-o", str(t / "r"), *FAST]) == 0
    assert np.array_equal(io.read_sequence(t / "r"), io.read_sequence(t / "d"))


def test_flow_and_pyramid_commands(corpus):
    t = corpus
    assert cli.main(["flow", str(t / "s/frames"), "-o", str(t / "v"), "--backward-flow", str(t / "w"), *FAST]) == 0
    assert io.read_flow(t / "v").shape == (2, 24, 24, 2) and io.read_flow(t / "w").shape == (2, 24, 24, 2)
    assert cli.main(["pyramid", str(t / "d"), "--mask", str(t / "m"), "-o", str(t / "p"), "--levels", "2"]) == 0
    assert io.read_sequence(t / "p/level_1").shape == (3, 12, 12, 1)
    assert io.read_mask(t / "p/level_1_mask").shape == (3, 12, 12)


def test_config_file_and_print_config(tmp_path, capsys):
    (tmp_path / "run.cfg").write_text("lambda3 = 4\nlevels = 3\n")
    assert cli.main(["inpaint", "--config", str(tmp_path / "run.cfg"), "--levels", "2", "--print-config"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert "lambda3 = 4.0" in lines and "levels = 2" in lines


def test_usage_errors(corpus, capsys):
    t = corpus
    assert cli.main(["inpaint", str(t / "d")]) == 1
    assert cli.main(["inpaint", str(t / "d"), str(t / "m"), "-o", str(t / "r"), "--lambda1", "abc"]) == 1
    assert cli.main(["metrics"]) == 1
    (t / "bad.cfg").write_text("nonsense = 1\n")
    assert cli.main(["inpaint", "--config", str(t / "bad.cfg"), "--print-config"]) == 1
    with pytest.raises(SystemExit) as exc:
        cli.main(["nocommand"])
    assert exc.value.code == 1
    assert "nonsense" in capsys.readouterr().err


def test_data_errors(corpus, capsys):
    t = corpus
    assert cli.main(["inpaint", str(t / "missing"), str(t / "m"), "-o", str(t / "r")]) == 2
    io.write_mask(t / "small", np.zeros((2, 24, 24), bool))
    assert cli.main(["inpaint", str(t / "d"), str(t / "small"), "-o", str(t / "r")]) == 2
    assert "small" in capsys.readouterr().err


def test_numerical_abort(corpus, monkeypatch, capsys):
    def boom(*args, **kwargs):
        raise NumericalError("non-finite value at iteration 3: frame 0, row 1, column 2, channel 0")

    monkeypatch.setattr(cli, "run_pipeline", boom)
    t = corpus
    assert cli.main(["inpaint", str(t / "d"), str(t / "m"), "-o", str(t / "r")]) == 3
    assert "iteration 3" in capsys.readouterr().err
