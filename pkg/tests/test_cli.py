import numpy as np
import pytest

from evrep import SensorGeometry, read_events_evt1, write_events_csv
from evrep.cli import main
from evrep.formats import read_pgm, read_ppm
from oracles import make_random_stream

G64 = SensorGeometry(64, 64)


def run(*argv):
    return main([str(a) for a in argv])


class TestConvert:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        s = make_random_stream(rng, 500, G64, t_max=10**6)
        a = tmp_path / "a.csv"
        write_events_csv(s, a)
        b = tmp_path / "b.evt1"
        c = tmp_path / "c.csv"
        assert run("convert", a, b, "--width", 64, "--height", 64) == 0
        assert run("convert", b, c) == 0
        assert a.read_bytes() == c.read_bytes()

    def test_missing_input_is_data_error(self, tmp_path, capsys):
        assert run("convert", tmp_path / "nope.csv", tmp_path / "out.evt1") == 1
        assert "error:" in capsys.readouterr().err

    def test_unknown_suffix_is_data_error(self, tmp_path):
        a = tmp_path / "a.csv"
        a.write_text("t_us,x,y,p\n")
        assert run("convert", a, tmp_path / "b.xyz", "--width", 64, "--height", 64) == 1

    def test_usage_error_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            run("convert")
        assert exc.value.code == 2


class TestRender:
    def test_30ms_stream_gives_three_ppm_files(self, tmp_path):
        evt = tmp_path / "bar.evt1"
        assert run("synth", evt, "--width", 64, "--height", 64,
                   "--duration-us", 30_000) == 0
        out = tmp_path / "frames"
        assert run("render", evt, out, "--rep", "fusion", "--tau", 10_000) == 0
        files = sorted(out.iterdir())
        assert [f.name for f in files] == ["0_fusion.ppm", "1_fusion.ppm", "2_fusion.ppm"]
        assert read_ppm(files[0]).shape == (3, 64, 64)

    def test_single_channel_rep_writes_pgm(self, tmp_path):
        evt = tmp_path / "bar.evt1"
        run("synth", evt, "--width", 64, "--height", 64, "--duration-us", 10_000)
        out = tmp_path / "frames"
        assert run("render", evt, out, "--rep", "frame", "--rep", "decay") == 0
        names = sorted(p.name for p in out.iterdir())
        assert names == ["0_decay.pgm", "0_frame.pgm"]
        assert read_pgm(out / "0_frame.pgm").shape == (64, 64)

    def test_annotations_emit_labels(self, tmp_path):
        evt = tmp_path / "bar.evt1"
        anns = tmp_path / "bar_ann.csv"
        run("synth", evt, "--width", 64, "--height", 64, "--duration-us", 30_000,
            "--annotations-out", anns, "--tau", 10_000)
        out = tmp_path / "frames"
        assert run("render", evt, out, "--annotations", anns) == 0
        labels = sorted(p.name for p in out.glob("*.txt"))
        assert labels == ["0.txt", "1.txt", "2.txt"]
        assert (out / "0.txt").read_text().startswith("0 ")

    def test_raw_float_dump(self, tmp_path):
        evt = tmp_path / "bar.evt1"
        run("synth", evt, "--width", 64, "--height", 64, "--duration-us", 10_000)
        out = tmp_path / "frames"
        assert run("render", evt, out, "--rep", "decay", "--raw-float") == 0
        plane = np.load(out / "0_decay.npy")
        assert plane.dtype == np.float64 and plane.shape == (64, 64)

    def test_png_format(self, tmp_path):
        evt = tmp_path / "bar.evt1"
        run("synth", evt, "--width", 64, "--height", 64, "--duration-us", 10_000)
        out = tmp_path / "frames"
        assert run("render", evt, out, "--format", "png") == 0
        assert (out / "0_fusion.png").is_file()


class TestSynth:
    def test_writes_evt1(self, tmp_path):
        evt = tmp_path / "bar.evt1"
        assert run("synth", evt, "--width", 64, "--height", 64,
                   "--duration-us", 50_000, "--events-per-edge", 2) == 0
        s = read_events_evt1(evt)
        assert len(s) == 50 * 2 * 2
        assert s.geometry == G64

    def test_bad_scenario_is_data_error(self, tmp_path, capsys):
        assert run("synth", tmp_path / "x.evt1", "--velocity", 0) == 1
        assert "velocity" in capsys.readouterr().err


class TestBench:
    def test_synthetic_report(self, tmp_path, capsys):
        assert run("bench", "--synthetic", "--width", 64, "--height", 64,
                   "--duration-us", 50_000) == 0
        out = capsys.readouterr().out
        assert "meps=" in out and "frames=5" in out

    def test_file_input(self, tmp_path, capsys):
        evt = tmp_path / "bar.evt1"
        run("synth", evt, "--width", 64, "--height", 64, "--duration-us", 20_000)
        capsys.readouterr()
        assert run("bench", evt) == 0
        assert "events=" in capsys.readouterr().out

    def test_no_input_is_error(self, capsys):
        assert run("bench") == 1
        assert "error:" in capsys.readouterr().err


class TestDataset:
    def test_pipeline_via_config(self, tmp_path, capsys):
        events_dir = tmp_path / "events"
        anns_dir = tmp_path / "anns"
        events_dir.mkdir(), anns_dir.mkdir()
        run("synth", events_dir / "s0.evt1", "--width", 64, "--height", 64,
            "--duration-us", 30_000, "--events-per-edge", 24,
            "--annotations-out", anns_dir / "s0.csv", "--tau", 10_000)
        cfg = tmp_path / "dataset.cfg"
        cfg.write_text(
            "events_dir=events\nannotations_dir=anns\nout_dir=out\n"
            "width=64\nheight=64\ntau_us=10000\nreps=fusion\n"
            "test_fraction=0.25\nseed=0\nmin_events=10\n")
        assert run("dataset", cfg) == 0
        out = capsys.readouterr().out
        assert "records=" in out
        assert (tmp_path / "out" / "manifest.jsonl").is_file()

    def test_bad_config_is_data_error(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("nonsense\n")
        assert run("dataset", cfg) == 1
        assert "error:" in capsys.readouterr().err


class TestHelp:
    @pytest.mark.parametrize("cmd", ["convert", "render", "dataset", "synth", "bench"])
    def test_subcommand_help_mentions_defaults(self, cmd, capsys):
        with pytest.raises(SystemExit) as exc:
            run(cmd, "--help")
        assert exc.value.code == 0
        text = capsys.readouterr().out
        assert "default" in text

    def test_unknown_command_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            run("frobnicate")
        assert exc.value.code == 2
