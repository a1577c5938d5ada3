import json
import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from logerfdeconv.cli import EXIT_IO, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main
from logerfdeconv.config import ConfigError, RunConfig, format_config, parse_config
from logerfdeconv.imageio import (
    HEADER_SIZE,
    MAGIC,
    BadMagicError,
    DimensionOverflowError,
    ImageFormatError,
    TruncatedImageError,
    read_image,
    write_image,
    write_pgm,
)
from logerfdeconv.rundir import read_manifest, write_manifest, write_table1, write_trace
from logerfdeconv.experiment import Metrics


# -- config -----------------------------------------------------------------


def test_empty_config_gives_defaults():
    assert parse_config("") == RunConfig()
    assert parse_config("# only a comment\n\n") == RunConfig()


def test_config_values_and_aliases():
    cfg = parse_config("P = 64\nnoise_var=1e-3  # trailing\nsweep_gb=0.5, 1, 2\nmap_marginal=no\n")
    assert cfg.size == 64 and cfg.noise_variance == 1e-3
    assert cfg.sweep_gb == (0.5, 1.0, 2.0) and cfg.map_marginal is False


def test_bad_value_names_line():
    with pytest.raises(ConfigError, match=r"line 2.*noise_variance"):
        parse_config("size=64\nnoise_variance=abc\n")


@pytest.mark.parametrize(
    "text,pattern",
    [
        ("bogus=1", r"line 1: unknown key"),
        ("size=64\nsize=32", r"line 2: duplicate"),
        ("size=", r"missing value"),
        ("size", r"expected key=value"),
        ("size=2.5", r"not an integer"),
        ("\n\nfwhm=-1", r"fwhm.*line 3"),
        ("beta_n=0", r"beta_n"),
        ("sweep_gn=1,inf", r"sweep_gn"),
        ("T=nan", r"nan"),
    ],
)
def test_config_errors(text, pattern):
    with pytest.raises(ConfigError, match=pattern):
        parse_config(text)


def test_uniform_prior_is_accepted():
    cfg = parse_config("alpha_n=1\nbeta_n=inf\n")
    prior = cfg.gamma_prior()
    assert prior.alpha_n == 1.0 and math.isinf(prior.beta_n)


def test_config_roundtrip():
    cfg = parse_config("seed=7\nsize=64\nsweep_gd=0.25,4\nalpha_b=2\nbeta_b=0.5\n")
    assert parse_config(format_config(cfg)) == cfg
    assert parse_config(format_config(RunConfig())) == RunConfig()


# -- images -----------------------------------------------------------------


@given(hnp.arrays(np.float64, st.tuples(st.integers(1, 9), st.integers(1, 9))))
@settings(max_examples=50, deadline=None)
def test_image_roundtrip_bit_exact(tmp_path_factory, img):
    path = tmp_path_factory.mktemp("img") / "x.img"
    write_image(path, img)
    back = read_image(path)
    assert back.shape == img.shape
    assert back.tobytes() == np.ascontiguousarray(img).tobytes()


def test_image_file_size_and_header(tmp_path):
    path = tmp_path / "a.img"
    write_image(path, np.zeros((128, 128)))
    raw = path.read_bytes()
    assert len(raw) == 16 + 8 * 128 * 128 == HEADER_SIZE + 8 * 16384
    assert raw[:8] == MAGIC
    assert struct.unpack("<II", raw[8:16]) == (128, 128)
    assert not (tmp_path / "a.img.tmp").exists()


def test_image_errors(tmp_path):
    good = tmp_path / "g.img"
    write_image(good, np.ones((4, 5)))
    raw = good.read_bytes()
    cases = {
        "trunc_data": (raw[:-3], TruncatedImageError),
        "trunc_header": (raw[:12], TruncatedImageError),
        "trunc_magic": (raw[:4], TruncatedImageError),
        "magic": (b"XXXXXXXX" + raw[8:], BadMagicError),
        "overflow": (MAGIC + struct.pack("<II", 1 << 15, 1 << 15), DimensionOverflowError),
        "trailing": (raw + b"\0", ImageFormatError),
    }
    for name, (data, exc) in cases.items():
        p = tmp_path / f"{name}.img"
        p.write_bytes(data)
        with pytest.raises(exc):
            read_image(p)
    assert issubclass(ImageFormatError, OSError)
    with pytest.raises(ValueError):
        write_image(tmp_path / "v.img", np.zeros(4))


def test_pgm(tmp_path):
    p = tmp_path / "a.pgm"
    img = np.array([[0.0, 1.0, 2.0], [3.0, -5.0, 0.5]])
    write_pgm(p, img, 0.0, 2.0)
    raw = p.read_bytes()
    head = b"P5\n3 2\n65535\n"
    assert raw.startswith(head)
    levels = np.frombuffer(raw[len(head):], dtype=">u2").reshape(2, 3)
    np.testing.assert_array_equal(levels, [[0, 32768, 65535], [65535, 0, 16384]])
    write_pgm(p, img)
    levels = np.frombuffer(p.read_bytes()[len(head):], dtype=">u2")
    assert levels.min() == 0 and levels.max() == 65535


# -- run directory ----------------------------------------------------------


def test_manifest_contents(tmp_path):
    write_manifest(tmp_path, "deconvolve", {"T": 5e-4}, 42, extra={"iterations": 10})
    m = read_manifest(tmp_path)
    assert m["command"] == "deconvolve" and m["seed"] == 42
    assert m["config"] == {"T": 5e-4} and m["iterations"] == 10
    for key in ("version", "python", "numpy", "argv"):
        assert key in m


def test_trace_and_table_csv(tmp_path):
    write_trace(tmp_path / "t.csv", np.array([[1, 2500.0, 0.1, 3.0, 1e-3]]))
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines == ["iter,gamma_n,gamma_d,gamma_b,delta_norm", "1,2500,0.10000000000000001,3,0.001"]
    write_table1(tmp_path / "tab.csv", {"Data": Metrics(9.5, 37.0), "PM": Metrics(5.0, 30.25)})
    assert (tmp_path / "tab.csv").read_text().splitlines() == ["distance,Data,PM", "L2,9.5,5", "L1,37,30.25"]


# -- command line -----------------------------------------------------------


def test_cli_equiv_and_potential(capsys):
    assert main(["equiv", "--gamma-d", "1", "--gamma-b", "1"]) == EXIT_OK
    out = dict(line.split() for line in capsys.readouterr().out.splitlines())
    assert float(out["lambda"]) == pytest.approx(0.32054, rel=1e-4)
    assert float(out["s"]) == pytest.approx(1.55987, rel=1e-4)
    assert main(["potential", "0", "1"]) == EXIT_OK
    rows = capsys.readouterr().out.splitlines()
    assert rows[0].startswith("x,phi,phi_prime")
    assert rows[1].split(",")[:3] == ["0", "0", "0"]


def test_cli_usage_errors(capsys):
    with pytest.raises(SystemExit) as e:
        main([])
    assert e.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as e:
        main(["equiv", "--gamma-d", "x", "--gamma-b", "1"])
    assert e.value.code == EXIT_USAGE


def test_cli_error_codes(tmp_path, capsys):
    assert main(["metrics", "--estimate", str(tmp_path / "nope.img"), "--truth", str(tmp_path / "x")]) == EXIT_IO
    assert main(["equiv", "--gamma-d", "-1", "--gamma-b", "1"]) == EXIT_NUMERIC
    bad = tmp_path / "c.txt"
    bad.write_text("noise_variance=abc\n")
    code = main(["experiment", "--config", str(bad), "--out-dir", str(tmp_path / "run")])
    assert code == EXIT_USAGE
    assert "line 1" in capsys.readouterr().err


def test_cli_phantom_deconvolve_metrics(tmp_path, capsys):
    truth, data, run = tmp_path / "t.img", tmp_path / "y.img", tmp_path / "run"
    assert main(["make-phantom", "--size", "64", "--seed", "3", "--out", str(truth), "--data", str(data)]) == 0
    assert read_image(data).shape == (64, 64)
    args = ["deconvolve", "--data", str(data), "--fwhm", "3", "--seed", "3", "--max-iter", "60",
            "--out-dir", str(run)]
    assert main(args) == EXIT_OK
    m = read_manifest(run)
    assert m["seed"] == 3 and m["command"] == "deconvolve" and m["config"]["beta_n"] == "inf"
    assert (run / "trace.csv").exists() and (run / "pm.pgm").exists()
    capsys.readouterr()
    assert main(["metrics", "--estimate", str(run / "pm.img"), "--truth", str(truth)]) == EXIT_OK
    out = dict(line.split() for line in capsys.readouterr().out.splitlines())
    assert float(out["l2_percent"]) < 100
    bad = main(args[:-2] + ["--fixed-gamma", "1,2", "--out-dir", str(run)])
    assert bad == EXIT_USAGE


def test_cli_sample_prior_writes_histograms(tmp_path):
    out, hist = tmp_path / "x.img", tmp_path / "h.csv"
    assert main(["sample-prior", "--size", "16", "--seed", "1", "--out", str(out), "--hist", str(hist)]) == 0
    assert read_image(out).shape == (16, 16)
    assert hist.read_text().splitlines()[0].count(",") >= 2


def test_manifest_is_json(tmp_path):
    write_manifest(tmp_path, "x", {}, None)
    json.loads((tmp_path / "manifest").read_text())
