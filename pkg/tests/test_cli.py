import json
import shutil
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from aberrasim.cli import main, output_schema
from aberrasim.imaging import read_image, write_png16
from aberrasim.psf import read_psfg

SMALL = ["--grid", "2", "--kernel-size", "15", "--pupil-n", "32"]


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, command, *argv):
    code, out, err = run(capsys, command, *argv, "--json")
    assert code == 0, err
    doc = json.loads(out)
    jsonschema.validate(doc, output_schema(command))
    return doc


@pytest.fixture
def sharp_images(tmp_path):
    rng = np.random.default_rng(0)
    d = tmp_path / "sharp"
    d.mkdir()
    for name in ("one", "two"):
        write_png16(d / f"{name}.png", np.kron(rng.random((8, 8, 3)), np.ones((8, 8, 1))))
    return d


def test_trace_plate(capsys, plate_path):
    doc = run_json(capsys, "trace", "--prescription", plate_path)
    (ray,) = doc["rays"]
    assert [h["surface"] for h in ray["hits"]] == [1, 2]
    assert ray["image_point"][:2] == pytest.approx([0.0, 0.0], abs=1e-12)
    # 1 mm air, 5 mm of glass at n = 1.5, 10 mm air from the stop plane; object 100 mm ahead
    assert ray["opl"] == pytest.approx(100 + 1 + 7.5 + 10)


def test_trace_fan(capsys, double_gauss):
    doc = run_json(capsys, "trace", "--fan", 11, "--field", 20)
    assert len(doc["rays"]) == 11


def test_trace_defaults_to_json_output(capsys, plate_path):
    code, out, _ = run(capsys, "trace", "--prescription", plate_path)
    assert code == 0 and json.loads(out)["command"] == "trace"


def test_malformed_prescription(capsys, tmp_path, plate_path):
    bad = tmp_path / "bad.json"
    doc = json.loads(plate_path.read_text())
    doc["surfaces"][1]["curvature"] = "flat"
    bad.write_text(json.dumps(doc))
    code, _, err = run(capsys, "trace", "--prescription", bad)
    assert code == 2
    assert "curvature" in err


def test_missing_prescription_is_io_error(capsys, tmp_path):
    code, _, err = run(capsys, "trace", "--prescription", tmp_path / "nope.json")
    assert code == 4 and err


def test_psf_command(capsys, tmp_path):
    out = tmp_path / "g.psfg"
    doc = run_json(capsys, "psf", "--distance", 10, "--size", "64x64", "--out", out,
                   "--dump-png", tmp_path / "m.png", *SMALL)
    assert doc["rows"] == doc["cols"] == 2 and doc["kernel_size"] == 15
    grid = read_psfg(out)
    assert grid.kernels.shape == (2, 2, 3, 15, 15)
    assert (tmp_path / "m.png").exists()


def test_psf_requires_out(capsys):
    code, _, err = run(capsys, "psf", "--distance", 0)
    assert code == 2 and "--out" in err


def test_psf_bad_distance(capsys, tmp_path):
    code, _, _ = run(capsys, "psf", "--distance", 300, "--out", tmp_path / "g.psfg")
    assert code == 2


def test_simulate_and_metrics(capsys, sharp_images, tmp_path):
    src = sharp_images / "one.png"
    out = tmp_path / "blurred.png"
    doc = run_json(capsys, "simulate", src, "--distance", 100, "--out", out, "--no-noise", *SMALL)
    assert read_image(out).shape == (64, 64, 3)
    m = run_json(capsys, "metrics", src, out)
    assert m["psnr"] == pytest.approx(doc["psnr"], abs=1e-3)
    assert 0 < m["ssim"] < 1


def test_metrics_shape_mismatch(capsys, tmp_path):
    write_png16(tmp_path / "a.png", np.zeros((8, 8)))
    write_png16(tmp_path / "b.png", np.zeros((8, 9)))
    code, _, _ = run(capsys, "metrics", tmp_path / "a.png", tmp_path / "b.png")
    assert code == 2


def test_dataset_command(capsys, sharp_images, tmp_path):
    out = tmp_path / "ds"
    doc = run_json(capsys, "dataset", sharp_images, "--distances", "0,50", "--out", out,
                   "--cache-dir", tmp_path / "cache", *SMALL)
    assert doc["entries"] == 4 and doc["errors"] == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest["entries"]) == 4
    assert len(list((tmp_path / "cache").glob("*.psfg"))) == 2


def test_dataset_bad_distances(capsys, sharp_images, tmp_path):
    code, _, _ = run(capsys, "dataset", sharp_images, "--distances", "0:0:1", "--out", tmp_path)
    assert code == 2


def test_mtf_gaussian(capsys, tmp_path):
    doc = run_json(capsys, "mtf", "--gaussian", 2, "--out", tmp_path / "m.csv")
    assert doc["found"] and doc["mtf50"] == pytest.approx(0.0937, abs=0.002)
    assert (tmp_path / "m.csv").read_text().startswith("cycles_per_pixel,modulation")


def test_mtf_kernel_file(capsys, tmp_path):
    k = np.zeros((5, 5))
    k[2, 2] = 1
    np.save(tmp_path / "k.npy", k)
    doc = run_json(capsys, "mtf", "--kernel", tmp_path / "k.npy")
    assert doc["mtf50"] == 0.5 and doc["found"] is False


def test_mtf_needs_one_source(capsys):
    code, _, _ = run(capsys, "mtf")
    assert code == 2


def test_text_output_is_not_json(capsys):
    code, out, _ = run(capsys, "mtf", "--gaussian", 2, "--text")
    assert code == 0 and out.startswith("MTF50")


def test_inn_roundtrip(capsys, tmp_path):
    doc = run_json(capsys, "inn-roundtrip", "--seed", 7, "--k", 12, "--save-weights", tmp_path / "w.cinn")
    assert doc["passed"] and doc["max_abs_error"] < 12e-5
    again = run_json(capsys, "inn-roundtrip", "--seed", 7, "--weights", tmp_path / "w.cinn")
    assert again["max_abs_error"] == doc["max_abs_error"]


def test_inn_roundtrip_corrupt_weights(capsys, tmp_path):
    (tmp_path / "w.cinn").write_bytes(b"garbage")
    code, _, _ = run(capsys, "inn-roundtrip", "--weights", tmp_path / "w.cinn")
    assert code == 2


def test_negative_seed_rejected(capsys):
    code, _, _ = run(capsys, "mtf", "--gaussian", 1, "--seed", -1)
    assert code == 2


@pytest.mark.skipif(shutil.which("aberrasim") is None, reason="console script not installed")
def test_console_script():
    res = subprocess.run(["aberrasim", "mtf", "--gaussian", "2", "--json"], capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["command"] == "mtf"


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "aberrasim", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "aberrasim" in res.stdout
