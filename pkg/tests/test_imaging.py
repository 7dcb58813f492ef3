import csv
import hashlib
import json
from importlib import resources

import jsonschema
import numpy as np
import pytest

from aberrasim.errors import ValidationError
from aberrasim.imaging import (GridCache, NoiseModel, add_noise, conv_valid, convolve_patchwise,
                               default_distances, degrade, generate_dataset, illuminance_map, mtf50,
                               mtf_from_psf, parse_distances, psnr, read_image, simulate,
                               slanted_edge_mtf, ssim, write_mtf_csv, write_png16)
from importlib import import_module
from aberrasim.psf import PSFGrid

from oracles import (brute_force_conv, brute_force_psnr, brute_force_ssim, gaussian_kernel,
                     gaussian_mtf, slanted_edge)

simulate_mod = import_module("aberrasim.imaging.simulate")
FAST = dict(pupil_n=32, padding=2, grid=8, kernel_size=15)


def digest(a):
    return hashlib.sha256(np.ascontiguousarray(a).tobytes()).hexdigest()


def random_grid(rng, rows, cols, K, channels=1):
    k = rng.random((rows, cols, channels, K, K))
    k /= k.sum(axis=(-1, -2), keepdims=True)
    return PSFGrid(0.0, k, np.ones((rows, cols)), ("Y",) if channels == 1 else ("R", "G", "B")[:channels])


# ---------------------------------------------------------------- convolution

def test_identity_grid_leaves_image_unchanged(rng):
    img = rng.random((64, 96, 3))
    out = convolve_patchwise(img, PSFGrid.identity(4, 4, 3, size=9))
    assert np.array_equal(out, img)


def test_constant_image_stays_constant(rng):
    grid = random_grid(rng, 4, 4, 9)
    out = convolve_patchwise(np.full((64, 64), 0.5), grid)
    assert np.max(np.abs(out - 0.5)) < 1e-6


def test_single_kernel_matches_dense_convolution(rng):
    img = rng.random((16, 16))
    k = rng.random((3, 3))
    k /= k.sum()
    out = convolve_patchwise(img, PSFGrid.uniform(k, 2, 2, 1))
    np.testing.assert_allclose(out, brute_force_conv(img, k, "reflect"), atol=1e-12)


def test_asymmetric_kernel_is_flipped(rng):
    k = np.zeros((3, 3))
    k[1, 2] = 1.0  # shifts content one pixel to the right
    img = rng.random((24, 24))
    out = convolve_patchwise(img, PSFGrid.uniform(k, 2, 2, 1))
    np.testing.assert_allclose(out[:, 1:], img[:, :-1], atol=1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_fft_and_direct_paths_agree(seed):
    rng = np.random.default_rng(seed)
    img = rng.random((64, 64))
    grid = random_grid(rng, 4, 4, 9)
    a = convolve_patchwise(img, grid, method="fft")
    b = convolve_patchwise(img, grid, method="direct")
    assert np.max(np.abs(a - b)) < 1e-6


def test_conv_valid_shapes(rng):
    src = rng.random((20, 30, 2))
    k = rng.random((5, 5, 2))
    out = conv_valid(src, k, "direct")
    assert out.shape == (16, 26, 2)
    np.testing.assert_allclose(out, conv_valid(src, k, "fft"), atol=1e-10)


def test_kernel_larger_than_patch_is_rejected(rng):
    with pytest.raises(ValidationError):
        convolve_patchwise(rng.random((32, 32)), PSFGrid.identity(4, 4, 1, size=9))


def test_uneven_image_size(rng):
    img = rng.random((50, 70, 3))
    out = convolve_patchwise(img, PSFGrid.identity(4, 4, 3, size=5))
    assert out.shape == img.shape
    assert np.array_equal(out, img)


def test_grid_channel_count_mismatch(rng):
    with pytest.raises(ValidationError):
        convolve_patchwise(rng.random((32, 32, 2)), PSFGrid.identity(2, 2, 3, size=3))


def test_seams_are_smooth_on_a_gradient(double_gauss):
    H = W = 512
    y, x = np.indices((H, W))
    img = 0.1 + 0.8 * (x + y) / (H + W)
    grid = simulate_mod.psf_grid(double_gauss, 125.0, (H, W), pupil_n=32, padding=2, grid=16,
                                 kernel_size=25)
    out = convolve_patchwise(img, grid, apply_illuminance=False)
    margin = 32  # keep away from the image border
    worst = 0.0
    for s in range(W // 16, W - 1, W // 16):
        step_out = out[margin:-margin, s] - out[margin:-margin, s - 1]
        step_in = img[margin:-margin, s] - img[margin:-margin, s - 1]
        worst = max(worst, np.max(np.abs(step_out - step_in)))
        step_out = out[s, margin:-margin] - out[s - 1, margin:-margin]
        step_in = img[s, margin:-margin] - img[s - 1, margin:-margin]
        worst = max(worst, np.max(np.abs(step_out - step_in)))
    assert worst < 2 / 255


def test_illuminance_map_interpolates_between_centres():
    ill = np.array([[1.0, 0.5], [0.5, 0.0]])
    grid = PSFGrid.uniform(np.ones((1, 1)), 2, 2, 1, illuminance=ill)
    m = illuminance_map(grid, (4, 4))
    # pixel 1 lies a quarter of the way from the first patch centre to the second
    assert m[0, 0] == 1.0 and m[3, 3] == 0.0
    assert m[1, 1] == pytest.approx(0.75 * 0.75 * 1.0 + 2 * 0.75 * 0.25 * 0.5)
    assert np.all(np.diff(m, axis=1) <= 0) and np.all(np.diff(m, axis=0) <= 0)


def test_illuminance_scales_output(rng):
    ill = np.full((2, 2), 0.25)
    out = convolve_patchwise(np.full((16, 16), 0.8), PSFGrid.uniform(np.ones((1, 1)), 2, 2, 1, illuminance=ill))
    np.testing.assert_allclose(out, 0.2)


# ---------------------------------------------------------------------- noise

def test_zero_noise_returns_input(rng):
    img = rng.random((32, 32))
    assert np.array_equal(add_noise(img, NoiseModel(0.0, 0.0, 5)), img)


def test_same_seed_same_noise(rng):
    img = rng.random((32, 32))
    assert np.array_equal(add_noise(img, NoiseModel(seed=9)), add_noise(img, NoiseModel(seed=9)))
    assert not np.array_equal(add_noise(img, NoiseModel(seed=9)), add_noise(img, NoiseModel(seed=10)))


def test_noise_variance_matches_model():
    img = np.full((1000, 1000), 0.5)
    out = add_noise(img, NoiseModel(1e-3, 1e-4, 3))
    assert np.var(out - img) == pytest.approx(0.5 * 1e-3 + 1e-4, rel=0.05)


def test_noise_output_is_clamped(rng):
    out = add_noise(rng.random((64, 64)), NoiseModel(0.5, 0.5, 1))
    assert out.min() >= 0.0 and out.max() <= 1.0


def test_negative_noise_parameters_rejected():
    with pytest.raises(ValidationError):
        NoiseModel(-1e-3, 0.0)


# ------------------------------------------------------------------- simulate

def test_simulate_with_identity_optics(monkeypatch, rng, double_gauss):
    monkeypatch.setattr(simulate_mod, "psf_grid",
                        lambda p, d, shape, **kw: PSFGrid.identity(4, 4, 3, size=5))
    img = rng.random((32, 32, 3))
    assert np.array_equal(simulate(img, double_gauss, 10.0), img)


def test_simulate_rejects_out_of_range_distance(double_gauss):
    with pytest.raises(ValidationError):
        simulate(np.zeros((8, 8)), double_gauss, 130.0)


@pytest.fixture(scope="module")
def scene():
    rng = np.random.default_rng(2)
    base = np.kron(rng.random((16, 16, 3)), np.ones((8, 8, 1)))  # blocky texture with hard edges
    return 0.1 + 0.8 * base


def test_focus_beats_far_defocus(double_gauss, scene):
    cache = GridCache(double_gauss, **FAST)
    sharp = simulate(scene, double_gauss, 0.0, cache=cache)
    blurred = simulate(scene, double_gauss, 125.0, cache=cache)
    assert psnr(scene, sharp) > psnr(scene, blurred)


def test_simulate_is_deterministic(double_gauss, scene):
    noise = NoiseModel(1e-3, 1e-4)
    a = simulate(scene, double_gauss, 50.0, noise, seed=4, **FAST)
    b = simulate(scene, double_gauss, 50.0, noise, seed=4, **FAST)
    assert digest(a) == digest(b)


def test_disk_cache_matches_fresh_grid(double_gauss, scene, tmp_path):
    fresh = simulate(scene, double_gauss, 25.0, **FAST)
    cache = GridCache(double_gauss, tmp_path, **FAST)
    first = simulate(scene, double_gauss, 25.0, cache=cache)
    assert len(list(tmp_path.glob("*.psfg"))) == 1
    reread = simulate(scene, double_gauss, 25.0, cache=GridCache(double_gauss, tmp_path, **FAST))
    assert digest(fresh) == digest(first) == digest(reread)


def test_cache_dir_from_environment(monkeypatch, tmp_path, double_gauss):
    monkeypatch.setenv("ABERRASIM_CACHE_DIR", str(tmp_path))
    assert GridCache(double_gauss).dir == tmp_path


def test_degrade_clamps(rng):
    out = degrade(rng.random((16, 16)) * 3 - 1, PSFGrid.identity(2, 2, 1, size=3))
    assert out.min() >= 0 and out.max() <= 1


# -------------------------------------------------------------------- dataset

def test_default_sweep():
    d = default_distances()
    assert len(d) == 101 and len(set(d.tolist())) == 101
    assert d[0] == -125.0 and d[-1] == 125.0 and d[50] == 0.0


@pytest.mark.parametrize("text,expected", [
    ("0,25,-50", [0, 25, -50]),
    ("-10:5:10", [-10, -5, 0, 5, 10]),
    ("125", [125]),
])
def test_parse_distances(text, expected):
    np.testing.assert_allclose(parse_distances(text), expected)


@pytest.mark.parametrize("text", ["", "a,b", "0:0:5", "0:1", "0,200"])
def test_parse_distances_rejects(text):
    with pytest.raises(ValidationError):
        parse_distances(text)


@pytest.fixture
def sharp_dir(tmp_path, scene):
    d = tmp_path / "sharp"
    d.mkdir()
    write_png16(d / "a.png", scene)
    write_png16(d / "b.png", scene[::-1])
    return d


def test_dataset_entries_and_manifest(sharp_dir, tmp_path, double_gauss):
    dists = [-125.0, -50.0, 0.0, 50.0, 125.0]
    out = tmp_path / "out"
    m = generate_dataset(sharp_dir, dists, out, double_gauss, seed=1, **FAST)
    assert len(m.entries) == 10
    assert {e.distance_mm for e in m.entries} == set(dists)
    assert len({e.seed for e in m.entries}) == 10
    doc = json.loads((out / "manifest.json").read_text())
    schema = json.loads(resources.files("aberrasim.data").joinpath("schemas/manifest.schema.json").read_text())
    jsonschema.validate(doc, schema)
    for e in m.entries:
        img = read_image(out / e.degraded)
        assert img.shape == (128, 128, 3)


def test_dataset_rerun_is_byte_identical(sharp_dir, tmp_path, double_gauss):
    runs = []
    for name in ("r1", "r2"):
        generate_dataset(sharp_dir, [0.0, 75.0], tmp_path / name, double_gauss, seed=3, **FAST)
        runs.append({p.name: digest(np.frombuffer(p.read_bytes(), np.uint8))
                     for p in sorted((tmp_path / name / "degraded").iterdir())})
    assert runs[0] == runs[1] and len(runs[0]) == 4


def test_dataset_records_unreadable_file(sharp_dir, tmp_path, double_gauss):
    (sharp_dir / "broken.png").write_bytes(b"not a png")
    m = generate_dataset(sharp_dir, [0.0], tmp_path / "out", double_gauss, **FAST)
    assert len(m.entries) == 2
    assert len(m.errors) == 1 and m.errors[0]["sharp"].endswith("broken.png")


def test_png16_round_trip(tmp_path, rng):
    img = rng.random((10, 12, 3))
    write_png16(tmp_path / "x.png", img)
    back = read_image(tmp_path / "x.png")
    assert np.max(np.abs(back - img)) <= 0.5 / 65535 + 1e-12


# -------------------------------------------------------------------- metrics

def test_psnr_examples():
    a = np.zeros((8, 8))
    assert psnr(a, a) == 100.0
    assert psnr(a, np.ones((8, 8))) == pytest.approx(0.0)
    assert psnr(a, np.full((8, 8), 0.1)) == pytest.approx(20.0)


def test_psnr_matches_explicit_sum(rng):
    a, b = rng.random((16, 16)), rng.random((16, 16))
    assert psnr(a, b) == pytest.approx(brute_force_psnr(a, b), rel=1e-12)


def test_ssim_examples():
    a = np.full((8, 8), 0.3)
    assert ssim(a, a) == pytest.approx(1.0)
    ramp = np.tile(np.linspace(0, 1, 16), (16, 1))
    assert ssim(ramp, ramp) == pytest.approx(1.0)
    # flat images of different level: only the luminance term survives
    z, h = np.zeros((8, 8)), np.full((8, 8), 0.5)
    c1 = 1e-4
    assert ssim(z, h) == pytest.approx(c1 / (0.25 + c1), rel=1e-9)
    lo, hi = np.full((16, 16), 0.2), np.full((16, 16), 0.8)
    assert ssim(lo, hi) == pytest.approx((0.32 + c1) / (0.68 + c1), abs=1e-9)
    assert ssim(lo, hi) == pytest.approx(0.4707, abs=1e-4)


def test_ssim_matches_windowed_sums(rng):
    a, b = rng.random((8, 8)), rng.random((8, 8))
    assert ssim(a, b) == pytest.approx(brute_force_ssim(a, b), abs=1e-9)


def test_metrics_reject_shape_mismatch():
    with pytest.raises(ValidationError):
        psnr(np.zeros((4, 4)), np.zeros((4, 5)))


# ------------------------------------------------------------------------ MTF

def test_delta_mtf_is_flat():
    k = np.zeros((5, 5))
    k[2, 2] = 1
    np.testing.assert_allclose(mtf_from_psf(k).modulation, 1.0, atol=1e-12)


def test_gaussian_kernel_mtf():
    curve = mtf_from_psf(gaussian_kernel(2.0))
    sel = curve.frequency <= 0.25
    np.testing.assert_allclose(curve.modulation[sel], gaussian_mtf(curve.frequency[sel], 2.0), rtol=0.01)


def test_mtf_is_one_at_dc(rng):
    assert mtf_from_psf(rng.random((7, 7))).modulation[0] == pytest.approx(1.0)


def test_mtf50_of_gaussian():
    res = mtf50(mtf_from_psf(gaussian_kernel(2.0)))
    expected = np.sqrt(np.log(2) / 2) / (np.pi * 2.0)
    assert res.found and res.frequency == pytest.approx(expected, abs=0.002)
    assert res.frequency == pytest.approx(0.0937, abs=0.002)


def test_mtf50_not_reached():
    k = np.zeros((3, 3))
    k[1, 1] = 1
    assert tuple(mtf50(mtf_from_psf(k))) == (0.5, False)


def test_slanted_edge_recovers_gaussian():
    curve = slanted_edge_mtf(slanted_edge(sigma=1.5))
    f = np.linspace(0.02, 0.3, 15)
    np.testing.assert_allclose(curve(f), gaussian_mtf(f, 1.5), rtol=0.05)


def test_slanted_edge_ideal_step_flags_nyquist():
    res = mtf50(slanted_edge_mtf(slanted_edge(sigma=0.0)))
    assert tuple(res) == (0.5, False)


def test_slanted_edge_without_edge_rejected():
    with pytest.raises(ValidationError):
        slanted_edge_mtf(np.full((64, 64), 0.5))


def test_mtf_csv(tmp_path):
    curve = mtf_from_psf(gaussian_kernel(1.0))
    write_mtf_csv(curve, tmp_path / "m.csv")
    rows = list(csv.reader(open(tmp_path / "m.csv")))
    assert rows[0] == ["cycles_per_pixel", "modulation"]
    assert len(rows) == len(curve.frequency) + 1
    assert float(rows[1][1]) == pytest.approx(1.0)
