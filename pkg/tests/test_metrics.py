import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edgesr.imageio import Image, save_image
from edgesr.metrics import MissingCounterpart, evaluate_dir, psnr, ssim
from oracles import ref_psnr, ref_ssim


def img(a):
    return Image(np.asarray(a, dtype=np.float64))


def test_psnr_identical_is_inf():
    a = img(np.full((4, 4, 3), 10))
    assert psnr(a, a) == math.inf


def test_psnr_unit_error():
    a = np.full((8, 8, 3), 100.0)
    assert abs(psnr(img(a), img(a + 1)) - 48.1308) < 1e-3
    assert psnr(img(a), img(a + 1)) == pytest.approx(20 * math.log10(255), abs=1e-12)


def test_psnr_full_scale_error_is_zero_db():
    assert psnr(img(np.zeros((3, 3, 3))), img(np.full((3, 3, 3), 255))) == 0.0


def test_psnr_dim_mismatch():
    with pytest.raises(ValueError, match="dims"):
        psnr(img(np.zeros((3, 3, 3))), img(np.zeros((3, 4, 3))))


def test_psnr_matches_reference(rng):
    a, b = rng.integers(0, 256, (10, 10, 3)), rng.integers(0, 256, (10, 10, 3))
    assert psnr(img(a), img(b)) == pytest.approx(ref_psnr(a, b), abs=1e-9)


def test_psnr_monotone_in_noise_amplitude(rng):
    base = rng.uniform(60, 190, (16, 16, 3))
    noise = rng.uniform(-1, 1, base.shape)
    values = [psnr(img(base), img(base + amp * noise)) for amp in (1, 2, 5, 10, 30, 60)]
    assert all(x > y for x, y in zip(values, values[1:]))


def test_ssim_identical_is_exactly_one(rng):
    a = img(rng.integers(0, 256, (16, 16, 3)))
    assert ssim(a, a) == 1.0


def test_ssim_constant_images():
    c1 = (0.01 * 255) ** 2
    value = ssim(img(np.zeros((12, 12, 3))), img(np.full((12, 12, 3), 255)))
    assert abs(value - c1 / (255 ** 2 + c1)) < 1e-9


def test_ssim_matches_double_loop_reference_on_100_pairs():
    rng = np.random.default_rng(2024)
    for i in range(100):
        a = rng.integers(0, 256, (32, 32, 3)).astype(np.float64)
        if i % 2:
            b = np.clip(a + rng.normal(0, 20, a.shape), 0, 255)
        else:
            b = rng.integers(0, 256, (32, 32, 3)).astype(np.float64)
        assert abs(ssim(img(a), img(b)) - ref_ssim(a, b)) < 1e-6


def test_ssim_small_image_is_error():
    with pytest.raises(ValueError, match="window"):
        ssim(img(np.zeros((10, 20, 3))), img(np.zeros((10, 20, 3))))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_ssim_symmetric_and_bounded(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.integers(0, 256, (14, 13, 3)), rng.integers(0, 256, (14, 13, 3))
    s1, s2 = ssim(img(a), img(b)), ssim(img(b), img(a))
    assert abs(s1 - s2) < 1e-12
    assert s1 < 1.0


def _write(dirpath, images):
    dirpath.mkdir(exist_ok=True)
    for name, data in images.items():
        save_image(img(data), dirpath / name)


def test_evaluate_same_dir(tmp_path, rng):
    _write(tmp_path / "hr", {f"{i}.png": rng.integers(0, 256, (16, 16, 3)) for i in range(3)})
    report = evaluate_dir(tmp_path / "hr", tmp_path / "hr")
    assert [n for n, _, _ in report.per_image] == ["0.png", "1.png", "2.png"]
    assert all(p == math.inf and s == 1.0 for _, p, s in report.per_image)
    assert report.infinite_count == 3
    assert "inf" in report.table()


def test_evaluate_mean_and_csv(tmp_path, rng):
    hr = {f"{i}.png": rng.integers(0, 256, (16, 16, 3)) for i in range(4)}
    sr = {k: np.clip(v + rng.integers(-9, 10, v.shape), 0, 255) for k, v in hr.items()}
    _write(tmp_path / "hr", hr)
    _write(tmp_path / "sr", sr)
    report = evaluate_dir(tmp_path / "sr", tmp_path / "hr")
    assert abs(report.psnr_db - np.mean([p for _, p, _ in report.per_image])) < 1e-9
    assert abs(report.ssim - np.mean([s for _, _, s in report.per_image])) < 1e-12
    report.write_csv(tmp_path / "m.csv")
    rows = list(csv.reader(open(tmp_path / "m.csv")))
    assert rows[0] == ["name", "psnr_db", "ssim"] and len(rows) == 5


def test_evaluate_missing_counterpart(tmp_path, rng):
    _write(tmp_path / "hr", {"a.png": rng.integers(0, 256, (16, 16, 3)), "b.png": rng.integers(0, 256, (16, 16, 3))})
    _write(tmp_path / "sr", {"a.png": rng.integers(0, 256, (16, 16, 3))})
    with pytest.raises(MissingCounterpart) as err:
        evaluate_dir(tmp_path / "sr", tmp_path / "hr")
    assert err.value.missing == ["b.png"]
