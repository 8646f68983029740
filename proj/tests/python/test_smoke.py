"""End-to-end smoke tests for the Python bindings."""

import math

import numpy as np
import pytest

import _mid as mid


def test_texture_generation_is_deterministic():
    a = mid.gen_texture_image(8, 8, 42)
    b = mid.gen_texture_image(8, 8, 42)
    assert a.shape == (1, 8, 8)
    np.testing.assert_array_equal(a, b)
    assert a.min() == 0.0 and a.max() == 1.0


def test_scene_labels_partition():
    scene = mid.gen_scene(7, outlier_fraction_lo=0.4, outlier_fraction_hi=0.6)
    pts, labels = scene["points"], scene["labels"]
    assert pts.shape == (len(labels), 2)
    frac = sum(labels) / len(labels)
    assert 0.3 < frac < 0.7


def test_signal_pair_is_zero_mean_unit_rms():
    semg, ecg = mid.gen_signal_pair(3)
    assert abs(semg.mean()) < 1e-9
    assert abs(ecg.mean()) < 1e-9
    assert math.isclose(np.sqrt((semg**2).mean()), 1.0, rel_tol=1e-9)


def test_mix_at_snr_round_trip():
    rng = np.random.default_rng(0)
    sig = rng.normal(size=256)
    intf = rng.normal(size=256)
    mixed = mid.mix_at_snr(sig, intf, -5.0)
    delta = mixed - sig
    got = 10.0 * np.log10((sig**2).mean() / (delta**2).mean())
    assert math.isclose(got, -5.0, abs_tol=1e-9)


def test_metrics_basics():
    img = mid.gen_texture_image(8, 8, 1)
    assert mid.psnr(img, img) == math.inf
    assert mid.ssim(img, img) == pytest.approx(1.0)
    assert mid.rmse(img, img) == 0.0
    assert mid.recall_auc([5.0], 10.0) == pytest.approx(0.5)


def test_noise_and_errors():
    img = mid.gen_texture_image(8, 8, 2)
    noisy = mid.noise_to(img, 5, {"kind": "gaussian-additive", "steps": 5, "sigma_total": 0.2}, 9)
    assert noisy.shape == img.shape
    assert mid.rmse(img, noisy) > 0.0
    with pytest.raises(ValueError):
        mid.noise_to(img, 9, {"kind": "gaussian-additive", "steps": 5}, 9)


def test_train_denoise_checkpoint_round_trip(tmp_path):
    data = [mid.gen_texture_image(8, 8, s) for s in range(4)]
    process = {"kind": "gaussian-additive", "steps": 4, "sigma_total": 0.2}
    model = {
        "kind": "image",
        "image_h": 8,
        "image_w": 8,
        "psi_channels": 3,
        "psi_hidden": 4,
        "phi_channels": 4,
    }
    ckpt, history = mid.train(data, process, model, {"epochs": 2, "batch_size": 4, "seed": 5})
    assert ckpt.trained_epochs == 2
    assert len(history) == 2
    assert all(math.isfinite(ls) and math.isfinite(ln) for ls, ln in history)

    noisy = mid.noise_to(data[0], 4, process, 11)
    result = mid.denoise(ckpt, noisy)
    assert result["output"].shape == noisy.shape
    assert len(result["trace"]) == result["t_hat"]

    path = tmp_path / "ckpt.midc"
    mid.save_checkpoint(ckpt, path)
    back = mid.load_checkpoint(path)
    assert back.trained_epochs == 2
    again = mid.denoise(back, noisy)
    np.testing.assert_array_equal(result["output"], again["output"])


def test_tensor_file_round_trip(tmp_path):
    a = np.linspace(0.0, 1.0, 24).reshape(2, 3, 4)
    path = tmp_path / "t.midt"
    mid.write_tensor(path, a)
    np.testing.assert_array_equal(mid.read_tensor(path), a)
