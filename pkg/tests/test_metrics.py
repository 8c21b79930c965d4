import numpy as np
import pytest

from iscat.common.errors import InvalidArgumentError, ShapeMismatchError
from iscat.metrics import MetricReport, gaussian_window, mse, ssim, summarize


def _ssim_reference(x, y, dynamic_range=4.0, size=11):
    """Direct loop over every fully interior window."""
    w = gaussian_window(size).numpy()
    c1 = (0.01 * dynamic_range) ** 2
    c2 = (0.03 * dynamic_range) ** 2
    values = []
    for i in range(x.shape[0] - size + 1):
        for j in range(x.shape[1] - size + 1):
            a = x[i:i + size, j:j + size]
            b = y[i:i + size, j:j + size]
            mu_a, mu_b = np.sum(w * a), np.sum(w * b)
            var_a = np.sum(w * (a - mu_a) ** 2)
            var_b = np.sum(w * (b - mu_b) ** 2)
            cov = np.sum(w * (a - mu_a) * (b - mu_b))
            values.append(
                (2 * mu_a * mu_b + c1) * (2 * cov + c2)
                / ((mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2))
            )
    return float(np.mean(values))


def test_mse():
    a = np.zeros((4, 4), dtype=np.complex128)
    b = np.full((4, 4), 1.0 + 1.0j)
    assert mse(a, b) == 2.0
    assert mse(b, b) == 0.0
    with pytest.raises(ShapeMismatchError):
        mse(a, np.zeros((3, 3)))


def test_gaussian_window():
    w = gaussian_window()
    assert w.shape == (11, 11)
    assert float(w.sum()) == pytest.approx(1.0, abs=1e-15)
    assert float(w[5, 5]) == float(w.max())


def test_ssim_identity_and_reference(rng):
    x = rng.uniform(0, 4, size=(24, 20))
    y = x + rng.normal(0, 0.5, size=x.shape)
    assert ssim(x, x) == pytest.approx(1.0, abs=1e-12)
    assert ssim(x, y) == pytest.approx(_ssim_reference(x, y), abs=1e-10)
    assert ssim(x, y) < 1.0
    # Complex maps are compared on their real part
    assert ssim(x + 1j * y, y) == pytest.approx(ssim(x, y), abs=1e-15)


def test_ssim_rejects_bad_input(rng):
    x = rng.uniform(size=(16, 16))
    with pytest.raises(ShapeMismatchError):
        ssim(x, x[:, :12])
    with pytest.raises(InvalidArgumentError):
        ssim(x[:8, :8], x[:8, :8])
    with pytest.raises(InvalidArgumentError):
        ssim(x, x, dynamic_range=0.0)


def test_summarize():
    s = summarize([1.0, 2.0, 3.0])
    assert (s.mean, s.median, s.std) == (2.0, 2.0, 1.0)
    assert summarize([5.0]).std == 0.0
    assert summarize([4.0, 1.0, 3.0, 2.0]).median == 2.5
    with pytest.raises(InvalidArgumentError):
        summarize([])


def test_metric_report(rng):
    report = MetricReport()
    truth = rng.uniform(0, 2, size=(16, 16))
    report.add("a", truth, truth)
    report.add("b", truth + 0.1, truth)
    assert len(report) == 2
    agg = report.aggregate()
    assert agg["mse"].mean == pytest.approx(0.005)
    assert report.rows()[0] == {"sample": "a", "mse": 0.0, "ssim": pytest.approx(1.0)}
