"""Both kernel backends compute the same thing."""

import subprocess
import sys

import numpy as np
import pytest

import voxstats.kernels as K
from voxstats.kernels import _reference as ref

fast = pytest.importorskip(
    "voxstats.kernels._fast", reason="compiled kernels not built"
)


class TestBackendEquivalence:
    def test_conv_forward(self, rng):
        for _ in range(5):
            x = rng.normal(size=(3, 9, 7, 4))
            w = rng.normal(size=(3, 3, 4, 6))
            b = rng.normal(size=6)
            a = fast.conv2d_forward(x, w, b)
            r = ref.conv2d_forward(x, w, b)
            np.testing.assert_allclose(a, r, rtol=1e-12, atol=1e-12)

    def test_conv_backward(self, rng):
        x = rng.normal(size=(2, 8, 8, 3))
        w = rng.normal(size=(3, 3, 3, 5))
        dy = rng.normal(size=(2, 6, 6, 5))
        for a, r in zip(fast.conv2d_backward(x, w, dy),
                        ref.conv2d_backward(x, w, dy)):
            np.testing.assert_allclose(a, r, rtol=1e-12, atol=1e-12)

    def test_maxpool_roundtrip(self, rng):
        x = rng.normal(size=(2, 10, 6, 3))
        ya, sa = fast.maxpool2_forward(x)
        yr, sr = ref.maxpool2_forward(x)
        np.testing.assert_array_equal(ya, yr)
        np.testing.assert_array_equal(sa, sr)
        dy = rng.normal(size=ya.shape)
        np.testing.assert_array_equal(
            fast.maxpool2_backward(dy, sa, 10, 6),
            ref.maxpool2_backward(dy, sr, 10, 6),
        )

    def test_bicoherence_sums(self, rng):
        spectra = rng.normal(size=(20, 50)) + 1j * rng.normal(size=(20, 50))
        spectra = np.ascontiguousarray(spectra)
        ma, pa = fast.bicoherence_sums(spectra, 16)
        mr, pr = ref.bicoherence_sums(spectra, 16)
        np.testing.assert_allclose(ma, mr, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(pa, pr, rtol=1e-12, atol=1e-12)

    def test_phase_wrap_branches_agree(self):
        # Angles engineered to land exactly on the wrap boundary.
        spectra = np.array(
            [[1.0 + 0j, -1.0 + 0j, 1.0 + 0j, -1.0 + 0j, 1.0 + 0j]],
            dtype=complex,
        )
        ma, pa = fast.bicoherence_sums(spectra, 2)
        mr, pr = ref.bicoherence_sums(spectra, 2)
        np.testing.assert_array_equal(pa, pr)
        assert pa.min() > -np.pi - 1e-12 and pa.max() <= np.pi + 1e-12


class TestSelection:
    def test_active_backend_reported(self):
        assert K.backend in ("c", "python")

    def test_env_override_python(self):
        code = (
            "import voxstats.kernels as K; print(K.backend)"
        )
        out = subprocess.run(
            [sys.executable, "-c", code],
            env={"PATH": "/usr/bin:/bin", "VOXSTATS_KERNELS": "python"},
            capture_output=True, text=True, check=True,
        )
        assert out.stdout.strip() == "python"

    def test_env_override_invalid(self):
        code = "import voxstats.kernels"
        out = subprocess.run(
            [sys.executable, "-c", code],
            env={"PATH": "/usr/bin:/bin", "VOXSTATS_KERNELS": "turbo"},
            capture_output=True, text=True,
        )
        assert out.returncode != 0

    def test_dispatch_coerces_dtypes(self):
        x = np.ones((1, 4, 4, 1), dtype=np.float32)
        w = np.ones((3, 3, 1, 2), dtype=np.float32)
        y = K.conv2d_forward(x, w, np.zeros(2, dtype=int))
        assert y.dtype == np.float64
        np.testing.assert_array_equal(y, np.full((1, 2, 2, 2), 9.0))
