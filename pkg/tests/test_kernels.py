import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mzapprox import _jit, kernels


@given(st.integers(0, 12), st.integers(0, 1000))
def test_sph_harm_numba_matches_numpy(L, seed):
    x = np.random.default_rng(seed).standard_normal((30, 3))
    x /= np.linalg.norm(x, axis=1)[:, None]
    a = kernels.real_sph_harm_numba(x, L)
    b = kernels.real_sph_harm_numpy(x, L)
    assert np.max(np.abs(a - b)) < 1e-12


def test_sph_harm_at_poles():
    x = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])
    for fn in (kernels.real_sph_harm_numba, kernels.real_sph_harm_numpy):
        Y = fn(x, 5)
        assert np.all(np.isfinite(Y))
        for l in range(6):
            # only zonal harmonics survive at the poles
            assert Y[0, l * l + l] == pytest.approx(np.sqrt(2 * l + 1))
            mask = np.ones((l + 1) ** 2 - l * l, dtype=bool)
            mask[l] = False
            assert np.allclose(Y[:, l * l : (l + 1) ** 2][:, mask], 0.0, atol=1e-12)


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("eps", [0.05, 0.12])
def test_greedy_torus_backends_agree(d, eps):
    cands = np.random.default_rng(d).random((3000, d))
    a = kernels.greedy_separated_torus_numba(cands, eps)
    b = kernels.greedy_separated_torus_numpy(cands, eps)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("eps", [0.08, 0.2])
def test_greedy_sphere_backends_agree(eps):
    cands = np.random.default_rng(7).standard_normal((4000, 3))
    cands /= np.linalg.norm(cands, axis=1)[:, None]
    a = kernels.greedy_separated_sphere_numba(cands, eps)
    b = kernels.greedy_separated_sphere_numpy(cands, eps)
    assert np.array_equal(a, b)
    kept = cands[a]
    g = np.clip(kept @ kept.T, -1, 1)
    np.fill_diagonal(g, -1)
    assert np.arccos(g.max()) >= eps * (1 - 1e-12)


def test_backend_reports_switch():
    assert kernels.backend() == ("numba" if _jit.USE_NUMBA else "numpy")


def test_environment_flag_disables_numba():
    env = dict(os.environ, MZAPPROX_DISABLE_NUMBA="1")
    out = subprocess.run(
        [sys.executable, "-c", "from mzapprox import kernels; print(kernels.backend())"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "numpy"
