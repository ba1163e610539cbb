import importlib
import os
import subprocess
import sys

import numpy as np
import pytest

from esrqc import _pykernels, kernels


def _case(seed=0, rows=5, dim=16):
    rng = np.random.default_rng(seed)
    amps = rng.normal(size=(rows, dim)) + 1j * rng.normal(size=(rows, dim))
    idx0 = np.array([0, 2, 8, 10], dtype=np.int64)
    return amps, idx0, idx0 + 1, rng.uniform(size=rows)


def test_backend_name():
    assert kernels.BACKEND in ("cython", "python")


def test_backends_agree():
    ck = pytest.importorskip("esrqc._ckernels")
    amps, i0, i1, w = _case()
    m = (0.6, -0.8j, -0.8j, 0.6)
    a, b = amps.copy(), amps.copy()
    _pykernels.rotate_pairs(a, i0, i1, *m)
    ck.rotate_pairs(b, i0, i1, *m)
    assert np.allclose(a, b, atol=1e-15)
    assert _pykernels.pair_overlap(a, w, i0, i1) == pytest.approx(ck.pair_overlap(b, w, i0, i1))


def test_pair_overlap_definition():
    amps, i0, i1, w = _case(1)
    expect = np.sum(w[:, None] * amps[:, i0].conj() * amps[:, i1])
    assert kernels.pair_overlap(amps, w, i0, i1) == pytest.approx(expect)


def test_pure_python_override():
    code = "import esrqc.kernels as k; print(k.BACKEND)"
    env = dict(os.environ, ESRQC_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "python"
