import numpy as np
import pytest
import torch

from tryon.fixtures import make_fixture_tree
from tryon.harness.config import desk_preset


def central_difference(fn, tensor, h=1e-4, indices=None):
    """Numerical gradient of scalar ``fn()`` w.r.t. ``tensor`` (modified in place).

    Only ``indices`` (flat positions) are probed when given; the rest stay 0.
    """
    grad = torch.zeros_like(tensor)
    flat = tensor.data.view(-1)
    gflat = grad.view(-1)
    probe = range(flat.numel()) if indices is None else indices
    for i in probe:
        orig = flat[i].item()
        flat[i] = orig + h
        plus = float(fn())
        flat[i] = orig - h
        minus = float(fn())
        flat[i] = orig
        gflat[i] = (plus - minus) / (2 * h)
    return grad


def relative_error(analytic, numeric):
    a = analytic.detach().double().reshape(-1)
    n = numeric.detach().double().reshape(-1)
    return float((a - n).norm() / max(float(n.norm()), float(a.norm()), 1e-12))


@pytest.fixture
def fd():
    return central_difference


@pytest.fixture
def rel_err():
    return relative_error


@pytest.fixture(scope="session")
def fixture_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("tree")
    make_fixture_tree(root, subjects=4, splits=("train", "test"), size=(64, 48), seed=0)
    return root


@pytest.fixture(scope="session")
def tiny_config():
    """Desk preset shrunk so a full train/infer cycle takes a couple of seconds."""
    cfg = desk_preset()
    return cfg.with_overrides({
        "warp.epochs": 4, "warp.decay_start": 2,
        "mapper.steps": 3, "denoiser.steps": 6, "denoiser.timesteps": 10,
    })


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def pytest_terminal_summary(terminalreporter):
    import sys
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in module.RESULTS:
        terminalreporter.write_line(line)
