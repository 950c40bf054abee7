import os
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parent.parent


def mnist_data_dir():
    env = os.environ.get("ZORRO_DATA_DIR")
    candidates = [Path(env)] if env else []
    candidates.append(REPO_ROOT / "data" / "mnist")
    for cand in candidates:
        if cand.is_dir():
            return cand
    return None


@pytest.fixture(scope="session")
def mnist_dir():
    d = mnist_data_dir()
    if d is None:
        pytest.skip("MNIST IDX files not found (set ZORRO_DATA_DIR or populate data/mnist)")
    return d


@pytest.fixture(scope="session")
def mnist_train(mnist_dir):
    from zorro.data import load_idx, resolve_mnist

    return load_idx(*resolve_mnist(mnist_dir, "train"))
