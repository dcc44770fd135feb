import numpy as np
import pytest
import torch

from cervixseg.phantom import PhantomSpec, generate_sample


def make_phantoms(n, image_size=32, preterm_fraction=0.5, seed=77):
    spec = PhantomSpec(image_size=image_size, preterm_fraction=preterm_fraction, seed=seed)
    return [generate_sample(spec, i) for i in range(n)]


@pytest.fixture(scope="session")
def tiny_phantoms():
    """24 small phantoms, both classes, one patient each."""
    return make_phantoms(24)


@pytest.fixture(autouse=True)
def _single_threaded_torch():
    # keeps CPU runs deterministic and avoids oversubscription in CI
    torch.set_num_threads(max(1, torch.get_num_threads()))
    yield
