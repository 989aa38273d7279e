import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fairclust.instance import Group, Instance, euclidean_distances

settings.register_profile("repo", deadline=None, derandomize=True, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


def random_instance(seed, n=8, nf=6, k=2, m=2, p=1.0, dim=2, overlap=False):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 10, size=(n + nf, dim))
    clients = list(range(n))
    if overlap:
        groups = [Group.uniform(rng.choice(n, size=max(1, n // 2), replace=False).tolist())
                  for _ in range(m)]
    else:
        lab = rng.integers(0, m, n)
        lab[:m] = np.arange(m)
        groups = [Group.uniform([i for i in clients if lab[i] == s]) for s in range(m)]
    return Instance(euclidean_distances(pts), clients, list(range(n, n + nf)), groups, k, p)


@pytest.fixture
def line_instance():
    """Points 0, 2 (clients, one group, weight 1 each) and a facility at 1."""
    pts = np.array([[0.0], [2.0], [1.0]])
    return Instance(euclidean_distances(pts), [0, 1], [2], [Group((0, 1), (1.0, 1.0))], 1, 2)
