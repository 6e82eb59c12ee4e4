import math

import numpy as np
import pytest

import protoshot as ps


def make_episode(rng_seed, n_way=3, k_shot=2, q_query=3, dim=6, spread=2.0):
    """Random episode straight from a blob dataset."""
    rs = np.random.RandomState(rng_seed)
    means = rs.randn(n_way, dim) * spread
    ds = ps.generate_blobs(means, k_shot + q_query + 2, 1.0, rng_seed)
    return ps.sample_episode(
        ds, ps.EpisodeConfig(n_way, k_shot, q_query), ps.Rng(rng_seed)
    )


# --- independent oracles (plain python loops, no numpy vector paths) ---


def oracle_mean(points):
    n = len(points)
    dim = len(points[0])
    return [sum(p[j] for p in points) / n for j in range(dim)]


def oracle_sq_dist(a, b):
    return sum((x - y) ** 2 for x, y in zip(a, b))


def oracle_softmax_neg(dists):
    mx = max(-d for d in dists)
    exps = [math.exp(-d - mx) for d in dists]
    z = sum(exps)
    return [e / z for e in exps]


def oracle_log_posterior(query, protos, label):
    dists = [oracle_sq_dist(query, p) for p in protos]
    mx = max(-d for d in dists)
    z = sum(math.exp(-d - mx) for d in dists)
    return (-dists[label] - mx) - math.log(z)


def oracle_loss(queries, labels, protos):
    total = 0.0
    for q, y in zip(queries, labels):
        total -= oracle_log_posterior(list(q), protos, int(y))
    return total / len(queries)


def finite_difference_grads(net, episode, h=1e-5):
    """Central finite differences of the episodic loss over every parameter."""
    params = net.params()
    grads = []
    for pi, p in enumerate(params):
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            bumped = [q.copy() for q in params]
            bumped[pi][idx] += h
            lp = ps.loss_gradients(net.with_params(bumped), episode)[1]
            bumped[pi][idx] -= 2 * h
            lm = ps.loss_gradients(net.with_params(bumped), episode)[1]
            g[idx] = (lp - lm) / (2 * h)
        grads.append(g)
    return grads


def assert_grads_close(analytic, numeric, rel=1e-4, abs_floor=1e-7):
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.abs(n), abs_floor / rel)
        assert np.all(np.abs(a - n) <= rel * denom + abs_floor), (
            f"gradient mismatch: max err {np.max(np.abs(a - n))}"
        )


@pytest.fixture
def blob_dataset():
    means = np.array([[0.0, 0.0, 4.0], [4.0, 0.0, 0.0], [0.0, 4.0, 0.0]])
    return ps.generate_blobs(means, 40, 1.0, 2024, class_names=["TB", "Sick", "Healthy"])
