import numpy as np
import pytest

from isgd import data, nn


def central_diff(f, w, coords, h=1e-5):
    """Central finite differences of scalar ``f`` at ``w`` along ``coords``."""
    out = np.empty(len(coords))
    for k, i in enumerate(coords):
        wp = w.copy()
        wm = w.copy()
        wp[i] += h
        wm[i] -= h
        out[k] = (f(wp) - f(wm)) / (2 * h)
    return out


def rel_err(a, b, floor=1e-8):
    a = np.asarray(a)
    b = np.asarray(b)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def random_problem(rng, sizes=None, n=None, activation=None, decay=None):
    if sizes is None:
        depth = rng.integers(0, 3)
        sizes = [int(rng.integers(2, 9))] + [int(rng.integers(2, 12)) for _ in range(depth)] \
            + [int(rng.integers(2, 6))]
    spec = nn.NetworkSpec(tuple(sizes), activation or str(rng.choice(["relu", "tanh"])),
                          float(rng.uniform(0, 1e-2)) if decay is None else decay)
    n = n or int(rng.integers(1, 20))
    X = rng.standard_normal((n, spec.n_inputs))
    y = rng.integers(0, spec.n_classes, size=n)
    w = nn.init_network(spec, int(rng.integers(1 << 30)))
    w += 0.1 * rng.standard_normal(w.shape)
    return spec, w, (X, y)


def reference_sgd(ds, spec, lr, epochs, batch_size, seed, variant="plain", mu=0.0):
    """Hand-rolled fixed-cycle SGD, independent of the trainer loop."""
    w = nn.init_network(spec, seed)
    v = np.zeros_like(w)
    perm = data.permute_dataset(ds, seed)
    n = len(perm) // batch_size
    traj = []
    for j in range(epochs * n):
        t = j % n
        X = perm.features[t * batch_size:(t + 1) * batch_size]
        y = perm.labels[t * batch_size:(t + 1) * batch_size]
        if variant == "plain":
            w = w - lr * nn.forward_backward(w, (X, y), spec).grad
        elif variant == "momentum":
            v = mu * v - lr * nn.forward_backward(w, (X, y), spec).grad
            w = w + v
        else:
            v = mu * v - lr * nn.forward_backward(w + mu * v, (X, y), spec).grad
            w = w + v
        traj.append(w)
    return traj


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
