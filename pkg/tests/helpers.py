import numpy as np


def central_difference(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def relative_error(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12))


def worst_gradient_error(model, n_points, seed, batch=16):
    """Largest relative error between analytic and central-difference gradients."""
    gen = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_points):
        A = gen.standard_normal((batch, model.d))
        if model.name == "logistic":
            y = (gen.random(batch) < 0.5).astype(float)
        else:
            y = gen.standard_normal(batch)
        x = gen.standard_normal(model.dim)
        fd = central_difference(lambda z: model.loss(z, A, y), x)
        worst = max(worst, relative_error(model.grad(x, A, y), fd))
    return worst
