"""Separable synthetic classification data for training checks."""
import numpy as np

# class k wins where x @ W[:, k] is largest; a linear rule therefore scores 1.0
W_TRUE = np.array([[1.0, -0.5, -0.5],
                   [0.0, 0.866, -0.866]])


def separable_rows(n=200, seed=0, margin=0.3, dim=2):
    rng = np.random.default_rng(seed)
    X, y = [], []
    while len(X) < n:
        x = rng.uniform(-2, 2, size=dim)
        s = x[:2] @ W_TRUE
        top = np.sort(s)
        if top[-1] - top[-2] < margin:
            continue
        X.append(x)
        y.append(int(np.argmax(s)))
    return np.array(X), np.array(y)


def linear_oracle_accuracy(X, y):
    return float(((X[:, :2] @ W_TRUE).argmax(axis=1) == y).mean())
