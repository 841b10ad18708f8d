"""Independent brute-force reference implementations used only by tests.

Deliberately naive: double loops over samples, per-pair distance calls,
explicit per-class accumulation. Nothing here is imported from the
package under test, so agreement between the two is meaningful.
"""
import numpy as np


def cos_dist(u, v):
    nu = float(np.sqrt(np.dot(u, u)))
    nv = float(np.sqrt(np.dot(v, v)))
    return 1.0 - float(np.dot(u, v)) / (nu * nv)


def euc_dist(u, v):
    w = np.asarray(u, dtype=float) - np.asarray(v, dtype=float)
    return float(np.sqrt(np.dot(w, w)))


def centroids_by_class(data, labels, literal=False):
    data = np.asarray(data, dtype=float)
    labels = np.asarray(labels)
    t = len(labels)
    out = {}
    for k in sorted(set(int(v) for v in labels)):
        total = np.zeros(data.shape[1])
        count = 0
        for i in range(t):
            if int(labels[i]) == k:
                total = total + data[i]
                count += 1
        out[k] = total / (t if literal else count)
    return out


def cohesion(i, data, labels, dist=cos_dist, literal=False):
    data = np.asarray(data, dtype=float)
    labels = np.asarray(labels)
    t = len(labels)
    total, count = 0.0, 0
    for j in range(t):
        if j != i and labels[j] == labels[i]:
            total += dist(data[i], data[j])
            count += 1
    if count == 0:
        return 0.0
    return total / (t if literal else count)


def separation(i, data, labels, cents, dist=cos_dist):
    best = None
    for k, c in cents.items():
        if k == int(labels[i]):
            continue
        d = dist(np.asarray(data, dtype=float)[i], c)
        if best is None or d < best:
            best = d
    return best


def sc_bruteforce(data, labels, dist=cos_dist, literal=False):
    """Mean silhouette plus the per-sample values, all via explicit loops."""
    data = np.asarray(data, dtype=float)
    labels = np.asarray(labels)
    cents = centroids_by_class(data, labels, literal=literal)
    values = []
    for i in range(len(labels)):
        a = cohesion(i, data, labels, dist, literal=literal)
        b = separation(i, data, labels, cents, dist)
        m = max(a, b)
        values.append(0.0 if m == 0.0 else (b - a) / m)
    return sum(values) / len(values), values


def pca_by_covariance(data, n_components):
    """PCA via eigendecomposition of the sample covariance matrix."""
    data = np.asarray(data, dtype=float)
    mu = data.mean(axis=0)
    centered = data - mu
    cov = centered.T @ centered / (len(data) - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    comps = eigvecs[:, order].T[:n_components].copy()
    for row in comps:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0
    return mu, comps, eigvals[:n_components]


def random_instance(rng, max_t=64, max_d=16, k_choices=(2, 3, 5)):
    """A random labeled embedding with every class non-empty."""
    k = int(rng.choice(k_choices))
    t = int(rng.integers(max(2 * k, 8), max_t + 1))
    d = int(rng.integers(2, max_d + 1))
    labels = np.concatenate([np.arange(k), rng.integers(0, k, size=t - k)])
    rng.shuffle(labels)
    data = rng.standard_normal((t, d))
    return data, labels
