"""Zone-level arrival-time prediction.

Customers are grouped into K zones by k-means. For each solved training
instance the label of zone k is the mean optimal arrival time of its
customers (ZETA_k); the input is the number of customers per zone. A small
tanh network maps counts to the K zone ETAs, and the per-zone mean absolute
validation error becomes the half-width of each customer's time window.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import ConfigurationError, DomainError, ParameterError, TrainingError
from .tdgraph import TimeDependentGraph, departure_times


@dataclass(frozen=True, eq=False)
class Zoning:
    centroids: np.ndarray
    objective_trace: tuple = ()
    iterations: int = 0

    @property
    def K(self) -> int:
        return len(self.centroids)

    def assign(self, points) -> np.ndarray:
        """Index of the nearest centroid for each point (lowest index on ties)."""
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        d2 = ((p[:, None, :] - self.centroids[None, :, :]) ** 2).sum(axis=2)
        return np.argmin(d2, axis=1)


def _sq_dist(points, centroids):
    return ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def kmeans_fit(points, K: int, seed: int = 0, max_iter: int = 300) -> Zoning:
    """Lloyd's algorithm from a k-means++ start; stops when assignments repeat."""
    X = np.asarray(points, dtype=float).reshape(-1, 2)
    if not 1 <= K <= len(X):
        raise ParameterError(f"need 1 <= K <= {len(X)} points, got K={K}")
    rng = np.random.default_rng(seed)

    centroids = [X[rng.integers(len(X))]]
    for _ in range(1, K):
        d2 = _sq_dist(X, np.array(centroids)).min(axis=1)
        if d2.sum() == 0:
            raise ParameterError("fewer distinct points than zones")
        centroids.append(X[rng.choice(len(X), p=d2 / d2.sum())])
    C = np.array(centroids)

    trace = []
    labels = None
    it = 0
    for it in range(1, max_iter + 1):
        d2 = _sq_dist(X, C)
        new = np.argmin(d2, axis=1)
        trace.append(float(d2[np.arange(len(X)), new].sum()))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for k in range(K):
            members = X[labels == k]
            if len(members):      # an empty zone keeps its centroid
                C[k] = members.mean(axis=0)
    return Zoning(C, tuple(trace), it)


@dataclass
class TrainingExample:
    counts: np.ndarray     # customers per zone
    targets: np.ndarray    # mean arrival time per zone, nan where masked
    mask: np.ndarray       # True where the zone has at least one customer


def zone_counts(zoning: Zoning, G: TimeDependentGraph) -> np.ndarray:
    if G.coordinates is None:
        raise ConfigurationError("instance has no coordinates to zone")
    labels = zoning.assign(G.coordinates[1:])
    return np.bincount(labels, minlength=zoning.K)


def make_labels(G: TimeDependentGraph, tour, zoning: Zoning) -> TrainingExample:
    arrivals = departure_times(G, tour)[1:-1]
    zone = zoning.assign(G.coordinates[list(tour)])
    counts = np.bincount(zone, minlength=zoning.K)
    sums = np.bincount(zone, weights=arrivals, minlength=zoning.K)
    mask = counts > 0
    targets = np.full(zoning.K, np.nan)
    targets[mask] = sums[mask] / counts[mask]
    return TrainingExample(counts, targets, mask)


@dataclass
class MlpConfig:
    hidden: int = 5
    alpha: float = 1e-4             # L2 penalty on weights
    max_iter: int = 3000
    validation_fraction: float = 0.1
    gtol: float = 1e-8


@dataclass(eq=False)
class EtaModel:
    zoning: Zoning
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    per_zone_mae: np.ndarray
    per_zone_mean_error: np.ndarray = None
    per_zone_std_error: np.ndarray = None
    seed: int = 0
    iterations: int = 0
    final_loss: float = float("nan")
    r2: float = float("nan")
    config: MlpConfig = field(default_factory=MlpConfig)

    @property
    def K(self) -> int:
        return self.zoning.K

    def forward(self, counts) -> np.ndarray:
        X = np.atleast_2d(np.asarray(counts, dtype=float))
        return np.tanh(X @ self.W1 + self.b1) @ self.W2 + self.b2

    def predict(self, counts) -> np.ndarray:
        """Zone ETAs for one count vector, clamped at 0."""
        counts = np.asarray(counts, dtype=float)
        if counts.shape != (self.K,):
            raise DomainError(f"expected {self.K} zone counts, got shape {counts.shape}")
        return np.maximum(self.forward(counts)[0], 0.0)


mlp_predict = EtaModel.predict


def _unpack(theta, K, hidden):
    sizes = [K * hidden, hidden, hidden * K, K]
    parts = np.split(theta, np.cumsum(sizes)[:-1])
    return parts[0].reshape(K, hidden), parts[1], parts[2].reshape(hidden, K), parts[3]


def _loss_and_grad(theta, X, Y, M, K, hidden, alpha):
    W1, b1, W2, b2 = _unpack(theta, K, hidden)
    m = len(X)
    A = np.tanh(X @ W1 + b1)
    err = np.where(M, A @ W2 + b2 - Y, 0.0)
    loss = 0.5 * (err ** 2).sum() / m + 0.5 * alpha * ((W1 ** 2).sum() + (W2 ** 2).sum()) / m
    g_out = err / m
    gW2 = A.T @ g_out + alpha * W2 / m
    gb2 = g_out.sum(axis=0)
    g_hid = (g_out @ W2.T) * (1 - A ** 2)
    gW1 = X.T @ g_hid + alpha * W1 / m
    gb1 = g_hid.sum(axis=0)
    return loss, np.concatenate([gW1.ravel(), gb1, gW2.ravel(), gb2])


def _stack(examples):
    X = np.array([e.counts for e in examples], dtype=float)
    M = np.array([e.mask for e in examples], dtype=bool)
    Y = np.where(M, np.array([e.targets for e in examples], dtype=float), 0.0)
    return X, Y, M


def mlp_train(examples, zoning: Zoning, seed: int = 0, config: MlpConfig = None) -> EtaModel:
    """Fit the network with L-BFGS on a seeded 90/10 train/validation split.

    Masked zones contribute no loss. Per-zone errors come from the
    validation set; a zone absent from it falls back to its training errors.
    """
    config = config or MlpConfig()
    if len(examples) < 2:
        raise ParameterError("training needs at least two examples")
    K = zoning.K
    if any(len(e.counts) != K for e in examples):
        raise ParameterError("examples disagree with the zoning on K")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(examples))
    n_val = max(1, int(round(config.validation_fraction * len(examples))))
    val, train = order[:n_val], order[n_val:]
    X, Y, M = _stack(examples)

    h = config.hidden
    b_in = np.sqrt(6.0 / (K + h))
    b_out = np.sqrt(6.0 / (h + K))
    W1 = rng.uniform(-b_in, b_in, (K, h))
    b1 = rng.uniform(-b_in, b_in, h)
    W2 = rng.uniform(-b_out, b_out, (h, K))
    Mt = M[train]
    seen = Mt.sum(axis=0)
    # start output biases at the per-zone mean target
    b2 = np.where(seen > 0, (Y[train] * Mt).sum(axis=0) / np.maximum(seen, 1), 0.0)
    theta0 = np.concatenate([W1.ravel(), b1, W2.ravel(), b2])

    res = minimize(_loss_and_grad, theta0, jac=True, method="L-BFGS-B",
                   args=(X[train], Y[train], Mt, K, h, config.alpha),
                   options={"maxiter": config.max_iter, "gtol": config.gtol})
    if not np.all(np.isfinite(res.x)) or not np.isfinite(res.fun):
        raise TrainingError(f"training diverged: loss={res.fun}, message={res.message}")
    W1, b1, W2, b2 = _unpack(res.x, K, h)
    model = EtaModel(zoning, W1, b1, W2, b2, per_zone_mae=np.zeros(K), seed=seed,
                     iterations=int(res.nit), final_loss=float(res.fun), config=config)

    pred = np.maximum(model.forward(X), 0.0)
    err = pred - Y
    mae, mean_err, std_err = np.zeros(K), np.zeros(K), np.zeros(K)
    for k in range(K):
        e = err[val][M[val, k], k]
        if len(e) == 0:
            e = err[train][M[train, k], k]
        if len(e):
            mae[k] = np.abs(e).mean()
            mean_err[k] = e.mean()
            std_err[k] = e.std(ddof=1) if len(e) > 1 else 0.0
    model.per_zone_mae = mae
    model.per_zone_mean_error = mean_err
    model.per_zone_std_error = std_err
    model.r2 = _r2(Y[val], pred[val], M[val])
    return model


def _r2(Y, P, M) -> float:
    scores = []
    for k in range(Y.shape[1]):
        y, p = Y[M[:, k], k], P[M[:, k], k]
        if len(y) < 2:
            continue
        ss_tot = ((y - y.mean()) ** 2).sum()
        if ss_tot > 0:
            scores.append(1 - ((y - p) ** 2).sum() / ss_tot)
    return float(np.mean(scores)) if scores else float("nan")


def eta_for_customer(model: EtaModel, G: TimeDependentGraph, i: int, prediction=None):
    """Predicted ETA of customer ``i``'s zone and that zone's mean absolute error."""
    if not 1 <= i <= G.n:
        raise DomainError(f"{i} is not a customer")
    if prediction is None:
        prediction = model.predict(zone_counts(model.zoning, G))
    k = int(model.zoning.assign(G.coordinates[i])[0])
    return float(prediction[k]), float(model.per_zone_mae[k])


def error_report(model: EtaModel) -> str:
    """Per-zone validation errors in minutes: mean error, MAE, standard error, plus averages."""
    lines = [f"{'Zone':>4}  {'Mean error':>10}  {'Mean absolute error':>19}  {'Standard error':>14}"]
    for k in range(model.K):
        lines.append(f"{k + 1:>4}  {model.per_zone_mean_error[k]:>10.2f}  "
                     f"{model.per_zone_mae[k]:>19.2f}  {model.per_zone_std_error[k]:>14.2f}")
    lines.append(f"{'Avg':>4}  {np.mean(model.per_zone_mean_error):>10.2f}  "
                 f"{np.mean(model.per_zone_mae):>19.2f}  {np.mean(model.per_zone_std_error):>14.2f}")
    lines.append(f"R2 = {model.r2:.3f}")
    return "\n".join(lines)


def train_from_instances(graphs, K: int, seed: int = 0, config: MlpConfig = None,
                         tours=None) -> EtaModel:
    """Zone all customers, solve each instance exactly, label and train.

    ``tours`` may supply known optimal tours and skips the exact solver.
    """
    from .oracle import solve_tdtsp_exact

    graphs = list(graphs)
    if not graphs:
        raise ParameterError("no training instances")
    if any(G.coordinates is None for G in graphs):
        raise ConfigurationError("training instances need coordinates")
    points = np.vstack([G.coordinates[1:] for G in graphs])
    zoning = kmeans_fit(points, K, seed)
    if tours is None:
        tours = [solve_tdtsp_exact(G)[0] for G in graphs]
    examples = [make_labels(G, tour, zoning) for G, tour in zip(graphs, tours)]
    return mlp_train(examples, zoning, seed, config)
