"""Ridge estimation of multichannel temporal response kernels.

Weights solve (X^T X + lambda I) W = X^T Y with no intercept; both sides
are expected to be standardised upstream, so kernels come out in
arbitrary units (z-scored response per z-scored feature). The closed-form
path factorises the regularised Gram matrix (Cholesky); the iterative
path runs seeded mini-batch gradient descent on the same objective.

Cross-validation assigns segments to contiguous folds in temporal order
and scores each candidate penalty by the mean Pearson correlation across
channels on the held-out fold, concatenated over its segments. Ties
resolve toward the stronger penalty.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._util import round_half_up
from .errors import (
    DivergenceError,
    NumericalError,
    PreconditionError,
    SingularSystemError,
    ValidationError,
)
from .lagged_design import DesignMatrix, LagSpec, build_lagged_matrix
from .preprocess import FeatureSeries, SegmentSet
from .tensorio import read_tensor, write_tensor

__all__ = [
    "KERNEL_UNITS",
    "TrfModel",
    "CvReport",
    "IterativeFit",
    "make_lambda_grid",
    "ridge_closed_form",
    "fit_iterative",
    "predict",
    "reshape_trf",
    "flatten_trf",
    "pick_best_lambda",
    "cross_validate",
    "fit_trf",
    "write_trf",
    "read_trf",
]

KERNEL_UNITS = "arbitrary (z-scored response per z-scored feature)"


@dataclass
class TrfModel:
    """Fitted response kernel, indexed [lag, channel, feature]."""

    kernel: np.ndarray
    lag_spec: LagSpec
    channel_names: list[str]
    lam: float
    units: str = KERNEL_UNITS

    def __post_init__(self):
        self.kernel = np.asarray(self.kernel, dtype=np.float64)
        if self.kernel.ndim != 3:
            raise PreconditionError(f"kernel must be 3-D, got ndim={self.kernel.ndim}")
        L, E, _ = self.kernel.shape
        if L != self.lag_spec.n_lags:
            raise PreconditionError(
                f"kernel has {L} lags but the lag spec defines {self.lag_spec.n_lags}"
            )
        if E != len(self.channel_names):
            raise PreconditionError(
                f"kernel has {E} channels but {len(self.channel_names)} names were given"
            )
        if self.lam < 0:
            raise PreconditionError(f"lambda must be nonnegative, got {self.lam}")

    @property
    def n_features(self) -> int:
        return self.kernel.shape[2]


@dataclass
class CvReport:
    """Grid-search record: validation score per (penalty, fold)."""

    grid: list[float]
    per_lambda_scores: np.ndarray  # (len(grid), n_folds)
    best_lambda: float
    fold_assignment: list[int]


@dataclass
class IterativeFit:
    """Result of the gradient-descent solver."""

    weights: np.ndarray
    stop_reason: str  # "tol" or "max_epochs"
    epochs: int
    objective: float


def make_lambda_grid(lo: float, hi: float, n: int) -> list[float]:
    """n log-spaced penalties from lo to hi, endpoints exact."""
    if not (0 < lo < hi):
        raise PreconditionError(f"need 0 < lo < hi, got lo={lo}, hi={hi}")
    if n < 2:
        raise PreconditionError(f"need at least 2 grid points, got {n}")
    vals = np.power(10.0, np.linspace(np.log10(lo), np.log10(hi), n))
    vals[0] = lo
    vals[-1] = hi
    return [float(v) for v in vals]


def _as_matrix(Y) -> np.ndarray:
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.ndim != 2:
        raise PreconditionError(f"responses must be 1-D or 2-D, got ndim={Y.ndim}")
    return Y


def _solve_gram(XtX: np.ndarray, XtY: np.ndarray, lam: float) -> np.ndarray:
    A = XtX.copy()
    A[np.diag_indices_from(A)] += lam
    try:
        factor = scipy.linalg.cho_factor(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        if lam == 0:
            raise SingularSystemError(
                "X^T X is singular at lambda = 0; use a positive penalty"
            ) from None
        raise NumericalError(
            f"Gram matrix is not positive definite at lambda = {lam}"
        ) from None
    return scipy.linalg.cho_solve(factor, XtY, check_finite=False)


def ridge_closed_form(X, Y, lam: float) -> np.ndarray:
    """Solve the regularised normal equations for all channels at once."""
    X = np.asarray(X, dtype=np.float64)
    Y = _as_matrix(Y)
    if X.ndim != 2:
        raise PreconditionError(f"X must be 2-D, got ndim={X.ndim}")
    if X.shape[0] != Y.shape[0]:
        raise PreconditionError(
            f"X has {X.shape[0]} rows but Y has {Y.shape[0]}"
        )
    if lam < 0:
        raise PreconditionError(f"lambda must be nonnegative, got {lam}")
    return _solve_gram(X.T @ X, X.T @ Y, lam)


def fit_iterative(
    X,
    Y,
    lam: float,
    lr: float = 1e-4,
    batch_size: int = 64,
    max_epochs: int = 1000,
    tol: float = 1e-8,
    seed: int = 0,
) -> IterativeFit:
    """Mini-batch gradient descent on ||Y - XW||^2/N + lam ||W||^2/N.

    Starts from zero weights, reshuffles rows every epoch with the given
    seed, and stops when the epoch-over-epoch decrease of the full
    objective falls below tol. Growth beyond tol counts toward
    divergence: five consecutive such epochs (or a non-finite objective)
    raise DivergenceError. Growth within tol is the stochastic plateau
    of mini-batch descent and counts as convergence.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = _as_matrix(Y)
    if X.shape[0] != Y.shape[0]:
        raise PreconditionError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
    if lam < 0:
        raise PreconditionError(f"lambda must be nonnegative, got {lam}")
    if not (lr > 0):
        raise PreconditionError(f"learning rate must be positive, got {lr}")
    if batch_size < 1:
        raise PreconditionError(f"batch_size must be >= 1, got {batch_size}")
    if max_epochs < 1:
        raise PreconditionError(f"max_epochs must be >= 1, got {max_epochs}")

    N, P = X.shape
    E = Y.shape[1]
    W = np.zeros((P, E))
    rng = np.random.default_rng(seed)

    def objective(weights):
        resid = Y - X @ weights
        return (np.sum(resid * resid) + lam * np.sum(weights * weights)) / N

    prev = objective(W)
    grew = 0
    epochs_run = 0
    reason = "max_epochs"
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, max_epochs + 1):
            epochs_run = epoch
            perm = rng.permutation(N)
            for lo_idx in range(0, N, batch_size):
                rows = perm[lo_idx : lo_idx + batch_size]
                Xb = X[rows]
                grad = (2.0 / rows.size) * (Xb.T @ (Xb @ W - Y[rows]))
                grad += (2.0 * lam / N) * W
                W -= lr * grad
            obj = objective(W)
            delta = prev - obj  # positive = improvement
            if not np.isfinite(obj) or delta < -tol:
                grew += 1
                if grew >= 5:
                    raise DivergenceError(
                        f"objective grew for {grew} consecutive epochs "
                        f"(epoch {epoch}); reduce the learning rate"
                    )
            elif delta < tol:
                prev = obj
                reason = "tol"
                break
            else:
                grew = 0
            prev = obj
    return IterativeFit(weights=W, stop_reason=reason, epochs=epochs_run, objective=float(prev))


def predict(weights: np.ndarray, X) -> np.ndarray:
    """Linear response prediction X @ W for a design matrix or raw array."""
    Xd = X.data if isinstance(X, DesignMatrix) else np.asarray(X, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if Xd.ndim != 2 or weights.ndim != 2:
        raise PreconditionError("predict expects 2-D design and weight matrices")
    if Xd.shape[1] != weights.shape[0]:
        raise PreconditionError(
            f"design has {Xd.shape[1]} columns but weights expect {weights.shape[0]}"
        )
    return Xd @ weights


def reshape_trf(
    weights: np.ndarray,
    spec: LagSpec,
    channel_names: list[str],
    n_features: int,
    lam: float = 0.0,
) -> TrfModel:
    """Fold flat feature-major weights into a [lag, channel, feature] kernel."""
    weights = np.asarray(weights, dtype=np.float64)
    L = spec.n_lags
    E = len(channel_names)
    if weights.shape != (n_features * L, E):
        raise PreconditionError(
            f"weights must have shape ({n_features * L}, {E}), got {weights.shape}"
        )
    kernel = weights.reshape(n_features, L, E).transpose(1, 2, 0)
    return TrfModel(kernel=kernel.copy(), lag_spec=spec, channel_names=list(channel_names), lam=lam)


def flatten_trf(model: TrfModel) -> np.ndarray:
    """Inverse of reshape_trf: kernel back to flat feature-major weights."""
    return np.ascontiguousarray(model.kernel.transpose(2, 0, 1).reshape(-1, len(model.channel_names)))


def pick_best_lambda(grid, mean_scores) -> float:
    """Highest mean score wins; exact ties go to the larger penalty."""
    best = None
    best_score = -np.inf
    for lam, score in zip(grid, mean_scores):
        if score > best_score or (score == best_score and best is not None and lam > best):
            best = lam
            best_score = score
    return float(best)


def _stack_segments(segments: SegmentSet, indices, spec: LagSpec):
    xs, ys = [], []
    for i in indices:
        seg = segments.segments[i]
        design = build_lagged_matrix(FeatureSeries(data=seg.x, fs_hz=segments.fs_hz), spec)
        xs.append(design.data)
        ys.append(seg.y)
    return np.concatenate(xs, axis=0), np.concatenate(ys, axis=0)


def cross_validate(
    segments: SegmentSet,
    spec: LagSpec,
    grid,
    k: int,
    seed: int = 0,
    solver: str = "closed_form",
    lr: float = 1e-4,
    batch_size: int = 64,
    max_epochs: int = 1000,
    tol: float = 1e-8,
) -> CvReport:
    """Grid-search the ridge penalty with k contiguous temporal folds.

    Parameters
    ----------
    segments : SegmentSet
        Training windows in temporal order; folds are contiguous blocks.
    spec : LagSpec
        Lag range used to expand each segment. Must share the segment
        sampling rate.
    grid : sequence of float
        Candidate penalties. Scores are reported per (penalty, fold).
    k : int
        Fold count, at least 2 and at most the number of segments.
    seed : int
        Forwarded to the iterative solver's shuffling. The fold layout is
        deterministic regardless.
    solver : str
        "closed_form" or "iterative".

    Returns
    -------
    CvReport
        Per-(penalty, fold) validation scores, the winning penalty, and
        the fold index of every segment.
    """
    n = len(segments)
    if k < 2:
        raise PreconditionError(f"need at least 2 folds, got {k}")
    if n < k:
        raise PreconditionError(f"{n} segments cannot fill {k} folds")
    if spec.fs_hz != segments.fs_hz:
        raise PreconditionError(
            f"sampling rates differ: segments {segments.fs_hz} vs lag spec {spec.fs_hz}"
        )
    grid = [float(g) for g in grid]
    if not grid:
        raise PreconditionError("lambda grid is empty")
    if any(g < 0 for g in grid):
        raise PreconditionError("lambda grid entries must be nonnegative")
    if solver not in ("closed_form", "iterative"):
        raise PreconditionError(f"unknown solver {solver!r}")

    # local import: stats_eval imports this module for model types
    from .stats_eval import mean_channel_r

    folds = np.array_split(np.arange(n), k)
    fold_assignment = np.empty(n, dtype=int)
    for fi, idx in enumerate(folds):
        fold_assignment[idx] = fi

    scores = np.empty((len(grid), k))
    if solver == "closed_form":
        grams = []
        for idx in folds:
            Xf, Yf = _stack_segments(segments, idx, spec)
            grams.append((Xf.T @ Xf, Xf.T @ Yf))
        G_tot = sum(g for g, _ in grams)
        H_tot = sum(h for _, h in grams)
        for fi, idx in enumerate(folds):
            G_train = G_tot - grams[fi][0]
            H_train = H_tot - grams[fi][1]
            X_val, Y_val = _stack_segments(segments, idx, spec)
            for gi, lam in enumerate(grid):
                W = _solve_gram(G_train, H_train, lam)
                scores[gi, fi] = mean_channel_r(X_val @ W, Y_val)
    else:
        for fi, idx in enumerate(folds):
            train_idx = [i for i in range(n) if fold_assignment[i] != fi]
            X_train, Y_train = _stack_segments(segments, train_idx, spec)
            X_val, Y_val = _stack_segments(segments, idx, spec)
            for gi, lam in enumerate(grid):
                fit = fit_iterative(
                    X_train,
                    Y_train,
                    lam,
                    lr=lr,
                    batch_size=batch_size,
                    max_epochs=max_epochs,
                    tol=tol,
                    seed=seed,
                )
                scores[gi, fi] = mean_channel_r(X_val @ fit.weights, Y_val)

    if not np.all(np.isfinite(scores)):
        raise NumericalError("cross-validation produced non-finite scores")
    best = pick_best_lambda(grid, scores.mean(axis=1))
    return CvReport(
        grid=grid,
        per_lambda_scores=scores,
        best_lambda=best,
        fold_assignment=[int(f) for f in fold_assignment],
    )


def fit_trf(
    segments: SegmentSet,
    spec: LagSpec,
    lam: float,
    solver: str = "closed_form",
    lr: float = 1e-4,
    batch_size: int = 64,
    max_epochs: int = 1000,
    tol: float = 1e-8,
    seed: int = 0,
) -> TrfModel:
    """Fit one kernel on every segment in the set at a fixed penalty."""
    if len(segments) == 0:
        raise PreconditionError("cannot fit on an empty segment set")
    if spec.fs_hz != segments.fs_hz:
        raise PreconditionError(
            f"sampling rates differ: segments {segments.fs_hz} vs lag spec {spec.fs_hz}"
        )
    X, Y = _stack_segments(segments, range(len(segments)), spec)
    if solver == "closed_form":
        W = ridge_closed_form(X, Y, lam)
    elif solver == "iterative":
        W = fit_iterative(
            X, Y, lam, lr=lr, batch_size=batch_size, max_epochs=max_epochs, tol=tol, seed=seed
        ).weights
    else:
        raise PreconditionError(f"unknown solver {solver!r}")
    return reshape_trf(W, spec, segments.channel_names, segments.n_features, lam=lam)


# ---------------------------------------------------------------------------
# serialisation


def write_trf(path, model: TrfModel) -> None:
    meta = {
        "lag_times_s": model.lag_spec.lag_times_s(),
        "channel_names": list(model.channel_names),
        "lambda": float(model.lam),
        "fs_hz": float(model.lag_spec.fs_hz),
        "units": model.units,
    }
    write_tensor(path, "f64", list(model.kernel.shape), meta, model.kernel)


def read_trf(path) -> TrfModel:
    tf = read_tensor(path)
    if len(tf.shape) != 3:
        raise ValidationError(f"{path}: kernel tensors are 3-D, got shape {tf.shape}")
    meta = tf.meta
    for key in ("lag_times_s", "channel_names", "lambda"):
        if key not in meta:
            raise ValidationError(f"{path}: meta is missing required key {key!r}")
    lag_times = meta["lag_times_s"]
    names = meta["channel_names"]
    if len(lag_times) != tf.shape[0]:
        raise ValidationError(
            f"{path}: {len(lag_times)} lag times for {tf.shape[0]} kernel lags"
        )
    if len(names) != tf.shape[1]:
        raise ValidationError(
            f"{path}: {len(names)} channel names for {tf.shape[1]} kernel channels"
        )
    if "fs_hz" in meta:
        fs = float(meta["fs_hz"])
    elif len(lag_times) > 1:
        fs = 1.0 / (lag_times[1] - lag_times[0])
    else:
        raise ValidationError(f"{path}: cannot infer fs_hz from a single lag")
    lag_samples = [round_half_up(t * fs) for t in lag_times]
    if lag_samples != list(range(lag_samples[0], lag_samples[0] + len(lag_samples))):
        raise ValidationError(f"{path}: lag times do not form a contiguous range at fs={fs}")
    tmin = lag_samples[0] / fs
    tmax = lag_samples[-1] / fs if len(lag_samples) > 1 else tmin + 0.25 / fs
    try:
        spec = LagSpec(tmin_s=tmin, tmax_s=tmax, fs_hz=fs, lag_samples=lag_samples)
    except PreconditionError as e:
        raise ValidationError(f"{path}: {e}") from None
    try:
        return TrfModel(
            kernel=tf.tensor(),
            lag_spec=spec,
            channel_names=[str(n) for n in names],
            lam=float(meta["lambda"]),
            units=str(meta.get("units", KERNEL_UNITS)),
        )
    except PreconditionError as e:
        raise ValidationError(f"{path}: {e}") from None
