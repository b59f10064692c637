"""Fisher discriminant reduction of word feature vectors.

Directions maximise between-class over within-class scatter, found as the
top generalised eigenvectors of (S_b, S_w). S_w is stabilised with a
trace-scaled ridge, epsilon * trace(S_w) / D on the diagonal, before
inversion. The effective component count is clamped to
min(requested, n_classes - 1, D); requesting more emits
ComponentClampWarning. Projection columns are unit length.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.spatial.distance

from .errors import PreconditionError, ValidationError
from .tensorio import read_tensor, write_tensor

__all__ = [
    "SCATTER_RIDGE_EPS",
    "ComponentClampWarning",
    "LdaModel",
    "SeparationScore",
    "fit_lda",
    "transform",
    "separation_report",
    "write_lda",
    "read_lda",
]

SCATTER_RIDGE_EPS = 1e-6


class ComponentClampWarning(UserWarning):
    """Requested more discriminant components than the data can support."""


@dataclass
class LdaModel:
    """Fitted discriminant basis: projection columns ordered by eigenvalue."""

    projection: np.ndarray  # (D, n_components), unit-norm columns
    class_labels: list[str]
    class_means: np.ndarray  # (n_classes, D), in class_labels order
    n_components: int
    eigenvalues: np.ndarray  # (n_components,), descending
    requested_components: int

    def __post_init__(self):
        self.projection = np.asarray(self.projection, dtype=np.float64)
        self.class_means = np.asarray(self.class_means, dtype=np.float64)
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=np.float64)
        if self.projection.ndim != 2 or self.projection.shape[1] != self.n_components:
            raise PreconditionError(
                f"projection must be (D, {self.n_components}), got {self.projection.shape}"
            )
        if self.class_means.shape != (len(self.class_labels), self.projection.shape[0]):
            raise PreconditionError(
                f"class_means must be ({len(self.class_labels)}, {self.projection.shape[0]}), "
                f"got {self.class_means.shape}"
            )

    @property
    def clamped(self) -> bool:
        return self.n_components < self.requested_components


@dataclass
class SeparationScore:
    """Cluster geometry of one class in discriminant space."""

    label: str
    mean_within_distance: float
    nearest_centroid_distance: float
    nearest_class: str


def _class_partition(vectors: np.ndarray, labels) -> tuple[list[str], dict]:
    labels = [str(lab) for lab in labels]
    if vectors.ndim != 2:
        raise PreconditionError(f"vectors must be 2-D, got ndim={vectors.ndim}")
    if len(labels) != vectors.shape[0]:
        raise PreconditionError(
            f"{len(labels)} labels for {vectors.shape[0]} vectors"
        )
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise PreconditionError(f"need at least 2 classes, got {len(classes)}")
    members = {c: np.flatnonzero([lab == c for lab in labels]) for c in classes}
    for c in classes:
        if members[c].size < 2:
            raise PreconditionError(f"class {c!r} has {members[c].size} sample(s), need >= 2")
    return classes, members


def fit_lda(vectors, labels, n_components: int) -> LdaModel:
    """Fit a Fisher discriminant basis.

    Parameters
    ----------
    vectors : array (N, D)
        Feature vectors.
    labels : sequence of str, length N
        Class label per vector; every class needs at least two samples.
    n_components : int
        Requested basis size; clamped to min(n_components, C - 1, D)
        with a ComponentClampWarning when that bites.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    if n_components < 1:
        raise PreconditionError(f"n_components must be >= 1, got {n_components}")
    classes, members = _class_partition(vectors, labels)
    D = vectors.shape[1]

    overall = vectors.mean(axis=0)
    means = np.stack([vectors[members[c]].mean(axis=0) for c in classes])
    S_w = np.zeros((D, D))
    S_b = np.zeros((D, D))
    for ci, c in enumerate(classes):
        block = vectors[members[c]] - means[ci]
        S_w += block.T @ block
        offset = (means[ci] - overall)[:, None]
        S_b += members[c].size * (offset @ offset.T)

    trace = float(np.trace(S_w))
    ridge = SCATTER_RIDGE_EPS * (trace / D if trace > 0.0 else 1.0)
    S_w_reg = S_w + ridge * np.eye(D)

    effective = min(n_components, len(classes) - 1, D)
    if effective < n_components:
        warnings.warn(
            ComponentClampWarning(
                f"requested {n_components} components but only {effective} are "
                f"supported by {len(classes)} classes in {D} dimensions"
            ),
            stacklevel=2,
        )

    eigvals, eigvecs = scipy.linalg.eigh(S_b, S_w_reg)
    order = np.argsort(eigvals)[::-1][:effective]
    basis = eigvecs[:, order]
    basis = basis / np.linalg.norm(basis, axis=0, keepdims=True)
    # deterministic sign: largest-magnitude entry of each column is positive
    for j in range(basis.shape[1]):
        pivot = np.argmax(np.abs(basis[:, j]))
        if basis[pivot, j] < 0:
            basis[:, j] = -basis[:, j]

    return LdaModel(
        projection=basis,
        class_labels=classes,
        class_means=means,
        n_components=effective,
        eigenvalues=eigvals[order],
        requested_components=n_components,
    )


def transform(model: LdaModel, vectors) -> np.ndarray:
    """Project vectors onto the discriminant basis."""
    vectors = np.asarray(vectors, dtype=np.float64)
    single = vectors.ndim == 1
    if single:
        vectors = vectors[None, :]
    if vectors.ndim != 2 or vectors.shape[1] != model.projection.shape[0]:
        raise PreconditionError(
            f"vectors must have {model.projection.shape[0]} columns, got shape {vectors.shape}"
        )
    out = vectors @ model.projection
    return out[0] if single else out


def separation_report(model: LdaModel, vectors, labels) -> list[SeparationScore]:
    """Per-class spread versus distance to the nearest other class.

    Reports, in discriminant space, the mean pairwise distance inside
    each class and the distance from its centroid to the nearest other
    class centroid. Well-separated data has within << between.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    classes, members = _class_partition(vectors, labels)
    projected = transform(model, vectors)
    centroids = {c: projected[members[c]].mean(axis=0) for c in classes}
    scores = []
    for c in classes:
        pts = projected[members[c]]
        within = float(np.mean(scipy.spatial.distance.pdist(pts))) if pts.shape[0] > 1 else 0.0
        best_name, best_dist = None, np.inf
        for other in classes:
            if other == c:
                continue
            d = float(np.linalg.norm(centroids[c] - centroids[other]))
            if d < best_dist:
                best_name, best_dist = other, d
        scores.append(
            SeparationScore(
                label=c,
                mean_within_distance=within,
                nearest_centroid_distance=best_dist,
                nearest_class=best_name,
            )
        )
    return scores


# ---------------------------------------------------------------------------
# serialisation


def write_lda(path, model: LdaModel) -> None:
    meta = {
        "class_labels": list(model.class_labels),
        "eigenvalues": [float(v) for v in model.eigenvalues],
        "class_means": [[float(v) for v in row] for row in model.class_means],
        "n_components": int(model.n_components),
        "requested_components": int(model.requested_components),
        "clamped": bool(model.clamped),
    }
    write_tensor(path, "f64", list(model.projection.shape), meta, model.projection)


def read_lda(path) -> LdaModel:
    tf = read_tensor(path)
    if len(tf.shape) != 2:
        raise ValidationError(f"{path}: projection tensors are 2-D, got shape {tf.shape}")
    meta = tf.meta
    for key in ("class_labels", "eigenvalues", "class_means", "n_components"):
        if key not in meta:
            raise ValidationError(f"{path}: meta is missing required key {key!r}")
    try:
        return LdaModel(
            projection=tf.tensor(),
            class_labels=[str(c) for c in meta["class_labels"]],
            class_means=np.array(meta["class_means"], dtype=np.float64),
            n_components=int(meta["n_components"]),
            eigenvalues=np.array(meta["eigenvalues"], dtype=np.float64),
            requested_components=int(meta.get("requested_components", meta["n_components"])),
        )
    except PreconditionError as e:
        raise ValidationError(f"{path}: {e}") from None
