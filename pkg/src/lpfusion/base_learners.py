"""The four one-class base learners that populate the score matrix.

Every learner's ``score_samples`` follows one convention: higher means more
normal.  SVDD returns the negative squared feature-space distance to the ball
centre, OC-GP the predictive mean of a regression onto all-ones targets, KPCA
the negative feature-space reconstruction error and GMM the log-density.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from .errors import InsufficientData, InvalidInput, NumericalFailure
from .kernels import KernelSpec, _as_matrix, rbf_kernel_matrix

SVDD_TOL = 1e-6
SVDD_MAX_ITER = 2000
OCGP_JITTER = 1e-3
KPCA_EIG_FLOOR = 1e-10
GMM_MAX_ITER = 200
GMM_TOL = 1e-8
GMM_RIDGE = 1e-6


class LearnerKind(str, Enum):
    SVDD = "SVDD"
    OCGP = "OCGP"
    KPCA = "KPCA"
    GMM = "GMM"


@dataclass(frozen=True)
class BaseLearnerSpec:
    kind: LearnerKind
    kernel: KernelSpec | None = None
    kpca_subspace_dim: int | None = None
    gmm_components: int | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", LearnerKind(self.kind))
        kernelized = self.kind in (LearnerKind.SVDD, LearnerKind.OCGP, LearnerKind.KPCA)
        if kernelized and self.kernel is None:
            raise InvalidInput(f"{self.kind.value} requires a kernel")
        if not kernelized and self.kernel is not None:
            raise InvalidInput("GMM takes no kernel")
        if (self.kind is LearnerKind.KPCA) != (self.kpca_subspace_dim is not None):
            raise InvalidInput("kpca_subspace_dim is set exactly when kind is KPCA")
        if (self.kind is LearnerKind.GMM) != (self.gmm_components is not None):
            raise InvalidInput("gmm_components is set exactly when kind is GMM")
        if self.kpca_subspace_dim is not None and self.kpca_subspace_dim < 1:
            raise InvalidInput("kpca_subspace_dim must be positive")
        if self.gmm_components is not None and self.gmm_components < 1:
            raise InvalidInput("gmm_components must be positive")


def kpca_dim_grid(n_train: int) -> list[int]:
    """Subspace dimensions 2, 6, 10, ... up to and including ``n_train``."""
    dims = list(range(2, n_train + 1, 4))
    if not dims or dims[-1] != n_train:
        dims.append(n_train)
    return [d for d in dims if d >= 1]


# --------------------------------------------------------------------------
# fitted models


@dataclass(frozen=True)
class SVDDModel:
    kernel: KernelSpec
    support: np.ndarray       # training points with alpha > 0
    alpha: np.ndarray         # simplex coefficients over ``support``
    center_sq_norm: float     # alpha^T K alpha
    iterations: int = 0
    kind: LearnerKind = field(default=LearnerKind.SVDD, init=False)

    def score_samples(self, X):
        k = rbf_kernel_matrix(X, self.support, self.kernel)
        # k(x, x) = 1 for the RBF kernel
        return -(1.0 - 2.0 * (k @ self.alpha) + self.center_sq_norm)


@dataclass(frozen=True)
class OCGPModel:
    kernel: KernelSpec
    X_train: np.ndarray
    weights: np.ndarray       # (K + lambda I)^{-1} 1
    jitter: float
    kind: LearnerKind = field(default=LearnerKind.OCGP, init=False)

    def score_samples(self, X):
        return rbf_kernel_matrix(X, self.X_train, self.kernel) @ self.weights


@dataclass(frozen=True)
class KPCAModel:
    kernel: KernelSpec
    X_train: np.ndarray
    coef: np.ndarray          # n x r, eigenvectors scaled by 1/sqrt(eigenvalue)
    eigenvalues: np.ndarray   # r leading eigenvalues of the centred kernel
    col_means: np.ndarray     # column means of the training kernel
    total_mean: float
    subspace_dim: int
    kind: LearnerKind = field(default=LearnerKind.KPCA, init=False)

    @property
    def n_components(self) -> int:
        return min(self.subspace_dim, self.coef.shape[1])

    def truncated(self, subspace_dim: int) -> KPCAModel:
        """Same decomposition restricted to a smaller leading subspace."""
        if subspace_dim > self.subspace_dim:
            raise InvalidInput("cannot enlarge a fitted KPCA subspace")
        r = min(subspace_dim, self.coef.shape[1])
        return replace(self, coef=self.coef[:, :r], eigenvalues=self.eigenvalues[:r],
                       subspace_dim=subspace_dim)

    def _projections(self, X):
        k = rbf_kernel_matrix(X, self.X_train, self.kernel)
        row_means = k.mean(axis=1)
        kc = k - row_means[:, None] - self.col_means[None, :] + self.total_mean
        sq_norm = 1.0 - 2.0 * row_means + self.total_mean
        return kc @ self.coef, sq_norm

    def reconstruction_error(self, X, dims=None):
        """Reconstruction error for this model's subspace or for each of ``dims``."""
        proj, sq_norm = self._projections(X)
        cum = np.cumsum(proj * proj, axis=1)
        if dims is None:
            r = self.n_components
            captured = cum[:, r - 1] if r > 0 else 0.0
            return np.maximum(sq_norm - captured, 0.0)
        cols = []
        for d in dims:
            r = min(d, cum.shape[1])
            captured = cum[:, r - 1] if r > 0 else 0.0
            cols.append(np.maximum(sq_norm - captured, 0.0))
        return np.column_stack(cols)

    def score_samples(self, X):
        return -self.reconstruction_error(X)


@dataclass(frozen=True)
class GMMModel:
    weights: np.ndarray       # (c,)
    means: np.ndarray         # (c, f)
    covariances: np.ndarray   # (c, f, f)
    ridge: float
    iterations: int = 0
    kind: LearnerKind = field(default=LearnerKind.GMM, init=False)

    def score_samples(self, X):
        X = _as_matrix(X)
        return logsumexp(_component_log_prob(X, self.means, self.covariances)
                         + np.log(self.weights)[None, :], axis=1)


BaseLearnerModel = SVDDModel | OCGPModel | KPCAModel | GMMModel


# --------------------------------------------------------------------------
# fitting


def _check_train(X) -> np.ndarray:
    X = _as_matrix(X, "X_train")
    if X.shape[0] < 2:
        raise InsufficientData(f"need at least 2 training samples, got {X.shape[0]}")
    if not np.all(np.isfinite(X)):
        raise InvalidInput("training data contains non-finite entries")
    return X


def _fit_svdd(spec, X):
    K = rbf_kernel_matrix(X, X, spec.kernel)
    n = K.shape[0]
    diag = np.diag(K).copy()
    alpha = np.full(n, 1.0 / n)
    Ka = K @ alpha
    aKa = float(alpha @ Ka)
    it = 0
    # Frank-Wolfe on the simplex for min a^T K a - a^T diag(K), exact line search
    for it in range(1, SVDD_MAX_ITER + 1):
        grad = 2.0 * Ka - diag
        j = int(np.argmin(grad))
        gap = float(grad @ alpha - grad[j])
        if gap <= SVDD_TOL:
            break
        dKd = K[j, j] - 2.0 * Ka[j] + aKa
        if dKd <= 0:
            gamma = 1.0
        else:
            gamma = min(1.0, gap / (2.0 * dKd))
        alpha *= 1.0 - gamma
        alpha[j] += gamma
        Ka = (1.0 - gamma) * Ka + gamma * K[:, j]
        aKa = float(alpha @ Ka)
    keep = alpha > 0
    alpha_s = alpha[keep]
    alpha_s = alpha_s / alpha_s.sum()
    center = float(alpha_s @ K[np.ix_(keep, keep)] @ alpha_s)
    return SVDDModel(kernel=spec.kernel, support=X[keep].copy(), alpha=alpha_s,
                     center_sq_norm=center, iterations=it)


def _fit_ocgp(spec, X):
    K = rbf_kernel_matrix(X, X, spec.kernel)
    n = K.shape[0]
    jitter = OCGP_JITTER
    for _ in range(6):
        try:
            factor = linalg.cho_factor(K + jitter * np.eye(n), lower=True)
            break
        except linalg.LinAlgError:
            jitter *= 10.0
    else:
        raise NumericalFailure("OC-GP kernel matrix is not positive definite even with jitter")
    weights = linalg.cho_solve(factor, np.ones(n))
    return OCGPModel(kernel=spec.kernel, X_train=X.copy(), weights=weights, jitter=jitter)


def _fit_kpca(spec, X):
    n = X.shape[0]
    if spec.kpca_subspace_dim > n:
        raise InvalidInput(f"kpca_subspace_dim={spec.kpca_subspace_dim} exceeds n_train={n}")
    K = rbf_kernel_matrix(X, X, spec.kernel)
    col_means = K.mean(axis=0)
    total = float(col_means.mean())
    Kc = K - col_means[None, :] - col_means[:, None] + total
    Kc = 0.5 * (Kc + Kc.T)
    r = spec.kpca_subspace_dim
    evals, evecs = linalg.eigh(Kc, subset_by_index=(n - r, n - 1))
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    keep = evals > KPCA_EIG_FLOOR
    evals, evecs = evals[keep], evecs[:, keep]
    # sign convention for reproducibility: largest-magnitude entry positive
    signs = np.sign(evecs[np.argmax(np.abs(evecs), axis=0), np.arange(evecs.shape[1])])
    signs[signs == 0] = 1.0
    evecs = evecs * signs
    coef = evecs / np.sqrt(evals)
    return KPCAModel(kernel=spec.kernel, X_train=X.copy(), coef=coef, eigenvalues=evals,
                     col_means=col_means, total_mean=total, subspace_dim=r)


def _component_log_prob(X, means, covariances):
    n, f = X.shape
    out = np.empty((n, means.shape[0]))
    for c in range(means.shape[0]):
        try:
            chol = linalg.cholesky(covariances[c], lower=True)
        except linalg.LinAlgError as exc:
            raise NumericalFailure("GMM covariance is not positive definite") from exc
        z = linalg.solve_triangular(chol, (X - means[c]).T, lower=True)
        log_det = 2.0 * np.sum(np.log(np.diag(chol)))
        out[:, c] = -0.5 * (f * np.log(2 * np.pi) + log_det + np.sum(z * z, axis=0))
    return out


def _kmeanspp_centers(X, c, rng):
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for _ in range(1, c):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=d2 / total)
        centers.append(X[idx])
        d2 = np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1))
    return np.array(centers)


def _m_step(X, resp, ridge):
    nk = resp.sum(axis=0) + 10 * np.finfo(float).eps
    weights = nk / nk.sum()
    means = (resp.T @ X) / nk[:, None]
    f = X.shape[1]
    covs = np.empty((len(nk), f, f))
    for c in range(len(nk)):
        diff = X - means[c]
        covs[c] = (resp[:, c, None] * diff).T @ diff / nk[c]
        covs[c] = 0.5 * (covs[c] + covs[c].T) + ridge * np.eye(f)
    return weights, means, covs


def _fit_gmm(spec, X):
    n, f = X.shape
    c = spec.gmm_components
    if c > n:
        raise InvalidInput(f"gmm_components={c} exceeds n_train={n}")
    rng = np.random.default_rng(spec.seed)
    data_trace = float(np.trace(np.atleast_2d(np.cov(X.T, bias=True))))
    ridge = GMM_RIDGE * data_trace / f if data_trace > 0 else GMM_RIDGE
    centers = _kmeanspp_centers(X, c, rng)
    labels = np.argmin(((X[:, None, :] - centers[None]) ** 2).sum(-1), axis=1)
    resp = np.eye(c)[labels]
    weights, means, covs = _m_step(X, resp, ridge)
    prev = -np.inf
    it = 0
    for it in range(1, GMM_MAX_ITER + 1):
        log_prob = _component_log_prob(X, means, covs) + np.log(weights)[None, :]
        log_norm = logsumexp(log_prob, axis=1)
        ll = float(log_norm.mean())
        if abs(ll - prev) < GMM_TOL:
            break
        prev = ll
        resp = np.exp(log_prob - log_norm[:, None])
        weights, means, covs = _m_step(X, resp, ridge)
    return GMMModel(weights=weights, means=means, covariances=covs, ridge=ridge, iterations=it)


_FITTERS = {
    LearnerKind.SVDD: _fit_svdd,
    LearnerKind.OCGP: _fit_ocgp,
    LearnerKind.KPCA: _fit_kpca,
    LearnerKind.GMM: _fit_gmm,
}


def fit_base_learner(spec: BaseLearnerSpec, X_train) -> BaseLearnerModel:
    """Fit one base learner on normal training samples."""
    if not isinstance(spec, BaseLearnerSpec):
        raise InvalidInput("spec must be a BaseLearnerSpec")
    X = _check_train(X_train)
    return _FITTERS[spec.kind](spec, X)


def _train_dim(model) -> int:
    if isinstance(model, SVDDModel):
        return model.support.shape[1]
    if isinstance(model, GMMModel):
        return model.means.shape[1]
    return model.X_train.shape[1]


def score_samples(model: BaseLearnerModel, X) -> np.ndarray:
    """Raw scores, higher meaning more normal."""
    X = _as_matrix(X)
    if X.shape[1] != _train_dim(model):
        raise InvalidInput(f"expected {_train_dim(model)} features, got {X.shape[1]}")
    scores = np.asarray(model.score_samples(X), dtype=float)
    if not np.all(np.isfinite(scores)):
        raise NumericalFailure(f"{model.kind.value} produced non-finite scores")
    return scores
