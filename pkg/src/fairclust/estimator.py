"""scikit-learn style front end."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .convert import best_k_subset
from .filtering import abv_filtering
from .instance import Group, Instance, brute_force_opt, euclidean_distances, evaluate
from .rounding import iterative_round

ALGORITHMS = ("bicriteria", "exact_k", "abv", "brute_force")


def check_groups(groups, n_samples: int):
    """Group labels as an array of length ``n_samples`` (default: one group)."""
    if groups is None:
        return np.zeros(n_samples, dtype=int)
    groups = np.asarray(groups)
    if groups.ndim != 1 or len(groups) != n_samples:
        raise ValueError(f"groups must be 1-d with {n_samples} entries, got shape {groups.shape}")
    return groups


def build_instance(X, groups, n_clusters: int, p: float, metric: str = "euclidean") -> Instance:
    if metric == "precomputed":
        D = check_array(X, dtype=float)
        if D.shape[0] != D.shape[1]:
            raise ValueError("precomputed distances must be square")
    elif metric == "euclidean":
        D = euclidean_distances(check_array(X, dtype=float))
    else:
        raise ValueError(f"unknown metric {metric!r}")
    n = D.shape[0]
    labels = check_groups(groups, n)
    ids = np.arange(n)
    gs = [Group.uniform(ids[labels == g]) for g in np.unique(labels)]
    return Instance(D, ids, ids, gs, n_clusters, p, check_metric=(metric == "precomputed"))


class SociallyFairKClustering(ClusterMixin, TransformerMixin, BaseEstimator):
    """Clustering that minimizes the worst per-group average cost d(x, C)^p.

    Centers are chosen among the training samples.

    Parameters
    ----------
    n_clusters : int
    p : float, default 1 (k-median); use 2 for k-means
    algorithm : {'bicriteria', 'exact_k', 'abv', 'brute_force'}
        'bicriteria' opens at most n_clusters + (number of groups) centers;
        'exact_k' then keeps the best n_clusters of them; 'abv' is the
        filtering baseline; 'brute_force' is exact and only for tiny inputs.
    lam : float, radius shrink factor of the rounding
    epsilon : float, filtering parameter for 'abv'
    metric : {'euclidean', 'precomputed'}
    lp_method : {'auto', 'tableau', 'highs'}
    """

    def __init__(self, n_clusters=5, p=1.0, algorithm="bicriteria", lam=0.3, epsilon=0.3,
                 metric="euclidean", lp_method="auto"):
        self.n_clusters = n_clusters
        self.p = p
        self.algorithm = algorithm
        self.lam = lam
        self.epsilon = epsilon
        self.metric = metric
        self.lp_method = lp_method

    def fit(self, X, y=None, groups=None):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        X = check_array(X, dtype=float)
        inst = build_instance(X, groups, self.n_clusters, self.p, self.metric)
        if self.algorithm == "bicriteria":
            centers = iterative_round(inst, self.lam, self.lp_method).centers
        elif self.algorithm == "exact_k":
            centers = best_k_subset(inst, iterative_round(inst, self.lam, self.lp_method).centers)
        elif self.algorithm == "abv":
            centers = abv_filtering(inst, self.epsilon, method=self.lp_method).centers
        else:
            centers = brute_force_opt(inst)[0]
        idx = np.asarray(centers, dtype=int)
        prof = evaluate(inst, centers)
        self.instance_ = inst
        self.cluster_centers_indices_ = idx
        if self.metric == "euclidean":
            self.cluster_centers_ = X[idx]
        self.labels_ = np.argmin(inst.distance[:, idx], axis=1)
        self.group_costs_ = np.array(prof.per_group)
        self.objective_ = prof.objective
        self.n_features_in_ = X.shape[1]
        return self

    def fit_predict(self, X, y=None, groups=None):
        return self.fit(X, groups=groups).labels_

    def transform(self, X):
        """Distances from each sample to each center (euclidean metric only)."""
        check_is_fitted(self, "cluster_centers_indices_")
        if self.metric != "euclidean":
            raise ValueError("transform needs metric='euclidean'")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        C = self.cluster_centers_
        d2 = (X * X).sum(1)[:, None] + (C * C).sum(1)[None, :] - 2 * X @ C.T
        return np.sqrt(np.maximum(d2, 0))

    def predict(self, X):
        return np.argmin(self.transform(X), axis=1)
