"""Archetypal analysis by alternating simplex-constrained least squares.

Data rows are modeled as convex mixtures of k archetypes, which are
themselves convex mixtures of data rows: X ~ alpha . Z with Z = beta . X,
alpha and beta row-stochastic. Each alternation solves the alpha rows (all
at once, shared quadratic) and then each beta row by projected gradient with
exact Euclidean projection onto the simplex; every solve is warm-started, so
the residual sum of squares never increases.
"""

from dataclasses import dataclass

import numpy as np

from stationprint.errors import DegenerateInputError, InsufficientScreeError

OUTER_ITERATIONS = 200
RELATIVE_RSS_TOL = 1e-6
ROW_OBJECTIVE_TOL = 1e-8
INNER_ITERATIONS = 300


@dataclass(frozen=True)
class ArchetypeModel:
    archetypes: np.ndarray  # k x n  (= beta @ X)
    alpha: np.ndarray       # stations x k, rows on the simplex
    beta: np.ndarray        # k x stations, rows on the simplex
    rss: float

    @property
    def k(self) -> int:
        return self.archetypes.shape[0]


def simplex_project_rows(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of each row onto the probability simplex."""
    v = np.atleast_2d(v)
    n = v.shape[1]
    u = np.sort(v, axis=1)[:, ::-1]
    cumulative = np.cumsum(u, axis=1) - 1.0
    counts = np.arange(1, n + 1)
    mask = u * counts > cumulative
    rho = n - 1 - np.argmax(mask[:, ::-1], axis=1)  # last index where mask holds
    theta = cumulative[np.arange(len(v)), rho] / (rho + 1.0)
    return np.maximum(v - theta[:, None], 0.0)


def _row_objectives(x, G, C):
    return ((x @ G) * x).sum(axis=1) - 2.0 * (C * x).sum(axis=1)


POLISH_SUPPORT_CAP = 64


def _solve_kkt(G, c, support):
    """Equality-constrained optimum on a face: minimize a G a - 2 c a with
    sum(a) = 1 over the given support. Returns None when unsolvable."""
    m = len(support)
    kkt = np.zeros((m + 1, m + 1))
    kkt[:m, :m] = 2.0 * G[np.ix_(support, support)]
    kkt[:m, m] = 1.0
    kkt[m, :m] = 1.0
    rhs = np.concatenate([2.0 * c[support], [1.0]])
    try:
        solution = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        solution = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    a = solution[:m]
    if abs(a.sum() - 1.0) > 1e-6:
        return None  # inconsistent (degenerate) system
    return a


def _accept_candidates(out, x, G, C, objectives, rows, support, A):
    for i, a in zip(rows, A):
        candidate = np.zeros_like(x[i])
        candidate[support] = np.maximum(a, 0.0)
        candidate /= candidate.sum()
        value = candidate @ G @ candidate - 2.0 * C[i] @ candidate
        if value <= objectives[i] + 1e-15:
            out[i] = candidate


def _polish_rows(x, G, C):
    """KKT solve on each row's support, pruning negative coordinates.

    Projected gradient identifies the face but crawls along it when G is
    rank-deficient; this finishes the row on that face. Rows sharing a
    support share one KKT factorization. A polished row is only accepted
    when feasible and at least as good; oversized supports are left to
    further projected-gradient rounds.
    """
    out = x.copy()
    objectives = _row_objectives(x, G, C)
    groups = {}
    for i in range(x.shape[0]):
        support = tuple(np.flatnonzero(x[i] > 1e-12))
        if support and len(support) <= POLISH_SUPPORT_CAP:
            groups.setdefault(support, []).append(i)

    for support, rows in groups.items():
        support = list(support)
        m = len(support)
        kkt = np.zeros((m + 1, m + 1))
        kkt[:m, :m] = 2.0 * G[np.ix_(support, support)]
        kkt[:m, m] = 1.0
        kkt[m, :m] = 1.0
        rhs = np.ones((m + 1, len(rows)))
        rhs[:m] = 2.0 * C[np.ix_(rows, support)].T
        try:
            solution = np.linalg.solve(kkt, rhs)
        except np.linalg.LinAlgError:
            solution = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
        A = solution[:m].T  # one solution per row
        consistent = np.abs(A.sum(axis=1) - 1.0) <= 1e-6
        feasible = consistent & (A >= -1e-12).all(axis=1)
        done_rows = [i for i, ok in zip(rows, feasible) if ok]
        _accept_candidates(out, x, G, C, objectives, done_rows,
                           support, A[feasible])
        # rows with negative coordinates: prune per row
        for i, a, ok, cons in zip(rows, A, feasible, consistent):
            if ok or not cons:
                continue
            row_support = [s for s, v in zip(support, a) if v > 0]
            while row_support and len(row_support) < m:
                a_row = _solve_kkt(G, C[i], row_support)
                if a_row is None:
                    break
                if (a_row >= -1e-12).all():
                    _accept_candidates(out, x, G, C, objectives, [i],
                                       row_support, a_row[None, :])
                    break
                kept = [s for s, v in zip(row_support, a_row) if v > 0]
                if len(kept) == len(row_support):
                    break
                row_support = kept
    return out


def _pg_rows(x0, G, C, lipschitz, max_iter=INNER_ITERATIONS, tol=ROW_OBJECTIVE_TOL):
    """Minimize tr(x G x^T) - 2 tr(C x^T) row-wise over simplex rows.

    Fixed step 1/L with exact projection (monotone in every row objective),
    then an exact finish on the identified support.
    """
    x = x0
    if lipschitz <= 0:
        return x
    step = 1.0 / lipschitz
    xG = x @ G
    objective = (xG * x).sum(axis=1) - 2.0 * (C * x).sum(axis=1)
    for _ in range(max_iter):
        x_new = simplex_project_rows(x - step * (2.0 * (xG - C)))
        xG = x_new @ G
        new_objective = (xG * x_new).sum(axis=1) - 2.0 * (C * x_new).sum(axis=1)
        improvement = objective - new_objective
        x = x_new
        done = improvement <= 1e-16 + tol * np.abs(objective)
        objective = new_objective
        if done.all():
            break
    return _polish_rows(x, G, C)


def _furthest_points(X, k, rng):
    """FurthestSum seeding: greedily maximize the summed distance to the
    already-selected rows, starting from a random row that is then dropped.
    Extreme points dominate this criterion, so hull vertices get picked."""
    start = int(rng.integers(len(X)))
    selected = [start]
    dist_sum = np.linalg.norm(X - X[start], axis=1)
    for _ in range(k):
        for s in selected:
            dist_sum[s] = -1.0  # never reselect
        nxt = int(dist_sum.argmax())
        selected.append(nxt)
        dist_sum += np.linalg.norm(X - X[nxt], axis=1)
    selected.pop(0)
    return selected


def _rss(X, alpha, beta):
    residual = X - alpha @ (beta @ X)
    return float(np.einsum("ij,ij->", residual, residual))


def archetypal_analysis(X, k: int, seed: int = 0, init_beta=None) -> ArchetypeModel:
    """Fit k archetypes to the rows of X; deterministic given seed."""
    X = np.asarray(X, dtype=np.float64)
    s, n = X.shape
    if not (2 <= k < s):
        raise DegenerateInputError(f"need stations > k >= 2, got k={k}, stations={s}")
    if np.allclose(X, X[0]):
        raise DegenerateInputError("all data rows identical")

    rng = np.random.default_rng(seed)
    if init_beta is None:
        beta = np.zeros((k, s))
        beta[np.arange(k), _furthest_points(X, k, rng)] = 1.0
    else:
        beta = np.array(init_beta, dtype=np.float64)
        if beta.shape != (k, s):
            raise DegenerateInputError(f"init beta must be {k} x {s}")

    XXt = X @ X.T
    xxt_lmax = float(np.linalg.eigvalsh(XXt)[-1])
    alpha = np.full((s, k), 1.0 / k)

    rss = _rss(X, alpha, beta)
    for _ in range(OUTER_ITERATIONS):
        Z = beta @ X
        # alpha rows: shared quadratic G = Z Z^T, linear term X Z^T
        G = Z @ Z.T
        lip = 2.0 * float(np.linalg.eigvalsh(G)[-1])
        alpha = _pg_rows(alpha, G, X @ Z.T, lip)

        # beta rows, one archetype at a time (coordinate descent); the weight
        # scales out of the argmin, so XXt is shared across rows unscaled
        residual = X - alpha @ (beta @ X)
        for j in range(k):
            weight = float(alpha[:, j] @ alpha[:, j])
            if weight <= 1e-30:
                continue  # unused archetype: objective constant in this row
            partial = residual + np.outer(alpha[:, j], beta[j] @ X)
            c = (alpha[:, j] @ partial) @ X.T / weight
            new_row = _pg_rows(beta[j][None, :], XXt, c[None, :], 2.0 * xxt_lmax)[0]
            residual = partial - np.outer(alpha[:, j], new_row @ X)
            beta[j] = new_row

        new_rss = _rss(X, alpha, beta)
        assert new_rss <= rss + 1e-9 * max(1.0, rss), "RSS must not increase"
        done = (rss - new_rss) <= RELATIVE_RSS_TOL * max(rss, 1e-30)
        rss = new_rss
        if done:
            break

    return ArchetypeModel(archetypes=beta @ X, alpha=alpha, beta=beta, rss=rss)


def rss_scree(X, k_range, seed: int = 0) -> list:
    """(k, RSS) per k. If a fresh fit for k+1 lands above the k fit (a bad
    local minimum), it is retried from the previous solution extended by one
    furthest point, keeping the best; the curve is then non-increasing."""
    X = np.asarray(X, dtype=np.float64)
    results = []
    previous = None
    for k in sorted(k_range):
        model = archetypal_analysis(X, k, seed)
        if previous is not None and model.rss > previous.rss and k == previous.k + 1:
            grown = np.vstack([previous.beta, np.zeros((1, X.shape[0]))])
            used = {int(row.argmax()) for row in previous.beta}
            dist = np.linalg.norm(X - previous.alpha @ previous.archetypes, axis=1)
            for idx in np.argsort(dist)[::-1]:
                if int(idx) not in used:
                    grown[-1, int(idx)] = 1.0
                    break
            if grown[-1].sum() == 0:
                grown[-1, int(dist.argmax())] = 1.0
            retry = archetypal_analysis(X, k, seed, init_beta=grown)
            if retry.rss < model.rss:
                model = retry
        results.append((k, model.rss))
        previous = model
    return results


def select_archetype_count(scree) -> int:
    """Elbow pick: k with the largest discrete second difference of RSS;
    ties toward smaller k. Needs >= 3 consecutive k values."""
    scree = sorted(scree)
    if len(scree) < 3:
        raise InsufficientScreeError("elbow selection needs at least 3 scree points")
    ks = [k for k, _ in scree]
    if ks != list(range(ks[0], ks[-1] + 1)):
        raise InsufficientScreeError("scree k values must be consecutive")
    rss = [r for _, r in scree]
    best_k, best_bend = None, -np.inf
    for i in range(1, len(scree) - 1):
        bend = rss[i - 1] - 2.0 * rss[i] + rss[i + 1]
        if bend > best_bend:  # strict: exact ties keep the smaller k
            best_k, best_bend = ks[i], bend
    return best_k
