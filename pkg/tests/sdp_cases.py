"""Random SDPs with a known optimal primal-dual pair."""
import numpy as np

from extremebound.sdpsolve import SdpProblem


def _sym_basis_vec(M):
    return M.ravel()


def known_pair_problem(rng, sizes, m, n_free=0):
    """Problem whose optimum is certified by a strictly complementary (X, y, S).

    Returns (problem, optimal value).
    """
    Xs, Ss = [], []
    for n in sizes:
        Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        r = rng.integers(0, n + 1)
        dx = np.concatenate([rng.uniform(0.5, 2.0, r), np.zeros(n - r)])
        ds = np.concatenate([np.zeros(r), rng.uniform(0.5, 2.0, n - r)])
        Xs.append(Q @ np.diag(dx) @ Q.T)
        Ss.append(Q @ np.diag(ds) @ Q.T)
    A_blocks = []
    for n in sizes:
        rows = []
        for _ in range(m):
            G = rng.standard_normal((n, n))
            rows.append(_sym_basis_vec((G + G.T) / 2))
        A_blocks.append(np.array(rows))
    y = rng.standard_normal(m)
    x = rng.standard_normal(n_free)
    A_free = rng.standard_normal((m, n_free))
    b = A_free @ x + sum(A @ X.ravel() for A, X in zip(A_blocks, Xs))
    C_blocks = [S + (A.T @ y).reshape(n, n) for S, A, n in zip(Ss, A_blocks, sizes)]
    c_free = A_free.T @ y
    value = float(c_free @ x + sum(np.vdot(C, X) for C, X in zip(C_blocks, Xs)))
    problem = SdpProblem(list(sizes), b, A_blocks, n_free, A_free, c_free, C_blocks)
    return problem, value, (x, Xs, y, Ss)


def eigen_problem(C):
    """min <C, X> s.t. trace X = 1, X psd; optimum is the smallest eigenvalue of C."""
    n = C.shape[0]
    return SdpProblem([n], np.array([1.0]), [np.eye(n).ravel()[None, :]], C_blocks=[C])
