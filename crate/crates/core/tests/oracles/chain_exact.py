"""Exact rational stationary distribution of the single-station battery chain,
obtained by Gaussian elimination on the full generator (pi Q = 0, sum pi = 1).
Frozen into tests/exactss.rs."""
from fractions import Fraction as Fr


def stationary(lam, mu, r, b, f):
    n = r + b + 1
    q = [[Fr(0)] * n for _ in range(n)]
    for k in range(n):
        birth = lam * max(r - max(k - b, 0), 0)
        death = mu * min(k, f)
        if k + 1 < n:
            q[k][k + 1] = Fr(birth)
        if k > 0:
            q[k][k - 1] = Fr(death)
        q[k][k] = -sum(q[k][j] for j in range(n) if j != k)
    # rows of A: transpose of Q, last row replaced by normalisation
    a = [[q[j][i] for j in range(n)] + [Fr(0)] for i in range(n)]
    a[-1] = [Fr(1)] * n + [Fr(1)]
    for c in range(n):
        p = next(i for i in range(c, n) if a[i][c] != 0)
        a[c], a[p] = a[p], a[c]
        for i in range(n):
            if i != c and a[i][c] != 0:
                m = a[i][c] / a[c][c]
                a[i] = [x - m * y for x, y in zip(a[i], a[c])]
    return [a[i][n] / a[i][i] for i in range(n)]


pi = stationary(1, 2, 10, 5, 3)
print("pi =", [float(x) for x in pi])
b = 5
print("P(wait) =", float(sum(pi[b:])))
print("E(QW)   =", float(sum((k - b) * pi[k] for k in range(b, len(pi)))))
print("E(Q)    =", float(sum(k * pi[k] for k in range(len(pi)))))
