"""Independent high-precision oracle for the stationary densities of the
piecewise-linear diffusions dX = m(X) dt + sqrt(2 mu) dW.

The stationary density is proportional to exp(int_0^x m(y) dy / mu); piece
masses, tail probabilities and tail moments are obtained by mpmath
quadrature of that expression. No closed-form alpha/r formulas are used.
Values printed here are frozen into tests/asymptotics.rs and tests/acceptance.rs.
"""
from mpmath import mp, mpf, exp, quad, inf, sqrt

mp.dps = 40


def drift_integral(x, lam, mu, beta, gamma, unlimited):
    # antiderivative of m; additive constants cancel after normalisation
    up = max(x - beta, 0)
    a = -lam * up * up / 2
    if unlimited:
        return a - mu * x * x / 2
    if x <= gamma:
        b = x * x / 2
    else:
        b = gamma * gamma / 2 + gamma * (x - gamma)
    return a - mu * b


def report(name, lam, mu, beta, gamma, unlimited):
    lam, mu, beta, gamma = map(mpf, (lam, mu, beta, gamma))
    u = lambda x: exp(drift_integral(x, lam, mu, beta, gamma, unlimited) / mu)
    if unlimited:
        cuts = [beta, beta]
    else:
        cuts = sorted([beta, gamma])
    lo, hi = cuts
    m1 = quad(u, [-inf, lo])
    m2 = quad(u, [lo, hi]) if hi > lo else mpf(0)
    m3 = quad(u, [hi, inf])
    z = m1 + m2 + m3
    # split at every kink of the integrand so quadrature stays accurate
    pts = [beta] + [c for c in cuts if c > beta] + [inf]
    wait = quad(u, pts) / z
    tail = quad(lambda x: (x - beta) * u(x), pts) / z
    print(f"{name}: lam={lam} mu={mu} beta={beta} gamma={gamma}")
    print(f"  alpha = ({mp.nstr(m1/z, 20)}, {mp.nstr(m2/z, 20)}, {mp.nstr(m3/z, 20)})")
    print(f"  wait  = {mp.nstr(wait, 20)}")
    print(f"  tail  = {mp.nstr(tail, 20)}")
    for x in (-1, 0.25, 0.75, 1.5):
        print(f"  f({x}) = {mp.nstr(u(mpf(x))/z, 20)}")


report("main", 1, 1, 1, 0.5, False)
report("main_gamma0", 1, 1, 1, 0, False)
report("main_b", 2, 1, 1.5, -0.3, False)
report("unlimited", 1, 1, 1, 0, True)
report("unlimited_b", 0.5, 2, 0.7, 0, True)
report("swap_unconstrained", 1, 1, 0.5, 1.2, False)
report("swap_unconstrained_b", 2, 1, -0.3, 0.8, False)
