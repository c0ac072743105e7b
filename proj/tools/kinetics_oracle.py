#!/usr/bin/env python3
"""Exact rational evaluation of the kinetics and Jacobian at the default parameters."""
from fractions import Fraction as F
import sys

P = dict(alpha1=F("0.8"), alpha2=F(1), beta1=F("0.6"), beta2=F("0.5"), m1=F("0.3"), m2=F("0.1"),
         eta1=F(1), eta2=F(1), gamma1=F("0.5"), gamma2=F("0.3"), k=F("0.1"), l=F("0.1"))


def holling(m, eta, u):
    return m * u / (eta + u)


def f(u, p=P):
    u1, u2, u3 = u
    g1, g2 = holling(p["m1"], p["eta1"], u1), holling(p["m2"], p["eta2"], u2)
    return [p["alpha1"] * u1 * (1 - u1 - p["beta1"] * u2) - g1 * u3,
            p["alpha2"] * u2 * (1 - u2 - p["beta2"] * u1) - g2 * u3,
            (p["gamma1"] * g1 + p["gamma2"] * g2 - p["k"]) * u3 - p["l"] * u3 * u3]


def jacobian(u, p=P, h=F(1, 10**30)):
    # exact rational central differences; the O(h^2) error is far below double precision
    rows = [[F(0)] * 3 for _ in range(3)]
    for j in range(3):
        up = list(u); um = list(u)
        up[j] += h; um[j] -= h
        fp, fm = f(up), f(um)
        for i in range(3):
            rows[i][j] = (fp[i] - fm[i]) / (2 * h)
    return rows


def show(name, m):
    print(name, " ".join(f"{float(x):.17g}" for x in m))


ones, origin = [F(1)] * 3, [F(0)] * 3
fo = f(ones)
show("f(1,1,1)", fo)
for name, pt in (("J(0,0,0)", origin), ("J(1,1,1)", ones)):
    for r, row in enumerate(jacobian(pt)):
        show(f"{name} row{r}", row)
expected = [F("-0.63"), F("-0.55"), F("-0.11")]
diag0 = [jacobian(origin)[i][i] for i in range(3)]
ok = all(abs(a - b) < F(1, 10**12) for a, b in zip(fo, expected)) and \
    all(abs(a - b) < F(1, 10**12) for a, b in zip(diag0, [F("0.8"), F(1), F("-0.1")]))
print("oracle", "PASS" if ok else "FAIL")
sys.exit(0 if ok else 1)
