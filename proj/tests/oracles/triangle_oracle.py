#!/usr/bin/env python3
"""Brute-force reference for the 3-node triangle run frozen in test_atc.cpp.

d_z = 2, shrinkage m = 0, rho = 0.5, alpha = 0.6, gamma = 0.8, sigma = 1, K = 3.
Prints every final quantity with 17 significant digits.
"""
import math

Z0 = [[1.0, 0.0], [0.0, 2.0], [-1.5, 0.5]]
EDGES = [(0, 1), (0, 2), (1, 2)]
RHO, ALPHA, GAMMA, SIGMA, K = 0.5, 0.6, 0.8, 1.0, 3


def main():
    n = len(Z0)
    z = [row[:] for row in Z0]
    trust = {e: 1.0 for e in EDGES}
    r = [0.0] * n
    energy = [0.0] * n
    conflict = [0.0] * n
    for _ in range(K):
        psi = [[RHO * v for v in row] for row in z]
        for (a, b) in EDGES:
            d2 = sum((psi[a][t] - psi[b][t]) ** 2 for t in range(2))
            tau = math.exp(-d2 / (2 * SIGMA * SIGMA))
            trust[(a, b)] = GAMMA * trust[(a, b)] + (1 - GAMMA) * tau
        new_z = []
        for i in range(n):
            nbrs = [(j, trust[(min(i, j), max(i, j))]) for j in range(n) if j != i]
            total = sum(t for _, t in nbrs)
            c = [sum(t / total * psi[j][d] for j, t in nbrs) for d in range(2)]
            zn = [ALPHA * psi[i][d] + (1 - ALPHA) * c[d] for d in range(2)]
            r[i] += math.sqrt(sum((z[i][d] - c[d]) ** 2 for d in range(2)))
            conflict[i] += sum(((psi[i][d] - z[i][d]) - (c[d] - z[i][d])) ** 2 for d in range(2))
            energy[i] += sum((zn[d] - psi[i][d]) ** 2 for d in range(2))
            new_z.append(zn)
        z = new_z
    fmt = lambda v: "%.17g" % v
    print("z", [[fmt(v) for v in row] for row in z])
    print("T", [fmt(trust[e]) for e in EDGES])
    print("r", [fmt(v) for v in r])
    print("E", [fmt(v) for v in energy])
    print("conflict", [fmt(v) for v in conflict])


if __name__ == "__main__":
    main()
