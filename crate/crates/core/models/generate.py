"""Regenerates the bundled model files in this directory.

    python3 generate.py
"""

import itertools
import json
import os

HERE = os.path.dirname(os.path.abspath(__file__))


def joint(digits, base):
    idx = 0
    for d in digits:
        idx = idx * base + d
    return idx


def comonotone(p):
    """Joint law of binary types driven by one common uniform: agent i is 1
    iff U < p[i]."""
    n = len(p)
    cuts = sorted(set([0.0, 1.0] + [min(max(v, 0.0), 1.0) for v in p]))
    law = {}
    for lo, hi in zip(cuts, cuts[1:]):
        if hi <= lo:
            continue
        mid = 0.5 * (lo + hi)
        out = tuple(1 if mid < p[i] else 0 for i in range(n))
        law[out] = law.get(out, 0.0) + (hi - lo)
    return law


def independent(p):
    law = {}
    for out in itertools.product([0, 1], repeat=len(p)):
        w = 1.0
        for o, q in zip(out, p):
            w *= q if o else 1.0 - q
        law[out] = w
    return law


def contagion_tensor(n, pressure, contact, rho):
    """Types 0 = susceptible, 1 = infected; actions 0 = none, 1 = protect."""
    nj = 2 ** n
    t = [[0.0] * (nj * nj) for _ in range(nj)]
    for xs in itertools.product([0, 1], repeat=n):
        for acts in itertools.product([0, 1], repeat=n):
            p = []
            for i in range(n):
                if xs[i] == 1:
                    p.append(1.0 - (0.3 + 0.2 * acts[i]))
                else:
                    exposure = sum(
                        contact * (1.0 - 0.5 * acts[j])
                        for j in range(n)
                        if j != i and xs[j] == 1
                    )
                    p.append(min(1.0, pressure + exposure) * (1.0 - 0.7 * acts[i]))
            ind = independent(p)
            com = comonotone(p)
            col = joint(xs, 2) * nj + joint(acts, 2)
            for out in itertools.product([0, 1], repeat=n):
                v = (1.0 - rho) * ind.get(out, 0.0) + rho * com.get(out, 0.0)
                t[joint(out, 2)][col] = v
    return t


def infected_share(n):
    """Coefficients of the mean infected fraction across slots."""
    return [sum(xs) / n for xs in itertools.product([0, 1], repeat=n)]


def contagion(n, horizon, contact):
    share = infected_share(n)
    nj = 2 ** n
    return {
        "n_corr": n,
        "n_states": 2,
        "n_actions": 2,
        "discount": 0.9,
        "horizon": horizon,
        "kernel": {
            "base_tensors": [
                contagion_tensor(n, 0.05, contact, 0.2),
                contagion_tensor(n, 0.6, contact, 0.2),
            ],
            "weights": [
                {"const": 1.0, "coeffs": [-s for s in share]},
                {"const": 0.0, "coeffs": share},
            ],
        },
        "reward": {
            "base": [[0.0, -0.2], [-1.0, -1.15]],
            "moment_terms": [
                {
                    "coeffs": [[-0.8, -0.3], [0.0, 0.0]],
                    "selector": {"type": "marginal", "state": 1},
                }
            ],
        },
        "initial_meanfield": [1.0 / nj] * nj,
    }


def identity1():
    return {
        "n_corr": 1,
        "n_states": 2,
        "n_actions": 2,
        "discount": 0.9,
        "horizon": 3,
        "kernel": {
            "base_tensors": [[[1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 1.0]]],
            "weights": [{"const": 1.0, "coeffs": [0.0, 0.0]}],
        },
        "reward": {"base": [[1.0, 0.5], [0.0, 0.25]], "moment_terms": []},
        "initial_meanfield": [0.5, 0.5],
    }


def uniform2():
    return {
        "n_corr": 2,
        "n_states": 2,
        "n_actions": 2,
        "discount": 0.9,
        "horizon": 3,
        "kernel": {
            "base_tensors": [[[0.25] * 16 for _ in range(4)]],
            "weights": [{"const": 1.0, "coeffs": [0.0] * 4}],
        },
        "reward": {
            "base": [[0.0, 0.3], [1.0, 0.2]],
            "moment_terms": [
                {
                    "coeffs": [[0.0, -0.5], [0.0, 0.0]],
                    "selector": {"type": "linear", "coeffs": [0.0, 0.5, 0.5, 1.0]},
                }
            ],
        },
        "initial_meanfield": [0.25] * 4,
    }


def main():
    models = {
        "contagion2.json": contagion(2, 3, 0.4),
        "contagion3.json": contagion(3, 3, 0.25),
        "identity1.json": identity1(),
        "uniform2.json": uniform2(),
    }
    for name, spec in models.items():
        with open(os.path.join(HERE, name), "w") as f:
            json.dump(spec, f, indent=1)
            f.write("\n")


if __name__ == "__main__":
    main()
