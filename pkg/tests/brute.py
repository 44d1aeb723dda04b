"""Literal, loop-based evaluation of the conditions, used as a test oracle.

Every probability is obtained by summing a dict of joint probabilities over
explicit tuples; nothing here shares code with the vectorized checkers.
"""

import itertools

EPS_ZERO = 1e-12
VARS = ("lam", "A", "B", "X", "Y")


def joint_dict(model):
    s = model.scenario
    out = {}
    for l, comp in enumerate(model.components):
        q = comp.resolved_policy().q
        for a, b, x, y in itertools.product(range(s.nA), range(s.nB), range(s.nX), range(s.nY)):
            out[(l, a, b, x, y)] = comp.weight * q[a][b] * comp.behavior.p[a][b][x][y]
    return out


def prob(joint, **fixed):
    idx = {v: i for i, v in enumerate(VARS)}
    total = 0.0
    for key, val in joint.items():
        if all(key[idx[k]] == v for k, v in fixed.items()):
            total += val
    return total


def cond(joint, target: dict, given: dict):
    """``P(target | given)`` or ``None`` when the conditioning event is negligible."""
    den = prob(joint, **given)
    if den < EPS_ZERO:
        return None
    return prob(joint, **target, **given) / den


def ranges(model):
    s = model.scenario
    return range(model.n_lambda), range(s.nA), range(s.nB), range(s.nX), range(s.nY)


def _max(values):
    vals = [v for v in values if v is not None]
    return max(vals) if vals else 0.0


def no_conspiracy(model):
    J = joint_dict(model)
    L, A, B, X, Y = ranges(model)
    devs = []
    for l, a, b in itertools.product(L, A, B):
        c = cond(J, {"A": a}, {"B": b, "lam": l})
        devs.append(None if c is None else abs(c - prob(J, A=a)))
        c = cond(J, {"B": b}, {"A": a, "lam": l})
        devs.append(None if c is None else abs(c - prob(J, B=b)))
    return _max(devs)


def parameter_independence(model):
    J = joint_dict(model)
    L, A, B, X, Y = ranges(model)
    devs = []
    for l, a, b in itertools.product(L, A, B):
        for x in X:
            c1 = cond(J, {"X": x}, {"A": a, "B": b, "lam": l})
            c2 = cond(J, {"X": x}, {"A": a, "lam": l})
            devs.append(None if c1 is None or c2 is None else abs(c1 - c2))
        for y in Y:
            c1 = cond(J, {"Y": y}, {"A": a, "B": b, "lam": l})
            c2 = cond(J, {"Y": y}, {"B": b, "lam": l})
            devs.append(None if c1 is None or c2 is None else abs(c1 - c2))
    return _max(devs)


def outcome_independence(model):
    J = joint_dict(model)
    L, A, B, X, Y = ranges(model)
    devs = []
    for l, a, b, x, y in itertools.product(L, A, B, X, Y):
        c1 = cond(J, {"X": x}, {"Y": y, "A": a, "B": b, "lam": l})
        c2 = cond(J, {"X": x}, {"A": a, "B": b, "lam": l})
        devs.append(None if c1 is None else abs(c1 - c2))
        c1 = cond(J, {"Y": y}, {"X": x, "A": a, "B": b, "lam": l})
        c2 = cond(J, {"Y": y}, {"A": a, "B": b, "lam": l})
        devs.append(None if c1 is None else abs(c1 - c2))
    return _max(devs)


def fr(model):
    J = joint_dict(model)
    L, A, B, X, Y = ranges(model)
    devs = []
    for l, a, b in itertools.product(L, A, B):
        for y in Y:
            c = cond(J, {"A": a}, {"Y": y, "B": b, "lam": l})
            devs.append(None if c is None else abs(c - prob(J, A=a)))
        for x in X:
            c = cond(J, {"B": b}, {"X": x, "A": a, "lam": l})
            devs.append(None if c is None else abs(c - prob(J, B=b)))
    return _max(devs)


def _sided(model, l):
    """Per-component one-sided marginals averaged uniformly over the distant setting."""
    s = model.scenario
    p = model.components[l].behavior.p
    pa = [[sum(sum(p[a][b][x][y] for y in range(s.nY)) for b in range(s.nB)) / s.nB for x in range(s.nX)]
          for a in range(s.nA)]
    pb = [[sum(sum(p[a][b][x][y] for x in range(s.nX)) for a in range(s.nA)) / s.nA for y in range(s.nY)]
          for b in range(s.nB)]
    return p, pa, pb


def bell_local(model):
    s = model.scenario
    devs = []
    for l in range(model.n_lambda):
        p, pa, pb = _sided(model, l)
        for a, b in itertools.product(range(s.nA), range(s.nB)):
            for x, y in itertools.product(range(s.nX), range(s.nY)):
                devs.append(abs(p[a][b][x][y] - pa[a][x] * pb[b][y]))
            for x in range(s.nX):
                devs.append(abs(sum(p[a][b][x][y] for y in range(s.nY)) - pa[a][x]))
            for y in range(s.nY):
                devs.append(abs(sum(p[a][b][x][y] for x in range(s.nX)) - pb[b][y]))
    return _max(devs)


def no_signaling(behavior):
    s = behavior.scenario
    p = behavior.p
    devs = []
    for a, b1, b2, x in itertools.product(range(s.nA), range(s.nB), range(s.nB), range(s.nX)):
        devs.append(abs(sum(p[a][b1][x][y] - p[a][b2][x][y] for y in range(s.nY))))
    for a1, a2, b, y in itertools.product(range(s.nA), range(s.nA), range(s.nB), range(s.nY)):
        devs.append(abs(sum(p[a1][b][x][y] - p[a2][b][x][y] for x in range(s.nX))))
    return _max(devs)
