"""Loop-by-loop reference versions of the pooling formulas."""


def rubin(estimates, variances):
    M = len(estimates)
    eta = 0.0
    for e in estimates:
        eta += e
    eta /= M
    w = 0.0
    for v in variances:
        w += v
    w /= M
    b = 0.0
    for e in estimates:
        b += (e - eta) ** 2
    b /= M - 1
    return eta, w, b, w + (1 + 1 / M) * b


def cm(g, r, n):
    """``g`` is a list of M rows, each holding g-values for all n units."""
    M = len(g)
    total = 0.0
    for i in range(r, n):
        mean = 0.0
        for k in range(M):
            mean += g[k][i]
        mean /= M
        for k in range(M):
            total += (g[k][i] - mean) ** 2
    return total / (n * n * (M - 1))


def d_terms(g, r, n):
    M = len(g)
    d = [[0.0] * n for _ in range(M)]
    for i in range(n):
        mean = 0.0
        for k in range(M):
            mean += g[k][i]
        mean /= M
        for k in range(M):
            d[k][i] = g[k][i] - mean

    def term(upto):
        first = 0.0
        second = 0.0
        for k in range(M):
            s = 0.0
            sq = 0.0
            for i in range(upto):
                s += d[k][i]
                sq += d[k][i] ** 2
            first += (s / n) ** 2
            second += sq / (n * n)
        return first / (M - 1) - second / (M - 1)

    return term(n), term(r)
