"""Independent reference implementations used as test oracles.

Nothing here reuses package internals beyond public data containers: the
marginal likelihood is dense linear algebra from first principles, partition
prior masses come straight from the weight-family formulas, component
extraction is a breadth-first search, and the reference partition sampler is
a plain single-site auxiliary-variable Gibbs sampler with memoized marginals.
"""

import math
from collections import deque

import numpy as np
from scipy.special import gammaln


def set_partitions(n):
    """All set partitions of range(n) as canonical (first-appearance) tuples."""
    parts = [(0,)]
    for _ in range(n - 1):
        nxt = []
        for smaller in parts:
            m = max(smaller) + 1
            for lab in range(m + 1):
                nxt.append(smaller + (lab,))
        parts = nxt
    return parts


def bfs_components(p, pairs, bonds):
    """Connected components of the bonded graph by breadth-first search."""
    adj = [[] for _ in range(p)]
    for e, (j, k) in enumerate(pairs):
        if bonds[e] == 1:
            adj[j].append(k)
            adj[k].append(j)
    labels = [-1] * p
    comp = 0
    for start in range(p):
        if labels[start] != -1:
            continue
        queue = deque([start])
        labels[start] = comp
        while queue:
            v = queue.popleft()
            for w in adj[v]:
                if labels[w] == -1:
                    labels[w] = comp
                    queue.append(w)
        comp += 1
    return np.array(labels), comp


def log_marginal_dense(y, W, X, labels, eta, m_mu, c_mu, a_sigma, b_sigma):
    """Collapsed marginal likelihood by dense from-scratch linear algebra."""
    y = np.asarray(y, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    n = y.shape[0]
    M = labels.max() + 1
    sizes = np.bincount(labels, minlength=M)
    Xs = np.zeros((n, M))
    for m in range(M):
        Xs[:, m] = X[:, labels == m].sum(axis=1) / np.sqrt(sizes[m])
    Xt = np.hstack([W, Xs])
    q = W.shape[1]
    m_mu = np.broadcast_to(np.atleast_1d(m_mu), (q,))
    c_mu = np.broadcast_to(np.atleast_1d(c_mu), (q,))
    eta = np.broadcast_to(np.atleast_1d(eta), (M,))
    prior_var = np.concatenate([c_mu, eta])
    prior_mean = np.concatenate([m_mu, np.zeros(M)])
    Sinv = np.diag(1.0 / prior_var)
    P = Sinv + Xt.T @ Xt
    rhs = Sinv @ prior_mean + Xt.T @ y
    m_hat = np.linalg.solve(P, rhs)
    a_hat = a_sigma + n / 2
    b_hat = b_sigma + 0.5 * (prior_mean @ Sinv @ prior_mean + y @ y
                             - m_hat @ P @ m_hat)
    sign, logdet_p = np.linalg.slogdet(P)
    assert sign > 0
    return float(-0.5 * n * np.log(2 * np.pi)
                 - 0.5 * logdet_p - 0.5 * np.sum(np.log(prior_var))
                 + a_sigma * np.log(b_sigma) - a_hat * np.log(b_hat)
                 + gammaln(a_hat) - gammaln(a_sigma))


def log_gibbs_mass(labels, family, **par):
    """log[V_p(M) prod_m W(|C_m|)] straight from the weight-family formulas."""
    labels = np.asarray(labels, dtype=np.int64)
    p = labels.shape[0]
    M = labels.max() + 1
    sizes = np.bincount(labels, minlength=M)
    if family == "DP":
        a = par["alpha"]
        lv = gammaln(a) + M * math.log(a) - gammaln(a + p)
        lw = sum(gammaln(s) for s in sizes)
    elif family == "PY":
        a, d = par["alpha"], par["delta"]
        lv = (gammaln(a + 1.0)
              + sum(math.log(a + m * d) for m in range(1, M))
              - gammaln(a + p))
        lw = sum(gammaln(s - d) - gammaln(1.0 - d) for s in sizes)
    elif family == "MFM":
        g, log_pl, l_max = par["gamma"], par["log_pl"], par.get("l_max", 2000)
        terms = [gammaln(g * l) + gammaln(l + 1.0) - gammaln(g * l + p)
                 - gammaln(l - M + 1.0) + log_pl(l)
                 for l in range(M, l_max + 1)]
        mx = max(terms)
        lv = mx + math.log(sum(math.exp(t - mx) for t in terms))
        lw = sum(gammaln(s + g) - gammaln(g) for s in sizes)
    else:
        raise ValueError(family)
    return float(lv + lw)


def potts_term(labels, pairs, ups):
    return ups * sum(1 for (j, k) in pairs if labels[j] == labels[k])


def exact_partition_posterior(y, W, X, pairs, ups, family, eta, hyper_tuple,
                              **par):
    """Normalized posterior over all set partitions (tiny p only)."""
    m_mu, c_mu, a_sigma, b_sigma = hyper_tuple
    p = X.shape[1]
    parts = set_partitions(p)
    logpost = np.array([
        potts_term(z, pairs, ups)
        + log_gibbs_mass(z, family, **par)
        + log_marginal_dense(y, W, X, z, eta, m_mu, c_mu, a_sigma, b_sigma)
        for z in parts])
    w = np.exp(logpost - logpost.max())
    return parts, w / w.sum()


def contingency_counts(a, b):
    table = {}
    for x, y in zip(a, b):
        table[(x, y)] = table.get((x, y), 0) + 1
    return table


def vi_reference(a, b):
    """Variation of information from an explicit contingency dictionary."""
    n = len(a)
    table = contingency_counts(a, b)
    ra, cb = {}, {}
    for (x, y), c in table.items():
        ra[x] = ra.get(x, 0) + c
        cb[y] = cb.get(y, 0) + c
    h_a = -sum(c / n * math.log(c / n) for c in ra.values())
    h_b = -sum(c / n * math.log(c / n) for c in cb.values())
    mi = sum(c / n * math.log((c / n) / (ra[x] / n * cb[y] / n))
             for (x, y), c in table.items())
    return h_a + h_b - 2 * mi


def ari_reference(a, b):
    """Adjusted Rand index from an explicit contingency dictionary."""
    n = len(a)
    table = contingency_counts(a, b)
    ra, cb = {}, {}
    for (x, y), c in table.items():
        ra[x] = ra.get(x, 0) + c
        cb[y] = cb.get(y, 0) + c

    def c2(v):
        return v * (v - 1) / 2

    sum_ij = sum(c2(c) for c in table.values())
    sum_a = sum(c2(c) for c in ra.values())
    sum_b = sum(c2(c) for c in cb.values())
    total = c2(n)
    expected = sum_a * sum_b / total
    max_index = (sum_a + sum_b) / 2
    if max_index == expected:
        return 1.0 if sum_ij == max_index else 0.0
    return (sum_ij - expected) / (max_index - expected)


def single_site_reference_sampler(y, W, X, pairs, ups, alpha, eta_val,
                                  hyper_tuple, n_sweeps, burn_in, seed):
    """Plain single-site auxiliary-variable partition sampler (DP weights,
    fixed cluster scale, h = 1), with the Potts factor exp(ups) per agreeing
    neighbour.  Returns empirical frequencies over canonical label tuples."""
    m_mu, c_mu, a_sigma, b_sigma = hyper_tuple
    rng = np.random.default_rng(seed)
    p = X.shape[1]
    z = [0] * p
    neighbors = [[] for _ in range(p)]
    for (j, k) in pairs:
        neighbors[j].append(k)
        neighbors[k].append(j)
    marg_cache = {}

    def canon(labels):
        remap, nxt = {}, 0
        out = []
        for v in labels:
            if v not in remap:
                remap[v] = nxt
                nxt += 1
            out.append(remap[v])
        return tuple(out)

    def logmarg(labels):
        key = canon(labels)
        if key not in marg_cache:
            marg_cache[key] = log_marginal_dense(
                y, W, X, np.array(key), eta_val, m_mu, c_mu, a_sigma, b_sigma)
        return marg_cache[key]

    freq = {}
    for sweep in range(burn_in + n_sweeps):
        for j in range(p):
            others = [z[i] for i in range(p) if i != j]
            uniq = sorted(set(others))
            counts = {u: others.count(u) for u in uniq}
            cands = []
            for u in uniq:
                znew = list(z)
                znew[j] = u
                lw = (math.log(counts[u]) + logmarg(znew)
                      + ups * sum(1 for k in neighbors[j] if znew[k] == u))
                cands.append((znew, lw))
            znew = list(z)
            znew[j] = max(uniq) + 1 if uniq else 0
            cands.append((znew, math.log(alpha) + logmarg(znew)))
            lws = np.array([lw for (_, lw) in cands])
            pr = np.exp(lws - lws.max())
            pr /= pr.sum()
            z = list(cands[rng.choice(len(cands), p=pr)][0])
        if sweep >= burn_in:
            key = canon(z)
            freq[key] = freq.get(key, 0) + 1
    return {k: v / n_sweeps for k, v in freq.items()}


def tv_distance(freq_a: dict, freq_b: dict) -> float:
    keys = set(freq_a) | set(freq_b)
    return 0.5 * sum(abs(freq_a.get(k, 0.0) - freq_b.get(k, 0.0))
                     for k in keys)


def full_chain_reference_sampler(y, W, X, pairs, ups, alpha, hyper_tuple,
                                 a_eta, b_eta, h, n_sweeps, burn_in, seed):
    """Independent full three-step chain: single-site partition moves with h
    auxiliary new-cluster candidates (a block forming its own cluster keeps
    its scale as the first auxiliary), dense-matrix conjugate coefficient
    draws, and per-cluster scale refreshes.  Returns empirical partition
    frequencies over canonical label tuples."""
    m_mu, c_mu, a_sigma, b_sigma = hyper_tuple
    rng = np.random.default_rng(seed)
    n, p = X.shape
    q = W.shape[1]
    neighbors = [[] for _ in range(p)]
    for (j, k) in pairs:
        neighbors[j].append(k)
        neighbors[k].append(j)
    z = [0] * p
    eta = {0: b_eta / a_eta}
    freq = {}

    def canon(labels):
        remap, out, nxt = {}, [], 0
        for v in labels:
            if v not in remap:
                remap[v] = nxt
                nxt += 1
            out.append(remap[v])
        return tuple(out)

    def marginal(labels, eta_by_label):
        uniq = list(dict.fromkeys(labels))
        lab = np.array([uniq.index(v) for v in labels])
        ev = np.array([eta_by_label[u] for u in uniq])
        return log_marginal_dense(y, W, X, lab, ev, m_mu, c_mu,
                                  a_sigma, b_sigma)

    for sweep in range(burn_in + n_sweeps):
        for j in range(p):
            zj = z[j]
            counts = {}
            for i in range(p):
                if i != j:
                    counts[z[i]] = counts.get(z[i], 0) + 1
            singleton = zj not in counts
            aux = []
            for c in range(h):
                if singleton and c == 0:
                    aux.append(eta[zj])
                else:
                    aux.append(b_eta / rng.gamma(a_eta))
            cands, lws = [], []
            for m in sorted(counts):
                z2 = list(z)
                z2[j] = m
                eta2 = {k: v for k, v in eta.items() if k in counts}
                lws.append(math.log(counts[m]) + marginal(z2, eta2)
                           + ups * sum(1 for k in neighbors[j]
                                       if z2[k] == m))
                cands.append(("old", m, None))
            newlab = max(z) + 1
            for c in range(h):
                z2 = list(z)
                z2[j] = newlab
                eta2 = {k: v for k, v in eta.items() if k in counts}
                eta2[newlab] = aux[c]
                lws.append(-math.log(h) + math.log(alpha)
                           + marginal(z2, eta2))
                cands.append(("new", newlab, aux[c]))
            lws = np.array(lws)
            pr = np.exp(lws - lws.max())
            pr /= pr.sum()
            kind, lab, val = cands[rng.choice(len(cands), p=pr)]
            if singleton and not (kind == "old" and lab == zj):
                eta.pop(zj, None)
            z[j] = lab
            if kind == "new":
                eta[lab] = val
            eta = {k: v for k, v in eta.items() if k in z}

        # conjugate coefficient draw and scale refresh
        uniq = list(dict.fromkeys(z))
        lab = np.array([uniq.index(v) for v in z])
        M = len(uniq)
        sizes = np.bincount(lab)
        Xs = np.zeros((n, M))
        for m in range(M):
            Xs[:, m] = X[:, lab == m].sum(axis=1) / math.sqrt(sizes[m])
        Xt = np.hstack([W, Xs])
        pv = np.concatenate([np.full(q, c_mu), [eta[u] for u in uniq]])
        pm = np.concatenate([np.full(q, m_mu), np.zeros(M)])
        P = np.diag(1.0 / pv) + Xt.T @ Xt
        rhs = pm / pv + Xt.T @ y
        m_hat = np.linalg.solve(P, rhs)
        a_hat = a_sigma + n / 2
        b_hat = b_sigma + 0.5 * (pm @ (pm / pv) + y @ y - m_hat @ P @ m_hat)
        s2 = b_hat / rng.gamma(a_hat)
        L = np.linalg.cholesky(P)
        bt = m_hat + math.sqrt(s2) * np.linalg.solve(
            L.T, rng.standard_normal(q + M))
        bstar = bt[q:]
        for i, u in enumerate(uniq):
            eta[u] = (b_eta + bstar[i] ** 2 / (2 * s2)) \
                / rng.gamma(a_eta + 0.5)

        if sweep >= burn_in:
            key = canon(z)
            freq[key] = freq.get(key, 0) + 1
    return {k: v / n_sweeps for k, v in freq.items()}
