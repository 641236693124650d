"""Numba-compiled hot paths shared by the lattice, regression and sampler modules.

Everything here operates on flat primitive arrays; the public modules own
validation and the array <-> object mapping.  All randomness inside kernels
uses numba's internal np.random state, seeded per chain via :func:`seed_kernel`
so that traces are reproducible for a fixed seed on a fixed platform.

Cluster bookkeeping convention: labels are 0-based and kept dense (0..M-1)
at all times; canonical first-appearance relabeling happens once per sweep.
"""

import math

import numpy as np
from numba import njit

LOG2PI = math.log(2.0 * math.pi)


@njit(cache=True)
def seed_kernel(seed):
    np.random.seed(seed)


# ----------------------------------------------------------------------
# union-find / connected components
# ----------------------------------------------------------------------

@njit(cache=True)
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@njit(cache=True)
def connected_components(p, pair_j, pair_k, bonds):
    """Components of the bond graph; labels are first-appearance canonical."""
    parent = np.arange(p)
    for e in range(pair_j.shape[0]):
        if bonds[e] == 1:
            ra = _find(parent, pair_j[e])
            rb = _find(parent, pair_k[e])
            if ra != rb:
                parent[rb] = ra
    labels = np.full(p, -1, np.int64)
    nxt = 0
    for j in range(p):
        r = _find(parent, j)
        if labels[r] == -1:
            labels[r] = nxt
            nxt += 1
        labels[j] = labels[r]
    return labels, nxt


@njit(cache=True)
def canonicalize_labels(labels):
    """Relabel to consecutive 0..M-1 in order of first appearance (in place)."""
    p = labels.shape[0]
    remap = np.full(p, -1, np.int64)
    nxt = 0
    for j in range(p):
        old = labels[j]
        if remap[old] == -1:
            remap[old] = nxt
            nxt += 1
        labels[j] = remap[old]
    return remap, nxt


@njit(cache=True)
def potts_energy_kernel(labels, pair_j, pair_k, coupling):
    s = 0.0
    for e in range(pair_j.shape[0]):
        if labels[pair_j[e]] == labels[pair_k[e]]:
            s += coupling[e]
    return s


@njit(cache=True)
def sample_bonds_kernel(labels, pair_j, pair_k, coupling, zeta, bonds_out):
    """r_e ~ Bernoulli(1 - exp(-ups_e * zeta_e)) on same-label pairs, else 0."""
    nbonds = 0
    for e in range(pair_j.shape[0]):
        if labels[pair_j[e]] == labels[pair_k[e]]:
            pr = 1.0 - math.exp(-coupling[e] * zeta[e])
            if np.random.random() < pr:
                bonds_out[e] = 1
                nbonds += 1
            else:
                bonds_out[e] = 0
        else:
            bonds_out[e] = 0
    return nbonds


# ----------------------------------------------------------------------
# Gibbs-type partition prior terms (shared with partition_priors)
#   kind 0: DP / Pitman-Yor, w = discount (0 for DP)
#   kind 1: mixture of finite mixtures, w = gamma
# ----------------------------------------------------------------------

@njit(cache=True)
def log_w_size(kind, w, size):
    if kind == 0:
        return math.lgamma(size - w) - math.lgamma(1.0 - w)
    return math.lgamma(size + w) - math.lgamma(w)


@njit(cache=True)
def log_pred_existing_kernel(kind, w, n_without, a):
    if a == 0:
        return 0.0
    if kind == 0:
        return math.lgamma(n_without + a - w) - math.lgamma(n_without - w)
    return math.lgamma(n_without + a + w) - math.lgamma(n_without + w)


@njit(cache=True)
def log_pred_new_kernel(kind, w, logv, m_without, a):
    # logv[0] is a placeholder (0.0); with M^{-A_o}=0 every candidate is a new
    # cluster and the shared V-ratio cancels after normalization.
    return logv[m_without + 1] - logv[m_without] + log_w_size(kind, w, a)


# ----------------------------------------------------------------------
# collapsed normal-inverse-gamma marginal likelihood
# ----------------------------------------------------------------------

@njit(cache=True)
def _cholesky(A, L):
    k = A.shape[0]
    for i in range(k):
        for j in range(i + 1):
            s = A[i, j]
            for t in range(j):
                s -= L[i, t] * L[j, t]
            if i == j:
                if s <= 0.0:
                    return False
                L[i, i] = math.sqrt(s)
            else:
                L[i, j] = s / L[j, j]
    return True


@njit(cache=True)
def log_marginal_core(A, rhs, prior_qf, logdet_prior, yty, n, a_sigma, b_sigma):
    """log pr(y) for y ~ N(Xb, s2 I), b ~ N(m, s2 S), s2 ~ IG(a, b).

    A must hold S^{-1} + X'X and rhs S^{-1}m + X'y; prior_qf = m'S^{-1}m.
    A is clobbered (jitter retry).  Returns NaN on factorization failure.
    """
    k = A.shape[0]
    L = np.empty((k, k))
    ok = _cholesky(A, L)
    if not ok:
        mean_diag = 0.0
        for i in range(k):
            mean_diag += A[i, i]
        if k > 0:
            mean_diag /= k
        for i in range(k):
            A[i, i] += 1e-10 * mean_diag
        ok = _cholesky(A, L)
        if not ok:
            return np.nan
    logdet_post = 0.0
    w = np.empty(k)
    for i in range(k):
        s = rhs[i]
        for t in range(i):
            s -= L[i, t] * w[t]
        w[i] = s / L[i, i]
        logdet_post += math.log(L[i, i])
    logdet_post *= 2.0
    qf = 0.0
    for i in range(k):
        qf += w[i] * w[i]
    b_hat = b_sigma + 0.5 * (prior_qf + yty - qf)
    a_hat = a_sigma + 0.5 * n
    if b_hat <= 0.0:
        return np.nan
    return (-0.5 * n * LOG2PI
            - 0.5 * logdet_post - 0.5 * logdet_prior
            + a_sigma * math.log(b_sigma) - a_hat * math.log(b_hat)
            + math.lgamma(a_hat) - math.lgamma(a_sigma))


@njit(cache=True)
def _candidate_marginal(tgt, aux_eta, m_cur, s_cl, src_empty,
                        size, TtT, WtT, Tty, eta,
                        vT, vv, Wv, vy, a,
                        WtW, Wty, yty, m_mu, c_mu,
                        a_sigma, b_sigma, n):
    """Collapsed marginal for moving the detached block onto cluster `tgt`
    (or onto a new cluster with scale aux_eta when tgt < 0), assembled from
    the unscaled sufficient statistics maintained by the sweep."""
    q = WtW.shape[0]
    n_live = m_cur - 1 if src_empty else m_cur
    newcol = tgt < 0
    mc = n_live + 1 if newcol else n_live
    k = q + mc

    colmap = np.empty(mc, np.int64)
    c = 0
    for m in range(m_cur):
        if src_empty and m == s_cl:
            continue
        colmap[c] = m
        c += 1
    if newcol:
        colmap[mc - 1] = -1

    dinv = np.empty(mc)
    col_eta = np.empty(mc)
    for u in range(mc):
        m = colmap[u]
        if m == -1:
            dinv[u] = 1.0 / math.sqrt(a)
            col_eta[u] = aux_eta
        else:
            sz = size[m] + a if m == tgt else size[m]
            dinv[u] = 1.0 / math.sqrt(sz)
            col_eta[u] = eta[m]

    A = np.empty((k, k))
    rhs = np.empty(k)
    prior_qf = 0.0
    logdet_prior = 0.0
    for i in range(q):
        for j in range(q):
            A[i, j] = WtW[i, j]
        A[i, i] += 1.0 / c_mu[i]
        rhs[i] = Wty[i] + m_mu[i] / c_mu[i]
        prior_qf += m_mu[i] * m_mu[i] / c_mu[i]
        logdet_prior += math.log(c_mu[i])

    for u in range(mc):
        m = colmap[u]
        # W x cluster cross block and response projections
        if m == -1:
            for i in range(q):
                A[i, q + u] = dinv[u] * Wv[i]
                A[q + u, i] = A[i, q + u]
            rhs[q + u] = dinv[u] * vy
        elif m == tgt:
            for i in range(q):
                A[i, q + u] = dinv[u] * (WtT[i, m] + Wv[i])
                A[q + u, i] = A[i, q + u]
            rhs[q + u] = dinv[u] * (Tty[m] + vy)
        else:
            for i in range(q):
                A[i, q + u] = dinv[u] * WtT[i, m]
                A[q + u, i] = A[i, q + u]
            rhs[q + u] = dinv[u] * Tty[m]
        logdet_prior += math.log(col_eta[u])
        # cluster Gram block
        for u2 in range(u + 1):
            m2 = colmap[u2]
            if m == -1:
                g = vv if m2 == -1 else (vT[m2] + vv if m2 == tgt else vT[m2])
            elif m == tgt:
                if m2 == tgt:
                    g = TtT[m, m] + 2.0 * vT[m] + vv
                else:
                    g = TtT[m, m2] + vT[m2]
            else:
                g = vT[m] if m2 == -1 else (TtT[m, m2] + vT[m] if m2 == tgt else TtT[m, m2])
            val = dinv[u] * dinv[u2] * g
            A[q + u, q + u2] = val
            A[q + u2, q + u] = val
        A[q + u, q + u] += 1.0 / col_eta[u]

    return log_marginal_core(A, rhs, prior_qf, logdet_prior, yty, n,
                             a_sigma, b_sigma)


# ----------------------------------------------------------------------
# one generalized Swendsen-Wang reassignment pass (bonds given)
# ----------------------------------------------------------------------

@njit(cache=True)
def reassign_kernel(z, eta, m_in, bonds,
                    X, W, y, pair_j, pair_k, coupling, zeta,
                    pix_pair_start, pix_pair_idx,
                    WtW, Wty, yty, m_mu, c_mu,
                    a_sigma, b_sigma, a_eta, b_eta,
                    kind, w_param, logv, h, aux_mode, eta_fixed):
    """Reassign every bond-connected nested cluster via the auxiliary-variable
    rule: existing-cluster weights carry the Gibbs-type predictive term, the
    collapsed marginal likelihood and the unbonded-neighbour Potts correction
    exp{ups*(1-zeta)}; each of h new-cluster candidates carries -log h, the
    V-ratio predictive term and a marginal under an auxiliary cluster scale.

    aux_mode 0: auxiliary scales drawn IG(a_eta, b_eta); when the block is its
    entire cluster, its current scale is reused as the first auxiliary value.
    aux_mode 1: auxiliary scales pinned at eta_fixed (fixed-scale chains).

    Mutates z and eta (eta needs capacity >= p+1).  Returns (M, O, status);
    status!=0 flags a numerical failure at nested cluster index status-1.
    """
    p = z.shape[0]
    n = y.shape[0]
    q = W.shape[1]
    m_cur = m_in

    nest, O = connected_components(p, pair_j, pair_k, bonds)
    counts = np.zeros(O + 1, np.int64)
    for j in range(p):
        counts[nest[j] + 1] += 1
    for o in range(O):
        counts[o + 1] += counts[o]
    members = np.empty(p, np.int64)
    fill = counts[:O].copy()
    for j in range(p):
        members[fill[nest[j]]] = j
        fill[nest[j]] += 1
    vol = np.zeros((n, O))
    for j in range(p):
        o = nest[j]
        for i in range(n):
            vol[i, o] += X[i, j]

    # per-sweep rebuild of unscaled cluster statistics (bounds fp drift);
    # capacity p+1: creating a new cluster while M == p transiently uses slot p
    Tc = np.zeros((n, p + 1))
    size = np.zeros(p + 1, np.int64)
    for j in range(p):
        m = z[j]
        size[m] += 1
        for i in range(n):
            Tc[i, m] += X[i, j]
    TtT = np.zeros((p + 1, p + 1))
    WtT = np.zeros((q, p + 1))
    Tty = np.zeros(p + 1)
    for m in range(m_cur):
        for m2 in range(m + 1):
            s = 0.0
            for i in range(n):
                s += Tc[i, m] * Tc[i, m2]
            TtT[m, m2] = s
            TtT[m2, m] = s
        for c in range(q):
            s = 0.0
            for i in range(n):
                s += W[i, c] * Tc[i, m]
            WtT[c, m] = s
        s = 0.0
        for i in range(n):
            s += Tc[i, m] * y[i]
        Tty[m] = s

    vT = np.empty(p + 1)
    Wv = np.empty(q)
    pcorr = np.empty(p + 1)
    logw = np.empty(p + 1 + h)
    wexp = np.empty(p + 1 + h)
    eta_aux = np.empty(h)

    order = np.random.permutation(O)
    for oo in range(O):
        o = order[oo]
        a = counts[o + 1] - counts[o]
        s_cl = z[members[counts[o]]]

        vv = 0.0
        vy = 0.0
        for i in range(n):
            vv += vol[i, o] * vol[i, o]
            vy += vol[i, o] * y[i]
        for c in range(q):
            s = 0.0
            for i in range(n):
                s += W[i, c] * vol[i, o]
            Wv[c] = s
        for m in range(m_cur):
            s = 0.0
            for i in range(n):
                s += vol[i, o] * Tc[i, m]
            vT[m] = s

        # detach the block from its source cluster
        size[s_cl] -= a
        for i in range(n):
            Tc[i, s_cl] -= vol[i, o]
        Tty[s_cl] -= vy
        for c in range(q):
            WtT[c, s_cl] -= Wv[c]
        for m in range(m_cur):
            if m != s_cl:
                TtT[s_cl, m] -= vT[m]
                TtT[m, s_cl] = TtT[s_cl, m]
        TtT[s_cl, s_cl] += -2.0 * vT[s_cl] + vv
        vT[s_cl] -= vv
        src_empty = size[s_cl] == 0

        # Potts correction sums over unbonded boundary pairs, per target
        for m in range(m_cur):
            pcorr[m] = 0.0
        for ii in range(counts[o], counts[o + 1]):
            j = members[ii]
            for t in range(pix_pair_start[j], pix_pair_start[j + 1]):
                e = pix_pair_idx[t]
                if bonds[e] == 1:
                    continue
                k2 = pair_k[e] if pair_j[e] == j else pair_j[e]
                if nest[k2] == o:
                    continue
                pcorr[z[k2]] += coupling[e] * (1.0 - zeta[e])

        m_wo = m_cur - 1 if src_empty else m_cur
        ncand = m_cur + h
        for m in range(m_cur):
            if src_empty and m == s_cl:
                logw[m] = -np.inf
                continue
            lm = _candidate_marginal(m, 0.0, m_cur, s_cl, src_empty,
                                     size, TtT, WtT, Tty, eta,
                                     vT, vv, Wv, vy, a,
                                     WtW, Wty, yty, m_mu, c_mu,
                                     a_sigma, b_sigma, n)
            if np.isnan(lm):
                return m_cur, O, oo + 1
            logw[m] = (log_pred_existing_kernel(kind, w_param, size[m], a)
                       + lm + pcorr[m])
        lpred_new = log_pred_new_kernel(kind, w_param, logv, m_wo, a)
        for c in range(h):
            if aux_mode == 1:
                eta_aux[c] = eta_fixed
            elif src_empty and c == 0:
                eta_aux[c] = eta[s_cl]
            else:
                eta_aux[c] = b_eta / np.random.gamma(a_eta, 1.0)
            lm = _candidate_marginal(-1, eta_aux[c], m_cur, s_cl, src_empty,
                                     size, TtT, WtT, Tty, eta,
                                     vT, vv, Wv, vy, a,
                                     WtW, Wty, yty, m_mu, c_mu,
                                     a_sigma, b_sigma, n)
            if np.isnan(lm):
                return m_cur, O, oo + 1
            logw[m_cur + c] = -math.log(h) + lpred_new + lm

        mx = -np.inf
        for c in range(ncand):
            if logw[c] > mx:
                mx = logw[c]
        tot = 0.0
        for c in range(ncand):
            wexp[c] = math.exp(logw[c] - mx)
            tot += wexp[c]
        u = np.random.random() * tot
        ch = ncand - 1
        acc = 0.0
        for c in range(ncand):
            acc += wexp[c]
            if u <= acc:
                ch = c
                break

        if ch < m_cur:
            tgt = ch
        else:
            tgt = m_cur
            size[tgt] = 0
            Tty[tgt] = 0.0
            for c in range(q):
                WtT[c, tgt] = 0.0
            for i in range(n):
                Tc[i, tgt] = 0.0
            for m in range(m_cur + 1):
                TtT[tgt, m] = 0.0
                TtT[m, tgt] = 0.0
            vT[tgt] = 0.0
            eta[tgt] = eta_aux[ch - m_cur]
            m_cur += 1

        # attach the block to its target
        size[tgt] += a
        for i in range(n):
            Tc[i, tgt] += vol[i, o]
        Tty[tgt] += vy
        for c in range(q):
            WtT[c, tgt] += Wv[c]
        for m in range(m_cur):
            if m != tgt:
                TtT[tgt, m] += vT[m]
                TtT[m, tgt] = TtT[tgt, m]
        TtT[tgt, tgt] += 2.0 * vT[tgt] + vv
        for ii in range(counts[o], counts[o + 1]):
            z[members[ii]] = tgt

        if src_empty:
            last = m_cur - 1
            if s_cl != last:
                size[s_cl] = size[last]
                Tty[s_cl] = Tty[last]
                eta[s_cl] = eta[last]
                for c in range(q):
                    WtT[c, s_cl] = WtT[c, last]
                for i in range(n):
                    Tc[i, s_cl] = Tc[i, last]
                for m in range(m_cur):
                    TtT[s_cl, m] = TtT[last, m]
                    TtT[m, s_cl] = TtT[s_cl, m]
                TtT[s_cl, s_cl] = TtT[last, last]
                for j in range(p):
                    if z[j] == last:
                        z[j] = s_cl
            size[last] = 0
            m_cur -= 1

    remap, m_final = canonicalize_labels(z)
    eta_tmp = np.empty(m_final)
    for m in range(m_cur):
        if remap[m] >= 0:
            eta_tmp[remap[m]] = eta[m]
    for m in range(m_final):
        eta[m] = eta_tmp[m]
    return m_final, O, 0


@njit(cache=True)
def gsw_sweep(z, eta, m_in, bonds_out,
              X, W, y, pair_j, pair_k, coupling, zeta,
              pix_pair_start, pix_pair_idx,
              WtW, Wty, yty, m_mu, c_mu,
              a_sigma, b_sigma, a_eta, b_eta,
              kind, w_param, logv, h, aux_mode, eta_fixed):
    """Bond draw followed by the nested-cluster reassignment pass."""
    nbonds = sample_bonds_kernel(z, pair_j, pair_k, coupling, zeta, bonds_out)
    m_new, O, status = reassign_kernel(
        z, eta, m_in, bonds_out,
        X, W, y, pair_j, pair_k, coupling, zeta,
        pix_pair_start, pix_pair_idx,
        WtW, Wty, yty, m_mu, c_mu,
        a_sigma, b_sigma, a_eta, b_eta,
        kind, w_param, logv, h, aux_mode, eta_fixed)
    return m_new, O, nbonds, status


@njit(cache=True)
def sweep_many(z, eta, m_in, seed, n_sweeps, burn_in,
               X, W, y, pair_j, pair_k, coupling, zeta,
               pix_pair_start, pix_pair_idx,
               WtW, Wty, yty, m_mu, c_mu,
               a_sigma, b_sigma, a_eta, b_eta,
               kind, w_param, logv, h, aux_mode, eta_fixed):
    """Run burn_in + n_sweeps full sweeps, recording one canonical partition
    code per post-burn-in sweep (code = sum_j z_j * p**j, valid for small p).
    """
    p = z.shape[0]
    np.random.seed(seed)
    bonds = np.zeros(pair_j.shape[0], np.int8)
    codes = np.empty(n_sweeps, np.int64)
    m_cur = m_in
    for it in range(burn_in + n_sweeps):
        m_cur, O, nb, status = gsw_sweep(
            z, eta, m_cur, bonds,
            X, W, y, pair_j, pair_k, coupling, zeta,
            pix_pair_start, pix_pair_idx,
            WtW, Wty, yty, m_mu, c_mu,
            a_sigma, b_sigma, a_eta, b_eta,
            kind, w_param, logv, h, aux_mode, eta_fixed)
        if status != 0:
            return codes[:0], m_cur, it + 1
        if it >= burn_in:
            code = 0
            pw = 1
            for j in range(p):
                code += z[j] * pw
                pw *= p
            codes[it - burn_in] = code
    return codes, m_cur, 0
