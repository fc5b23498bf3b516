"""Compiled propagation and gradient kernels for real symmetric systems.

All model systems here have real ``h0`` and ``mu``, so each interval
Hamiltonian is real symmetric and a cyclic Jacobi sweep diagonalizes it
faster than a batched LAPACK call on matrices this small.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def jacobi_eigh(a, w, v):
    """Diagonalize real symmetric ``a`` in place (destroyed).

    Eigenvalues go to ``w`` (unsorted), eigenvector columns to ``v``.
    """
    n = a.shape[0]
    for i in range(n):
        for j in range(n):
            v[i, j] = 0.0
        v[i, i] = 1.0
    scale = 0.0
    for i in range(n):
        for j in range(n):
            scale += a[i, j] * a[i, j]
    for _ in range(100):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += a[p, q] * a[p, q]
        if off <= 1e-32 * scale or off == 0.0:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
    for i in range(n):
        w[i] = a[i, i]


@njit(cache=True)
def forward(h0, mu, eps, dt):
    """Cumulative propagators plus per-interval eigensystems.

    Each interval's Jacobi iteration starts from the previous interval's
    eigenvectors, which nearly diagonalize it when the field is smooth.
    Also returns ``B_l = P_l^T A_{l-1}``, reused by the exact gradient.
    """
    n = h0.shape[0]
    L = eps.shape[0]
    cum = np.zeros((L + 1, n, n), dtype=np.complex128)
    for i in range(n):
        cum[0, i, i] = 1.0
    ws = np.empty((L, n))
    ps = np.empty((L, n, n))
    bs = np.empty((L, n, n), dtype=np.complex128)
    h = np.empty((n, n))
    t = np.empty((n, n))
    a = np.empty((n, n))
    v = np.empty((n, n))
    prev_p = np.eye(n)
    for l in range(L):
        e = eps[l]
        for i in range(n):
            for j in range(n):
                h[i, j] = h0[i, j] - e * mu[i, j]
        # a = prev_p^T h prev_p
        for i in range(n):
            for j in range(n):
                acc = 0.0
                for m in range(n):
                    acc += h[i, m] * prev_p[m, j]
                t[i, j] = acc
        for i in range(n):
            for j in range(n):
                acc = 0.0
                for m in range(n):
                    acc += prev_p[m, i] * t[m, j]
                a[i, j] = acc
        jacobi_eigh(a, ws[l], v)
        p = ps[l]
        for i in range(n):
            for j in range(n):
                acc = 0.0
                for m in range(n):
                    acc += prev_p[i, m] * v[m, j]
                p[i, j] = acc
        # re-orthonormalize so round-off does not accumulate along the chain
        for j in range(n):
            for k in range(j):
                dot = 0.0
                for i in range(n):
                    dot += p[i, k] * p[i, j]
                for i in range(n):
                    p[i, j] -= dot * p[i, k]
            nrm = 0.0
            for i in range(n):
                nrm += p[i, j] * p[i, j]
            nrm = np.sqrt(nrm)
            for i in range(n):
                p[i, j] /= nrm
        prev_p = p
        # A_l = P diag(phase) P^T A_{l-1}
        prev = cum[l]
        b = bs[l]
        for i in range(n):
            for j in range(n):
                acc = 0j
                for m in range(n):
                    acc += p[m, i] * prev[m, j]
                b[i, j] = acc
        nxt = cum[l + 1]
        for m in range(n):
            ph = np.exp(-1j * ws[l, m] * dt)
            for j in range(n):
                t_c = ph * b[m, j]
                for i in range(n):
                    if m == 0:
                        nxt[i, j] = p[i, m] * t_c
                    else:
                        nxt[i, j] += p[i, m] * t_c
    return cum, ws, ps, bs


@njit(cache=True)
def exact_density(bs, ws, ps, mu, dt, gu):
    """``dJ/d eps_l`` given ``gu = G^dag U_T`` (``dJ = Re Tr(G^dag dU_T)``).

    With ``B_l = P_l^T A_{l-1}`` and phases ``f``, the interval term is
    ``Re sum_jk Y_kj K_jk`` where ``Y = B gu B^dag diag(conj f)`` and
    ``K = (P^T (-mu) P) o divided_differences``.
    """
    L = ws.shape[0]
    n = mu.shape[0]
    out = np.empty(L)
    t1 = np.empty((n, n), dtype=np.complex128)
    y = np.empty((n, n), dtype=np.complex128)
    pm = np.empty((n, n))
    mt = np.empty((n, n))
    f = np.empty(n, dtype=np.complex128)
    for l in range(L):
        b = bs[l]
        p = ps[l]
        w = ws[l]
        for m in range(n):
            f[m] = np.exp(-1j * w[m] * dt)
        for i in range(n):
            for j in range(n):
                acc = 0j
                for m in range(n):
                    acc += b[i, m] * gu[m, j]
                t1[i, j] = acc
        for i in range(n):
            for j in range(n):
                acc = 0j
                for m in range(n):
                    acc += t1[i, m] * np.conj(b[j, m])
                y[i, j] = acc * np.conj(f[j])
        for i in range(n):
            for j in range(n):
                acc = 0.0
                for m in range(n):
                    acc += mu[i, m] * p[m, j]
                pm[i, j] = acc
        for i in range(n):
            for j in range(i, n):
                acc = 0.0
                for m in range(n):
                    acc += p[m, i] * pm[m, j]
                mt[i, j] = acc
                mt[j, i] = acc
        tot = 0.0
        for j in range(n):
            for k in range(n):
                d = w[j] - w[k]
                if abs(d) < 1e-12:
                    gamma = -1j * dt * 0.5 * (f[j] + f[k])
                else:
                    gamma = (f[j] - f[k]) / d
                tot -= (y[k, j] * mt[j, k] * gamma).real
        out[l] = tot
    return out


@njit(cache=True)
def approximate_density(cum, mu, dt, gu):
    """``dt * Re Tr(G^dag i U_T mu(t_l))`` with ``mu(t_l) = A_l^dag mu A_l``."""
    L = cum.shape[0] - 1
    n = mu.shape[0]
    out = np.empty(L)
    t1 = np.empty((n, n), dtype=np.complex128)
    for l in range(L):
        a = cum[l + 1]
        # t1 = mu @ a
        for i in range(n):
            for j in range(n):
                acc = 0j
                for m in range(n):
                    acc += mu[i, m] * a[m, j]
                t1[i, j] = acc
        # Tr(gu a^dag t1) = sum_{j,k} gu[j,k] conj(a[m,k]) t1[m,j]
        tr = 0j
        for j in range(n):
            for k in range(n):
                acc = 0j
                for m in range(n):
                    acc += np.conj(a[m, k]) * t1[m, j]
                tr += gu[j, k] * acc
        out[l] = -dt * tr.imag
    return out
