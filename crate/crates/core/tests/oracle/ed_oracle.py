#!/usr/bin/env python3
"""Independent exact-diagonalization oracle.

Builds Hamiltonians from Kronecker products of Pauli matrices (no bit
tricks, no sector bases) and diagonalizes them with numpy/scipy. The
numbers printed here are frozen into the Rust test suites.

Conventions: basis index = sum_i b_i 2^i with b_i = 1 meaning spin up at
site i; s^a = sigma^a / 2; periodic boundaries.

Usage: python3 ed_oracle.py [section ...]
"""
import sys

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

SX = np.array([[0, 0.5], [0.5, 0]], dtype=complex)
SY = np.array([[0, 0.5j], [-0.5j, 0]], dtype=complex)  # local basis (down, up)
SZ = np.array([[-0.5, 0], [0, 0.5]], dtype=complex)
I2 = np.eye(2, dtype=complex)


def site_op(op, i, n):
    # kron order: leftmost factor is the highest site
    mats = [I2] * n
    mats[n - 1 - i] = op
    out = sp.csr_matrix(mats[0])
    for m in mats[1:]:
        out = sp.kron(out, sp.csr_matrix(m), format="csr")
    return out


def bond(i, j, n, jx, jy, jz):
    h = sp.csr_matrix((2**n, 2**n), dtype=complex)
    if jx:
        h = h + jx * site_op(SX, i, n) @ site_op(SX, j, n)
    if jy:
        h = h + jy * site_op(SY, i, n) @ site_op(SY, j, n)
    if jz:
        h = h + jz * site_op(SZ, i, n) @ site_op(SZ, j, n)
    return h


def xxz(n, delta):
    return sum(bond(i, (i + 1) % n, n, 1, 1, delta) for i in range(n))


def j1j2(n, j1, j2):
    return sum(bond(i, (i + 1) % n, n, j1, j1, j1) + bond(i, (i + 2) % n, n, j2, j2, j2)
               for i in range(n))


def ising(n, lam):
    h = sum(bond(i, (i + 1) % n, n, lam, 0, 0) for i in range(n))
    h = h + sum(0.5 * site_op(SZ, i, n) for i in range(n))
    return -h


def ladder(legs, j_leg, j_rung):
    n = 2 * legs
    h = sp.csr_matrix((2**n, 2**n), dtype=complex)
    for k in range(legs):
        h = h + bond(2 * k, 2 * k + 1, n, j_rung, j_rung, j_rung)
        h = h + bond(2 * k, (2 * k + 2) % n, n, j_leg, j_leg, j_leg)
        h = h + bond(2 * k + 1, (2 * k + 3) % n, n, j_leg, j_leg, j_leg)
    return h


def real_dense(h):
    d = h.toarray()
    assert np.abs(d.imag).max() < 1e-14
    return d.real


def popcount_indices(n, up):
    return np.array([s for s in range(2**n) if bin(s).count("1") == up])


def ground(h, idx=None):
    h = h.real.tocsr()
    if idx is not None:
        h = h[idx][:, idx]
    if h.shape[0] <= 1024:
        w, v = np.linalg.eigh(h.toarray())
        return w[0], v[:, 0]
    w, v = spla.eigsh(h, k=1, which="SA", tol=1e-13)
    return w[0], v[:, 0]


def embed(v, idx, n):
    full = np.zeros(2**n)
    full[idx] = v
    return full


def rdm(psi, i, j, n):
    # returns 4x4 in basis (uu, ud, du, dd) for (site i, site j)
    t = psi.reshape([2] * n)  # axis 0 is highest site
    ai, aj = n - 1 - i, n - 1 - j
    t = np.moveaxis(t, (ai, aj), (0, 1)).reshape(4, -1)
    r = t @ t.conj().T  # basis index b_i*2 + b_j with 1 = up
    perm = [3, 2, 1, 0]  # (uu, ud, du, dd)
    return r[np.ix_(perm, perm)].real


def wootters(r):
    sy = np.array([[0, -1j], [1j, 0]])
    yy = np.kron(sy, sy)
    # reorder yy to (uu, ud, du, dd) from (b=0 down first) -> use up-first basis
    # in up-first ordering sigma^y = [[0,-i],[i,0]] with |up>=(1,0)
    rt = yy @ r.conj() @ yy
    ev = np.linalg.eigvals(r @ rt)
    lam = np.sqrt(np.clip(np.sort(ev.real)[::-1], 0, None))
    return lam[0] - lam[1] - lam[2] - lam[3]


def corr(r):
    # <s^a s^a> from rdm in (uu, ud, du, dd) ordering, up-first single-site basis
    sx = np.array([[0, 0.5], [0.5, 0]])
    sy = np.array([[0, -0.5j], [0.5j, 0]])
    sz = np.array([[0.5, 0], [0, -0.5]])
    return [np.trace(r @ np.kron(s, s)).real for s in (sx, sy, sz)]


def section_basic():
    h = real_dense(xxz(4, 1.0))
    w = np.linalg.eigvalsh(h)
    print("heis4 spectrum", np.round(w, 12))
    w, v = np.linalg.eigh(h)
    r = rdm(v[:, 0], 0, 1, 4)
    print("heis4 nn corr", corr(r), "wootters", wootters(r))
    print("heis4 trace", np.trace(h))
    h = real_dense(xxz(8, 1.0))
    w, v = np.linalg.eigh(h)
    print("heis8 low", w[:6])
    r = rdm(v[:, 0], 0, 1, 8)
    c = corr(r)
    print("heis8 nn corr", c, "closed", -2 * sum(c) - 0.5, "wootters", wootters(r))
    # S=1 triplet check
    # Werner
    s = np.array([0, 1, -1, 0]) / np.sqrt(2)
    p = 0.8
    werner = p * np.outer(s, s) + (1 - p) * np.eye(4) / 4
    print("werner 0.8", wootters(werner))


def section_xxz_sweep():
    n = 8
    grid = np.round(np.arange(-2, 2.0001, 0.01), 10)
    cs = []
    for d in grid:
        h = real_dense(xxz(n, d))
        w, v = np.linalg.eigh(h)
        r = rdm(v[:, 0], 0, 1, n)
        cs.append(max(0, wootters(r)))
    cs = np.array(cs)
    k = np.argmax(cs)
    print("xxz8 argmax", grid[k], cs[k], "C(1)", cs[np.argmin(abs(grid - 1))])
    print("xxz8 C at", [(g, round(c, 10)) for g, c in zip(grid, cs) if abs(g) in (0.0, 0.5) or g in (1.5, 2.0, -0.5)])


def section_ising():
    for n in (6, 8, 10, 12):
        grid = np.round(np.arange(0.2, 2.0001, 0.01), 10)
        cs = []
        for lam in grid:
            e, v = ground(ising(n, lam))
            r = rdm(v, 0, 1, n)
            cs.append(max(0, wootters(r)))
        cs = np.array(cs)
        d1 = (cs[2:] - cs[:-2]) / 0.02
        k = np.argmin(d1)
        # quadratic refinement
        y0, y1, y2 = d1[k - 1], d1[k], d1[k + 1]
        off = 0.5 * (y0 - y2) / (y0 - 2 * y1 + y2)
        print("ising", n, "C max at", grid[np.argmax(cs)], cs.max(), "dC min at", grid[1:-1][k] + off * 0.01)


def section_ising_levels():
    n = 8
    for lam in (0.2, 0.5, 0.9, 1.0, 1.1, 1.5, 2.0):
        h = real_dense(ising(n, lam))
        w, v = np.linalg.eigh(h)
        par = []
        for m in range(6):
            diag = np.array([(-1) ** (n - bin(s).count("1")) for s in range(2**n)])
            par.append(round(float(np.sum(diag * v[:, m] ** 2)), 3))
        print("ising8", lam, np.round(w[:6], 6), par)


def section_j1j2():
    for n in (8, 12, 16):
        idx = popcount_indices(n, n // 2)
        grid = np.round(np.arange(0.0, 0.5001, 0.01), 10)
        cs = []
        for j2 in grid:
            e, v = ground(j1j2(n, 1.0, j2), idx)
            r = rdm(embed(v, idx, n), 0, 1, n)
            cs.append(max(0, wootters(r)))
        cs = np.array(cs)
        d2 = (cs[2:] - 2 * cs[1:-1] + cs[:-2]) / 0.01**2
        print("j1j2", n, "C(0)", cs[0], "C(0.49)", cs[-2])
        print("   d2", list(zip(grid[1:-1], np.round(d2, 4))))


def section_j1j2_levels():
    n = 8
    for j2 in (0.3, 0.45, 0.49, 0.5, 0.51, 0.55, 0.7):
        h = real_dense(j1j2(n, 1.0, j2))
        w = np.linalg.eigvalsh(h)
        print("j1j2 8", j2, np.round(w[:8], 6))


def section_ladder():
    for jr in (-0.2, -0.05, 0.0, 0.05, 0.2):
        h = real_dense(ladder(4, 1.0, jr))
        w = np.linalg.eigvalsh(h)
        print("ladder", jr, np.round(w[:10], 6))


def section_sumrule():
    n = 8
    lam = 1.0
    h = real_dense(ising(n, lam))
    w, v = np.linalg.eigh(h)
    g = v[:, 0]
    r = rdm(g, 0, 1, n)
    cx, cy, cz = corr(r)
    tot = 0
    for s in (SX, SY, SZ):
        a = sum(site_op(s, j, n) for j in range(n)).toarray()
        amp = v.conj().T @ (a @ g)
        tot += np.sum((w - w[0]) * np.abs(amp) ** 2)
        lhs = g.conj() @ (a @ (h @ a) * 2 - a @ a @ h - h @ a @ a) @ g
        print("ising comm", lhs.real, 2 * np.sum((w - w[0]) * np.abs(amp) ** 2))
    jj = -lam
    print("ising lhs5", cx - cy - cz, "rhs5", -w[0] / (jj * n) - tot / (n * jj))
    mz = np.mean([g @ site_op(SZ, j, n).toarray().real @ g for j in range(n)])
    print("ising <sz>", mz)
    # xxz
    for d in (0.5, 1.0):
        h = real_dense(xxz(n, d))
        w, v = np.linalg.eigh(h)
        g = v[:, 0]
        r = rdm(g, 0, 1, n)
        c = corr(r)
        tot = 0
        for s in (SX, SY, SZ):
            a = sum((-1) ** j * site_op(s, j, n) for j in range(n)).toarray()
            amp = v.conj().T @ (a @ g)
            tot += np.sum((w - w[0]) * np.abs(amp) ** 2)
        jj = 2 + d
        print("xxz", d, "lhs4", -sum(c), "rhs4", w[0] / (jj * n) + tot / (n * jj))


if __name__ == "__main__":
    sections = sys.argv[1:] or ["basic"]
    for s in sections:
        globals()["section_" + s]()
