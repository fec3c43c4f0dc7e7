"""Independent reference implementations used only by the tests."""
from __future__ import annotations

import math
from functools import reduce

import numpy as np

I2 = np.eye(2, dtype=complex)
P0 = np.array([[1, 0], [0, 0]], dtype=complex)
P1 = np.array([[0, 0], [0, 1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


def ry(a):
    c, s = math.cos(a / 2), math.sin(a / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(a):
    return np.diag([np.exp(-0.5j * a), np.exp(0.5j * a)])


def rx(a):
    c, s = math.cos(a / 2), math.sin(a / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def rot(phi, theta, omega):
    return rz(omega) @ ry(theta) @ rz(phi)


def full_single(m, target, q):
    """Dense 2^q operator; qubit 0 is the most significant bit."""
    return reduce(np.kron, [m if k == target else I2 for k in range(q)])


def full_controlled(m, control, target, q):
    a = reduce(np.kron, [P0 if k == control else I2 for k in range(q)])
    b = reduce(np.kron, [P1 if k == control else (m if k == target else I2) for k in range(q)])
    return a + b


def dense_circuit_state(x, theta, q, L):
    """The variational circuit built from explicit Kronecker products."""
    psi = np.zeros(2**q, dtype=complex)
    psi[0] = 1
    for i in range(q):
        psi = full_single(H, i, q) @ psi
    for i in range(q):
        psi = full_single(ry(math.pi * x[i]), i, q) @ psi
    for layer in range(L):
        base = layer * 6 * q
        for i in range(q):
            psi = full_single(rot(*theta[base + 3 * i: base + 3 * i + 3]), i, q) @ psi
        for i in range(q):
            k = base + 3 * q + 3 * i
            psi = full_controlled(rot(*theta[k:k + 3]), i, (i + 1) % q, q) @ psi
    return psi


def z_expectations(psi, q):
    probs = np.abs(psi) ** 2
    out = []
    for i in range(q):
        signs = np.array([1 - 2 * ((b >> (q - 1 - i)) & 1) for b in range(2**q)])
        out.append(float(probs @ signs))
    return np.array(out)


def central_diff(f, x, h=1e-6):
    """Gradient of scalar f at array x by central differences."""
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        old = x[idx]
        x[idx] = old + h
        fp = f(x)
        x[idx] = old - h
        fm = f(x)
        x[idx] = old
        g[idx] = (fp - fm) / (2 * h)
    return g


def brute_shortest(size, blocked, start, goal, max_steps=12):
    """Minimum cost over every simple 8-connected path of at most max_steps
    moves, by depth-first enumeration. Returns inf when none exists."""
    best = [math.inf]
    blocked = set(blocked)

    def walk(cell, cost, steps, seen):
        if cell == goal:
            best[0] = min(best[0], cost)
            return
        if steps == max_steps:
            return
        dx, dy = abs(goal[0] - cell[0]), abs(goal[1] - cell[1])
        # octile distance bound keeps the enumeration tractable without changing the minimum
        if cost + max(dx, dy) + (math.sqrt(2) - 1) * min(dx, dy) >= best[0] - 1e-12:
            return
        for mx in (-1, 0, 1):
            for my in (-1, 0, 1):
                if not (mx or my):
                    continue
                nxt = (cell[0] + mx, cell[1] + my)
                if not (0 <= nxt[0] < size and 0 <= nxt[1] < size) or nxt in blocked or nxt in seen:
                    continue
                seen.add(nxt)
                walk(nxt, cost + (math.sqrt(2) if mx and my else 1.0), steps + 1, seen)
                seen.discard(nxt)

    walk(start, 0.0, 0, {start})
    return best[0]
