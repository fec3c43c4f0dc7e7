"""Acceptance criteria, each printing one PASS/FAIL line.

Lines are also collected into the terminal summary so they appear in a
plain ``pytest -v`` run without ``-s``.
"""
import json
import math
import time

import numpy as np
import pytest

import oracles
from oracles import brute_shortest
from qspirl.agents import REFERENCE_PARAM_COUNTS, build_agent, index_state, state_index
from qspirl.cli import main
from qspirl.config import TrainConfig, selected_config
from qspirl.encoding import all_states, one_hot, poisson_encode, spike_probability
from qspirl.evaluation import (
    EpisodeRecord, compute_spl, compute_turn_rate, path_length, run_protocol, shortest_path,
)
from qspirl.gridworld import GOAL, TIMEOUT, GridSpec, GridWorld, Obstacle, preset
from qspirl.neural import Dense, Sequential
from qspirl.qtable import build_qtable
from qspirl.quantum import (
    CircuitSpec, apply_gate, pauli_z, run_circuit, sampled_expectation, simulate, zero_state,
)
from qspirl.spiking import LIFParams, MeanPool, SpikingDense
from qspirl.training import train

pytestmark = pytest.mark.acceptance


@pytest.fixture
def verdict(request):
    lines = request.config.__dict__.setdefault("acceptance_lines", [])

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        lines.append(line)
        return ok

    return record


def rel_err(num, ana):
    num, ana = np.ravel(num), np.ravel(ana)
    scale = max(np.linalg.norm(num), np.linalg.norm(ana), 1e-12)
    return float(np.linalg.norm(num - ana) / scale)


def grad_check(net: Sequential, x, rng, n_coords=8, n_dirs=2, h=1e-6):
    """Worst relative error between backward and central differences over
    random coordinates and random directions of the parameter vector."""
    w = rng.normal(size=net.forward(x)[0].shape)

    def loss():
        return float(np.sum(net.forward(x)[0] * w))

    _, grads = net.backward(net.forward(x)[1], w)
    params = net.params
    worst = 0.0
    for _ in range(n_dirs):
        dirs = [rng.normal(size=p.shape) for p in params]
        for p, d in zip(params, dirs):
            p += h * d
        fp = loss()
        for p, d in zip(params, dirs):
            p -= 2 * h * d
        fm = loss()
        for p, d in zip(params, dirs):
            p += h * d
        ana = sum(float(np.sum(g * d)) for g, d in zip(grads, dirs))
        worst = max(worst, rel_err((fp - fm) / (2 * h), ana))
    nums, anas = [], []
    for _ in range(n_coords):
        k = int(rng.integers(len(params)))
        idx = tuple(int(rng.integers(s)) for s in params[k].shape)
        old = params[k][idx]
        params[k][idx] = old + h
        fp = loss()
        params[k][idx] = old - h
        fm = loss()
        params[k][idx] = old
        nums.append((fp - fm) / (2 * h))
        anas.append(grads[k][idx])
    return max(worst, rel_err(nums, anas))


def test_criterion_1_gradient_integrity(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(0)
    worst = {}
    for inst in range(20):
        r = np.random.default_rng(inst)
        dense = Sequential([Dense(29, 30, "relu", r), Dense(30, 30, "tanh", r), Dense(30, 5, "identity", r)])
        x = np.stack([one_hot(s) for s in all_states()[inst * 7: inst * 7 + 4]]) + r.normal(0, 0.1, (4, 29))
        worst["dense"] = max(worst.get("dense", 0), grad_check(dense, x, rng))

        snn = build_agent("snn", rng=r)
        readout = Sequential(snn.net.blocks[2:])
        spikes = snn.encode(np.stack([one_hot(index_state(int(k))) for k in r.integers(2560, size=3)]), r)
        hidden = Sequential(snn.net.blocks[:2]).forward(spikes)[0]
        worst["spiking readout"] = max(worst.get("spiking readout", 0), grad_check(readout, hidden, rng))

        x = np.stack([one_hot(index_state(int(k))) for k in r.integers(2560, size=2)])
        qmlp = build_agent("qmlp", TrainConfig(grad_method="parameter-shift"), r)
        worst["qmlp"] = max(worst.get("qmlp", 0), grad_check(qmlp.net, x, rng))

        qsnn = build_agent("qsnn", TrainConfig(grad_method="parameter-shift"), r)
        hidden = Sequential(qsnn.net.blocks[:2]).forward(qsnn.encode(x, r))[0]
        worst["qsnn readout"] = max(worst.get("qsnn readout", 0), grad_check(Sequential(qsnn.net.blocks[2:]), hidden, rng))
    elapsed = time.perf_counter() - start
    ok = max(worst.values()) <= 1e-4 and elapsed < 60
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    assert verdict(1, ok, f"max rel err: {detail}; {elapsed:.1f}s"), detail


def test_criterion_2_quantum_oracle(verdict):
    rng = np.random.default_rng(2)
    oracle_err = 0.0
    for q in (2, 3, 4):
        for L in (1, 2):
            spec = CircuitSpec(q, L)
            for _ in range(5):
                x = rng.random(q)
                theta = rng.uniform(-math.pi, math.pi, spec.n_params)
                psi = simulate(x, theta, spec)[0]
                oracle_err = max(oracle_err, np.max(np.abs(psi - oracles.dense_circuit_state(x, theta, q, L))))
    psi = zero_state(4)
    for _ in range(1000):
        if rng.random() < 0.5:
            psi = apply_gate(psi, "Rot", (int(rng.integers(4)),), tuple(rng.uniform(-3, 3, 3)))
        else:
            c, t = rng.choice(4, 2, replace=False)
            psi = apply_gate(psi, "CRot", (c, t), tuple(rng.uniform(-3, 3, 3)))
    drift = abs(np.linalg.norm(psi) - 1)
    ry_err = max(abs(pauli_z(apply_gate(zero_state(1), "RY", (0,), (t,)))[0, 0] - math.cos(t))
                 for t in np.linspace(-2 * math.pi, 2 * math.pi, 101))
    ok = oracle_err <= 1e-12 and drift <= 1e-10 and ry_err <= 1e-12
    assert verdict(2, ok, f"oracle {oracle_err:.1e}, norm drift {drift:.1e}, RY {ry_err:.1e}")


def test_criterion_3_parameter_counts(verdict):
    counts = {k: build_agent(k).n_params() for k in ("mlp", "snn", "qmlp", "qsnn")}
    ok = counts == REFERENCE_PARAM_COUNTS
    assert verdict(3, ok, str(counts))


def test_criterion_4_environment_state(verdict):
    bijection = all(state_index(index_state(k)) == k for k in range(2560))
    bijection &= len({tuple(index_state(k)) for k in range(2560)}) == 2560
    ranges = all(1 <= s.R_o <= 8 and 0 <= s.D_o <= 4 and 1 <= s.R_T <= 8 and 1 <= s.A <= 8
                 for s in all_states())
    ones = all(one_hot(s).sum() == 4 for s in all_states())

    rates_ok = True
    for rate, dt in ((100.0, 0.01), (20.0, 0.05), (50.0, 0.002)):
        p = spike_probability(rate, dt)
        s = poisson_encode(np.ones(1), rate, 100_000, dt, np.random.default_rng(int(rate)))
        rates_ok &= abs(s.mean() - p) <= 3 * math.sqrt(p * (1 - p) / s.size)

    updates = 0
    inside = True
    for seed in range(200):
        rng = np.random.default_rng(seed)
        env = GridWorld(GridSpec(size=6, n_static=0, n_dynamic=0))
        cells = rng.choice(36, size=5, replace=False)
        dirs = [(1, 0), (-1, 0), (0, 1), (0, -1)]
        obs = [Obstacle((int(c) % 6, int(c) // 6), "dynamic" if k < 4 else "static",
                        dirs[int(rng.integers(4))] if k < 4 else None) for k, c in enumerate(cells)]
        env.set_layout(obs, cell=(0, 0) if (0, 0) not in [o.cell for o in obs] else None)
        for _ in range(1250):
            env.advance_dynamics()
            updates += 4
            inside &= all(env.spec.inside(c) for c in env.dynamic_cells)
    ok = bijection and ranges and ones and rates_ok and inside and updates >= 10**6
    assert verdict(4, ok, f"bijection {bijection}, ranges {ranges}, one-hot {ones}, "
                          f"Poisson 3-sigma {rates_ok}, {updates} obstacle moves inside {inside}")


def test_criterion_5_metrics(verdict):
    rng = np.random.default_rng(5)
    spl_ok = True
    for _ in range(1000):
        n = int(rng.integers(1, 30))
        recs = [EpisodeRecord(0, [], [2], [], GOAL if rng.random() < 0.6 else TIMEOUT,
                              float(rng.uniform(1, 50)), float(rng.uniform(1, 50))) for _ in range(n)]
        sr = sum(r.success for r in recs) / n
        spl_ok &= compute_spl(recs) <= sr + 1e-12
    optimal = [EpisodeRecord(0, [], [2], [], GOAL, 7.0, 7.0) for _ in range(5)]
    iff = compute_spl(optimal) == 1.0
    iff &= compute_spl(optimal[:4] + [EpisodeRecord(0, [], [2], [], GOAL, 7.5, 7.0)]) < 1.0
    iff &= compute_spl(optimal[:4] + [EpisodeRecord(0, [], [2], [], TIMEOUT, 7.0, 7.0)]) < 1.0
    tr_ok = compute_turn_rate([2] * 17) == 0.0

    dijkstra_ok = True
    spec = GridSpec(size=8, n_static=0, n_dynamic=0)
    free = [(x, y) for x in range(8) for y in range(8) if (x, y) not in ((0, 0), (7, 7))]
    for _ in range(50):
        blocked = [free[i] for i in rng.choice(len(free), size=int(rng.integers(0, 20)), replace=False)]
        a = shortest_path(spec, blocked)
        b = brute_shortest(8, blocked, (0, 0), (7, 7), max_steps=64)
        dijkstra_ok &= (math.isinf(a) and math.isinf(b)) or abs(a - b) <= 1e-9
    pl_err = max(abs(path_length([(i, i) for i in range(k + 1)]) - k * math.sqrt(2)) for k in range(1, 40))
    ok = spl_ok and iff and tr_ok and dijkstra_ok and pl_err <= 1e-12
    assert verdict(5, ok, f"SPL<=SR {spl_ok}, SPL=1 iff optimal {iff}, TR forward {tr_ok}, "
                          f"Dijkstra vs brute force {dijkstra_ok}, diagonal PL err {pl_err:.1e}")


def test_criterion_6_determinism(verdict, tmp_path):
    same = {}
    for kind in ("qtable", "mlp", "snn"):
        paths = []
        for run in ("a", "b"):
            model = tmp_path / f"{kind}_{run}.{'qtable' if kind == 'qtable' else 'json'}"
            table = tmp_path / f"{kind}_{run}.table"
            report = tmp_path / f"{kind}_{run}.report.json"
            assert main(["train", "--agent", kind, "--env", "10", "--episodes", "25", "--seed", "3",
                         "--set", "learning_start=200", "--set", "batch_size=32", "--out", str(model)]) == 0
            assert main(["convert", str(model), "--seed", "3", "--out", str(table)]) == 0
            assert main(["eval", str(table), "--env", "10", "--out", str(report)]) == 0
            paths.append((model, table, report, tmp_path / f"{model.name}.log.csv"))
        same[kind] = all(a.read_bytes() == b.read_bytes() for a, b in zip(*paths))
        again = tmp_path / f"{kind}_again.report.json"
        main(["eval", str(paths[0][1]), "--env", "10", "--out", str(again)])
        same[kind] &= again.read_bytes() == paths[0][2].read_bytes()
    ok = all(same.values())
    assert verdict(6, ok, f"byte-identical model/table/report/log: {same}")


@pytest.fixture(scope="module")
def desk_runs():
    """Trained agents for the learning and trend checks, with wall time."""
    start = time.perf_counter()
    out = {}
    for name, kind, size, episodes in (("tabular20", "qtable", 20, 800), ("mlp10", "mlp", 10, 400),
                                       ("snn10", "snn", 10, 400)):
        cfg = selected_config(kind, size).replace(episodes=episodes)
        agent, _ = train(kind, preset(size, training=True), cfg, seed=0)
        out[name] = run_protocol(build_qtable(agent, 0), preset(size))
    out["elapsed"] = time.perf_counter() - start
    return out


def test_criterion_7_desk_scale_learning(verdict, desk_runs):
    sr = {k: desk_runs[k].sr for k in ("tabular20", "mlp10", "snn10")}
    ok = (sr["tabular20"] >= 0.80 and sr["mlp10"] >= 0.70 and sr["snn10"] >= 0.70
          and desk_runs["elapsed"] <= 15 * 60)
    detail = (f"SR tabular 20x20 {sr['tabular20']:.2f} (>=0.80), MLP 10x10 {sr['mlp10']:.2f} (>=0.70), "
              f"SNN 10x10 {sr['snn10']:.2f} (>=0.70); {desk_runs['elapsed']:.0f}s")
    assert verdict(7, ok, detail), detail


def test_criterion_8_turn_rate_trend(verdict, desk_runs):
    # reported only; a failed trend does not fail the suite
    tabular = desk_runs["tabular20"].tr_mean
    neural = {}
    for kind in ("mlp", "snn"):
        cfg = selected_config(kind, 20)
        agent, _ = train(kind, preset(20, training=True), cfg, seed=0)
        neural[kind] = run_protocol(build_qtable(agent, 0), preset(20)).tr_mean
    holds = tabular is not None and all(v is not None and tabular > v for v in neural.values())
    fmt = lambda v: "n/a" if v is None else f"{v:.3f}"
    verdict(8, holds, f"(non-gating) TR tabular {fmt(tabular)} vs "
                      + ", ".join(f"{k} {fmt(v)}" for k, v in neural.items()))


def test_criterion_9_shot_statistics(verdict):
    rng = np.random.default_rng(9)
    spec = CircuitSpec()
    within = 0
    for _ in range(1000):
        x = rng.random(spec.q)
        theta = rng.uniform(-math.pi, math.pi, spec.n_params)
        exact = run_circuit(x, theta, spec)
        est = sampled_expectation(x, theta, 1024, rng, spec)
        within += np.max(np.abs(est - exact)) <= 0.125
    ok = within >= 990
    assert verdict(9, ok, f"{within}/1000 circuits within 0.125 on every qubit at 1024 shots")
