"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` (lines appear in the terminal
summary) or ``python3 tests/test_acceptance.py``.
"""

import time
from fractions import Fraction

import numpy as np
import pytest

from celkit import celcert, determinant, examples, logfactory, matcore, spectral
from celkit.pathalg import (UnitaryPath, homotopy_length, lipschitz_check, path_length,
                            uniform_grid)


def _report(record, number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}"
    print(line)
    if record is not None:
        record("criterion", line)
    return ok


def detone_corpus():
    return [examples.gen_random_detone(2 + s % 5, seed=s, grid=257) for s in range(100)]


# ---------------------------------------------------------------- 1

def criterion_1(record=None):
    t0 = time.perf_counter()
    paths = detone_corpus() + [examples.gen_uniexam(n)[0] for n in range(2, 9)]
    worst_res = worst_tr = worst_norm = 0.0
    refined = 0
    for P in paths:
        res = logfactory.trace_zero_log_path(P, 1e-6)
        refined += res.refined
        rep = logfactory.verify_log_certificate(res.source, res.h, 1e-6, res.u1)
        worst_res = max(worst_res, rep.residual)
        worst_tr = max(worst_tr, rep.max_trace)
        worst_norm = max(worst_norm, rep.sup_norm)
    elapsed = time.perf_counter() - t0
    ok = worst_res <= 1e-6 and worst_tr <= 1e-10 and worst_norm < 1 and elapsed <= 60
    return _report(record, 1, ok, f"paths={len(paths)} residual={worst_res:.2e} trace={worst_tr:.1e} "
                                  f"sup|h|={worst_norm:.4f} refined={refined} time={elapsed:.1f}s")


# ---------------------------------------------------------------- 2

def criterion_2(record=None):
    t0 = time.perf_counter()
    F = examples.gen_uniexam(5)[2]
    cert = celcert.certify_length_lower_bound(F, eps=0.1)
    check = celcert.verify_cel_certificate(cert.to_dict())
    upper = homotopy_length(F, uniform_grid(2049), t_index=-1)[-1]
    elapsed = time.perf_counter() - t0
    target = 1.75 * np.pi
    ok = (check.ok and cert.lower_bound >= target - 0.1 and abs(upper - target) <= 1e-3
          and elapsed <= 120)
    return _report(record, 2, ok, f"lower={cert.lower_bound:.6f} (need >= {target - 0.1:.6f}) "
                                  f"upper={upper:.6f} reverified={check.ok} time={elapsed:.1f}s")


# ---------------------------------------------------------------- 3

def criterion_3(record=None):
    p = examples.Ex2Params(n=13, m=4, k=3)
    u = examples.gen_ex2(p)
    ts = np.linspace(1 / 12, 1, 11)
    exact = spectral.measure_concentration_report(u, ts, 0.1)
    exact_ok = all(r.deviation_I == Fraction(3, 715) for r in exact["rows"])

    rng = np.random.default_rng(11)
    K = matcore.random_hermitian(p.N, rng)
    E = matcore.mat_exp_i(1e-3 * K)
    v = UnitaryPath.from_function(lambda t: u.func(t) @ E, p.grid, meta=u.meta)
    pert = spectral.measure_concentration_report(v, ts, 0.1, reference=u)
    worst = max(float(r.deviation_I) for r in pert["rows"])
    pert_ok = worst <= 5 * 0.1 / 64 + 1e-6
    ok = exact_ok and pert_ok
    return _report(record, 3, ok, f"exact 3/715 at {len(ts)} t: {exact_ok}; perturbation "
                                  f"{pert['perturbation_norm']:.2e}, max deviation {worst:.5f} "
                                  f"(bound {5 * 0.1 / 64:.5f})")


# ---------------------------------------------------------------- 4

def criterion_4(record=None, seeds=10, budget=10_000):
    t0 = time.perf_counter()
    uE = examples.gen_ex2(n=13, m=4, k=0, grid=257)
    cap = 2 * (1 - 1 / 12) * np.pi - 0.1
    dstar = celcert.certified_threshold(uE, cap)
    all_contradict = True
    consistent_below = 0
    worst = 0.0
    for seed in range(seeds):
        for weight in (0.0, 1.0):
            res = celcert.best_exp_approx(uE, cap, budget=budget, seed=seed, continuity_weight=weight)
            if weight == 0.0:
                worst = max(worst, res.residual)
                rep = celcert.obstruction_check(uE, res.h, 0.1, max(res.residual, 1e-12), cap=cap)
                all_contradict &= rep.contradiction
            try:
                celcert.winding_trace_window(uE, res.h, res.residual)
                consistent = True
            except celcert.NoConsistentL:
                consistent = False
            if consistent and res.residual < dstar:
                consistent_below += 1
    elapsed = time.perf_counter() - t0
    ok = all_contradict and consistent_below == 0 and elapsed <= 600
    return _report(record, 4, ok, f"contradiction for all {seeds} oracle outputs: {all_contradict} "
                                  f"(max residual {worst:.1e}); certified threshold {dstar:.4f}; "
                                  f"trace-consistent h below it: {consistent_below}; time={elapsed:.1f}s")


# ---------------------------------------------------------------- 5

def criterion_5(record=None):
    worst_int = 0.0
    for s in range(50):
        P = examples.gen_random_path(2 + s % 5, seed=1000 + s, grid=513, closed=True)
        rep = determinant.dls_determinant(P)
        worst_int = max(worst_int, abs(rep.scaled - np.round(rep.scaled)))

    rng = np.random.default_rng(5)
    worst_pi = 0.0
    for s in range(20):
        n = 2 + s % 4
        u = matcore.random_unitary(n, rng)
        v = u @ matcore.mat_exp_i(matcore.random_hermitian(n, rng, scale=2.0))
        direct = examples.geodesic_path(u, v)
        loop = examples.gen_random_path(n, seed=2000 + s, grid=513, closed=True)
        detour = UnitaryPath(loop.grid, u[None] @ loop.start.conj().T[None] @ loop.samples).concat(direct)
        r1 = determinant.rotation_number(u, v, direct)
        r2 = determinant.rotation_number(u, v, detour)
        worst_pi = max(worst_pi, r1.lattice.distance(r1.value - r2.value))

    worst_triv = 0.0
    for s in range(20):
        n = 2 + s % 4
        u = matcore.random_unitary(n, rng)
        w = matcore.random_unitary(n, rng)
        v = w @ u @ w.conj().T @ matcore.mat_exp_i(matcore.random_hermitian(n, rng, scale=1.0))
        worst_triv = max(worst_triv, determinant.check_triv_identity(u, v, w, examples.geodesic_path(u, v)))
    ok = worst_int <= 1e-6 and worst_pi <= 1e-6 and worst_triv <= 1e-6
    return _report(record, 5, ok, f"integrality {worst_int:.1e}, path independence {worst_pi:.1e}, "
                                  f"triv residual {worst_triv:.1e}")


# ---------------------------------------------------------------- 6

def criterion_6(record=None):
    corpus = detone_corpus()
    corpus += [examples.gen_random_path(2 + s % 5, seed=s, grid=257, scale=3.0) for s in range(50)]
    corpus += [examples.gen_uniexam(n)[0] for n in range(2, 9)]
    worst = -np.inf
    for P in corpus:
        slack = path_length(P) + 10 * P.max_step() ** 2
        starts = np.unique(np.round(matcore.eigphases_only(P.start), 12))
        for ph in starts:
            sel = spectral.track_selection(P, ph)
            worst = max(worst, sel.length - slack)
    u = examples.gen_uniexam(5)[0]
    e1 = spectral.track_selection(u, 0.0, start_vector=np.eye(5)[0])
    ok = worst <= 0 and abs(e1.length - 1.75 * np.pi) <= 1e-3
    return _report(record, 6, ok, f"max(selection - bound) = {worst:.2e} over {len(corpus)} paths; "
                                  f"e1 length {e1.length:.6f} vs {1.75 * np.pi:.6f}")


# ---------------------------------------------------------------- 7

def _ranks(path):
    p1 = sum(b["rank_p1"] for b in path.meta["blocks"])
    p2 = sum(b["rank_p2"] for b in path.meta["blocks"])
    return p1, p2


def criterion_7(record=None):
    n, grid = 3, uniform_grid(5)
    prev = examples.gen_ex2ml_stage(n, [1], 0, grid=grid)[0]
    problems = []
    for s in range(1, 4):
        img, hist = examples.gen_ex2ml_stage(n, [1], s, grid=grid)
        st = hist[-1]
        M = st.multiplicities[0][0]
        if img.n != M * prev.n or st.target_dims != [img.n]:
            problems.append(f"dimension at stage {s}")
        tr_img = np.trace(img.samples, axis1=1, axis2=2) / img.n
        tr_f = np.trace(prev.samples, axis1=1, axis2=2) / prev.n
        frozen = sum(np.trace(examples.evaluate_at(prev, t)) / prev.n for t in st.evaluation_points)
        mix = ((M - st.k) * tr_f + frozen) / M
        if np.abs(tr_img - mix).max() > 1e-12:
            problems.append(f"trace mixing at stage {s}")
        if np.abs(np.linalg.det(img.samples) - 1).max() > 1e-9:
            problems.append(f"det at stage {s}")
        m1, m2, _ = examples.block_ranks(img)
        t1, t2 = _ranks(img)
        if m2 != (n - 1) * m1 or t2 != (n - 1) * t1:
            problems.append(f"rank ratio at stage {s}")
        # moving P1 rank read off the spectrum at a time that is no evaluation point
        t = 0.37
        lam = np.linalg.eigvals(examples.evaluate_at(img, t))
        count = int(np.sum(np.abs(lam - np.exp(1j * examples.theta0(n) * t)) < 1e-9))
        if count != m1:
            problems.append(f"spectral P1 rank at stage {s}")
        prev = img
    ok = not problems
    return _report(record, 7, ok, f"3 stages from a {n}x{n} seed, final dim {prev.n}; "
                                  f"{'all identities exact' if ok else problems}")


# ---------------------------------------------------------------- 8

def criterion_8(record=None):
    worst, checked = 0.0, 0
    for n in (2, 5, 8):
        F = examples.gen_uniexam(n)[2]
        rep = lipschitz_check(F, samples=40, seed=n, slack=np.inf)
        worst = max(worst, rep.worst_ratio)
        checked += rep.checked
    ok = worst <= 1 + 1e-6 and checked >= 10_000
    return _report(record, 8, ok, f"worst ratio {worst:.8f} over {checked} (t, s1, s2) triples")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4,
            criterion_5, criterion_6, criterion_7, criterion_8]


@pytest.mark.parametrize("number", range(1, 9))
def test_criterion(number, record_property):
    assert CRITERIA[number - 1](record_property)


if __name__ == "__main__":
    for c in CRITERIA:
        c()
