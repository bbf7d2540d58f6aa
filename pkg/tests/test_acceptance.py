"""Acceptance criteria, one PASS/FAIL/SKIP line each (see the terminal summary).

Long-running parts are gated by environment variables:

* SEMICLASS_FULL=1         run the full (2,2,4) classification (criteria 1 and 7)
                           and the m = 4 lemma checks in dimensions 5..8 (criterion 3)
* SEMICLASS_CHECKPOINT     checkpoint file used and resumed by the full classification
* SEMICLASS_RESULTS        results directory of a finished (2,2,4) run; criteria 1 and 7
                           are then evaluated from it without reclassifying
* SEMICLASS_T7_CHECKPOINT  checkpoint at k = 7; enables the step-8 speedup of criterion 9
"""

import json
import os
import time
from pathlib import Path

import numpy as np
import pytest

from oracles import brute_classify
from semiclass.classify import (
    REFERENCE_FINAL_CANDIDATES,
    ClassifyConfig,
    checkpoint_load,
    classify,
    extend_step,
    write_results,
)
from semiclass.cli import _random_invertible, bench, random_subspace
from semiclass.embed import RegularRep, conjugator, dickson_moore, lift, phi, phibar, phibar_array, psi
from semiclass.equivalence import brute_force_matrix_equiv, matrix_code_equivalent
from semiclass.gf import field_make
from semiclass.invariants import (
    RankMultiset,
    VectorClassRegistry,
    invariant_key,
    m_ranks_direct,
    m_ranks_fast,
    vclass_label,
    vector_code,
)
from semiclass.linalg import Mat, batch_rank, inverse
from semiclass.spreadset import (
    MatrixCode,
    SeedSets,
    desarguesian,
    is_semifield_code,
    load_code,
    random_spread_set,
    span_array,
)

FULL = os.environ.get("SEMICLASS_FULL") == "1"
RESULTS = os.environ.get("SEMICLASS_RESULTS")
T7_CHECKPOINT = os.environ.get("SEMICLASS_T7_CHECKPOINT")

F2, F4, F16 = field_make(2, 1), field_make(2, 2), field_make(2, 4)


# -- criterion 1 and 7: the (2,2,4) classification ------------------------------------

@pytest.fixture(scope="module")
def final_224(tmp_path_factory):
    """Representatives and summary of a complete (2,2,4) run, or None when gated off."""
    if RESULTS:
        out = Path(RESULTS)
    elif FULL:
        out = tmp_path_factory.mktemp("full224")
        cfg = ClassifyConfig(checkpoint=os.environ.get("SEMICLASS_CHECKPOINT"), resume=True)
        reps, stats = classify(2, 2, 4, cfg)
        write_results(reps, stats, out)
    else:
        return None
    reps = [load_code(p) for p in sorted((out / "representatives").glob("rep_*.json"))]
    summary = json.loads((out / "summary.json").read_text())
    # recompute the invariants from the stored codes, independently of the run
    registry = VectorClassRegistry()
    ranks = [m_ranks_fast(C, 2) for C in reps]
    labels = [vclass_label(vector_code(C), registry) for C in reps]
    return {"reps": reps, "summary": summary, "ranks": ranks, "labels": labels,
            "registry": registry}


def test_criterion_1_headline(final_224, report):
    if final_224 is None:
        report(1, "SKIP", "full (2,2,4) classification gated; set SEMICLASS_FULL=1 or SEMICLASS_RESULTS")
        pytest.skip("full classification gated")
    reps, summary = final_224["reps"], final_224["summary"]
    ranks, labels = final_224["ranks"], final_224["labels"]
    n_ranks = len(set(ranks))
    n_vclasses = len(final_224["registry"])
    n_keys = len(set(zip(ranks, labels)))
    ok = (
        len(reps) == 757 and n_ranks == 66 and n_vclasses == 17 and n_keys == 378
        and summary["representatives"] == len(reps)
        and summary["distinct_ranks"] == n_ranks
        and summary["distinct_keys"] == n_keys
        and all(is_semifield_code(C) for C in reps)
    )
    survivors = summary.get("final_step_survivors")
    ref = REFERENCE_FINAL_CANDIDATES[(2, 2, 4)]
    flag = "matches" if survivors == ref else "DIFFERS (flagged, non-failing)"
    report(1, ok, f"{len(reps)} classes, {n_ranks} 2-rank multisets, {n_vclasses} vector classes, "
                  f"{n_keys} keys; final-step spread sets {survivors} vs {ref}: {flag}")
    assert ok


def test_criterion_7_two_rank_values(final_224, report):
    if final_224 is None:
        report(7, "SKIP", "needs the final (2,2,4) classes; set SEMICLASS_FULL=1 or SEMICLASS_RESULTS")
        pytest.skip("full classification gated")
    nonzero = [set(R.ranks()) - {0} for R in final_224["ranks"]]
    ok = (
        all(r <= {4, 6, 8} for r in nonzero)
        and any(6 not in r for r in nonzero)
        and any(4 not in r for r in nonzero)
        and not any(r == {8} for r in nonzero)
    )
    report(7, ok, f"{len(nonzero)} classes, nonzero 2-rank values "
                  f"{sorted(set().union(*nonzero))}, all-8 classes: {sum(r == {8} for r in nonzero)}")
    assert ok


# -- criterion 2: small-scale oracle ----------------------------------------------------

def _membership(reps, orbit):
    ids = []
    for C in reps:
        ids.append(orbit[frozenset(tuple(map(tuple, M)) for M in C.elements.tolist())])
    return ids


def test_criterion_2_small_scale_oracle(oracle_222, report, rng):
    t0 = time.perf_counter()
    details = []
    ok = True
    for s, modulus, oracle in ((1, [1, 1], None), (2, [1, 1, 1], oracle_222)):
        oracle_reps, orbit = oracle or brute_classify(2, modulus, 2)
        reps, _ = classify(2, 2, s)
        ids = _membership(reps, orbit)
        ok &= len(reps) == len(oracle_reps) and sorted(ids) == list(range(len(oracle_reps)))
        # every sampled exhaustive space is brute-force equivalent to exactly its own class
        f = reps[0].field
        spaces = sorted(orbit, key=sorted)
        for idx in rng.choice(len(spaces), size=min(12, len(spaces)), replace=False):
            S = spaces[int(idx)]
            mats = np.array(sorted(S))
            basis = [m for m in mats if m.any()]
            C = MatrixCode(2, 2, s, _independent(f, basis), f)
            hits = [i for i, R in enumerate(reps) if brute_force_matrix_equiv(C, R)]
            ok &= len(hits) == 1 and ids[hits[0]] == orbit[S]
        details.append(f"(2,2,{s}): {len(reps)} classes vs oracle {len(oracle_reps)} "
                       f"over {len(orbit)} spaces")
    dt = time.perf_counter() - t0
    ok &= dt < 300
    report(2, ok, "; ".join(details) + f"; {dt:.1f}s")
    assert ok


def _independent(f, mats):
    chosen = []
    for M in mats:
        try:
            MatrixCode(2, M.shape[0], f.d, np.array(chosen + [M]), f)
        except Exception:
            continue
        chosen.append(M)
    return np.array(chosen)


# -- criterion 3: lemma suite -----------------------------------------------------------

def test_criterion_3_lemma_suite(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    rep = RegularRep(F16, 2)
    failures = {"a": 0, "b": 0, "c": 0}
    m4_dims = range(1, 9) if FULL else range(1, 5)
    checked_b = 0
    for k in range(1, 9):
        for _ in range(100):
            C = random_subspace(2, 2, 4, k, rng)
            elems = C.elements
            # (a) {s rank(x)} = ranks of phibar(x) = ranks of psi(x)
            r_x = 4 * batch_rank(F16, elems)
            r_phibar = batch_rank(F2, phibar_array(rep, elems))
            psi_basis = np.stack([psi(Mat(F16, A), 2).a for A in C.basis])
            r_psi = batch_rank(F16, span_array(F16, 2, psi_basis))
            if not (sorted(r_x) == sorted(r_phibar) == sorted(r_psi)):
                failures["a"] += 1
            for m in (1, 2, 4):
                if m == 4 and k not in m4_dims:
                    continue
                fast = m_ranks_fast(C, m)
                checked_b += 1
                if fast != m_ranks_direct(C, m):
                    failures["b"] += 1
                # (c) m | s: every rank divisible by s/m
                if any(r % (4 // m) for r in fast.ranks()):
                    failures["c"] += 1
    dt = time.perf_counter() - t0
    ok = not any(failures.values()) and dt < 600
    scope = "" if FULL else "; m=4 limited to dims 1-4 (dims 5-8 gated, see ledger)"
    report(3, ok, f"failures {failures}, {checked_b} fast/direct comparisons, {dt:.1f}s{scope}")
    assert ok


# -- criterion 4: structure identities ------------------------------------------------

def test_criterion_4_structure_identities(report):
    rep = RegularRep(F16, 2)
    Z = dickson_moore(rep)
    Zi = inverse(Z)
    dickson = all(
        Z @ lift(phi(rep, a), F16) @ Zi == Mat.diag(F16, [F16.frobenius(2, a, i) for i in range(4)])
        for a in range(16)
    )
    W = conjugator(rep, 2)
    Wi = inverse(W)
    rng = np.random.default_rng(4)
    conj = 0
    for _ in range(100):
        A = Mat(F16, rng.integers(0, 16, (2, 2)))
        conj += W @ lift(phibar(rep, A), F16) @ Wi == psi(A, 2)
    ok = dickson and conj == 100
    report(4, ok, f"Dickson diagonalisation {'holds' if dickson else 'fails'} for all 16 elements; "
                  f"conjugation holds on {conj}/100 random A")
    assert ok


# -- criteria 5, 6: invariance and 1-ranks ------------------------------------------------

@pytest.fixture(scope="module")
def spread_sample():
    rng = np.random.default_rng(5)
    seeds = SeedSets(2, 2, 4)
    return [random_spread_set(2, 2, 4, rng, seeds) for _ in range(100)]


def test_criterion_5_invariance(spread_sample, report):
    rng = np.random.default_rng(55)
    registry = VectorClassRegistry()
    failures = 0
    for C in spread_sample:
        X = _random_invertible(F16, 2, rng)
        Y = _random_invertible(F16, 2, rng)
        rho = F16.automorphisms()[int(rng.integers(0, 4))]
        C2 = C.transform(X, Y, rho)
        a, b = invariant_key(C, registry), invariant_key(C2, registry)
        la = vclass_label(vector_code(C), registry)
        lb = vclass_label(vector_code(C2), registry)
        failures += not (a == b and la == lb)
    report(5, failures == 0, f"{len(spread_sample)} random spread sets, {failures} key mismatches, "
                             f"{len(registry)} vector classes seen")
    assert failures == 0


def test_criterion_6_one_rank_law(spread_sample, report):
    expected = RankMultiset({0: 1, 8: 255})
    codes = [desarguesian(2, 2, 4)] + list(spread_sample)
    bad = sum(m_ranks_fast(C, 1) != expected for C in codes)
    bad += m_ranks_direct(codes[0], 1) != expected
    report(6, bad == 0, f"rank^(1) = {{0^1, 8^255}} on {len(codes)} spread sets, {bad} exceptions")
    assert bad == 0


def test_criterion_7_sample_values(spread_sample, report):
    # the value law on random spread sets; the class-level statements need the full run
    values = set()
    for C in spread_sample:
        values |= set(m_ranks_fast(C, 2).ranks()) - {0}
    ok = values <= {4, 6, 8}
    report("7 (sample)", ok, f"nonzero 2-ranks over {len(spread_sample)} random spread sets: "
                             f"{sorted(values)}")
    assert ok


# -- criterion 8: equivalence decider -------------------------------------------------

def test_criterion_8_decider_vs_brute_force(oracle_222, report):
    from test_equivalence import ADVERSARIAL, _spread_sets

    rng = np.random.default_rng(8)
    codes = _spread_sets(oracle_222)
    pairs = []
    for t in range(50):
        A = codes[int(rng.integers(0, len(codes)))][0]
        if t % 2:
            X, Y = _random_invertible(F4, 2, rng), _random_invertible(F4, 2, rng)
            B = A.transform(X, Y, F4.automorphisms()[int(rng.integers(0, 2))])
        else:
            B = codes[int(rng.integers(0, len(codes)))][0]
        pairs.append((A, B))
    adversarial = [(MatrixCode(2, 2, 2, a, F4), MatrixCode(2, 2, 2, b, F4)) for a, b in ADVERSARIAL]
    D = desarguesian(2, 2, 2)
    orbit_d = next(o for c, o in codes if c == D)
    other = next(c for c, o in codes if o != orbit_d)
    adversarial.append((D, other))
    frob = F4.automorphisms()[1]
    for a, _ in ADVERSARIAL + [(other.basis.tolist(), None)]:
        A = MatrixCode(2, 2, 2, a, F4)
        X, Y = _random_invertible(F4, 2, rng), _random_invertible(F4, 2, rng)
        adversarial.append((A, A.transform(X, Y, frob)))
    assert len(adversarial) == 10
    disagreements = 0
    positives = 0
    for A, B in pairs + adversarial:
        w = matrix_code_equivalent(A, B)
        truth = brute_force_matrix_equiv(A, B)
        positives += truth
        if (w is not None) != truth or (w is not None and not w.verify(A, B)):
            disagreements += 1
    ok = disagreements == 0
    report(8, ok, f"{len(pairs)} random + {len(adversarial)} adversarial pairs at (2,2,2), "
                  f"{positives} equivalent, {disagreements} disagreements")
    assert ok


# -- criterion 9: performance guidance -----------------------------------------------------

def test_criterion_9_timings(report):
    t = bench(2, 2, 4, reps=10, seed=9)
    budget = {"equivalence_test": 0.21, "two_ranks": 0.8, "vector_label": 0.3}
    ok = all(t[k] <= budget[k] for k in budget)
    report("9 (timings)", ok, ", ".join(f"{k} {t[k]:.3f}s (<= {budget[k]}s)" for k in budget))
    assert ok


def test_criterion_9_speedup(report):
    if not T7_CHECKPOINT:
        report("9 (speedup)", "SKIP", "needs T_7 at (2,2,4); set SEMICLASS_T7_CHECKPOINT")
        pytest.skip("step-8 workload gated")
    seconds = {}
    for use in (True, False):
        state = checkpoint_load(T7_CHECKPOINT)
        assert state.k == 7
        t0 = time.perf_counter()
        extend_step(state, ClassifyConfig(use_invariants=use, sample_every=100))
        seconds[use] = time.perf_counter() - t0
        seconds[(use, "reps")] = len(state.reps)
    ratio = seconds[False] / seconds[True]
    ok = ratio >= 5 and seconds[(True, "reps")] == seconds[(False, "reps")]
    report("9 (speedup)", ok, f"1%-sampled step 8: {seconds[True]:.1f}s with invariants, "
                              f"{seconds[False]:.1f}s without, ratio {ratio:.1f}")
    assert ok
