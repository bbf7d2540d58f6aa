"""Command line: classify | invariants | equiv | verify-lemmas | bench.

Machine-readable results go to stdout (JSON) or files; human summaries go to
stderr.  Exit codes: 0 success, 1 negative decision or failed check,
2 usage or input error, 3 internal or guard error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .classify import THREADS_ENV, ClassifyConfig, classify, write_results
from .embed import RegularRep, conjugator, phibar_array, psi
from .equivalence import EquivalenceError, matrix_code_equivalent
from .gf import FieldError, field_make
from .invariants import (
    VectorClassRegistry,
    m_ranks_direct,
    m_ranks_fast,
    vector_code,
)
from .linalg import Mat, batch_rank, inverse, kron, vec
from .spreadset import MatrixCode, SpreadSetError, load_code, random_spread_set

EXIT_OK, EXIT_NEGATIVE, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3

log = logging.getLogger("semiclass")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    q: int = 2
    n: int = 2
    s: int = 4
    m: int = 2
    input: Optional[str] = None
    output: Optional[str] = None
    checkpoint: Optional[str] = None
    workers: int = 0
    method: str = "fast"
    emit_witness: Optional[str] = None
    resume: bool = False

    def check(self):
        if self.q != 2:
            raise UsageError("only q = 2 is supported")
        if self.n < 1 or self.s < 1:
            raise UsageError("n and s must be positive")
        try:
            field_make(self.q, self.s)
        except FieldError as exc:
            raise UsageError(str(exc)) from exc


# -- lemma verification -------------------------------------------------------------

@dataclass
class PropertyResult:
    name: str
    trials: int = 0
    failures: int = 0
    counterexample: Optional[dict] = None

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def fail(self, example: dict):
        self.failures += 1
        if self.counterexample is None:
            self.counterexample = example

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "trials": self.trials,
            "failures": self.failures,
            "passed": self.passed,
            "counterexample": self.counterexample,
        }


def random_subspace(q: int, n: int, s: int, k: int, rng: np.random.Generator) -> MatrixCode:
    """A uniformly drawn basis of k independent matrices over F_q."""
    f = field_make(q, s)
    while True:
        try:
            return MatrixCode(q, n, s, rng.integers(0, f.size, (k, n, n)), f)
        except SpreadSetError:
            continue


def _random_invertible(f, n, rng) -> Mat:
    while True:
        X = Mat(f, rng.integers(0, f.size, (n, n)))
        if X.rank() == n:
            return X


def verify_lemmas(q: int = 2, n: int = 2, s: int = 4, m: int = 2, trials: int = 100,
                  seed: int = 0, phibar_hook: Optional[Callable] = None) -> List[PropertyResult]:
    """Randomized checks of the structural identities; one result per property.

    `phibar_hook(rep, arr)` replaces the block map (negative-control hook).
    """
    f = field_make(q, s)
    rep = RegularRep(f, q)
    pb = phibar_hook or phibar_array
    rng = np.random.default_rng(seed)
    kron_r = PropertyResult("vec_kronecker")
    lemma1 = PropertyResult("rank_multiset_phibar_psi")
    conj = PropertyResult("psi_conjugation")
    fast = PropertyResult("m_ranks_fast_equals_direct")
    divis = PropertyResult("m_rank_divisibility")
    W = conjugator(rep, n)
    Wi = inverse(W)
    for t in range(trials):
        X, Y = _random_invertible(f, n, rng), _random_invertible(f, n, rng)
        A = Mat(f, rng.integers(0, f.size, (n, n)))
        kron_r.trials += 1
        if vec(X @ A @ Y) != kron(Y.T, X) @ vec(A):
            kron_r.fail({"X": X.tolist(), "A": A.tolist(), "Y": Y.tolist()})

        conj.trials += 1
        img = Mat._wrap(f, pb(rep, A.a))
        if W @ img @ Wi != psi(A, q):
            conj.fail({"A": A.tolist()})

        k = int(rng.integers(1, n * s + 1))
        C = random_subspace(q, n, s, k, rng)
        E = C.elements
        lemma1.trials += 1
        r_c = sorted((s * batch_rank(f, E)).tolist())
        r_phibar = sorted(batch_rank(field_make(q, 1), pb(rep, E)).tolist())
        r_psi = sorted(
            batch_rank(f, np.stack([psi(Mat._wrap(f, e), q).a for e in E])).tolist()
        )
        if not (r_c == r_phibar == r_psi):
            lemma1.fail({"basis": C.basis.tolist(), "s_rank": r_c, "phibar": r_phibar, "psi": r_psi})

        fast.trials += 1
        a, b = m_ranks_fast(C, m), m_ranks_direct(C, m)
        if a != b:
            fast.fail({"basis": C.basis.tolist(), "m": m, "fast": a.serialize(), "direct": b.serialize()})
        if s % m == 0:
            divis.trials += 1
            bad = [r for r in a.ranks() if r % (s // m)]
            if bad:
                divis.fail({"basis": C.basis.tolist(), "m": m, "ranks": a.serialize()})
    return [kron_r, lemma1, conj, fast, divis]


# -- benchmarks -------------------------------------------------------------------

def bench(q: int = 2, n: int = 2, s: int = 4, reps: int = 10, seed: int = 0) -> Dict[str, float]:
    """Mean seconds per operation on random spread sets (cold caches each time)."""
    f = field_make(q, s)
    rng = np.random.default_rng(seed)
    codes = [random_spread_set(q, n, s, rng) for _ in range(reps)]
    images = [
        C.transform(_random_invertible(f, n, rng), _random_invertible(f, n, rng),
                    f.automorphisms()[int(rng.integers(0, f.d))])
        for C in codes
    ]
    t = time.perf_counter()
    for C, C2 in zip(codes, images):
        matrix_code_equivalent(C, C2)
    t_eq = (time.perf_counter() - t) / reps
    t = time.perf_counter()
    for C in codes:
        m_ranks_fast(C, 2)
    t_rk = (time.perf_counter() - t) / reps
    registry = VectorClassRegistry()
    t = time.perf_counter()
    for C in images + codes:
        registry.label(vector_code(C))
    t_vc = (time.perf_counter() - t) / (2 * reps)
    return {"equivalence_test": t_eq, "two_ranks": t_rk, "vector_label": t_vc}


# -- argument handling ---------------------------------------------------------------

def _params(p: argparse.ArgumentParser, m: bool = False):
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--s", type=int, default=4)
    if m:
        p.add_argument("--m", type=int, default=2)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="semiclass", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("classify", help="classify spread sets up to equivalence")
    _params(c, m=True)
    c.add_argument("--out", required=True, help="results directory")
    c.add_argument("--threads", type=int, default=0, help=f"worker count (default ${THREADS_ENV} or 1)")
    c.add_argument("--checkpoint")
    c.add_argument("--resume", action="store_true")
    c.add_argument("--no-invariants", action="store_true")
    c.add_argument("--normalize-first", action="store_true",
                   help="use only the identity in S_1 (optional symmetry reduction)")
    c.add_argument("--stop-at", type=int)

    i = sub.add_parser("invariants", help="m-ranks and vector-code data of a spread set file")
    i.add_argument("--input", required=True)
    i.add_argument("--m", type=int, default=2)
    i.add_argument("--method", choices=["fast", "direct"], default="fast")

    e = sub.add_parser("equiv", help="decide equivalence of two matrix codes")
    e.add_argument("--a", required=True)
    e.add_argument("--b", required=True)
    e.add_argument("--emit-witness", metavar="PATH")

    v = sub.add_parser("verify-lemmas", help="randomized identity checks")
    _params(v, m=True)
    v.add_argument("--trials", type=int, default=100)
    v.add_argument("--seed", type=int, default=0)

    b = sub.add_parser("bench", help="per-operation timings")
    _params(b)
    b.add_argument("--reps", type=int, default=10)
    b.add_argument("--seed", type=int, default=0)
    return ap


def _emit(obj) -> None:
    json.dump(obj, sys.stdout, indent=2)
    sys.stdout.write("\n")


def _load(path: str) -> MatrixCode:
    try:
        return load_code(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"malformed code file {path}: {exc}") from exc


def _cmd_classify(a) -> int:
    RunConfig(a.q, a.n, a.s, a.m).check()
    cfg = ClassifyConfig(
        use_invariants=not a.no_invariants,
        m=a.m,
        workers=a.threads,
        checkpoint=a.checkpoint,
        resume=a.resume,
        normalize_first=a.normalize_first,
        stop_at=a.stop_at,
    )
    reps, stats = classify(a.q, a.n, a.s, cfg)
    summary = write_results(reps, stats, a.out)
    _emit(summary)
    print(f"{summary['representatives']} classes at k={summary['k']}", file=sys.stderr)
    if summary.get("final_survivors_match") is False:
        print(
            f"note: final-step survivors {summary['final_step_survivors']} "
            f"differ from the reference count {summary['reference_final_survivors']}",
            file=sys.stderr,
        )
    return EXIT_OK


def _cmd_invariants(a) -> int:
    C = _load(a.input)
    ranks = (m_ranks_fast if a.method == "fast" else m_ranks_direct)(C, a.m)
    D = vector_code(C)
    _emit({
        "m": a.m,
        "ranks": {str(r): c for r, c in ranks.counts},
        "vector_code": {
            "dim": D.dim,
            "length": D.length,
            "rank_weight_distribution": {str(w): c for w, c in D.rank_weight_distribution},
            "point_weight_distribution": {str(w): c for w, c in D.qsystem.weight_distribution},
        },
    })
    return EXIT_OK


def _cmd_equiv(a) -> int:
    C, C2 = _load(a.a), _load(a.b)
    try:
        w = matrix_code_equivalent(C, C2)
    except EquivalenceError as exc:
        raise UsageError(str(exc)) from exc
    out = {"equivalent": w is not None}
    if w is not None:
        out["witness"] = w.to_json()
        out["witness"]["field"] = C.field.to_json()
        if a.emit_witness:
            with open(a.emit_witness, "w") as fh:
                json.dump(out["witness"], fh, indent=2)
    _emit(out)
    return EXIT_OK if w is not None else EXIT_NEGATIVE


def _cmd_verify(a) -> int:
    RunConfig(a.q, a.n, a.s, a.m).check()
    results = verify_lemmas(a.q, a.n, a.s, a.m, a.trials, a.seed)
    _emit({"params": [a.q, a.n, a.s, a.m], "trials": a.trials,
           "results": [r.to_json() for r in results]})
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name} ({r.trials} trials)", file=sys.stderr)
    return EXIT_OK if all(r.passed for r in results) else EXIT_NEGATIVE


def _cmd_bench(a) -> int:
    RunConfig(a.q, a.n, a.s).check()
    _emit({"params": [a.q, a.n, a.s], "reps": a.reps, "seconds": bench(a.q, a.n, a.s, a.reps, a.seed)})
    return EXIT_OK


COMMANDS = {
    "classify": _cmd_classify,
    "invariants": _cmd_invariants,
    "equiv": _cmd_equiv,
    "verify-lemmas": _cmd_verify,
    "bench": _cmd_bench,
}


def run_command(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FieldError, SpreadSetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - stable exit-code contract
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def main() -> None:
    sys.exit(run_command())
