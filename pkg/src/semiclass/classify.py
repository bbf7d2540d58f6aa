"""Iterative classification of semifield spread sets up to equivalence.

T_k holds representatives of the all-invertible k-dimensional subspaces spanned
by one element of each of S_1..S_k.  A step extends every representative by
every element of S_{k+1}, keeps the all-invertible results, and files each by
its invariant key; equivalence tests only run inside a key bucket.

Candidates are generated (optionally in a worker pool) and then merged in
canonical (representative id, seed index) order by a single loop, so the
output does not depend on the worker count.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .equivalence import matrix_code_equivalent
from .gf import field_make
from .invariants import RankMultiset, VectorClassRegistry, m_ranks_fast, vector_code
from .spreadset import MatrixCode, SeedSets, det2, save_code
from .linalg import batch_rank

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "semiclass-checkpoint"
CHECKPOINT_VERSION = 1
REFERENCE_FINAL_CANDIDATES = {(2, 2, 4): 530873}
THREADS_ENV = "SEMICLASS_THREADS"


class CheckpointError(ValueError):
    pass


@dataclass
class ClassifyConfig:
    use_invariants: bool = True
    m: int = 2
    workers: int = 0  # 0: read THREADS_ENV, default 1
    checkpoint: Optional[str] = None
    resume: bool = False
    normalize_first: bool = False
    stop_at: Optional[int] = None
    sample_every: int = 1  # keep candidates with position = 0 mod j (benchmarks only)

    def worker_count(self) -> int:
        if self.workers > 0:
            return self.workers
        try:
            return max(1, int(os.environ.get(THREADS_ENV, "1")))
        except ValueError:
            return 1


@dataclass
class StepStats:
    k: int
    candidates: int = 0
    survivors: int = 0
    key_new: int = 0
    key_hits: int = 0
    equiv_tests: int = 0
    equiv_positive: int = 0
    vector_tests: int = 0
    representatives: int = 0
    distinct_ranks: int = 0
    distinct_vclasses: int = 0
    distinct_keys: int = 0
    seconds: float = 0.0


@dataclass
class ClassificationState:
    q: int
    n: int
    s: int
    k: int = 0
    reps: List[MatrixCode] = field(default_factory=list)
    keys: List[str] = field(default_factory=list)
    key_index: Dict[str, List[int]] = field(default_factory=dict)
    registry: VectorClassRegistry = field(default_factory=VectorClassRegistry)
    stats: List[StepStats] = field(default_factory=list)

    @classmethod
    def initial(cls, q: int, n: int, s: int) -> "ClassificationState":
        f = field_make(q, s)
        zero = MatrixCode(q, n, s, np.zeros((0, n, n), dtype=np.int64), f)
        st = cls(q, n, s)
        st.reps = [zero]
        st.keys = [""]
        st.key_index = {"": [0]}
        return st

    @property
    def params(self) -> Tuple[int, int, int]:
        return (self.q, self.n, self.s)

    @property
    def done(self) -> bool:
        return self.k >= self.n * self.s

    def summary(self) -> dict:
        ranks = {key.split("|")[0] for key in self.keys}
        vcl = {key.split("|")[1] for key in self.keys if "|" in key}
        return {
            "k": self.k,
            "representatives": len(self.reps),
            "distinct_ranks": len(ranks),
            "distinct_vclasses": len(vcl),
            "distinct_keys": len(set(self.keys)),
        }


# -- candidate generation ------------------------------------------------------------

def _invertible(f, mats: np.ndarray) -> np.ndarray:
    n = mats.shape[-1]
    flat = mats.reshape(-1, n, n)
    ok = det2(f, flat) != 0 if n == 2 else batch_rank(f, flat) == n
    return ok.reshape(mats.shape[:-2])


def surviving_seeds(C: MatrixCode, seeds: np.ndarray) -> np.ndarray:
    """Indices of seeds A for which every nonzero element of <C, A> is invertible."""
    f = C.field
    old = C.elements  # nonzero elements are already invertible
    ok = np.ones(seeds.shape[0], dtype=bool)
    for c in range(1, C.q):
        cand = f.vadd(old[None], f.vmul(seeds, c)[:, None])
        ok &= _invertible(f, cand).all(axis=1)
    return np.nonzero(ok)[0]


@dataclass
class Candidate:
    rep_id: int
    seed_idx: int
    code: MatrixCode
    ranks: Optional[RankMultiset] = None


def _candidates_for(args) -> List[Tuple[int, np.ndarray, Optional[str]]]:
    rep_id, rep_basis, q, n, s, k, m, use_inv, seed_filter, every = args
    f = field_make(q, s)
    C = MatrixCode(q, n, s, rep_basis, f)
    seeds = _seed_cache(q, n, s)[k + 1]
    if seed_filter is not None:
        seeds = seeds[list(seed_filter)]
    out = []
    for i in surviving_seeds(C, seeds).tolist():
        if every > 1 and (rep_id * seeds.shape[0] + i) % every:
            continue
        D = C.extend(seeds[i])
        ranks = m_ranks_fast(D, m).serialize() if use_inv else None
        out.append((i, D.basis, ranks))
    return out


_SEEDS: Dict[Tuple[int, int, int], SeedSets] = {}


def _seed_cache(q: int, n: int, s: int) -> SeedSets:
    if (q, n, s) not in _SEEDS:
        _SEEDS[(q, n, s)] = SeedSets(q, n, s)
    return _SEEDS[(q, n, s)]


def _generate(state: ClassificationState, config: ClassifyConfig,
              stats: StepStats) -> Iterator[Candidate]:
    q, n, s = state.params
    k = state.k
    seeds = _seed_cache(q, n, s)[k + 1]
    seed_filter = None
    if config.normalize_first and k == 0:
        eye = np.eye(n, dtype=np.int64)
        seed_filter = [i for i, A in enumerate(seeds) if np.array_equal(A, eye)]
    per_rep = len(seed_filter) if seed_filter is not None else seeds.shape[0]
    jobs = [
        (r, C.basis, q, n, s, k, config.m, config.use_invariants, seed_filter, config.sample_every)
        for r, C in enumerate(state.reps)
    ]
    workers = config.worker_count()
    if workers > 1 and len(jobs) > 1:
        import multiprocessing as mp

        pool = mp.get_context("spawn" if os.name == "nt" else "fork").Pool(workers)
        results = pool.imap(_candidates_for, jobs, chunksize=max(1, len(jobs) // (8 * workers)))
    else:
        pool = None
        results = map(_candidates_for, jobs)
    f = field_make(q, s)
    try:
        for rep_id, res in enumerate(results):
            stats.candidates += per_rep
            for seed_idx, basis, ranks in res:
                stats.survivors += 1
                if seed_filter is not None:
                    seed_idx = seed_filter[seed_idx]
                yield Candidate(
                    rep_id,
                    seed_idx,
                    MatrixCode(q, n, s, basis, f),
                    RankMultiset.parse(ranks) if ranks is not None else None,
                )
    finally:
        if pool is not None:
            pool.terminate()


# -- merge -----------------------------------------------------------------------

def extend_step(state: ClassificationState, config: Optional[ClassifyConfig] = None) -> ClassificationState:
    """Build T_{k+1} from T_k."""
    config = config or ClassifyConfig()
    if state.done:
        raise ValueError("classification is already complete")
    t0 = time.perf_counter()
    stats = StepStats(k=state.k + 1)
    reps: List[MatrixCode] = []
    keys: List[str] = []
    index: Dict[str, List[int]] = {}
    # vector codes of different lengths never meet, so each step starts afresh
    registry = state.registry = VectorClassRegistry()
    for cand in _generate(state, config, stats):
        C = cand.code
        if config.use_invariants:
            label = registry.label(vector_code(C))
            key = f"{cand.ranks.serialize()}|{label}"
        else:
            key = ""
        bucket = index.get(key)
        if bucket is None:
            stats.key_new += 1
        else:
            stats.key_hits += 1
            found = False
            for r in bucket:
                stats.equiv_tests += 1
                if matrix_code_equivalent(C, reps[r]) is not None:
                    stats.equiv_positive += 1
                    found = True
                    break
            if found:
                continue
        index.setdefault(key, []).append(len(reps))
        reps.append(C)
        keys.append(key)
    state.k += 1
    state.reps, state.keys, state.key_index = reps, keys, index
    stats.vector_tests = registry.tests_run
    summ = state.summary()
    stats.representatives = summ["representatives"]
    stats.distinct_ranks = summ["distinct_ranks"]
    stats.distinct_vclasses = summ["distinct_vclasses"]
    stats.distinct_keys = summ["distinct_keys"]
    stats.seconds = time.perf_counter() - t0
    state.stats.append(stats)
    log.info("step %d: %d survivors, %d representatives, %d tests, %.1fs",
             stats.k, stats.survivors, stats.representatives, stats.equiv_tests, stats.seconds)
    return state


def classify(q: int, n: int, s: int,
             config: Optional[ClassifyConfig] = None) -> Tuple[List[MatrixCode], List[StepStats]]:
    """Run (or resume) the classification up to k = ns, or config.stop_at."""
    config = config or ClassifyConfig()
    state = None
    if config.resume and config.checkpoint and Path(config.checkpoint).exists():
        state = checkpoint_load(config.checkpoint)
        if state.params != (q, n, s):
            raise CheckpointError("checkpoint is for different parameters")
    if state is None:
        state = ClassificationState.initial(q, n, s)
    target = n * s if config.stop_at is None else min(config.stop_at, n * s)
    while state.k < target:
        extend_step(state, config)
        if config.checkpoint:
            checkpoint_save(state, config.checkpoint)
    return state.reps, state.stats


# -- checkpoints and results ---------------------------------------------------------

def _state_json(state: ClassificationState) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "params": list(state.params),
        "k": state.k,
        "reps": [C.basis.tolist() for C in state.reps],
        "keys": state.keys,
        "registry": state.registry.to_json(),
        "registry_tests": state.registry.tests_run,
        "stats": [asdict(st) for st in state.stats],
    }


def checkpoint_save(state: ClassificationState, path) -> None:
    """Write atomically: a crash leaves either the old or the new file."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w") as fh:
        json.dump(_state_json(state), fh)
    os.replace(tmp, path)


def checkpoint_load(path) -> ClassificationState:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint {path}: {exc}") from exc
    if not isinstance(obj, dict) or obj.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path} is not a checkpoint")
    if obj.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {obj.get('version')}")
    try:
        q, n, s = obj["params"]
        f = field_make(q, s)
        k = int(obj["k"])
        reps = [
            MatrixCode(q, n, s, np.array(b, dtype=np.int64).reshape(-1, n, n), f)
            for b in obj["reps"]
        ]
        keys = list(obj["keys"])
        if len(keys) != len(reps) or any(C.k != k for C in reps):
            raise CheckpointError("inconsistent checkpoint contents")
        state = ClassificationState(q, n, s, k, reps, keys)
        for i, key in enumerate(keys):
            state.key_index.setdefault(key, []).append(i)
        state.registry = VectorClassRegistry.from_json(obj["registry"])
        state.registry.tests_run = int(obj.get("registry_tests", 0))
        state.stats = [StepStats(**st) for st in obj["stats"]]
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"malformed checkpoint {path}: {exc}") from exc
    return state


STATS_FIELDS = [f.name for f in StepStats.__dataclass_fields__.values()]


def write_results(reps: Sequence[MatrixCode], stats: Sequence[StepStats], out_dir) -> dict:
    """One JSON file per representative, stats.csv per step, summary.json."""
    out = Path(out_dir)
    (out / "representatives").mkdir(parents=True, exist_ok=True)
    for i, C in enumerate(reps):
        save_code(C, out / "representatives" / f"rep_{i:05d}.json")
    with open(out / "stats.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=STATS_FIELDS)
        w.writeheader()
        for st in stats:
            w.writerow(asdict(st))
    summary = final_summary(reps, stats)
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
    return summary


def final_summary(reps: Sequence[MatrixCode], stats: Sequence[StepStats]) -> dict:
    last = stats[-1] if stats else StepStats(k=0)
    summary = {
        "k": last.k,
        "representatives": len(reps),
        "distinct_ranks": last.distinct_ranks,
        "distinct_vclasses": last.distinct_vclasses,
        "distinct_keys": last.distinct_keys,
        "final_step_survivors": last.survivors,
    }
    if reps:
        ref = REFERENCE_FINAL_CANDIDATES.get(reps[0].params)
        if ref is not None and last.k == reps[0].n * reps[0].s:
            summary["reference_final_survivors"] = ref
            summary["final_survivors_match"] = last.survivors == ref
    return summary
