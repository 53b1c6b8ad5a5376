"""Deterministic, checkpointable search for negative integrand values.

Candidates are generated from a counter-based random stream keyed by
(seed, candidate index), so any index range can be evaluated independently
and a run can resume from a checkpoint with a byte-identical output log.
Negative finds and running-minimum updates are appended to a JSONL file;
checkpoints are separate small JSON documents embedding the full config.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DomainError
from .exactnum import Log2Multiple, as_fraction, format_rational
from .loops import (
    REFERENCE_MULTIPLIERS,
    REFERENCE_POINT,
    REFERENCE_VECTORS,
    IntegrandPoint,
    VectorFamily,
    triple_integrand,
)

CHECKPOINT_SCHEMA = 1


@dataclass(frozen=True)
class SearchConfig:
    """Full description of a search run; (config, seed) determines everything."""

    mode: str                       # 'random' | 'neighborhood'
    budget: int
    seed: int
    output_path: str
    checkpoint_path: str | None = None
    checkpoint_interval: int = 1000
    points: tuple = (REFERENCE_POINT,)
    # neighborhood mode
    seed_vectors: tuple = REFERENCE_VECTORS
    seed_multipliers: tuple = REFERENCE_MULTIPLIERS
    radius: int = 1                 # max +- change of one vector entry
    multiplier_step: int = 3        # lambda moves in units of this many ln 2
    # random mode
    n_vectors: int = 3
    dim: int = 3
    magnitude_max: int = 10**6
    negative_prob: float = 0.25
    multiplier_range: int = 30      # multipliers are 3*uniform(0..range) ln 2

    def __post_init__(self):
        if self.mode not in ("random", "neighborhood"):
            raise DomainError(f"unknown search mode {self.mode!r}")
        if self.budget < 1:
            raise DomainError("budget must be >= 1")
        if self.radius < 0:
            raise DomainError("radius must be >= 0")
        object.__setattr__(self, "points", tuple(
            p if isinstance(p, IntegrandPoint) else IntegrandPoint.from_json(p)
            for p in self.points
        ))
        object.__setattr__(self, "seed_vectors", tuple(tuple(int(x) for x in row) for row in self.seed_vectors))
        object.__setattr__(self, "seed_multipliers", tuple(int(q) for q in self.seed_multipliers))

    @property
    def resolved_checkpoint_path(self) -> str:
        return self.checkpoint_path or self.output_path + ".ckpt.json"

    def to_json(self):
        return {
            "mode": self.mode,
            "budget": self.budget,
            "seed": self.seed,
            "output_path": self.output_path,
            "checkpoint_path": self.checkpoint_path,
            "checkpoint_interval": self.checkpoint_interval,
            "points": [p.to_json() for p in self.points],
            "seed_vectors": [list(r) for r in self.seed_vectors],
            "seed_multipliers": list(self.seed_multipliers),
            "radius": self.radius,
            "multiplier_step": self.multiplier_step,
            "n_vectors": self.n_vectors,
            "dim": self.dim,
            "magnitude_max": self.magnitude_max,
            "negative_prob": self.negative_prob,
            "multiplier_range": self.multiplier_range,
        }

    @staticmethod
    def from_json(obj) -> "SearchConfig":
        known = {f for f in SearchConfig.__dataclass_fields__}
        kwargs = {k: v for k, v in obj.items() if k in known}
        return SearchConfig(**kwargs)


@dataclass(frozen=True)
class SearchRecord:
    """One evaluated candidate at one point; re-evaluation reproduces value exactly."""

    index: int
    vectors: tuple
    multipliers: tuple
    point: IntegrandPoint
    value: object
    exact: bool
    negative: bool
    new_min: bool

    def to_json(self):
        if self.exact:
            val = format_rational(self.value)
        else:
            val = repr(float(self.value))
        return {
            "index": self.index,
            "vectors": [list(r) for r in self.vectors],
            "multipliers": list(self.multipliers),
            "point": self.point.to_json(),
            "value": val,
            "exact": self.exact,
            "negative": self.negative,
            "new_min": self.new_min,
        }


def _candidate(config: SearchConfig, index: int):
    """Vectors and multipliers for candidate ``index`` (1-based, deterministic)."""
    if config.mode == "neighborhood":
        vectors = [list(r) for r in config.seed_vectors]
        mults = list(config.seed_multipliers)
        if index == 1:
            return vectors, mults
        rng = np.random.Generator(np.random.Philox(key=config.seed, counter=index))
        n_entries = len(vectors) * len(vectors[0])
        which = int(rng.integers(0, n_entries + len(mults)))
        sign = 1 if rng.integers(0, 2) else -1
        if which < n_entries:
            delta = int(rng.integers(0, config.radius + 1)) * sign
            r, c = divmod(which, len(vectors[0]))
            vectors[r][c] += delta
        else:
            mults[which - n_entries] += sign * config.multiplier_step
        return vectors, mults
    rng = np.random.Generator(np.random.Philox(key=config.seed, counter=index))
    vectors = []
    for _ in range(config.n_vectors):
        row = []
        for _ in range(config.dim):
            mag = math.exp(rng.uniform(0.0, math.log(config.magnitude_max)))
            val = max(1, int(round(mag)))
            if rng.random() < config.negative_prob:
                val = -val
            row.append(val)
        vectors.append(row)
    mults = [
        3 * int(rng.integers(0, config.multiplier_range + 1))
        for _ in range(config.n_vectors)
    ]
    return vectors, mults


def _evaluate(config: SearchConfig, index: int):
    """All per-point results of candidate ``index`` as (value, exact) pairs."""
    vectors, mults = _candidate(config, index)
    family = VectorFamily.exact(vectors)
    lam = [Log2Multiple(Fraction(q)) for q in mults]
    out = []
    for point in config.points:
        res = triple_integrand(family, lam, point)
        out.append((tuple(tuple(r) for r in vectors), tuple(mults), point, res.value, res.exact))
    return out


def _evaluate_range(args):
    config_json, start, stop = args
    config = SearchConfig.from_json(config_json)
    return [(i, _evaluate(config, i)) for i in range(start, stop)]


@dataclass
class _State:
    next_index: int = 1
    evaluations: int = 0
    negatives: int = 0
    min_value: object = None
    min_exact: bool = True
    argmin: dict | None = None


def _load_state(checkpoint):
    st = _State()
    st.next_index = checkpoint["next_index"]
    st.evaluations = checkpoint["evaluations"]
    st.negatives = checkpoint["negatives"]
    if checkpoint["min_value"] is not None:
        if checkpoint["min_exact"]:
            st.min_value = as_fraction(checkpoint["min_value"])
        else:
            st.min_value = float(checkpoint["min_value"])
        st.min_exact = checkpoint["min_exact"]
        st.argmin = checkpoint["argmin"]
    return st


def _checkpoint_doc(config, st, output_bytes):
    if st.min_value is None:
        minval = None
    elif st.min_exact:
        minval = format_rational(st.min_value)
    else:
        minval = repr(float(st.min_value))
    return {
        "schema": CHECKPOINT_SCHEMA,
        "config": config.to_json(),
        "next_index": st.next_index,
        "evaluations": st.evaluations,
        "negatives": st.negatives,
        "min_value": minval,
        "min_exact": st.min_exact,
        "argmin": st.argmin,
        "output_bytes": output_bytes,
    }


def _summary(st):
    return {
        "evaluations": st.evaluations,
        "negatives_found": st.negatives,
        "min_value": st.min_value,
        "argmin": st.argmin,
    }


def run_search(config: SearchConfig, workers: int = 1, limit: int | None = None):
    """Evaluate candidates 1..budget, streaming negatives and minimum updates.

    ``limit`` caps how many candidates this call processes (the run can then
    be continued with resume()); checkpoints are written every
    ``checkpoint_interval`` candidates and at the end.  Returns the summary
    {evaluations, negatives_found, min_value, argmin}.
    """
    return _run(config, _State(), workers, limit, append=False)


def resume(checkpoint_path: str, workers: int = 1, limit: int | None = None):
    """Continue a checkpointed run; the combined output log is byte-identical
    to an uninterrupted run of the same config."""
    with open(checkpoint_path) as fh:
        doc = json.load(fh)
    if doc.get("schema") != CHECKPOINT_SCHEMA:
        raise DomainError(f"unsupported checkpoint schema in {checkpoint_path}")
    config = SearchConfig.from_json(doc["config"])
    st = _load_state(doc)
    # truncate any partial writes past the checkpoint
    out_bytes = doc["output_bytes"]
    if os.path.exists(config.output_path):
        with open(config.output_path, "rb+") as fh:
            fh.truncate(out_bytes)
    else:
        if out_bytes:
            raise DomainError("checkpoint expects output that does not exist")
    return _run(config, st, workers, limit, append=True)


def _run(config, st, workers, limit, append):
    end_index = config.budget + 1
    if limit is not None:
        end_index = min(end_index, st.next_index + limit)
    mode = "ab" if append else "wb"
    ckpt_path = config.resolved_checkpoint_path
    with open(config.output_path, mode) as out:
        def flush_checkpoint():
            out.flush()
            doc = _checkpoint_doc(config, st, out.tell())
            tmp = ckpt_path + ".tmp"
            with open(tmp, "w") as fh:
                json.dump(doc, fh, indent=1)
            os.replace(tmp, ckpt_path)

        def handle(index, results):
            for vectors, mults, point, value, exact in results:
                negative = value < 0
                new_min = st.min_value is None or value < st.min_value
                if negative:
                    st.negatives += 1
                if new_min:
                    st.min_value = value
                    st.min_exact = exact
                if negative or new_min:
                    rec = SearchRecord(
                        index, vectors, mults, point, value, exact, negative, new_min
                    )
                    doc = rec.to_json()
                    if new_min:
                        st.argmin = doc
                    out.write((json.dumps(doc, sort_keys=True) + "\n").encode())
            st.evaluations += 1
            st.next_index = index + 1

        if workers > 1:
            chunk = max(1, config.checkpoint_interval // 2)
            cfg_json = config.to_json()
            with ProcessPoolExecutor(max_workers=workers) as pool:
                start = st.next_index
                while start < end_index:
                    stops = []
                    a = start
                    while a < end_index and len(stops) < workers:
                        b = min(a + chunk, end_index)
                        stops.append((cfg_json, a, b))
                        a = b
                    for batch in pool.map(_evaluate_range, stops):
                        for index, results in batch:
                            handle(index, results)
                    flush_checkpoint()
                    start = a
        else:
            since = 0
            for index in range(st.next_index, end_index):
                handle(index, _evaluate(config, index))
                since += 1
                if since >= config.checkpoint_interval:
                    flush_checkpoint()
                    since = 0
        flush_checkpoint()
    return _summary(st)
