"""Disorder-ensemble sweeps over (L, delta) grids with reproducible seeds.

Every realization is reproducible from its derived seed plus the sweep
configuration alone: seeds come from numpy's SeedSequence applied to
(base_seed, L index, delta index, realization index), which gives
collision-free independent streams across the grid. Workers share no
state, so the set of emitted records is independent of worker count and
completion order.

Aggregation reports, per grid point and per length scale, the median and
the narrowest interval containing ceil(0.75 N) of the values. Realizations
flagged by the backends (near-zero modes, eigenvalue tie-breaks) stay in
the record stream but are excluded from the statistics by default.
"""

from __future__ import annotations

import json
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence, TextIO

import numpy as np

from .dense import MAX_DENSE_SITES, dense_entropy_provider
from .gaussian import (
    PROFILE_NOISE_PER_WINDOW,
    coupling_from_hoppings,
    gaussian_entropy_provider,
    ground_covariance,
)
from .kitaev import global_ground_state, sample_realization, sector_eigenpair_direct
from .lattice import info_per_scale, local_information
from .scales import LengthSummary, summarize, summary_from_dict, summary_to_dict

STATE_KINDS = ("ground", "midspectrum-even")
BACKENDS = ("auto", "dense", "gaussian")
METRICS = ("xi", "lambda", "tau", "gamma")


@dataclass
class SweepConfig:
    L_list: list[int]
    g: float
    deltas: list[float]
    realizations: int
    base_seed: int
    backend: str = "auto"
    state: str = "ground"
    workers: int = 1
    store_profiles: bool = False

    def __post_init__(self):
        if self.realizations < 1:
            raise ValueError("need at least one realization per grid point")
        if self.state not in STATE_KINDS:
            raise ValueError(f"state must be one of {STATE_KINDS}")
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}")
        for delta in self.deltas:
            if not math.isfinite(delta):
                raise ValueError("delta grid must be finite")
        resolved = [self.resolve_backend(L) for L in self.L_list]
        if "dense" in resolved and max(self.L_list) > MAX_DENSE_SITES:
            raise ValueError(f"dense backend limited to L <= {MAX_DENSE_SITES}")

    def resolve_backend(self, L: int) -> str:
        if self.backend != "auto":
            be = self.backend
        else:
            be = "gaussian" if self.g == 0.0 and self.state == "ground" else "dense"
        if be == "gaussian" and self.g != 0.0:
            raise ValueError("gaussian backend requires g = 0")
        if be == "gaussian" and self.state != "ground":
            raise ValueError("midspectrum selection requires the dense backend")
        return be

    def to_dict(self) -> dict:
        return {
            "L_list": list(self.L_list),
            "g": self.g,
            "deltas": list(self.deltas),
            "realizations": self.realizations,
            "base_seed": self.base_seed,
            "backend": self.backend,
            "state": self.state,
            "workers": self.workers,
            "store_profiles": self.store_profiles,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SweepConfig":
        return cls(
            L_list=[int(x) for x in doc["L_list"]],
            g=float(doc["g"]),
            deltas=[float(x) for x in doc["deltas"]],
            realizations=int(doc["realizations"]),
            base_seed=int(doc["base_seed"]),
            backend=doc.get("backend", "auto"),
            state=doc.get("state", "ground"),
            workers=int(doc.get("workers", 1)),
            store_profiles=bool(doc.get("store_profiles", False)),
        )


def derive_seed(base_seed: int, iL: int, idelta: int, realization: int) -> int:
    """Collision-free 64-bit seed for one grid task (SeedSequence mixing)."""
    ss = np.random.SeedSequence((base_seed, iL, idelta, realization))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass
class RealizationRecord:
    L: int
    g: float
    delta: float
    seed: int
    state_kind: str
    backend: str
    flags: list[str] = field(default_factory=list)
    summary: LengthSummary | None = None
    profile: list[float] | None = None
    failed: bool = False
    error: str | None = None

    def key(self) -> tuple[int, float, int]:
        return (self.L, self.delta, self.seed)

    def to_json_line(self) -> str:
        doc = {
            "L": self.L,
            "g": self.g,
            "delta": self.delta,
            "seed": self.seed,
            "state": self.state_kind,
            "backend": self.backend,
            "flags": self.flags,
            "summary": summary_to_dict(self.summary) if self.summary else None,
            "profile": self.profile,
            "failed": self.failed,
            "error": self.error,
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json_line(cls, line: str) -> "RealizationRecord":
        doc = json.loads(line)
        return cls(
            L=int(doc["L"]),
            g=float(doc["g"]),
            delta=float(doc["delta"]),
            seed=int(doc["seed"]),
            state_kind=doc["state"],
            backend=doc["backend"],
            flags=list(doc.get("flags", [])),
            summary=summary_from_dict(doc["summary"]) if doc.get("summary") else None,
            profile=doc.get("profile"),
            failed=bool(doc.get("failed", False)),
            error=doc.get("error"),
        )


def run_realization(task: tuple) -> RealizationRecord:
    """One grid task; failures are captured in the record, never raised."""
    L, g, delta, seed, state_kind, backend, store_profile = task
    record = RealizationRecord(
        L=L, g=g, delta=delta, seed=seed, state_kind=state_kind, backend=backend
    )
    try:
        realization = sample_realization(L, g, delta, seed)
        noise = 0.0
        if backend == "gaussian":
            cov = ground_covariance(coupling_from_hoppings(realization.t))
            # A single near-zero pair (a split topological edge mode) leaves
            # every window entropy unchanged whichever way it is filled;
            # only two or more pairs make the state genuinely ambiguous.
            if cov.zero_mode_pairs >= 2:
                record.flags.append("near-zero-mode")
            provider = gaussian_entropy_provider(cov)
            noise = PROFILE_NOISE_PER_WINDOW
        else:
            if state_kind == "ground":
                pair = global_ground_state(realization)
            else:
                pair = sector_eigenpair_direct(realization, "even", "closest-to-zero")
            if pair.tie_break:
                record.flags.append("tie-break")
            provider = dense_entropy_provider(pair.state)
        profile = info_per_scale(local_information(provider))
        record.summary = summarize(profile, noise_per_window=noise)
        if store_profile:
            record.profile = [float(v) for v in profile.totals]
    except Exception as exc:  # noqa: BLE001  (sweeps must survive bad points)
        record.failed = True
        record.error = f"{type(exc).__name__}: {exc}"
    return record


def iter_tasks(config: SweepConfig) -> Iterator[tuple]:
    for iL, L in enumerate(config.L_list):
        backend = config.resolve_backend(L)
        for idelta, delta in enumerate(config.deltas):
            for r in range(config.realizations):
                seed = derive_seed(config.base_seed, iL, idelta, r)
                yield (L, config.g, delta, seed, config.state, backend, config.store_profiles)


def run_sweep(
    config: SweepConfig,
    jobs: int | None = None,
    skip_keys: set[tuple[int, float, int]] = frozenset(),
) -> Iterator[RealizationRecord]:
    """Stream records for every task not in ``skip_keys``.

    With jobs > 1 the records arrive in completion order; the emitted set
    is identical either way.
    """
    jobs = jobs if jobs is not None else config.workers
    tasks = [t for t in iter_tasks(config) if (t[0], t[2], t[3]) not in skip_keys]
    if jobs <= 1:
        for task in tasks:
            yield run_realization(task)
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        yield from pool.map(run_realization, tasks, chunksize=1)


# ---------------------------------------------------------------------------
# Aggregation.

def median(values: Sequence[float]) -> float:
    """Standard median: middle value, or mean of the middle two."""
    return float(statistics.median(values))


def narrowest_interval(values: Sequence[float], frac: float = 0.75) -> tuple[float, float]:
    """Minimum-width window over the sorted values covering ceil(frac*N)
    of them; the left-most window wins ties."""
    if not values:
        raise ValueError("empty sample")
    v = sorted(values)
    w = max(1, math.ceil(frac * len(v)))
    best = (v[w - 1] - v[0], 0)
    for i in range(1, len(v) - w + 1):
        width = v[i + w - 1] - v[i]
        if width < best[0]:
            best = (width, i)
    i = best[1]
    return (v[i], v[i + w - 1])


@dataclass
class MetricStats:
    median: float
    low75: float
    high75: float
    width75: float
    n: int


@dataclass
class AggregateStats:
    L: int
    delta: float
    g: float
    n_total: int
    n_used: int
    n_flagged: int
    n_failed: int
    metrics: dict[str, MetricStats] = field(default_factory=dict)


def aggregate(
    records: Iterable[RealizationRecord], include_flagged: bool = False
) -> list[AggregateStats]:
    """Per-grid-point medians and narrowest-75% intervals.

    Flagged realizations are excluded unless ``include_flagged``; grid
    points with no usable records get an empty metrics dict.
    """
    groups: dict[tuple[int, float, float], list[RealizationRecord]] = {}
    for rec in records:
        groups.setdefault((rec.L, rec.delta, rec.g), []).append(rec)
    out = []
    for (L, delta, g), recs in sorted(groups.items()):
        n_failed = sum(r.failed for r in recs)
        n_flagged = sum(bool(r.flags) for r in recs if not r.failed)
        usable = [
            r
            for r in recs
            if not r.failed and r.summary is not None and (include_flagged or not r.flags)
        ]
        stats = AggregateStats(
            L=L,
            delta=delta,
            g=g,
            n_total=len(recs),
            n_used=len(usable),
            n_flagged=n_flagged,
            n_failed=n_failed,
        )
        for metric in METRICS:
            vals = []
            for r in usable:
                v = getattr(r.summary, {"lambda": "lam"}.get(metric, metric))
                if v is not None:
                    vals.append(float(v))
            if vals:
                lo, hi = narrowest_interval(vals)
                stats.metrics[metric] = MetricStats(
                    median=median(vals), low75=lo, high75=hi, width75=hi - lo, n=len(vals)
                )
        out.append(stats)
    return out


def write_aggregate_csv(
    stats: Sequence[AggregateStats], stream: TextIO, comments: Iterable[str] = ()
) -> None:
    for line in comments:
        stream.write(line.rstrip("\n") + "\n")
    stream.write("L,delta,g,stat,metric,value\n")
    for st in stats:
        prefix = f"{st.L},{st.delta:.12g},{st.g:.12g}"
        for metric, ms in st.metrics.items():
            for stat in ("median", "low75", "high75", "width75", "n"):
                stream.write(f"{prefix},{stat},{metric},{getattr(ms, stat):.12g}\n")
        for stat, val in (
            ("n_total", st.n_total),
            ("n_used", st.n_used),
            ("n_flagged", st.n_flagged),
            ("n_failed", st.n_failed),
        ):
            stream.write(f"{prefix},{stat},records,{val}\n")


def read_records_jsonl(stream: TextIO) -> list[RealizationRecord]:
    records = []
    for line in stream:
        line = line.strip()
        if line and not line.startswith("#"):
            records.append(RealizationRecord.from_json_line(line))
    return records
