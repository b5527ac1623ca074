"""Local information on the (position, scale) lattice of a 1D quantum chain.

A chain of L sites with local Hilbert-space dimension d is scanned over all
contiguous windows. The window with scale ``ell`` and left edge ``m`` covers
the ``ell + 1`` sites ``[m, m + ell]``; its center sits at ``n = m + ell/2``
(a half-integer when ``ell`` is odd). Each window is assigned the number of
bits that can be learned from its reduced density matrix but not from any
strictly smaller window:

    i(0, m)   = log2(d) - S(0, m)
    i(1, m)   = S(0, m) + S(0, m+1) - S(1, m)
    i(ell, m) = S(ell-1, m) + S(ell-1, m+1) - S(ell, m) - S(ell-2, m+1)

where S(ell, m) is the von Neumann entropy of the window in bits. The
dimension terms of the underlying information differences cancel exactly,
which is why only entropies appear. Strong subadditivity guarantees every
value is non-negative for a valid state, and for pure states the values sum
to L*log2(d).

Entropies are supplied by a backend implementing the ``EntropyProvider``
protocol; see :mod:`infolattice.dense`, :mod:`infolattice.gaussian` and
:mod:`infolattice.mps`. All quantities are in bits (log base 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Protocol, Sequence, TextIO

import numpy as np

#: Numerical slack on strong subadditivity. Values in (-TOL_SSA, 0) are
#: clamped to zero; anything below raises :class:`SSAViolationError`.
TOL_SSA = 1e-10

#: Pure-state sum-rule tolerance, per site.
SUM_RULE_TOL = 1e-8


class SSAViolationError(ValueError):
    """A local-information value fell below ``-TOL_SSA``.

    Strong subadditivity makes local information non-negative for any valid
    density matrix, so a violation signals a broken entropy backend or an
    overly truncated matrix-product state.
    """

    def __init__(self, ell: int, m: int, value: float):
        self.ell = ell
        self.m = m
        self.value = value
        super().__init__(
            f"local information {value:.3e} < -{TOL_SSA:g} at (ell={ell}, m={m})"
        )


class SubsystemId(NamedTuple):
    """Contiguous window identifier: scale ``ell``, left-edge site ``m``."""

    ell: int
    m: int

    @property
    def two_n(self) -> int:
        """Twice the center coordinate, always an integer (2n = 2m + ell)."""
        return 2 * self.m + self.ell

    @property
    def n(self) -> float:
        """Center coordinate; half-integer for odd ``ell``."""
        return self.m + self.ell / 2

    def sites(self) -> range:
        return range(self.m, self.m + self.ell + 1)

    def validate(self, L: int) -> None:
        if self.ell < 0 or self.m < 0 or self.m + self.ell > L - 1:
            raise ValueError(f"subsystem (ell={self.ell}, m={self.m}) invalid for L={L}")


class EntropyProvider(Protocol):
    """Source of subsystem von Neumann entropies in bits.

    ``subsystem_entropy(ell, m)`` returns S of the window ``[m, m + ell]``
    and must satisfy ``0 <= S <= (ell + 1) * log2(d)``. Providers are only
    queried read-only; the lattice builder itself runs serially.
    """

    L: int
    d: int

    def subsystem_entropy(self, ell: int, m: int) -> float: ...


@dataclass
class InformationLattice:
    """Triangular array of local-information values in bits.

    ``values`` maps :class:`SubsystemId` to non-negative local information.
    A complete lattice holds every valid ``(ell, m)``; builders may also
    produce restricted lattices (a scale band or a site window), in which
    case only the computed entries are present.
    """

    L: int
    d: int = 2
    values: dict[SubsystemId, float] = field(default_factory=dict)

    def __getitem__(self, key: tuple[int, int]) -> float:
        return self.values[SubsystemId(*key)]

    def __contains__(self, key: tuple[int, int]) -> bool:
        return SubsystemId(*key) in self.values

    def ids(self) -> list[SubsystemId]:
        """All stored ids, sorted by (ell, two_n)."""
        return sorted(self.values)

    def total_bits(self) -> float:
        return float(sum(self.values.values()))

    def sum_rule_residual(self) -> float:
        """|total - L*log2(d)|; < SUM_RULE_TOL*L for complete pure-state lattices."""
        return abs(self.total_bits() - self.L * math.log2(self.d))

    def scale_total(self, ell: int) -> float:
        """Sum of stored values at fixed scale."""
        return float(
            sum(v for sid, v in self.values.items() if sid.ell == ell)
        )

    @property
    def is_complete(self) -> bool:
        return len(self.values) == self.L * (self.L + 1) // 2

    def require_complete(self) -> None:
        if not self.is_complete:
            raise ValueError(
                f"lattice incomplete: {len(self.values)} of "
                f"{self.L * (self.L + 1) // 2} entries"
            )


@dataclass
class ScaleProfile:
    """Per-scale information totals I[ell] for ell = 0 .. L-1, in bits."""

    L: int
    totals: np.ndarray

    def __post_init__(self):
        self.totals = np.asarray(self.totals, dtype=float)
        if self.totals.shape != (self.L,):
            raise ValueError(f"profile needs {self.L} entries, got {self.totals.shape}")

    def total_bits(self) -> float:
        return float(self.totals.sum())


def local_information(
    provider: EntropyProvider,
    *,
    ell_range: tuple[int, int] | None = None,
    site_window: tuple[int, int] | None = None,
) -> InformationLattice:
    """Compute the information lattice from an entropy provider.

    Entries are evaluated scale by scale, positions left to right, which is
    the access order stateful providers (the MPS backend) are optimized for.
    ``ell_range=(lo, hi)`` restricts output to scales ``lo..hi`` and
    ``site_window=(first, last)`` to windows contained in ``[first, last]``;
    either restriction yields a partial lattice.

    Values in ``(-TOL_SSA, 0)`` are clamped to zero; anything lower raises
    :class:`SSAViolationError`.
    """
    L, d = provider.L, provider.d
    if L < 2:
        raise ValueError("need at least 2 sites")
    log2d = math.log2(d)

    lo_site, hi_site = site_window if site_window is not None else (0, L - 1)
    if not (0 <= lo_site <= hi_site <= L - 1):
        raise ValueError(f"site window ({lo_site}, {hi_site}) invalid for L={L}")
    lo_ell, hi_ell = ell_range if ell_range is not None else (0, L - 1)
    lo_ell = max(lo_ell, 0)
    hi_ell = min(hi_ell, hi_site - lo_site)

    # Each entropy feeds up to four lattice entries; memoize across scales.
    cache: dict[tuple[int, int], float] = {}

    def S(ell: int, m: int) -> float:
        key = (ell, m)
        val = cache.get(key)
        if val is None:
            val = float(provider.subsystem_entropy(ell, m))
            cache[key] = val
        return val

    values: dict[SubsystemId, float] = {}
    # Scales lo_ell-2, lo_ell-1 feed the lo_ell row; prefetch them in
    # ascending-scale order so stateful providers see a monotone sweep.
    for ell in range(max(lo_ell - 2, 0), hi_ell + 1):
        for m in range(lo_site, hi_site - ell + 1):
            if ell < lo_ell:
                S(ell, m)
                continue
            if ell == 0:
                i = log2d - S(0, m)
            elif ell == 1:
                i = S(0, m) + S(0, m + 1) - S(1, m)
            else:
                i = S(ell - 1, m) + S(ell - 1, m + 1) - S(ell, m) - S(ell - 2, m + 1)
            if i < 0.0:
                if i < -TOL_SSA:
                    raise SSAViolationError(ell, m, i)
                i = 0.0
            values[SubsystemId(ell, m)] = i
    return InformationLattice(L=L, d=d, values=values)


def info_per_scale(lattice: InformationLattice) -> ScaleProfile:
    """Sum local information over positions at each scale (complete lattices)."""
    lattice.require_complete()
    totals = np.zeros(lattice.L)
    for sid, v in lattice.values.items():
        totals[sid.ell] += v
    return ScaleProfile(L=lattice.L, totals=totals)


def subsystem_decomposition_check(
    lattice: InformationLattice,
    provider: EntropyProvider,
    sid: SubsystemId,
) -> float:
    """Residual of the containment sum rule for one window.

    The information of a window equals the sum of local information over all
    windows contained in it; the return value is the absolute deviation (bits).
    """
    sid = SubsystemId(*sid)
    sid.validate(provider.L)
    log2d = math.log2(provider.d)
    info = (sid.ell + 1) * log2d - provider.subsystem_entropy(sid.ell, sid.m)
    contained = 0.0
    for ell in range(sid.ell + 1):
        for m in range(sid.m, sid.m + sid.ell - ell + 1):
            contained += lattice[(ell, m)]
    return abs(info - contained)


def average_lattices(lattices: Sequence[InformationLattice]) -> InformationLattice:
    """Entrywise mean of lattices sharing L, d and identical key sets."""
    if not lattices:
        raise ValueError("no lattices to average")
    first = lattices[0]
    keys = set(first.values)
    for lat in lattices[1:]:
        if (lat.L, lat.d) != (first.L, first.d) or set(lat.values) != keys:
            raise ValueError("lattices differ in shape or key set")
    out = {
        sid: float(np.mean([lat.values[sid] for lat in lattices])) for sid in keys
    }
    return InformationLattice(L=first.L, d=first.d, values=out)


# ---------------------------------------------------------------------------
# Profile JSON: {"L": ..., "totals": [...]}.

def write_profile_json(
    profile: ScaleProfile, stream: TextIO, provenance: dict | None = None
) -> None:
    doc: dict = {"L": profile.L, "totals": [float(v) for v in profile.totals]}
    if provenance is not None:
        doc["_provenance"] = provenance
    json.dump(doc, stream)
    stream.write("\n")


def read_profile_json(stream: TextIO) -> tuple[ScaleProfile, dict | None]:
    doc = json.load(stream)
    profile = ScaleProfile(L=int(doc["L"]), totals=np.asarray(doc["totals"], dtype=float))
    return profile, doc.get("_provenance")


# ---------------------------------------------------------------------------
# Lattice CSV: header `ell,two_n,i_bits`, rows sorted by (ell, two_n).

def write_lattice_csv(
    lattice: InformationLattice,
    stream: TextIO,
    comments: Iterable[str] = (),
) -> None:
    """Write the lattice; `comments` are verbatim '#'-prefixed header lines."""
    for line in comments:
        stream.write(line.rstrip("\n") + "\n")
    stream.write("ell,two_n,i_bits\n")
    for sid in lattice.ids():
        stream.write(f"{sid.ell},{sid.two_n},{lattice.values[sid]:.12g}\n")


def read_lattice_csv(stream: TextIO, d: int = 2) -> tuple[InformationLattice, list[str]]:
    """Read a lattice CSV; returns (lattice, comment lines).

    L is inferred from the largest window in the file, so restricted
    lattices reconstruct with the L of their widest entry.
    """
    comments: list[str] = []
    values: dict[SubsystemId, float] = {}
    L = 0
    header_seen = False
    for raw in stream:
        line = raw.rstrip("\n")
        if not line:
            continue
        if line.startswith("#"):
            comments.append(line)
            continue
        if not header_seen:
            if line != "ell,two_n,i_bits":
                raise ValueError(f"unexpected lattice CSV header: {line!r}")
            header_seen = True
            continue
        ell_s, two_n_s, v_s = line.split(",")
        ell, two_n = int(ell_s), int(two_n_s)
        if (two_n - ell) % 2 != 0:
            raise ValueError(f"row (ell={ell}, two_n={two_n}) has non-integer site index")
        m = (two_n - ell) // 2
        values[SubsystemId(ell, m)] = float(v_s)
        L = max(L, m + ell + 1)
    if not header_seen:
        raise ValueError("missing lattice CSV header")
    return InformationLattice(L=L, d=d, values=values), comments
