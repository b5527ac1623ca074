"""Disordered interacting Majorana chain: sampling, diagonalization, duality.

The Hamiltonian on L sites with open boundaries is

    H = -i sum_{j=1}^{2L-1} t_j g_j g_{j+1}
        + g sum_{j=1}^{2L-3} g_j g_{j+1} g_{j+2} g_{j+3},

with two Majorana operators per site, g_{2j-1} = c_j + c_j^dag and
g_{2j} = i(c_j - c_j^dag). Disorder draws t_{2j-1} uniformly from
[0, e^(-delta/2)] and t_{2j} from [0, e^(delta/2)]; positive delta favors
the inter-site bonds (topological side), negative delta the on-site bonds.

Operators are represented as Pauli strings after a Jordan-Wigner
transformation with site 0 as the most significant basis digit, tracked as
(X-mask, Z-mask, phase) triples so every sign comes out of the algebra
rather than hand bookkeeping. H commutes with the fermion parity
P = prod_j Z_j and is diagonalized per parity sector.

Reproducibility: disorder uses numpy's default PCG64 generator, seeded per
realization, which is platform-stable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np
import scipy.linalg as sla

from .dense import MAX_DENSE_SITES, DenseState

#: Sector dimensions above this use the spectrum + inverse-iteration path
#: for the requested eigenvector instead of a full eigh (same results,
#: roughly half the time for the largest desk-scale sectors).
_FULL_EIGH_MAX_DIM = 1200

#: |E_i| ties closer than this trigger the deterministic tie-break flag.
TIE_TOL = 1e-12


@dataclass(frozen=True)
class MajoranaString:
    """Product of Majorana operators as a phased Pauli string.

    Masks are over sites (bit L-1-s for site s, matching the dense-state
    digit convention); the operator is phase * X^x Z^z with on-site order
    X before Z. The phase stays in {1, i, -1, -i}.
    """

    L: int
    x_mask: int = 0
    z_mask: int = 0
    phase: complex = 1 + 0j

    @classmethod
    def identity(cls, L: int) -> "MajoranaString":
        return cls(L)

    @classmethod
    def majorana(cls, L: int, k: int) -> "MajoranaString":
        """Majorana operator k (0-based, 0 .. 2L-1; site k // 2).

        Even k is the X-type partner (g_{2j-1} in 1-based labeling), odd k
        the Y-type partner (g_{2j}).
        """
        if not 0 <= k < 2 * L:
            raise ValueError(f"Majorana index {k} out of range for L={L}")
        site = k // 2
        bit = 1 << (L - 1 - site)
        prefix = ((1 << site) - 1) << (L - site)  # Z string on sites < site
        if k % 2 == 0:
            return cls(L, x_mask=bit, z_mask=prefix, phase=1 + 0j)
        return cls(L, x_mask=bit, z_mask=prefix | bit, phase=1j)

    def __mul__(self, other: "MajoranaString") -> "MajoranaString":
        if self.L != other.L:
            raise ValueError("mismatched chain lengths")
        # Commute Z^z1 past X^x2: one sign per overlapping site.
        sign = -1.0 if (self.z_mask & other.x_mask).bit_count() % 2 else 1.0
        return MajoranaString(
            self.L,
            x_mask=self.x_mask ^ other.x_mask,
            z_mask=self.z_mask ^ other.z_mask,
            phase=self.phase * other.phase * sign,
        )

    def to_matrix(self) -> np.ndarray:
        """Dense matrix in the computational basis (small L only)."""
        dim = 1 << self.L
        cols = np.arange(dim)
        rows = cols ^ self.x_mask
        signs = 1.0 - 2.0 * (np.bitwise_count(cols & self.z_mask) % 2)
        mat = np.zeros((dim, dim), dtype=complex)
        mat[rows, cols] = self.phase * signs
        return mat


@dataclass
class KitaevRealization:
    """One disorder realization: couplings t (length 2L-1), interaction g,
    disorder parameter delta, and the seed that produced t."""

    L: int
    g: float
    delta: float
    t: np.ndarray
    seed: int

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        if self.t.shape != (2 * self.L - 1,):
            raise ValueError(f"need {2 * self.L - 1} couplings, got {self.t.shape}")
        hi_odd = math.exp(-self.delta / 2) + 1e-12
        hi_even = math.exp(self.delta / 2) + 1e-12
        odd, even = self.t[0::2], self.t[1::2]
        if odd.min(initial=0.0) < 0 or even.min(initial=0.0) < 0:
            raise ValueError("negative coupling")
        if odd.max(initial=0.0) > hi_odd or even.max(initial=0.0) > hi_even:
            raise ValueError("coupling outside its disorder interval")


def sample_disorder(L: int, delta: float, seed: int) -> KitaevRealization:
    """Draw a realization at interaction g = 0 (set .g afterwards if needed)."""
    return sample_realization(L, 0.0, delta, seed)


def sample_realization(L: int, g: float, delta: float, seed: int) -> KitaevRealization:
    if L < 2:
        raise ValueError("need at least 2 sites")
    rng = np.random.default_rng(seed)
    t = rng.uniform(0.0, 1.0, size=2 * L - 1)
    t[0::2] *= math.exp(-delta / 2)
    t[1::2] *= math.exp(delta / 2)
    return KitaevRealization(L=L, g=g, delta=delta, t=t, seed=seed)


def hamiltonian_terms(realization: KitaevRealization) -> list[tuple[int, int, float]]:
    """Pauli decomposition of H as (x_mask, z_mask, real coefficient) rows."""
    L = realization.L
    acc: dict[tuple[int, int], complex] = {}

    def add(coeff: complex, string: MajoranaString):
        key = (string.x_mask, string.z_mask)
        acc[key] = acc.get(key, 0j) + coeff * string.phase

    for j in range(2 * L - 1):
        s = MajoranaString.majorana(L, j) * MajoranaString.majorana(L, j + 1)
        add(-1j * realization.t[j], s)
    if realization.g != 0.0:
        for j in range(2 * L - 3):
            s = MajoranaString.identity(L)
            for k in range(j, j + 4):
                s = s * MajoranaString.majorana(L, k)
            add(realization.g, s)

    terms = []
    for (x, z), c in acc.items():
        if abs(c.imag) > 1e-12:
            raise AssertionError("non-Hermitian term survived the Majorana algebra")
        if c.real != 0.0:
            terms.append((x, z, float(c.real)))
    return terms


def build_hamiltonian(realization: KitaevRealization) -> np.ndarray:
    """Dense real-symmetric Hamiltonian in the computational basis."""
    L = realization.L
    if L > MAX_DENSE_SITES:
        raise ValueError(f"L={L} exceeds dense-diagonalization limit {MAX_DENSE_SITES}")
    dim = 1 << L
    H = np.zeros((dim, dim))
    cols = np.arange(dim)
    for x, z, c in hamiltonian_terms(realization):
        signs = 1.0 - 2.0 * (np.bitwise_count(cols & z) % 2)
        H[cols ^ x, cols] += c * signs
    return H


def parity_vector(L: int) -> np.ndarray:
    """Diagonal of the fermion parity operator P = prod_j Z_j: +1 on basis
    states with an even number of occupied sites."""
    counts = np.bitwise_count(np.arange(1 << L)).astype(np.int64)
    return 1 - 2 * (counts % 2)


def sector_indices(L: int, parity: str) -> np.ndarray:
    want = 1 if parity == "even" else -1 if parity == "odd" else None
    if want is None:
        raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")
    return np.nonzero(parity_vector(L) == want)[0]


def sector_hamiltonian(realization: KitaevRealization, parity: str) -> tuple[np.ndarray, np.ndarray]:
    """Hamiltonian block of one parity sector, built without materializing
    the full matrix. Returns (block, basis indices)."""
    L = realization.L
    if L > MAX_DENSE_SITES:
        raise ValueError(f"L={L} exceeds dense-diagonalization limit {MAX_DENSE_SITES}")
    idx = sector_indices(L, parity)
    pos = np.full(1 << L, -1, dtype=np.int64)
    pos[idx] = np.arange(idx.size)
    H = np.zeros((idx.size, idx.size))
    for x, z, c in hamiltonian_terms(realization):
        rows = pos[idx ^ x]
        if (rows < 0).any():
            raise AssertionError("Hamiltonian term leaves the parity sector")
        signs = 1.0 - 2.0 * (np.bitwise_count(idx & z) % 2)
        H[rows, np.arange(idx.size)] += c * signs
    return H, idx


@dataclass
class SectorEigenpair:
    """Eigenpair of one parity sector, embedded back in the full basis."""

    energy: float
    state: DenseState
    parity: str
    tie_break: bool = False


def _sector_eigenpair(Hs: np.ndarray, which: str) -> tuple[float, np.ndarray, bool]:
    """Energy, sector eigenvector and tie flag for 'ground' or
    'closest-to-zero' of a dense symmetric block."""
    n = Hs.shape[0]
    w = np.linalg.eigvalsh(Hs)
    if which == "ground":
        k = 0
        tie = n > 1 and abs(w[1] - w[0]) < TIE_TOL
    elif which == "closest-to-zero":
        absw = np.abs(w)
        k = int(np.argmin(absw))  # first minimal index on exact ties
        rest = np.delete(absw, k)
        tie = rest.size > 0 and abs(rest.min() - absw[k]) < TIE_TOL
    else:
        raise ValueError(f"which must be 'ground' or 'closest-to-zero', got {which!r}")
    lam = float(w[k])

    if n <= _FULL_EIGH_MAX_DIM:
        vec = np.linalg.eigh(Hs)[1][:, k]
    else:
        vec = _inverse_iteration(Hs, lam, k)
    return lam, vec, tie


def _inverse_iteration(Hs: np.ndarray, lam: float, k: int) -> np.ndarray:
    """Eigenvector for a known eigenvalue via LU-based inverse iteration,
    with a LAPACK subset solve as fallback for tight clusters."""
    n = Hs.shape[0]
    scale = max(abs(lam), np.max(np.abs(np.diag(Hs))), 1.0)
    lu, piv = sla.lu_factor(Hs - lam * np.eye(n))
    rng = np.random.default_rng(0)
    x = rng.standard_normal(n)
    x /= np.linalg.norm(x)
    for _ in range(3):
        x = sla.lu_solve((lu, piv), x)
        x /= np.linalg.norm(x)
    if np.linalg.norm(Hs @ x - lam * x) > 1e-8 * scale:
        x = sla.eigh(Hs, subset_by_index=[k, k])[1][:, 0]
    return x


def parity_sector_eigensystem(H: np.ndarray, parity: str, which: str) -> SectorEigenpair:
    """Requested eigenpair of one parity sector of a full Hamiltonian.

    On a degenerate closest-to-zero pair the lower-index eigenvalue is
    taken and the result is flagged ``tie_break``.
    """
    dim = H.shape[0]
    L = dim.bit_length() - 1
    if 1 << L != dim:
        raise ValueError("Hamiltonian dimension is not a power of 2")
    idx = sector_indices(L, parity)
    Hs = H[np.ix_(idx, idx)]
    lam, vec, tie = _sector_eigenpair(Hs, which)
    full = np.zeros(dim, dtype=np.complex128)
    full[idx] = vec
    return SectorEigenpair(energy=lam, state=DenseState(full), parity=parity, tie_break=tie)


def sector_eigenpair_direct(
    realization: KitaevRealization, parity: str, which: str
) -> SectorEigenpair:
    """Like :func:`parity_sector_eigensystem` but builds only the sector
    block (memory-light path used by ensembles)."""
    Hs, idx = sector_hamiltonian(realization, parity)
    lam, vec, tie = _sector_eigenpair(Hs, which)
    full = np.zeros(1 << realization.L, dtype=np.complex128)
    full[idx] = vec
    return SectorEigenpair(energy=lam, state=DenseState(full), parity=parity, tie_break=tie)


def global_ground_state(realization: KitaevRealization) -> SectorEigenpair:
    """Lower-energy of the two parity-sector ground states."""
    even = sector_eigenpair_direct(realization, "even", "ground")
    odd = sector_eigenpair_direct(realization, "odd", "ground")
    return even if even.energy <= odd.energy else odd


def duality_map(realization: KitaevRealization) -> KitaevRealization:
    """Coupling sequence of the Majorana-shifted chain (g_j -> g_{j+1}).

    The map sends delta to -delta; on an open chain it is exact only up to
    boundary terms: the first coupling drops out and the new final coupling
    is set to zero.
    """
    t = np.concatenate([realization.t[1:], [0.0]])
    return KitaevRealization(
        L=realization.L,
        g=realization.g,
        delta=-realization.delta,
        t=t,
        seed=realization.seed,
    )


# ---------------------------------------------------------------------------
# Realization file: JSON {L, g, delta, seed, t: [...]}.

def write_realization_json(
    realization: KitaevRealization, stream: TextIO, provenance: dict | None = None
) -> None:
    doc = {
        "L": realization.L,
        "g": realization.g,
        "delta": realization.delta,
        "seed": realization.seed,
        "t": [float(v) for v in realization.t],
    }
    if provenance is not None:
        doc["_provenance"] = provenance
    json.dump(doc, stream, indent=2)
    stream.write("\n")


def read_realization_json(stream: TextIO) -> tuple[KitaevRealization, dict | None]:
    doc = json.load(stream)
    r = KitaevRealization(
        L=int(doc["L"]),
        g=float(doc["g"]),
        delta=float(doc["delta"]),
        t=np.asarray(doc["t"], dtype=float),
        seed=int(doc["seed"]),
    )
    return r, doc.get("_provenance")
