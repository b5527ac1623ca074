"""Matrix-product-state entropy backend.

Subsystem entropies of an MPS come in two kinds. Windows touching a chain
end are single-cut partitions: their entropy is free once the Schmidt
values on the cut bond are known. Bulk windows are double-cut partitions
with several exact evaluation routes whose costs differ wildly:

* ``TransferMatrix``: the Gram matrix of the window tensors (left bond x
  right bond dimensional) shares its nonzero spectrum with the window's
  reduced density matrix. Cheap for low bond dimension, independent of
  window size.
* ``ReducedDensityMatrix``: contract the window into a d^(ell+1) density
  matrix. Cheap for narrow windows, exponential in window size.
* ``ComplementTransferMatrix``: for pure states the window entropy equals
  the complement entropy; the two-piece complement of a bulk window is
  evaluated through the window-traced transfer tensor sandwiched between
  the boundary-bond Gram matrices.

``choose_strategy`` ranks the routes with a floating-point cost model
(constants 1, only the argmin matters) and the provider keeps a small FIFO
cache of partially contracted window tensors, which makes sweeps in order
of increasing window size reuse each window's predecessor.

Internally tensors are kept left-canonical (every site but the last is a
left isometry), so the environment left of any window is the identity and
the right environment, accumulated once per state, carries the Schmidt
weights. Results are gauge-independent; inputs in other gauges are
canonicalized first.
"""

from __future__ import annotations

import json
import math
import struct
from collections import OrderedDict
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, BinaryIO

import numpy as np

from .dense import (
    EIG_TOL,
    MAX_DENSE_SITES,
    DenseState,
    InvalidDensityMatrixError,
    _entropy_from_probs,
)

_MAGIC = b"ILMPS1\x00\x00"


class MatrixProductState:
    """Finite MPS with open boundaries; tensors indexed (left, physical, right).

    ``svals[k]`` holds the Schmidt values on bond k (between sites k-1 and
    k) when known; ``site_canonical[k]`` is 'L' for sites known to be left
    isometries. ``truncated`` marks states that lost weight during
    compression, which can break strong subadditivity downstream.
    """

    def __init__(
        self,
        tensors: Sequence[np.ndarray],
        svals: list[np.ndarray] | None = None,
        site_canonical: list[str | None] | None = None,
        truncated: bool = False,
        validate: bool = True,
    ):
        self.tensors = [np.ascontiguousarray(t, dtype=np.complex128) for t in tensors]
        self.L = len(self.tensors)
        if self.L < 1:
            raise ValueError("empty MPS")
        self.d = self.tensors[0].shape[1]
        self.svals = svals
        self.site_canonical = site_canonical or [None] * self.L
        self.truncated = truncated
        self._right_env: list[np.ndarray] | None = None
        dims = self.bond_dims
        if dims[0] != 1 or dims[-1] != 1:
            raise ValueError("boundary bond dimensions must be 1")
        for k, t in enumerate(self.tensors):
            if t.ndim != 3 or t.shape[1] != self.d:
                raise ValueError(f"site {k} tensor has shape {t.shape}")
            if k and t.shape[0] != self.tensors[k - 1].shape[2]:
                raise ValueError(f"bond mismatch between sites {k - 1} and {k}")
        if self.svals is not None:
            if len(self.svals) != self.L + 1 or any(
                np.asarray(s).size != dims[k] for k, s in enumerate(self.svals)
            ):
                raise ValueError("Schmidt-value vectors inconsistent with bond dimensions")
        if validate:
            nrm = self.norm()
            if abs(nrm - 1.0) > 1e-10:
                raise ValueError(f"MPS norm {nrm} deviates from 1 beyond 1e-10")

    @property
    def bond_dims(self) -> list[int]:
        return [self.tensors[0].shape[0]] + [t.shape[2] for t in self.tensors]

    def norm(self) -> float:
        env = np.ones((1, 1), dtype=np.complex128)
        for t in self.tensors:
            tmp = np.tensordot(env, t, axes=([0], [0]))
            env = np.tensordot(t.conj(), tmp, axes=([0, 1], [0, 1]))
        return float(math.sqrt(abs(env[0, 0].real)))

    @property
    def is_left_canonical(self) -> bool:
        return all(f == "L" for f in self.site_canonical[: self.L - 1])

    def left_canonical(self) -> "MatrixProductState":
        """Gauge-equivalent left-canonical MPS with exact Schmidt spectra.

        A right-to-left LQ pass makes every site a right isometry, after
        which a left-to-right SVD pass yields left isometries and the true
        Schmidt values on every bond.
        """
        tensors = [t.copy() for t in self.tensors]
        for k in range(self.L - 1, 0, -1):
            chi_l, d, chi_r = tensors[k].shape
            mat = tensors[k].reshape(chi_l, d * chi_r)
            q, r = np.linalg.qr(mat.conj().T)
            tensors[k] = q.conj().T.reshape(-1, d, chi_r)
            tensors[k - 1] = np.tensordot(tensors[k - 1], r.conj().T, axes=([2], [0]))
        svals: list[np.ndarray] = [np.array([1.0])]
        for k in range(self.L - 1):
            chi_l, d, chi_r = tensors[k].shape
            mat = tensors[k].reshape(chi_l * d, chi_r)
            u, s, vt = np.linalg.svd(mat, full_matrices=False)
            keep = max(int(np.count_nonzero(s > s[0] * 1e-14)), 1)
            u, s, vt = u[:, :keep], s[:keep], vt[:keep]
            tensors[k] = u.reshape(chi_l, d, -1)
            svals.append(s.copy())
            tensors[k + 1] = np.tensordot(
                s[:, None] * vt, tensors[k + 1], axes=([1], [0])
            )
        svals.append(np.array([1.0]))
        flags: list[str | None] = ["L"] * (self.L - 1) + [None]
        return MatrixProductState(
            tensors, svals=svals, site_canonical=flags, truncated=self.truncated
        )

    def to_dense(self) -> np.ndarray:
        if self.L > MAX_DENSE_SITES:
            raise ValueError(f"L={self.L} exceeds dense limit {MAX_DENSE_SITES}")
        v = np.ones((1, 1), dtype=np.complex128)
        for t in self.tensors:
            v = np.tensordot(v, t, axes=([1], [0]))
            v = v.reshape(-1, t.shape[2])
        return v.reshape(-1)


def mps_from_dense(
    state: DenseState, chi_max: int | None = None, trunc_eps: float = 0.0
) -> MatrixProductState:
    """Sequential SVD factorization of a dense state, left to right.

    At every bond the smallest singular values are discarded while their
    total squared weight stays at or below ``trunc_eps`` (and the kept rank
    at or below ``chi_max``); kept values are renormalized so the MPS stays
    unit norm. With ``trunc_eps=0`` and an unconstraining ``chi_max`` the
    factorization is exact.
    """
    if trunc_eps < 0:
        raise ValueError("trunc_eps must be >= 0")
    L, d = state.L, state.d
    tensors: list[np.ndarray] = []
    svals: list[np.ndarray] = [np.array([1.0])]
    truncated = False
    v = state.amplitudes.reshape(1, -1)
    chi = 1
    for _ in range(L - 1):
        mat = v.reshape(chi * d, -1)
        u, s, vt = np.linalg.svd(mat, full_matrices=False)
        # Numerically-zero singular values carry no weight; dropping them
        # is exact and keeps bond dimensions at the true Schmidt rank.
        keep = int(np.count_nonzero(s > s[0] * 1e-14))
        if trunc_eps > 0:
            sq = s**2
            tail = np.cumsum(sq[::-1])[::-1]  # tail[r] = sum of sq[r:]
            while keep > 1 and tail[keep - 1] <= trunc_eps:
                keep -= 1
        if chi_max is not None:
            keep = min(keep, chi_max)
        keep = max(keep, 1)
        dropped_weight = float((s[keep:] ** 2).sum())
        if dropped_weight > 1e-24:
            truncated = True
        u, s, vt = u[:, :keep], s[:keep], vt[:keep]
        s = s / np.linalg.norm(s)
        tensors.append(u.reshape(chi, d, keep))
        svals.append(s.copy())
        v = s[:, None] * vt
        chi = keep
    tensors.append(v.reshape(chi, d, 1))
    svals.append(np.array([1.0]))
    flags: list[str | None] = ["L"] * (L - 1) + [None]
    return MatrixProductState(
        tensors, svals=svals, site_canonical=flags, truncated=truncated
    )


def right_environments(mps: MatrixProductState) -> list[np.ndarray]:
    """Bond density matrices R[k] from contracting sites k..L-1.

    For a left-canonical unit-norm MPS, R[k] is Hermitian PSD with unit
    trace and its eigenvalues are the squared Schmidt values on bond k.
    """
    if mps._right_env is not None:
        return mps._right_env
    L = mps.L
    env = [None] * (L + 1)
    env[L] = np.ones((1, 1), dtype=np.complex128)
    for k in range(L - 1, -1, -1):
        t = mps.tensors[k]
        tmp = np.tensordot(t, env[k + 1], axes=([2], [0]))
        env[k] = np.tensordot(tmp, t.conj(), axes=([1, 2], [1, 2]))
    mps._right_env = env  # type: ignore[assignment]
    return env  # type: ignore[return-value]


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    w, u = np.linalg.eigh(mat)
    return (u * np.sqrt(np.clip(w, 0.0, None))) @ u.conj().T


def _probs_entropy(p: np.ndarray) -> float:
    if p.min(initial=0.0) < -EIG_TOL:
        raise InvalidDensityMatrixError(f"negative probability {p.min():.3e}")
    return _entropy_from_probs(np.clip(p, 0.0, 1.0))


class EntropyStrategy(Enum):
    """Evaluation routes for one window entropy."""

    SINGLE_CUT = "single-cut"
    TRANSFER_MATRIX = "transfer-matrix"
    REDUCED_DENSITY_MATRIX = "reduced-density-matrix"
    COMPLEMENT_TRANSFER_MATRIX = "complement-transfer-matrix"


#: Preference order on cost ties.
_TIE_RANK = {
    EntropyStrategy.TRANSFER_MATRIX: 0,
    EntropyStrategy.SINGLE_CUT: 1,
    EntropyStrategy.COMPLEMENT_TRANSFER_MATRIX: 2,
    EntropyStrategy.REDUCED_DENSITY_MATRIX: 3,
}


@dataclass(frozen=True)
class StrategyChoice:
    strategy: EntropyStrategy
    predicted_cost: float


class FifoCache:
    """First-in-first-out cache of partially contracted window tensors.

    Keys are (first site, last site) of the covered window; hits do not
    refresh insertion order. Capacity 0 disables caching.
    """

    def __init__(self, capacity: int):
        if capacity < 0:
            raise ValueError("capacity must be >= 0")
        self.capacity = capacity
        self._data: OrderedDict[tuple[int, int], np.ndarray] = OrderedDict()

    def get(self, key: tuple[int, int]) -> np.ndarray | None:
        return self._data.get(key)

    def put(self, key: tuple[int, int], value: np.ndarray) -> None:
        if self.capacity == 0:
            return
        if key not in self._data:
            self._data[key] = value
            while len(self._data) > self.capacity:
                self._data.popitem(last=False)

    def longest_prefix(self, i: int, j: int) -> tuple[int, int] | None:
        """Largest cached window (i, k) with k <= j."""
        best = None
        for (ci, ck) in self._data:
            if ci == i and ck <= j and (best is None or ck > best[1]):
                best = (ci, ck)
        return best


def _window_cost_terms(
    mps: MatrixProductState, i: int, j: int, cache: FifoCache | None
) -> tuple[float, float]:
    """(transfer contraction cost, rdm contraction cost) for window [i, j]."""
    dims = mps.bond_dims
    d = mps.d
    chi_i = dims[i]
    start = i
    if cache is not None:
        hit = cache.longest_prefix(i, j)
        if hit is not None:
            start = hit[1] + 1
    tm = 0.0
    for s in range(start, j + 1):
        tm += float(chi_i) ** 2 * dims[s] * dims[s + 1] * d
    rdm = 0.0
    for s in range(i, j + 1):
        rdm += float(d) ** (s - i + 1) * chi_i * dims[s] * dims[s + 1]
    return tm, rdm


def choose_strategy(
    mps: MatrixProductState,
    ell: int,
    m: int,
    cache_state: FifoCache | None = None,
) -> StrategyChoice:
    """Cost-model argmin over the routes valid for this window.

    Costs count floating-point multiply-adds of the contraction plus cubic
    eigensolve terms, constants 1; cached partial contractions shrink the
    transfer-route estimate. Ties go to the fixed preference order
    TransferMatrix > SingleCut > Complement > RDM.
    """
    L, d = mps.L, mps.d
    i, j = m, m + ell
    if ell < 0 or m < 0 or j > L - 1:
        raise ValueError(f"window (ell={ell}, m={m}) out of range for L={L}")
    dims = mps.bond_dims
    candidates: dict[EntropyStrategy, float] = {}
    if m == 0 or j == L - 1:
        bond = j + 1 if m == 0 else m
        candidates[EntropyStrategy.SINGLE_CUT] = float(dims[bond])
    else:
        tm_contract, rdm_contract = _window_cost_terms(mps, i, j, cache_state)
        tdim = float(dims[i]) * dims[j + 1]
        candidates[EntropyStrategy.TRANSFER_MATRIX] = tm_contract + tdim**3
        candidates[EntropyStrategy.REDUCED_DENSITY_MATRIX] = (
            rdm_contract + float(d) ** (3 * (ell + 1))
        )
        if ell >= L // 2:
            candidates[EntropyStrategy.COMPLEMENT_TRANSFER_MATRIX] = (
                tm_contract + 3.0 * tdim**3
            )
    strategy = min(candidates, key=lambda s: (candidates[s], _TIE_RANK[s]))
    return StrategyChoice(strategy=strategy, predicted_cost=candidates[strategy])


class _Contractor:
    """Window-tensor accumulation shared by all double-cut routes."""

    def __init__(self, mps: MatrixProductState, cache: FifoCache | None = None):
        self.mps = mps
        self.cache = cache
        self.contractions = 0

    def theta(self, i: int, j: int) -> np.ndarray:
        """Window transfer tensor theta[p, q, u, v] = sum over window
        configurations of (window product)[p, u] * conj[q, v]."""
        tensors = self.mps.tensors
        theta = None
        start = i
        if self.cache is not None:
            hit = self.cache.longest_prefix(i, j)
            if hit is not None:
                theta = self.cache.get(hit)
                start = hit[1] + 1
        if theta is None:
            t = tensors[i]
            theta = np.tensordot(t, t.conj(), axes=([1], [1])).transpose(0, 2, 1, 3)
            self.contractions += 1
            start = i + 1
        for s in range(start, j + 1):
            t = tensors[s]
            tmp = np.tensordot(theta, t, axes=([2], [0]))
            theta = np.tensordot(tmp, t.conj(), axes=([2, 3], [0, 1]))
            self.contractions += 1
        if self.cache is not None:
            self.cache.put((i, j), theta)
        return theta

    def window_matrix(self, i: int, j: int, sqrt_r: np.ndarray) -> np.ndarray:
        """N[sigma, (left bond, right weight)] with the right Schmidt
        weights folded in; rho = N N^dagger."""
        tensors = self.mps.tensors
        chi_i = tensors[i].shape[0]
        n = np.eye(chi_i, dtype=np.complex128)[None, :, :]
        for s in range(i, j + 1):
            n = np.tensordot(n, tensors[s], axes=([2], [0]))  # [blk, a, s, w]
            n = n.transpose(0, 2, 1, 3).reshape(n.shape[0] * self.mps.d, chi_i, -1)
            self.contractions += 1
        return np.tensordot(n, sqrt_r, axes=([2], [0]))


def transfer_matrix(
    mps: MatrixProductState, ell: int, m: int, cache: FifoCache | None = None
) -> np.ndarray:
    """Hermitian PSD transfer matrix of a bulk window, unit trace.

    Its dimension is (left bond) x (right bond) and its nonzero spectrum
    equals that of the window's reduced density matrix.
    """
    mps = _ensure_left_canonical(mps)
    i, j = m, m + ell
    _require_bulk(mps, ell, m)
    contractor = _Contractor(mps, cache)
    theta = contractor.theta(i, j)
    r = right_environments(mps)[j + 1]
    c = _psd_sqrt(r)
    tmp = np.tensordot(theta, c, axes=([2], [0]))
    t4 = np.tensordot(tmp, c.conj(), axes=([2], [0]))
    dim = theta.shape[0] * c.shape[1]
    return t4.transpose(0, 2, 1, 3).reshape(dim, dim)


def _require_bulk(mps: MatrixProductState, ell: int, m: int) -> None:
    if not (0 < m and m + ell < mps.L - 1):
        raise ValueError(
            f"(ell={ell}, m={m}) is not a bulk double-cut window for L={mps.L}"
        )


def _ensure_left_canonical(mps: MatrixProductState) -> MatrixProductState:
    return mps if mps.is_left_canonical and mps.svals is not None else mps.left_canonical()


def single_cut_entropy(mps: MatrixProductState, bond: int) -> float:
    """Entropy in bits across bond `bond` (sites [0, bond-1] vs the rest),
    from the stored Schmidt values; canonicalizes first if they are absent."""
    if not 0 <= bond <= mps.L:
        raise ValueError(f"bond {bond} out of range")
    mps = _ensure_left_canonical(mps)
    assert mps.svals is not None
    return _probs_entropy(mps.svals[bond] ** 2)


def double_cut_entropy(
    mps: MatrixProductState,
    ell: int,
    m: int,
    strategy: EntropyStrategy = EntropyStrategy.TRANSFER_MATRIX,
    cache: FifoCache | None = None,
    contractor: _Contractor | None = None,
) -> float:
    """Entropy of the bulk window [m, m + ell] by the requested route."""
    mps = _ensure_left_canonical(mps)
    _require_bulk(mps, ell, m)
    i, j = m, m + ell
    own = contractor or _Contractor(mps, cache)
    r = right_environments(mps)[j + 1]
    if strategy is EntropyStrategy.TRANSFER_MATRIX:
        theta = own.theta(i, j)
        c = _psd_sqrt(r)
        tmp = np.tensordot(theta, c, axes=([2], [0]))
        t4 = np.tensordot(tmp, c.conj(), axes=([2], [0]))
        dim = theta.shape[0] * c.shape[1]
        tmat = t4.transpose(0, 2, 1, 3).reshape(dim, dim)
        return _probs_entropy(np.linalg.eigvalsh(tmat))
    if strategy is EntropyStrategy.REDUCED_DENSITY_MATRIX:
        n = own.window_matrix(i, j, _psd_sqrt(r))
        nf = n.reshape(n.shape[0], -1)
        rho = nf @ nf.conj().T
        return _probs_entropy(np.linalg.eigvalsh(rho))
    if strategy is EntropyStrategy.COMPLEMENT_TRANSFER_MATRIX:
        return _complement_bulk(mps, ell, m, own)
    raise ValueError(f"strategy {strategy} is not a double-cut route")


def _complement_bulk(
    mps: MatrixProductState, ell: int, m: int, contractor: _Contractor
) -> float:
    """Entropy of the two-piece complement of a bulk window: the
    window-traced transfer tensor sandwiched between the boundary-bond
    Gram matrices (identity on the left for a left-canonical MPS)."""
    i, j = m, m + ell
    theta = contractor.theta(i, j)
    chi_i = theta.shape[0]
    dim = chi_i * theta.shape[2]
    theta_m = theta.transpose(0, 2, 1, 3).reshape(dim, dim)
    phi = _psd_sqrt(theta_m)
    r = right_environments(mps)[j + 1]
    k = np.kron(np.eye(chi_i), r.conj())
    b = phi @ k @ phi
    return _probs_entropy(np.linalg.eigvalsh(b))


def complement_entropy(
    mps: MatrixProductState, ell: int, m: int, cache: FifoCache | None = None
) -> float:
    """Window entropy evaluated through its complement (pure states,
    ell >= L // 2). One-piece complements of edge windows reduce to a
    single cut; the whole chain gives zero."""
    mps = _ensure_left_canonical(mps)
    L = mps.L
    if ell < L // 2:
        raise ValueError("complement route is reserved for ell >= L // 2")
    if ell == L - 1:
        return 0.0
    if m == 0:
        return single_cut_entropy(mps, m + ell + 1)
    if m + ell == L - 1:
        return single_cut_entropy(mps, m)
    return _complement_bulk(mps, ell, m, _Contractor(mps, cache))


class MPSEntropyProvider:
    """EntropyProvider with cost-model routing and a FIFO contraction cache.

    Filling a whole lattice in order of increasing window size (the order
    :func:`infolattice.lattice.local_information` uses) lets each window
    extend its cached predecessor by one site. Outputs are identical for
    any cache capacity; only ``contraction_count`` changes. A provider
    instance is stateful and serial; build one per worker.
    """

    def __init__(self, mps: MatrixProductState, cache_capacity: int = 8):
        self.mps = _ensure_left_canonical(mps)
        self.L = self.mps.L
        self.d = self.mps.d
        self.cache = FifoCache(cache_capacity)
        self._contractor = _Contractor(self.mps, self.cache)
        self.strategy_counts: dict[EntropyStrategy, int] = {s: 0 for s in EntropyStrategy}
        right_environments(self.mps)

    @property
    def contraction_count(self) -> int:
        return self._contractor.contractions

    @property
    def truncated(self) -> bool:
        return self.mps.truncated

    def subsystem_entropy(self, ell: int, m: int) -> float:
        L = self.L
        if ell < 0 or m < 0 or m + ell > L - 1:
            raise ValueError(f"window (ell={ell}, m={m}) out of range for L={L}")
        if ell == L - 1:
            return 0.0
        choice = choose_strategy(self.mps, ell, m, self.cache)
        self.strategy_counts[choice.strategy] += 1
        if choice.strategy is EntropyStrategy.SINGLE_CUT:
            bond = m + ell + 1 if m == 0 else m
            return single_cut_entropy(self.mps, bond)
        if choice.strategy is EntropyStrategy.COMPLEMENT_TRANSFER_MATRIX:
            return _complement_bulk(self.mps, ell, m, self._contractor)
        return double_cut_entropy(
            self.mps, ell, m, choice.strategy, contractor=self._contractor
        )


def mps_entropy_provider(
    mps: MatrixProductState, cache_capacity: int = 8
) -> MPSEntropyProvider:
    return MPSEntropyProvider(mps, cache_capacity)


# ---------------------------------------------------------------------------
# MPS file: magic, u64 header length, JSON header, then per-site tensor
# payloads (row-major (left, physical, right), little-endian complex128)
# and per-bond Schmidt values (little-endian float64) when present.

def write_mps(mps: MatrixProductState, fh: BinaryIO, provenance: dict | None = None) -> None:
    header = {
        "L": mps.L,
        "d": mps.d,
        "bond_dims": mps.bond_dims,
        "site_canonical": mps.site_canonical,
        "truncated": mps.truncated,
        "has_svals": mps.svals is not None,
    }
    if provenance is not None:
        header["_provenance"] = provenance
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    fh.write(_MAGIC)
    fh.write(struct.pack("<Q", len(blob)))
    fh.write(blob)
    for t in mps.tensors:
        fh.write(np.ascontiguousarray(t, dtype="<c16").tobytes())
    if mps.svals is not None:
        for s in mps.svals:
            fh.write(np.ascontiguousarray(s, dtype="<f8").tobytes())


def read_mps(fh: BinaryIO) -> tuple[MatrixProductState, dict | None]:
    if fh.read(len(_MAGIC)) != _MAGIC:
        raise ValueError("not an MPS file (bad magic)")
    (hlen,) = struct.unpack("<Q", fh.read(8))
    header = json.loads(fh.read(hlen).decode())
    L, d = int(header["L"]), int(header["d"])
    dims = [int(x) for x in header["bond_dims"]]
    tensors = []
    for k in range(L):
        count = dims[k] * d * dims[k + 1]
        raw = fh.read(count * 16)
        if len(raw) != count * 16:
            raise ValueError("truncated tensor payload")
        tensors.append(np.frombuffer(raw, dtype="<c16").reshape(dims[k], d, dims[k + 1]))
    svals = None
    if header.get("has_svals"):
        svals = []
        for k in range(L + 1):
            n = dims[k]
            raw = fh.read(n * 8)
            if len(raw) != n * 8:
                raise ValueError("truncated Schmidt-value payload")
            svals.append(np.frombuffer(raw, dtype="<f8").copy())
    mps = MatrixProductState(
        tensors,
        svals=svals,
        site_canonical=list(header.get("site_canonical") or [None] * L),
        truncated=bool(header.get("truncated", False)),
    )
    return mps, header.get("_provenance")
