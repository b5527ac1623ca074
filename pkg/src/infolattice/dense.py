"""Exact entropy backend for full state vectors.

States are stored as flat amplitude arrays over the computational basis with
site 0 as the most significant digit of the basis index, i.e. the amplitude
of |s_0 s_1 ... s_{L-1}> sits at index sum_k s_k * d^(L-1-k). Subsystem
entropies come from exact partial traces; the provider routes each query to
the cheapest exact method (Schmidt values across a single cut for windows
touching an edge, partial trace of the smaller of window/complement in the
bulk, using S(region) = S(complement) for pure states).

Memory guard: full-vector methods accept at most MAX_DENSE_SITES sites.
"""

from __future__ import annotations

import json
import math
import struct
from typing import TextIO

import numpy as np
from scipy.special import xlogy

#: 2^14 amplitudes and 2^13-dim sector matrices keep dense linear algebra
#: within desk-scale memory.
MAX_DENSE_SITES = 14

_LN2 = math.log(2.0)

#: Eigenvalues below this contribute nothing to the entropy.
EIG_FLOOR = 1e-14

#: Eigenvalues may undershoot 0 / overshoot 1 by this much before the
#: density matrix is declared invalid.
EIG_TOL = 1e-10


class InvalidDensityMatrixError(ValueError):
    """Eigenvalue outside [0, 1] beyond numerical tolerance."""


class DenseState:
    """Normalized pure state of L qudits, site 0 most significant."""

    def __init__(self, amplitudes: np.ndarray, d: int = 2):
        amps = np.ascontiguousarray(amplitudes, dtype=np.complex128)
        if amps.ndim != 1:
            raise ValueError("amplitudes must be a flat vector")
        L = round(math.log(amps.size, d))
        if d**L != amps.size:
            raise ValueError(f"length {amps.size} is not a power of d={d}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"state norm {norm} deviates from 1 beyond 1e-10")
        self.amplitudes = amps
        self.L = L
        self.d = d

    def copy(self) -> "DenseState":
        return DenseState(self.amplitudes.copy(), d=self.d)


def product_state(L: int, d: int = 2) -> DenseState:
    """|0...0> on L sites."""
    amps = np.zeros(d**L, dtype=np.complex128)
    amps[0] = 1.0
    return DenseState(amps, d=d)


def ghz_state(L: int, d: int = 2) -> DenseState:
    """(|0...0> + |d-1 ... d-1>)/sqrt(2)."""
    amps = np.zeros(d**L, dtype=np.complex128)
    amps[0] = amps[-1] = 1 / math.sqrt(2)
    return DenseState(amps, d=d)


def haar_random_state(L: int, seed: int, d: int = 2) -> DenseState:
    """Haar-random pure state: normalized iid complex Gaussian amplitudes.

    Deterministic for fixed seed (numpy PCG64 stream).
    """
    if L > MAX_DENSE_SITES:
        raise ValueError(f"L={L} exceeds dense-state limit {MAX_DENSE_SITES}")
    rng = np.random.default_rng(seed)
    amps = rng.standard_normal(d**L) + 1j * rng.standard_normal(d**L)
    return DenseState(amps / np.linalg.norm(amps), d=d)


def reduced_density_matrix(state: DenseState, ell: int, m: int) -> np.ndarray:
    """Exact partial trace onto the window [m, m + ell]."""
    L, d = state.L, state.d
    if ell < 0 or m < 0 or m + ell > L - 1:
        raise ValueError(f"window (ell={ell}, m={m}) out of range for L={L}")
    dl = d**m
    dw = d ** (ell + 1)
    t = state.amplitudes.reshape(dl, dw, -1)
    return np.einsum("awb,axb->wx", t, t.conj())


def entropy_bits(rho: np.ndarray) -> float:
    """Von Neumann entropy of a density matrix, in bits.

    Eigenvalues within EIG_TOL of [0, 1] are clamped in; anything further
    out raises :class:`InvalidDensityMatrixError`.
    """
    rho = np.asarray(rho)
    herm_dev = np.max(np.abs(rho - rho.conj().T))
    if herm_dev > 1e-12:
        raise InvalidDensityMatrixError(f"non-Hermitian input (deviation {herm_dev:.3e})")
    w = np.linalg.eigvalsh(rho)
    if w.min() < -EIG_TOL or w.max() > 1 + EIG_TOL:
        raise InvalidDensityMatrixError(
            f"eigenvalues outside [0, 1]: min {w.min():.3e}, max {w.max():.3e}"
        )
    return _entropy_from_probs(np.clip(w, 0.0, 1.0))


def _entropy_from_probs(p: np.ndarray) -> float:
    p = p[p > EIG_FLOOR]
    return float(-xlogy(p, p).sum() / _LN2)


class DenseEntropyProvider:
    """EntropyProvider answering every contiguous window exactly.

    Windows touching an edge use singular values across the single cut;
    bulk windows trace onto whichever of window/complement is smaller
    (identical entropies for the pure global state).
    """

    def __init__(self, state: DenseState):
        if state.L > MAX_DENSE_SITES:
            raise ValueError(f"L={state.L} exceeds dense-provider limit {MAX_DENSE_SITES}")
        self.state = state
        self.L = state.L
        self.d = state.d

    def subsystem_entropy(self, ell: int, m: int) -> float:
        L, d = self.L, self.d
        if ell < 0 or m < 0 or m + ell > L - 1:
            raise ValueError(f"window (ell={ell}, m={m}) out of range for L={L}")
        if ell == L - 1:
            return 0.0
        amps = self.state.amplitudes
        dw = d ** (ell + 1)
        if m == 0 or m + ell == L - 1:
            mat = amps.reshape(dw, -1) if m == 0 else amps.reshape(-1, dw)
            s = np.linalg.svd(mat, compute_uv=False)
            return _entropy_from_probs(np.clip(s, 0.0, 1.0) ** 2)
        t = amps.reshape(d**m, dw, -1)
        if ell + 1 <= L - (ell + 1):
            rho = np.einsum("awb,axb->wx", t, t.conj())
        else:
            dl, dr = t.shape[0], t.shape[2]
            rho = np.einsum("awb,cwd->abcd", t, t.conj()).reshape(dl * dr, dl * dr)
        return entropy_bits(rho)


def dense_entropy_provider(state: DenseState) -> DenseEntropyProvider:
    return DenseEntropyProvider(state)


# ---------------------------------------------------------------------------
# State files. Binary layout: u32 L, u32 d, then d^L little-endian
# (float64 re, float64 im) pairs. JSON alternative mirrors the same fields.

def write_state_binary(state: DenseState, path: str) -> None:
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", state.L, state.d))
        fh.write(state.amplitudes.astype("<c16").tobytes())


def read_state_binary(path: str) -> DenseState:
    with open(path, "rb") as fh:
        header = fh.read(8)
        if len(header) != 8:
            raise ValueError("truncated state file header")
        L, d = struct.unpack("<II", header)
        payload = fh.read()
    expected = d**L * 16
    if len(payload) != expected:
        raise ValueError(f"state payload has {len(payload)} bytes, expected {expected}")
    amps = np.frombuffer(payload, dtype="<c16").astype(np.complex128)
    return DenseState(amps, d=d)


def write_state_json(state: DenseState, stream: TextIO, provenance: dict | None = None) -> None:
    doc = {
        "L": state.L,
        "d": state.d,
        "amplitudes": [[float(a.real), float(a.imag)] for a in state.amplitudes],
    }
    if provenance is not None:
        doc["_provenance"] = provenance
    json.dump(doc, stream)
    stream.write("\n")


def read_state_json(stream: TextIO) -> tuple[DenseState, dict | None]:
    doc = json.load(stream)
    amps = np.array([complex(re, im) for re, im in doc["amplitudes"]], dtype=np.complex128)
    state = DenseState(amps, d=int(doc["d"]))
    if state.L != int(doc["L"]):
        raise ValueError("JSON state length inconsistent with declared L")
    return state, doc.get("_provenance")
