"""Characteristic length scales extracted from per-scale information.

All extractors act on a :class:`~infolattice.lattice.ScaleProfile` (or the
lattice itself for the critical-amplitude fit) and return plain floats,
``None`` marking an undefined quantity:

* ``expected_correlation_length`` (xi): information-weighted mean scale over
  the lower half of the profile.
* ``correlation_decay_length`` (lambda): -1/slope of a log-linear fit of the
  profile over scales [L//4, ceil(L/2)]. Positive for decaying profiles,
  negative for ergodic states whose profile grows toward half system size;
  for fully ergodic states the expected growth is a factor of 4 per scale,
  i.e. slope ln(4) and lambda = -1/ln(4) ~ -0.7213.
* ``large_scale_information`` (gamma): total bits at scales >= L//2. Counts
  topological edge bits and cat-state correlations.
* ``expected_edge_correlation_length`` (tau): distance of the large-scale
  information centroid from the lattice apex; 0 when all of gamma sits at
  the largest scale.
* ``critical_alpha_fit`` (alpha): amplitude of the scale-invariant profile
  i(ell) = alpha / ell^2, averaged over a central triangle of the lattice
  to suppress boundary effects.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import NamedTuple, TextIO

import numpy as np

from .lattice import InformationLattice, ScaleProfile

#: Profile entries at or below this many bits are excluded from log fits.
FIT_FLOOR = 1e-14

#: Denominator threshold below which xi is undefined.
XI_EPS = 1e-12

#: Gamma threshold below which tau is undefined (no edge correlations).
TAU_GAMMA_EPS = 1e-6


@dataclass
class LengthSummary:
    """Record of the extracted length scales; None marks undefined values."""

    xi: float | None
    lam: float | None
    gamma: float
    tau: float | None
    alpha: float | None = None
    alpha_stderr: float | None = None
    fit_points: int = 0


class DecayFit(NamedTuple):
    """Diagnostics of the log-linear profile fit behind lambda."""

    slope: float
    intercept: float
    n_points: int


class AlphaFit(NamedTuple):
    alpha: float
    stderr: float | None
    n_points: int


def _clipped(totals: np.ndarray) -> np.ndarray:
    return np.clip(totals, 0.0, None)


def expected_correlation_length(profile: ScaleProfile) -> float | None:
    """Information-weighted mean scale over ell = 0 .. L//2."""
    half = profile.L // 2
    I = _clipped(profile.totals[: half + 1])
    denom = I.sum()
    if denom <= XI_EPS:
        return None
    ells = np.arange(half + 1)
    return float((ells * I).sum() / denom)


def decay_fit(profile: ScaleProfile, noise_per_window: float = 0.0) -> DecayFit | None:
    """Ordinary least squares of ln(I) vs ell over [L//4, ceil(L/2)].

    Entries at or below FIT_FLOOR are excluded; fewer than 3 usable points
    yields None. ``noise_per_window`` raises the floor at scale ell to
    (L - ell) times it, which measured profiles need: clamped per-window
    noise gives the totals a positive dust floor proportional to the
    number of windows, and fitting into that floor returns a spurious
    decay length. Exact synthetic profiles keep the default 0.
    """
    L = profile.L
    lo, hi = L // 4, -(-L // 2)
    ells, logs = [], []
    for ell in range(lo, hi + 1):
        floor = max(FIT_FLOOR, (L - ell) * noise_per_window)
        v = profile.totals[ell]
        if v > floor:
            ells.append(ell)
            logs.append(math.log(v))
    if len(ells) < 3:
        return None
    slope, intercept = np.polyfit(np.asarray(ells, dtype=float), np.asarray(logs), 1)
    return DecayFit(float(slope), float(intercept), len(ells))


def correlation_decay_length(
    profile: ScaleProfile, noise_per_window: float = 0.0
) -> float | None:
    """-1/slope of the decay fit; inf when the profile is flat, None when
    too few scales carry information."""
    fit = decay_fit(profile, noise_per_window)
    if fit is None:
        return None
    if fit.slope == 0.0:
        return math.inf
    return -1.0 / fit.slope


def large_scale_information(profile: ScaleProfile) -> float:
    """Total bits at scales >= L//2, per-term clamped at 0."""
    return float(_clipped(profile.totals[profile.L // 2 :]).sum())


def expected_edge_correlation_length(profile: ScaleProfile) -> float | None:
    """L - 1 minus the large-scale information centroid; None when gamma
    is below TAU_GAMMA_EPS."""
    L = profile.L
    I = _clipped(profile.totals[L // 2 :])
    denom = I.sum()
    if denom < TAU_GAMMA_EPS:
        return None
    ells = np.arange(L // 2, L)
    return float(L - 1 - (ells * I).sum() / denom)


def triangle_window(L: int) -> tuple[int, int]:
    """Central averaging window (first site, width L//4) for the alpha fit.

    Centered on site (L-1)//2; when exact centering is impossible the window
    shifts left by one (deterministic tie-break).
    """
    width = L // 4
    if width < 1:
        raise ValueError(f"L={L} too small for a central triangle")
    start = (L - 1) // 2 - width // 2
    return start, width


def triangle_scale_average(lattice: InformationLattice, ell: int) -> float:
    """Mean local information at scale ell over windows inside the central
    triangle."""
    start, width = triangle_window(lattice.L)
    if ell > width - 1:
        raise ValueError(f"scale {ell} exceeds triangle apex {width - 1}")
    vals = [lattice[(ell, m)] for m in range(start, start + width - ell)]
    if not vals:
        raise ValueError(f"empty averaging set at scale {ell}")
    return float(np.mean(vals))


def critical_alpha_fit(
    lattice: InformationLattice, ell_min: int, ell_max: int
) -> AlphaFit:
    """Least-squares fit of triangle-averaged i(ell) * ell^2 to a constant.

    Scales with non-positive averages are excluded. Returns the amplitude,
    its standard error (None for a single point) and the point count.
    """
    if ell_min < 2:
        raise ValueError("ell_min must be >= 2")
    width = lattice.L // 4
    if ell_max > width - 1:
        raise ValueError(f"ell_max must be <= {width - 1} for L={lattice.L}")
    if ell_max < ell_min:
        raise ValueError("empty fit range")
    ys = []
    for ell in range(ell_min, ell_max + 1):
        avg = triangle_scale_average(lattice, ell)
        if avg > 0.0:
            ys.append(avg * ell * ell)
    if not ys:
        raise ValueError("no positive averages in fit range")
    arr = np.asarray(ys)
    alpha = float(arr.mean())
    stderr = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else None
    return AlphaFit(alpha, stderr, int(arr.size))


def summarize(
    profile: ScaleProfile,
    lattice: InformationLattice | None = None,
    alpha_range: tuple[int, int] | None = None,
    noise_per_window: float = 0.0,
) -> LengthSummary:
    """Assemble the full length summary; alpha only when a lattice and fit
    range are supplied. ``noise_per_window`` is forwarded to the decay fit
    (backends report their own per-window noise scale)."""
    alpha = stderr = None
    if lattice is not None and alpha_range is not None:
        fit = critical_alpha_fit(lattice, *alpha_range)
        alpha, stderr = fit.alpha, fit.stderr
    dfit = decay_fit(profile, noise_per_window)
    return LengthSummary(
        xi=expected_correlation_length(profile),
        lam=correlation_decay_length(profile, noise_per_window),
        gamma=large_scale_information(profile),
        tau=expected_edge_correlation_length(profile),
        alpha=alpha,
        alpha_stderr=stderr,
        fit_points=dfit.n_points if dfit is not None else 0,
    )


# ---------------------------------------------------------------------------
# Summary JSON: one object, undefined values encoded as null. lambda may be
# IEEE infinite (flat profile); emitted as JavaScript-style Infinity, which
# read_summary_json parses back.

def summary_to_dict(summary: LengthSummary) -> dict:
    return {
        "xi": summary.xi,
        "lambda": summary.lam,
        "tau": summary.tau,
        "gamma": summary.gamma,
        "alpha": summary.alpha,
        "alpha_stderr": summary.alpha_stderr,
        "fit_points": summary.fit_points,
    }


def summary_from_dict(doc: dict) -> LengthSummary:
    return LengthSummary(
        xi=doc.get("xi"),
        lam=doc.get("lambda"),
        gamma=doc["gamma"],
        tau=doc.get("tau"),
        alpha=doc.get("alpha"),
        alpha_stderr=doc.get("alpha_stderr"),
        fit_points=int(doc.get("fit_points", 0)),
    )


def write_summary_json(
    summary: LengthSummary, stream: TextIO, provenance: dict | None = None
) -> None:
    doc = summary_to_dict(summary)
    if provenance is not None:
        doc["_provenance"] = provenance
    json.dump(doc, stream, indent=2)
    stream.write("\n")


def read_summary_json(stream: TextIO) -> tuple[LengthSummary, dict | None]:
    doc = json.load(stream)
    return summary_from_dict(doc), doc.get("_provenance")
