"""Multi-resolution averaging and turbulence-style defect diagnostics.

The averaging pipeline: solutions from the M embedded grids are projected to
a common fine grid (CWENO7, dimension by dimension) and averaged with weight
1/M. Nonlinear auxiliaries (momentum flux tensor, pressure, kinetic and
internal energy densities) are evaluated on each level's own grid *before*
projection, which preserves the positivity structure of the defects at
coincident nodes. The defect fields compare the average of the nonlinear
terms with the nonlinear terms of the averages; their pointwise ratio is
bounded by the adiabatic constants whenever both contributions have a sign.

Statistics over the random parameter use the CWENO7 quadrature of the cweno
module at every grid node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import gas
from .cweno import CwenoConfig, batch_moments, refine_2d
from .errors import EmptyWindow, MissingLevel, NonPhysicalState, ShapeError
from .gas import GasParams
from .mesh import GridField, MeshHierarchy, l1_norm

__all__ = [
    "CesaroField",
    "DefectFields",
    "WindowHistogram",
    "AUX_COMPONENTS",
    "cesaro_average",
    "xi_statistics",
    "defect_fields",
    "defect_residuals",
    "window_histogram",
    "histogram_stats",
    "window_node_index",
]

# Linear components carried through projection plus nonlinear auxiliaries
# evaluated per level: the three distinct entries of m (x) m / rho, the
# pressure, |m|^2/rho, and rho e (= c_V p for the ideal gas).
BASE_COMPONENTS = ("rho", "m_x", "m_y", "E", "S")
AUX_COMPONENTS = ("T_xx", "T_xy", "T_yy", "p", "ke2", "rhoe")


@dataclass
class CesaroField:
    """Level-averaged components on a common fine grid."""

    level: int
    n: int
    components: dict[str, np.ndarray]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.components[name]


def _with_aux(fld: GridField, g: GasParams) -> GridField:
    rho, mx, my, E = fld["rho"], fld["m_x"], fld["m_y"], fld["E"]
    p = gas.pressure(rho, mx, my, E, g)
    out = GridField(level=fld.level, n=fld.n)
    out["rho"], out["m_x"], out["m_y"], out["E"] = rho, mx, my, E
    out["S"] = fld["S"] if "S" in fld else gas.entropy_from_pressure(rho, p, g)
    out["T_xx"] = mx * mx / rho
    out["T_xy"] = mx * my / rho
    out["T_yy"] = my * my / rho
    out["p"] = p
    out["ke2"] = (mx * mx + my * my) / rho
    out["rhoe"] = g.c_v * p
    return out


def cesaro_average(
    fields: dict[int, GridField],
    hierarchy: MeshHierarchy,
    g: GasParams,
    target_level: int | None = None,
    cweno: CwenoConfig = CwenoConfig(),
) -> CesaroField:
    """Average levels 1..max(fields) on the target grid with weight 1/M.

    Auxiliary nonlinear components are evaluated on each level's native grid
    first and then projected, not recomputed from the averaged state.
    """
    if not fields:
        raise MissingLevel("no fields given")
    levels = sorted(fields)
    for m in range(1, levels[-1] + 1):
        if m not in fields:
            raise MissingLevel(f"level {m} missing from the Cesaro stack")
    if target_level is None:
        target_level = levels[-1]

    acc: dict[str, np.ndarray] = {}
    for m in levels:
        prepared = _with_aux(fields[m], g)
        fine = refine_2d(prepared, hierarchy, target_level, cweno)
        for name in BASE_COMPONENTS + AUX_COMPONENTS:
            if name in acc:
                acc[name] = acc[name] + fine[name]
            else:
                acc[name] = fine[name].astype(np.float64, copy=True)
    M = len(levels)
    for name in acc:
        acc[name] = acc[name] / M
    return CesaroField(level=target_level, n=hierarchy.n(target_level), components=acc)


def xi_statistics(
    samples: np.ndarray,
    a: float,
    b: float,
    cweno: CwenoConfig = CwenoConfig(),
    chunk: int = 65536,
) -> tuple[np.ndarray, np.ndarray]:
    """Nodewise mean and standard deviation over the random parameter.

    samples has shape (L, ...) with the first axis the collocation index;
    returns (mean, std) with the trailing shape.
    """
    samples = np.asarray(samples, dtype=np.float64)
    L = samples.shape[0]
    flat = samples.reshape(L, -1).T  # (nodes, L)
    mean = np.empty(flat.shape[0])
    std = np.empty(flat.shape[0])
    for lo in range(0, flat.shape[0], chunk):
        hi = min(lo + chunk, flat.shape[0])
        mean[lo:hi], std[lo:hi] = batch_moments(flat[lo:hi], a, b, cweno)
    shape = samples.shape[1:]
    return mean.reshape(shape), std.reshape(shape)


@dataclass
class DefectFields:
    """Momentum-flux defect tensor, its trace, the energy defect, and ratio."""

    level: int
    n: int
    R_xx: np.ndarray
    R_xy: np.ndarray
    R_yy: np.ndarray
    trR: np.ndarray
    Edef: np.ndarray
    ratio: np.ndarray  # Edef/trR where trR > threshold, else nan
    threshold: float


def defect_fields(ces: CesaroField, g: GasParams, threshold: float = 1e-10) -> DefectFields:
    """Defects of the averaged state against the averaged nonlinear terms."""
    rho = ces["rho"]
    if np.any(rho <= 0.0):
        raise NonPhysicalState("averaged density lost positivity")
    mx, my, S = ces["m_x"], ces["m_y"], ces["S"]
    p_of_avg = gas.pressure_from_entropy(rho, S, g)

    R_xx = ces["T_xx"] + ces["p"] - mx * mx / rho - p_of_avg
    R_xy = ces["T_xy"] - mx * my / rho
    R_yy = ces["T_yy"] + ces["p"] - my * my / rho - p_of_avg
    trR = R_xx + R_yy
    Edef = 0.5 * ces["ke2"] + ces["rhoe"] - 0.5 * (mx * mx + my * my) / rho - g.c_v * p_of_avg
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(trR > threshold, Edef / trR, np.nan)
    return DefectFields(
        level=ces.level, n=ces.n,
        R_xx=R_xx, R_xy=R_xy, R_yy=R_yy, trR=trR, Edef=Edef,
        ratio=ratio, threshold=threshold,
    )


def defect_residuals(
    mean_trR: dict[int, np.ndarray],
    mean_Edef: dict[int, np.ndarray],
    n_fine: int,
) -> list[dict]:
    """L1 distances of each M-stage mean defect from the deepest stage.

    Both inputs map the averaging depth M to xi-mean fields on the common
    finest grid; returns rows {"M", "eps_R", "eps_E"} for every M below the
    reference.
    """
    if sorted(mean_trR) != sorted(mean_Edef):
        raise ShapeError("trace and energy stages disagree")
    m_ref = max(mean_trR)
    rows = []
    for M in sorted(mean_trR):
        for arr in (mean_trR[M], mean_Edef[M]):
            if arr.shape != mean_trR[m_ref].shape:
                raise ShapeError("defect fields must live on the common finest grid")
        rows.append(
            {
                "M": M,
                "eps_R": l1_norm(mean_trR[M] - mean_trR[m_ref], n_fine),
                "eps_E": l1_norm(mean_Edef[M] - mean_Edef[m_ref], n_fine),
            }
        )
    return rows


@dataclass
class WindowHistogram:
    """Histogram of the node values inside one spatial window."""

    window: tuple[float, float, float, float]  # x0, x1, y0, y1
    samples: np.ndarray
    edges: np.ndarray
    counts: np.ndarray
    density: np.ndarray


def window_node_index(n: int, window) -> tuple[np.ndarray, np.ndarray]:
    """Index arrays (rows, cols) of nodes whose centers fall in the window."""
    x0, x1, y0, y1 = window
    coords = np.arange(n) / n
    cols = np.nonzero((coords >= x0) & (coords <= x1))[0]
    rows = np.nonzero((coords >= y0) & (coords <= y1))[0]
    return rows, cols


def _auto_bins(samples: np.ndarray) -> int:
    """max(Sturges, Freedman-Diaconis) bin count for uniform-width bins."""
    n = samples.size
    sturges = int(math.ceil(math.log2(n))) + 1 if n > 1 else 1
    iqr = float(np.subtract(*np.percentile(samples, [75, 25])))
    rng = float(samples.max() - samples.min())
    if iqr <= 0.0 or rng <= 0.0:
        return sturges
    fd = int(math.ceil(rng / (2.0 * iqr * n ** (-1.0 / 3.0))))
    return max(sturges, fd)


def window_histogram(field: np.ndarray, n: int, window) -> WindowHistogram:
    """Gather window node values and bin them with the auto rule."""
    field = np.asarray(field)
    if field.shape != (n, n):
        raise ShapeError(f"field shape {field.shape} does not match n={n}")
    rows, cols = window_node_index(n, window)
    if rows.size == 0 or cols.size == 0:
        raise EmptyWindow(f"window {window} contains no nodes at n={n}")
    samples = field[np.ix_(rows, cols)].ravel()

    lo = float(samples.min())
    hi = float(samples.max())
    if hi == lo:
        # Dirac surrogate: one narrow bin of unit mass
        width = max(abs(lo), 1.0) * 1e-9
        edges = np.array([lo - 0.5 * width, lo + 0.5 * width])
        counts = np.array([samples.size])
        density = np.array([1.0 / width])
        return WindowHistogram(tuple(window), samples, edges, counts, density)

    nbins = _auto_bins(samples)
    counts, edges = np.histogram(samples, bins=nbins, range=(lo, hi))
    widths = np.diff(edges)
    density = counts / (samples.size * widths)
    return WindowHistogram(tuple(window), samples, edges, counts, density)


def histogram_stats(h: WindowHistogram) -> tuple[float, float]:
    """Mean and population standard deviation of the raw window samples."""
    if h.samples.size == 0:
        raise EmptyWindow("histogram has no samples")
    return float(np.mean(h.samples)), float(np.std(h.samples))
