"""Collocation nodes, randomized shear-layer initial data, and campaign runs.

The interface perturbation coefficients are drawn once from a pinned,
portable generator (SplitMix64) and stored in a plain-text file that is
checked into the repository; every campaign loads that file, so reruns and
reimplementations reproduce the same ensemble bit for bit.

SplitMix64 stream (state s, all arithmetic mod 2^64):
    s += 0x9E3779B97F4B7C15
    z = s; z ^= z >> 30; z *= 0xBF58476D1CE4E5B9
    z ^= z >> 27; z *= 0x94D049BB133111EB; z ^= z >> 31
    uniform double in [0,1) = (z >> 11) * 2^-53
Draw order: the 20 amplitudes (row 1 then row 2, k = 1..10), then the 20
phases in the same order; amplitude rows are renormalized to unit sum and
phases mapped to [-pi, pi].
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import gas
from .errors import Blowup, ConfigError, InterfaceCross, KheError, PartialCampaign
from .gas import GasParams
from .mesh import GridField, MeshHierarchy, build_hierarchy, read_field, write_field
from .solver import SolverConfig, advance

__all__ = [
    "PerturbationCoeffs",
    "KhConfig",
    "CollocationGrid",
    "CampaignSpec",
    "EnsembleManifest",
    "generate_coeffs",
    "save_coeffs",
    "load_coeffs",
    "interface_offset",
    "kh_initial_field",
    "run_campaign",
    "canonical_json",
    "config_hash",
]

log = logging.getLogger(__name__)

_MASK = (1 << 64) - 1


class SplitMix64:
    """Portable 64-bit generator used only for the coefficient file."""

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4B7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53


@dataclass(frozen=True)
class PerturbationCoeffs:
    """Amplitudes a[i][k] (rows sum to one) and phases b[i][k] in [-pi, pi]."""

    a: np.ndarray  # (2, 10)
    b: np.ndarray  # (2, 10)

    def __post_init__(self):
        if self.a.shape != (2, 10) or self.b.shape != (2, 10):
            raise ConfigError("coefficients must be two rows of ten values")

    def sha256(self) -> str:
        return hashlib.sha256(_coeffs_text(self).encode()).hexdigest()


def generate_coeffs(seed: int) -> PerturbationCoeffs:
    """Draw and normalize the 2x10 amplitude/phase tables from one seed."""
    rng = SplitMix64(seed)
    a = np.array([[rng.uniform() for _ in range(10)] for _ in range(2)])
    b = np.array([[-math.pi + 2.0 * math.pi * rng.uniform() for _ in range(10)] for _ in range(2)])
    a /= a.sum(axis=1, keepdims=True)
    return PerturbationCoeffs(a=a, b=b)


def _coeffs_text(c: PerturbationCoeffs) -> str:
    lines = []
    for row in (c.a[0], c.b[0], c.a[1], c.b[1]):
        lines.append(" ".join(f"{v:.17g}" for v in row))
    return "\n".join(lines) + "\n"


def save_coeffs(path, c: PerturbationCoeffs, force: bool = False):
    """Write the 4-line text format (a1, b1, a2, b2); refuses to overwrite."""
    if os.path.exists(path) and not force:
        raise ConfigError(f"{path} exists; pass force=True to overwrite")
    with open(path, "w") as fh:
        fh.write(_coeffs_text(c))


def load_coeffs(path) -> PerturbationCoeffs:
    with open(path) as fh:
        rows = [np.array([float(v) for v in line.split()]) for line in fh if line.strip()]
    if len(rows) != 4 or any(r.size != 10 for r in rows):
        raise ConfigError(f"{path}: expected 4 lines of 10 values")
    return PerturbationCoeffs(a=np.vstack([rows[0], rows[2]]), b=np.vstack([rows[1], rows[3]]))


def default_coeffs_path() -> str:
    return os.path.join(os.path.dirname(__file__), "data", "kh_coeffs.txt")


@dataclass(frozen=True)
class KhConfig:
    """Shear-layer initial data parameters (primitive inner/outer states)."""

    tau: float = 1.1
    j1: float = 0.25
    j2: float = 0.75
    amplitude: float = 0.05
    inner: tuple[float, float, float, float] = (2.0, -0.5, 0.0, 2.5)
    outer: tuple[float, float, float, float] = (1.0, 0.5, 0.0, 2.5)

    def validate(self, xi_bound: float = 1.0):
        if self.j1 >= self.j2:
            raise ConfigError("need j1 < j2")
        if not 0.0 <= self.tau:
            raise ConfigError("tau must be nonnegative")
        limit = 0.5 * (self.j2 - self.j1)
        if self.amplitude * (1.0 + self.tau * math.tanh(xi_bound)) >= limit:
            raise InterfaceCross(
                f"amplitude {self.amplitude} with tau {self.tau} lets the interfaces cross"
            )


@dataclass(frozen=True)
class CollocationGrid:
    """Equispaced nodes xi_l = a + (l-1)(b-a)/(L-1) on [a, b]."""

    L: int = 101
    a: float = -1.0
    b: float = 1.0

    def __post_init__(self):
        if self.L < 1:
            raise ConfigError("L must be >= 1")
        if not self.b > self.a:
            raise ConfigError("need b > a")

    @property
    def nodes(self) -> np.ndarray:
        if self.L == 1:
            return np.array([0.5 * (self.a + self.b)])
        return self.a + np.arange(self.L) * (self.b - self.a) / (self.L - 1)

    @property
    def xi_bound(self) -> float:
        return max(abs(self.a), abs(self.b))


def interface_offset(x, xi: float, i: int, coeffs: PerturbationCoeffs, cfg: KhConfig):
    """Unscaled interface wiggle Y_i(x; xi) for i in {1, 2}."""
    if i not in (1, 2):
        raise ConfigError("interface index must be 1 or 2")
    x = np.asarray(x, dtype=np.float64)
    k = np.arange(1, 11)
    terms = coeffs.a[i - 1] * np.cos(coeffs.b[i - 1] + 10.0 * k * math.pi * x[..., None])
    return (1.0 + cfg.tau * math.tanh(xi)) * terms.sum(axis=-1)


def kh_initial_field(
    hierarchy: MeshHierarchy,
    level: int,
    xi: float,
    coeffs: PerturbationCoeffs,
    cfg: KhConfig,
    g: GasParams,
) -> GridField:
    """Nodewise two-state initial data with perturbed interfaces."""
    cfg.validate(abs(xi))
    n = hierarchy.n(level)
    x = hierarchy.nodes(level)
    i1 = cfg.j1 + cfg.amplitude * interface_offset(x, xi, 1, coeffs, cfg)
    i2 = cfg.j2 + cfg.amplitude * interface_offset(x, xi, 2, coeffs, cfg)
    y = x[:, None]  # rows are y, columns are x
    inner = (i1[None, :] < y) & (y < i2[None, :])

    fld = GridField(level=level, n=n)
    prim = [np.where(inner, a, b) for a, b in zip(cfg.inner, cfg.outer)]
    rho, mx, my, E = gas.prim_to_cons(*prim, g)
    fld["rho"], fld["m_x"], fld["m_y"], fld["E"] = rho, mx, my, E
    fld["S"] = gas.entropy(rho, mx, my, E, g)
    return fld


@dataclass(frozen=True)
class CampaignSpec:
    """Everything that determines a campaign's outputs (hashable)."""

    m0: int = 2
    M: int = 3
    collocation: CollocationGrid = CollocationGrid()
    kh: KhConfig = KhConfig()
    gamma: float = 1.4
    t_end: float = 2.0
    solver: SolverConfig = SolverConfig()
    cweno_mode: str = "nonlinear"

    def hierarchy(self) -> MeshHierarchy:
        return build_hierarchy(self.m0, self.M)

    def gas_params(self) -> GasParams:
        return GasParams(gamma=self.gamma)

    def to_dict(self) -> dict:
        return {
            "m0": self.m0,
            "M": self.M,
            "L": self.collocation.L,
            "xi_range": [self.collocation.a, self.collocation.b],
            "tau": self.kh.tau,
            "j1": self.kh.j1,
            "j2": self.kh.j2,
            "amplitude": self.kh.amplitude,
            "inner": list(self.kh.inner),
            "outer": list(self.kh.outer),
            "gamma": self.gamma,
            "t_end": self.t_end,
            "cfl": self.solver.cfl,
            "weno_eps": self.solver.weno_eps,
            "reconstruction_vars": self.solver.reconstruction_vars,
            "cweno_mode": self.cweno_mode,
        }


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=float)


def config_hash(spec: CampaignSpec, coeffs: PerturbationCoeffs) -> str:
    payload = canonical_json(spec.to_dict()) + "|" + coeffs.sha256()
    return hashlib.sha256(payload.encode()).hexdigest()


@dataclass
class EnsembleManifest:
    """Campaign metadata plus one record per (xi index, level)."""

    spec: CampaignSpec
    config_hash: str
    coeffs_sha256: str
    runs: list[dict] = field(default_factory=list)
    sealed: bool = False

    def record(self, xi_index: int, level: int) -> dict | None:
        for r in self.runs:
            if r["xi_index"] == xi_index and r["level"] == level:
                return r
        return None

    def failed_pairs(self) -> list[tuple[int, int]]:
        return [(r["xi_index"], r["level"]) for r in self.runs if r["status"] != "ok"]

    def is_complete(self) -> bool:
        want = self.spec.collocation.L * self.spec.M
        return self.sealed and len(self.runs) == want and not self.failed_pairs()

    def to_json(self) -> dict:
        return {
            "schema": "khe-manifest-v1",
            "config": self.spec.to_dict(),
            "config_hash": self.config_hash,
            "coeffs_sha256": self.coeffs_sha256,
            "runs": self.runs,
            "sealed": self.sealed,
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1, sort_keys=True)
            fh.write("\n")


def load_manifest(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def manifest_from_json(doc: dict) -> EnsembleManifest:
    c = doc["config"]
    spec = CampaignSpec(
        m0=c["m0"],
        M=c["M"],
        collocation=CollocationGrid(L=c["L"], a=c["xi_range"][0], b=c["xi_range"][1]),
        kh=KhConfig(
            tau=c["tau"], j1=c["j1"], j2=c["j2"], amplitude=c["amplitude"],
            inner=tuple(c["inner"]), outer=tuple(c["outer"]),
        ),
        gamma=c["gamma"],
        t_end=c["t_end"],
        solver=SolverConfig(
            cfl=c["cfl"], weno_eps=c["weno_eps"],
            reconstruction_vars=c["reconstruction_vars"], t_end=c["t_end"],
        ),
        cweno_mode=c["cweno_mode"],
    )
    man = EnsembleManifest(
        spec=spec,
        config_hash=doc["config_hash"],
        coeffs_sha256=doc["coeffs_sha256"],
        runs=list(doc["runs"]),
        sealed=doc["sealed"],
    )
    return man


def _field_path(outdir: str, xi_index: int, level: int) -> str:
    return os.path.join(outdir, "fields", f"xi{xi_index:03d}_m{level}.khe")


def _run_one(spec: CampaignSpec, coeffs: PerturbationCoeffs, xi_index: int, level: int, path: str) -> dict:
    """Execute a single (xi, level) solve and persist the final field."""
    hier = spec.hierarchy()
    g = spec.gas_params()
    xi = float(spec.collocation.nodes[xi_index - 1])
    rec = {"xi_index": xi_index, "level": level, "path": os.path.relpath(path, os.path.dirname(os.path.dirname(path))), "t": spec.t_end}
    try:
        init = kh_initial_field(hier, level, xi, coeffs, spec.kh, g)
        result = advance(init, spec.t_end, g, spec.solver)
        write_field(path, result.field)
        rec.update(
            status="ok",
            steps=result.steps,
            min_density=result.min_density,
            min_pressure=result.min_pressure,
            fallbacks=result.fallback_count,
        )
    except Blowup as exc:
        rec.update(status="blowup", error=str(exc), failure_time=exc.time)
    except KheError as exc:
        rec.update(status="error", error=str(exc))
    return rec


def run_campaign(
    spec: CampaignSpec,
    coeffs: PerturbationCoeffs,
    outdir: str,
    workers: int = 1,
    force: bool = False,
) -> EnsembleManifest:
    """Run (or resume) the L x M solver matrix and seal the manifest.

    Completed records whose configuration hash matches are reused unless
    force is given. Raises PartialCampaign when any run failed; the manifest
    is written either way.
    """
    spec.kh.validate(spec.collocation.xi_bound)
    chash = config_hash(spec, coeffs)
    os.makedirs(os.path.join(outdir, "fields"), exist_ok=True)
    manifest_path = os.path.join(outdir, "manifest.json")

    previous: dict[tuple[int, int], dict] = {}
    if not force and os.path.exists(manifest_path):
        doc = load_manifest(manifest_path)
        if doc.get("config_hash") == chash:
            for r in doc["runs"]:
                if r["status"] == "ok" and os.path.exists(os.path.join(outdir, r["path"])):
                    previous[(r["xi_index"], r["level"])] = r

    todo = [
        (ell, m)
        for ell in range(1, spec.collocation.L + 1)
        for m in range(1, spec.M + 1)
        if (ell, m) not in previous
    ]
    log.info("campaign: %d runs cached, %d to execute (workers=%d)", len(previous), len(todo), workers)

    records = dict(previous)
    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_run_one, spec, coeffs, ell, m, _field_path(outdir, ell, m))
                for ell, m in todo
            ]
            for (ell, m), fut in zip(todo, futures):
                records[(ell, m)] = fut.result()
    else:
        for ell, m in todo:
            records[(ell, m)] = _run_one(spec, coeffs, ell, m, _field_path(outdir, ell, m))

    runs = [records[key] for key in sorted(records)]
    manifest = EnsembleManifest(
        spec=spec,
        config_hash=chash,
        coeffs_sha256=coeffs.sha256(),
        runs=runs,
        sealed=True,
    )
    manifest.save(manifest_path)
    with open(os.path.join(outdir, "runs.log"), "w") as fh:
        for r in runs:
            fh.write(
                f"xi={r['xi_index']} m={r['level']} t={r.get('t')} status={r['status']} "
                f"steps={r.get('steps', '-')} min_rho={r.get('min_density', '-')} "
                f"min_p={r.get('min_pressure', '-')} fallbacks={r.get('fallbacks', '-')}\n"
            )

    failed = manifest.failed_pairs()
    if failed:
        raise PartialCampaign(failed)
    return manifest


def load_campaign_field(outdir: str, manifest: EnsembleManifest, xi_index: int, level: int) -> GridField:
    rec = manifest.record(xi_index, level)
    if rec is None or rec["status"] != "ok":
        raise PartialCampaign([(xi_index, level)])
    return read_field(os.path.join(outdir, rec["path"]))
