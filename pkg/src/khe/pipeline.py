"""Analysis pipeline: from sealed campaign outputs to CSV/field artifacts.

Stages (all read-only with respect to the campaign):

  cesaro  - per-collocation-node level averages at selected nodes (field files)
  stats   - nodewise mean/std over the random parameter of the averaged state
  defects - mean defect maps per averaging depth, plus L1 residuals against
            the deepest stage
  hist    - windowed histograms and their moments from the mean fields
  pod     - mode counts and singular-value decays for raw density and for
            the averaged density/defect snapshots

Every artifact is listed in index.json with its SHA-256 and the campaign
configuration hash, so reruns are verifiable byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os

import numpy as np

from .cweno import CwenoConfig, refine_2d
from .diagnostics import (
    cesaro_average,
    defect_fields,
    defect_residuals,
    histogram_stats,
    window_histogram,
    xi_statistics,
)
from .ensemble import (
    EnsembleManifest,
    load_campaign_field,
    load_manifest,
    manifest_from_json,
)
from .errors import PartialCampaign
from .mesh import GridField, write_field
from .pod import center_snapshots, k_at, pod_svd

__all__ = ["DEFAULT_WINDOWS", "ALL_STAGES", "analyze_campaign", "assemble_sweep", "open_manifest"]

log = logging.getLogger(__name__)

DEFAULT_WINDOWS = {
    "D1": (0.46, 0.54, 0.71, 0.79),
    "D2": (0.76, 0.84, 0.71, 0.79),
}
ALL_STAGES = ("cesaro", "stats", "defects", "hist", "pod")
_HIST_QUANTITIES = ("rho", "S", "trR")
_STAT_COMPONENTS = ("rho", "m_x", "m_y", "E", "S")


def open_manifest(outdir: str) -> EnsembleManifest:
    man = manifest_from_json(load_manifest(os.path.join(outdir, "manifest.json")))
    if not man.is_complete():
        raise PartialCampaign(man.failed_pairs() or [(-1, -1)])
    return man


def _fmt(v) -> str:
    return f"{float(v):.17g}"


class _ArtifactIndex:
    def __init__(self, root: str, config_hash: str):
        self.root = root
        self.config_hash = config_hash
        self.entries: list[dict] = []

    def add(self, path: str, stage: str, kind: str, **params):
        with open(path, "rb") as fh:
            digest = hashlib.sha256(fh.read()).hexdigest()
        self.entries.append(
            {
                "path": os.path.relpath(path, self.root),
                "stage": stage,
                "kind": kind,
                "sha256": digest,
                **params,
            }
        )

    def save(self):
        doc = {
            "schema": "khe-analysis-v1",
            "config_hash": self.config_hash,
            "artifacts": sorted(self.entries, key=lambda e: e["path"]),
        }
        with open(os.path.join(self.root, "index.json"), "w") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")


def _write_csv(path: str, header: list[str], rows: list[list]):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else _fmt(v) for v in row) + "\n")


def analyze_campaign(
    outdir: str,
    stages=ALL_STAGES,
    windows: dict | None = None,
    analysis_dir: str | None = None,
) -> dict:
    """Run the selected stages for one campaign directory; returns summary."""
    man = open_manifest(outdir)
    spec = man.spec
    hier = spec.hierarchy()
    g = spec.gas_params()
    grid = spec.collocation
    L, M = grid.L, spec.M
    cweno = CwenoConfig(mode=spec.cweno_mode)
    windows = DEFAULT_WINDOWS if windows is None else windows

    root = analysis_dir or os.path.join(outdir, "analysis")
    for sub in ("cesaro", "stats", "defects", "hist", "pod"):
        os.makedirs(os.path.join(root, sub), exist_ok=True)
    index = _ArtifactIndex(root, man.config_hash)
    summary: dict = {"tau": spec.kh.tau, "config_hash": man.config_hash}

    depths = [1] if M == 1 else list(range(2, M + 1))
    deepest = depths[-1]

    # Per-node level averages at every depth, on each depth's own finest grid.
    log.info("analysis: averaging %d nodes over depths %s", L, depths)
    raw_rho: dict[int, list[np.ndarray]] = {m: [] for m in range(1, M + 1)}
    ces_by_depth: dict[int, list] = {d: [] for d in depths}
    for ell in range(1, L + 1):
        fields = {m: load_campaign_field(outdir, man, ell, m) for m in range(1, M + 1)}
        for m in range(1, M + 1):
            raw_rho[m].append(fields[m]["rho"])
        for d in depths:
            ces_by_depth[d].append(
                cesaro_average({m: fields[m] for m in range(1, d + 1)}, hier, g,
                               target_level=d, cweno=cweno)
            )

    if "cesaro" in stages:
        picks = sorted({1, (L + 1) // 2, L})
        for ell in picks:
            ces = ces_by_depth[deepest][ell - 1]
            fld = GridField(level=ces.level, n=ces.n, components=dict(ces.components))
            path = os.path.join(root, "cesaro", f"cesaro_M{deepest}_xi{ell:03d}.khe")
            write_field(path, fld)
            index.add(path, "cesaro", "field", depth=deepest, xi_index=ell)

    mean_trR: dict[int, np.ndarray] = {}
    mean_Edef: dict[int, np.ndarray] = {}
    stats_fields: dict[str, np.ndarray] = {}
    need_defects = bool({"defects", "hist", "pod"} & set(stages))
    if need_defects or "stats" in stages:
        for d in depths:
            stack_tr = np.stack([defect_fields(c, g).trR for c in ces_by_depth[d]])
            stack_ed = np.stack([defect_fields(c, g).Edef for c in ces_by_depth[d]])
            if L >= 7:
                mean_trR[d], std_tr = xi_statistics(stack_tr, grid.a, grid.b, cweno)
                mean_Edef[d], std_ed = xi_statistics(stack_ed, grid.a, grid.b, cweno)
            else:
                mean_trR[d], std_tr = stack_tr.mean(axis=0), stack_tr.std(axis=0)
                mean_Edef[d], std_ed = stack_ed.mean(axis=0), stack_ed.std(axis=0)
            if d == deepest:
                summary["sigma_max_defects"] = {
                    "trR": float(np.max(std_tr)),
                    "Edef": float(np.max(std_ed)),
                }

    if "stats" in stages or "hist" in stages:
        for comp in _STAT_COMPONENTS:
            stack = np.stack([c[comp] for c in ces_by_depth[deepest]])
            if L >= 7:
                mean, std = xi_statistics(stack, grid.a, grid.b, cweno)
            else:
                mean, std = stack.mean(axis=0), stack.std(axis=0)
            stats_fields[comp] = mean
            stats_fields[comp + "_std"] = std
    if "stats" in stages:
        n_fine = ces_by_depth[deepest][0].n
        mean_fld = GridField(level=deepest, n=n_fine)
        std_fld = GridField(level=deepest, n=n_fine)
        for comp in _STAT_COMPONENTS:
            mean_fld[comp] = stats_fields[comp]
            std_fld[comp] = stats_fields[comp + "_std"]
        for name, fld in (("mean", mean_fld), ("std", std_fld)):
            path = os.path.join(root, "stats", f"{name}_M{deepest}.khe")
            write_field(path, fld)
            index.add(path, "stats", "field", depth=deepest, statistic=name)
        summary["sigma_max"] = {
            comp: float(np.max(np.abs(stats_fields[comp + "_std"]))) for comp in _STAT_COMPONENTS
        }

    if "defects" in stages:
        thr = 1e-10
        for d in depths:
            n_d = ces_by_depth[d][0].n
            fld = GridField(level=d, n=n_d)
            fld["trR"] = mean_trR[d]
            fld["Edef"] = mean_Edef[d]
            with np.errstate(divide="ignore", invalid="ignore"):
                fld["ratio"] = np.where(mean_trR[d] > thr, mean_Edef[d] / mean_trR[d], np.nan)
            path = os.path.join(root, "defects", f"defect_mean_M{d}.khe")
            write_field(path, fld)
            index.add(path, "defects", "field", depth=d)
        # band compliance per depth (5% relative slack on the ratio bounds)
        lo_band, hi_band = g.ratio_band
        summary["band_fraction"] = {}
        summary["band_nodes"] = {}
        for d in depths:
            ratio = mean_Edef[d] / np.where(mean_trR[d] > thr, mean_trR[d], np.nan)
            masked = ratio[np.isfinite(ratio)]
            in_band = np.mean((masked >= lo_band * 0.95) & (masked <= hi_band * 1.05)) if masked.size else 1.0
            summary["band_fraction"][d] = float(in_band)
            summary["band_nodes"][d] = int(masked.size)

        rows = []
        if len(depths) > 1:
            # project the mean defects to the common finest grid, then compare
            tr_common, ed_common = {}, {}
            for d in depths:
                tr_f = GridField(level=d, n=ces_by_depth[d][0].n)
                tr_f["trR"], tr_f["Edef"] = mean_trR[d], mean_Edef[d]
                fine = refine_2d(tr_f, hier, deepest, cweno)
                tr_common[d], ed_common[d] = fine["trR"], fine["Edef"]
            rows = defect_residuals(tr_common, ed_common, hier.n(deepest))
        path = os.path.join(root, "defects", "residuals.csv")
        _write_csv(
            path,
            ["M", "tau", "eps_R", "eps_E"],
            [[r["M"], spec.kh.tau, r["eps_R"], r["eps_E"]] for r in rows],
        )
        index.add(path, "defects", "csv")
        summary["residuals"] = rows

    if "hist" in stages:
        n_fine = ces_by_depth[deepest][0].n
        sources = {
            "rho": stats_fields["rho"],
            "S": stats_fields["S"],
            "trR": mean_trR[deepest],
        }
        hist_rows = []
        for wname, rect in windows.items():
            for q in _HIST_QUANTITIES:
                h = window_histogram(sources[q], n_fine, rect)
                path = os.path.join(root, "hist", f"hist_{wname}_{q}.csv")
                _write_csv(
                    path,
                    ["bin_left", "bin_right", "count", "density"],
                    [
                        [h.edges[i], h.edges[i + 1], float(h.counts[i]), h.density[i]]
                        for i in range(len(h.counts))
                    ],
                )
                index.add(path, "hist", "csv", window=wname, quantity=q)
                mean, std = histogram_stats(h)
                hist_rows.append({"window": wname, "quantity": q, "mean": mean, "std": std})
        path = os.path.join(root, "hist", "stats.csv")
        _write_csv(
            path,
            ["window", "quantity", "tau", "mean", "std"],
            [[r["window"], r["quantity"], spec.kh.tau, r["mean"], r["std"]] for r in hist_rows],
        )
        index.add(path, "hist", "csv")
        summary["hist_stats"] = hist_rows

    if "pod" in stages:
        k_raw: dict[int, int] = {}
        for m in range(1, M + 1):
            snap = center_snapshots(raw_rho[m], provenance=f"raw rho m={m}")
            res = pod_svd(snap)
            k_raw[m] = k_at(res)
            path = os.path.join(root, "pod", f"singvals_raw_rho_m{m}.csv")
            _write_csv(path, ["j", "s"], [[float(j + 1), s] for j, s in enumerate(res.singular_values)])
            index.add(path, "pod", "csv", target="raw_rho", level=m)
        summary["k_raw_rho"] = k_raw

        k_ces: dict[str, dict[int, int]] = {"rho": {}, "edef": {}, "trr": {}}
        for d in depths:
            stacks = {
                "rho": [c["rho"] for c in ces_by_depth[d]],
                "edef": [defect_fields(c, g).Edef for c in ces_by_depth[d]],
                "trr": [defect_fields(c, g).trR for c in ces_by_depth[d]],
            }
            for key, snaps in stacks.items():
                snap = center_snapshots(snaps, provenance=f"cesaro {key} M={d}")
                res = pod_svd(snap)
                k_ces[key][d] = k_at(res)
                path = os.path.join(root, "pod", f"singvals_cesaro_{key}_M{d}.csv")
                _write_csv(path, ["j", "s"], [[float(j + 1), s] for j, s in enumerate(res.singular_values)])
                index.add(path, "pod", "csv", target=f"cesaro_{key}", level=d)
        summary["k_cesaro"] = k_ces

        # single-tau tables in the rows-by-levels, columns-by-tau layout
        tau_col = f"tau_{spec.kh.tau:g}"
        path = os.path.join(root, "pod", "k_raw_rho.csv")
        _write_csv(path, ["level", tau_col], [[float(m), float(k_raw[m])] for m in sorted(k_raw)])
        index.add(path, "pod", "csv", table="k_raw_rho")
        for key in ("rho", "edef", "trr"):
            path = os.path.join(root, "pod", f"k_cesaro_{key}.csv")
            _write_csv(path, ["level", tau_col], [[float(d), float(k_ces[key][d])] for d in sorted(k_ces[key])])
            index.add(path, "pod", "csv", table=f"k_cesaro_{key}")

    with open(os.path.join(root, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")
    index.add(os.path.join(root, "summary.json"), "summary", "json")
    index.save()
    return summary


def assemble_sweep(root: str, campaign_dirs: list[str]) -> None:
    """Merge per-campaign summaries into tau-sweep tables under root/analysis."""
    summaries = []
    for d in campaign_dirs:
        with open(os.path.join(d, "analysis", "summary.json")) as fh:
            summaries.append(json.load(fh))
    summaries.sort(key=lambda s: s["tau"])
    taus = [s["tau"] for s in summaries]

    out = os.path.join(root, "analysis")
    os.makedirs(os.path.join(out, "pod"), exist_ok=True)
    os.makedirs(os.path.join(out, "defects"), exist_ok=True)
    os.makedirs(os.path.join(out, "hist"), exist_ok=True)
    index = _ArtifactIndex(out, summaries[0]["config_hash"] if len(summaries) == 1 else "sweep")

    def _k_table(path, key, sub=None):
        tables = [s.get(key, {}) if sub is None else s.get(key, {}).get(sub, {}) for s in summaries]
        levels = sorted({int(lv) for t in tables for lv in t})
        header = ["level"] + [f"tau_{t:g}" for t in taus]
        rows = []
        for lv in levels:
            rows.append([float(lv)] + [float(t.get(str(lv), t.get(lv, float("nan")))) for t in tables])
        _write_csv(path, header, rows)
        index.add(path, "pod", "csv", table=os.path.basename(path))

    _k_table(os.path.join(out, "pod", "k_raw_rho.csv"), "k_raw_rho")
    for key in ("rho", "edef", "trr"):
        _k_table(os.path.join(out, "pod", f"k_cesaro_{key}.csv"), "k_cesaro", key)

    res_rows = []
    for s in summaries:
        for r in s.get("residuals", []):
            res_rows.append([float(r["M"]), s["tau"], r["eps_R"], r["eps_E"]])
    path = os.path.join(out, "defects", "residuals.csv")
    _write_csv(path, ["M", "tau", "eps_R", "eps_E"], res_rows)
    index.add(path, "defects", "csv")

    hist_rows = []
    for s in summaries:
        for r in s.get("hist_stats", []):
            hist_rows.append([r["window"], r["quantity"], s["tau"], r["mean"], r["std"]])
    path = os.path.join(out, "hist", "stats.csv")
    _write_csv(path, ["window", "quantity", "tau", "mean", "std"], hist_rows)
    index.add(path, "hist", "csv")
    index.save()
