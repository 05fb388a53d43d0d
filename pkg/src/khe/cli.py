"""Command-line driver: coeffs, run, analyze, verify, report.

Configuration comes from an optional TOML file plus flag overrides (flags
win). All randomness flows through the pinned coefficient seed; nothing
reads the clock or OS entropy. Exit codes: 0 ok, 2 configuration error,
3 partial campaign, 4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace

try:
    import tomllib
except ModuleNotFoundError:  # python 3.10
    import tomli as tomllib

from .acceptance import CRITERIA, AcceptanceContext, run_criteria
from .ensemble import (
    CampaignSpec,
    CollocationGrid,
    KhConfig,
    default_coeffs_path,
    generate_coeffs,
    load_coeffs,
    run_campaign,
    save_coeffs,
)
from .errors import ConfigError, KheError, PartialCampaign
from .pipeline import ALL_STAGES, DEFAULT_WINDOWS, analyze_campaign, assemble_sweep
from .solver import SolverConfig

log = logging.getLogger("khe")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARTIAL = 3
EXIT_VERIFY = 4


def _cache_root() -> str:
    return os.environ.get("KHE_CACHE_DIR", ".")


def _load_toml(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _build_spec(cfg: dict, args) -> tuple[CampaignSpec, list[float], dict]:
    camp = cfg.get("campaign", {})
    solv = cfg.get("solver", {})

    def pick(flag, key, default, table=camp):
        v = getattr(args, flag, None)
        if v is not None:
            return v
        return table.get(key, default)

    taus = getattr(args, "tau", None) or camp.get("tau", [1.1])
    if not isinstance(taus, list):
        taus = [taus]
    xi_range = camp.get("xi_range", [-1.0, 1.0])
    spec = CampaignSpec(
        m0=int(pick("m0", "m0", 2)),
        M=int(pick("levels", "M", 3)),
        collocation=CollocationGrid(L=int(pick("L", "L", 9)), a=float(xi_range[0]), b=float(xi_range[1])),
        kh=KhConfig(tau=float(taus[0])),
        gamma=float(pick("gamma", "gamma", 1.4)),
        t_end=float(pick("t_end", "T", 1.0)),
        solver=SolverConfig(
            cfl=float(pick("cfl", "cfl", 0.45, solv)),
            weno_eps=float(solv.get("weno_eps", 1e-12)),
            reconstruction_vars=str(solv.get("reconstruction_vars", "characteristic")),
            t_end=float(pick("t_end", "T", 1.0)),
        ),
        cweno_mode=str(camp.get("cweno_mode", "nonlinear")),
    )
    windows = {
        name: tuple(rect) for name, rect in cfg.get("windows", DEFAULT_WINDOWS).items()
    }
    return spec, [float(t) for t in taus], windows


def _campaign_dirs(out: str, taus: list[float]) -> list[str]:
    if len(taus) == 1:
        return [out]
    return [os.path.join(out, f"tau_{t:g}") for t in taus]


def cmd_coeffs(args) -> int:
    path = args.out or os.path.join(_cache_root(), "kh_coeffs.txt")
    coeffs = generate_coeffs(args.seed)
    save_coeffs(path, coeffs, force=args.force)
    print(f"wrote {path} (seed {args.seed}, sha256 {coeffs.sha256()})")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load_toml(args.config)
    spec, taus, _ = _build_spec(cfg, args)
    out = args.out or cfg.get("run", {}).get("out") or os.path.join(_cache_root(), "khe_out")
    workers = args.workers or int(cfg.get("run", {}).get("workers", 1))
    coeffs_path = args.coeffs or cfg.get("run", {}).get("coeffs") or default_coeffs_path()
    coeffs = load_coeffs(coeffs_path)

    failed = []
    for tau, cdir in zip(taus, _campaign_dirs(out, taus)):
        tau_spec = replace(spec, kh=replace(spec.kh, tau=tau))
        try:
            man = run_campaign(tau_spec, coeffs, cdir, workers=workers, force=args.force)
            print(f"tau={tau:g}: {len(man.runs)} runs complete -> {cdir}")
        except PartialCampaign as exc:
            print(f"tau={tau:g}: PARTIAL ({exc.failed})", file=sys.stderr)
            failed.extend(exc.failed)
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_analyze(args) -> int:
    cfg = _load_toml(args.config)
    _, _, windows = _build_spec(cfg, args)
    stages = tuple(args.stages.split(",")) if args.stages else ALL_STAGES
    unknown = set(stages) - set(ALL_STAGES)
    if unknown:
        raise ConfigError(f"unknown stages: {sorted(unknown)}")

    root = args.dir
    if os.path.exists(os.path.join(root, "manifest.json")):
        dirs = [root]
    else:
        dirs = sorted(
            os.path.join(root, d)
            for d in os.listdir(root)
            if d.startswith("tau_") and os.path.exists(os.path.join(root, d, "manifest.json"))
        )
        if not dirs:
            raise ConfigError(f"{root}: no manifest.json or tau_* campaign directories")

    for d in dirs:
        summary = analyze_campaign(d, stages=stages, windows=windows)
        print(f"analyzed {d} (tau={summary['tau']:g})")
    if len(dirs) > 1:
        assemble_sweep(root, dirs)
        print(f"sweep tables -> {os.path.join(root, 'analysis')}")
    return EXIT_OK


def cmd_verify(args) -> int:
    workdir = args.workdir or os.path.join(_cache_root(), "khe_verify")
    ctx = AcceptanceContext(workdir, workers=args.workers or 1)
    ids = args.criteria.split(",") if args.criteria else None
    results = run_criteria(ctx, ids)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"[{status}] {r.cid} {CRITERIA[r.cid][0]}: {r.details} ({r.seconds:.1f}s)")
    doc = {
        "results": [
            {"id": r.cid, "passed": r.passed, "details": r.details, "seconds": round(r.seconds, 3)}
            for r in results
        ],
        "all_passed": all(r.passed for r in results),
    }
    summary_path = os.path.join(workdir, "verify_summary.json")
    with open(summary_path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
    print(f"summary -> {summary_path}")
    return EXIT_OK if doc["all_passed"] else EXIT_VERIFY


def cmd_report(args) -> int:
    root = args.dir
    manifest = os.path.join(root, "manifest.json")
    dirs = [root] if os.path.exists(manifest) else sorted(
        os.path.join(root, d) for d in os.listdir(root) if d.startswith("tau_")
    )
    for d in dirs:
        mpath = os.path.join(d, "manifest.json")
        if not os.path.exists(mpath):
            continue
        with open(mpath) as fh:
            man = json.load(fh)
        runs = man["runs"]
        ok = sum(1 for r in runs if r["status"] == "ok")
        print(f"campaign {d}: tau={man['config']['tau']:g} runs {ok}/{len(runs)} ok "
              f"(hash {man['config_hash'][:12]})")
        spath = os.path.join(d, "analysis", "summary.json")
        if os.path.exists(spath):
            with open(spath) as fh:
                s = json.load(fh)
            if "band_fraction" in s:
                print(f"  ratio band fractions: {s['band_fraction']}")
            for row in s.get("residuals", []):
                print(f"  M={row['M']}: eps_R={row['eps_R']:.4e} eps_E={row['eps_E']:.4e}")
            if "k_raw_rho" in s:
                print(f"  K(raw rho): {s['k_raw_rho']}  K(cesaro): {s.get('k_cesaro')}")
            if "sigma_max" in s:
                sig = max(s["sigma_max"].values())
                print(f"  max std over components: {sig:.3e}")
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="khe", description=__doc__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("coeffs", help="write the perturbation-coefficient file")
    c.add_argument("--seed", type=int, required=True)
    c.add_argument("--out", help="output path (default $KHE_CACHE_DIR/kh_coeffs.txt)")
    c.add_argument("--force", action="store_true", help="overwrite an existing file")
    c.set_defaults(fn=cmd_coeffs)

    r = sub.add_parser("run", help="execute the collocation campaign (resumable)")
    r.add_argument("--config", help="TOML configuration file")
    r.add_argument("--out", help="campaign output directory")
    r.add_argument("--coeffs", help="coefficient file (default: packaged)")
    r.add_argument("--tau", type=float, action="append", help="perturbation magnitude (repeatable)")
    r.add_argument("--m0", type=int, help="base refinement exponent")
    r.add_argument("--levels", "-M", dest="levels", type=int, help="number of embedded levels")
    r.add_argument("--L", type=int, help="collocation node count")
    r.add_argument("--gamma", type=float)
    r.add_argument("--t-end", "-T", dest="t_end", type=float, help="final time")
    r.add_argument("--cfl", type=float)
    r.add_argument("--workers", type=int)
    r.add_argument("--force", action="store_true", help="ignore cached runs")
    r.set_defaults(fn=cmd_run)

    a = sub.add_parser("analyze", help="run analysis stages over campaign outputs")
    a.add_argument("dir", help="campaign directory or sweep root with tau_* subdirs")
    a.add_argument("--config", help="TOML configuration file (windows section)")
    a.add_argument("--stages", help=f"comma list from {','.join(ALL_STAGES)}")
    a.set_defaults(fn=cmd_analyze)

    v = sub.add_parser("verify", help="run the built-in oracle suite")
    v.add_argument("--workdir", help="scratch/cache directory for the suite")
    v.add_argument("--criteria", help="comma list, e.g. A1,A3,A4")
    v.add_argument("--workers", type=int)
    v.set_defaults(fn=cmd_verify)

    g = sub.add_parser("report", help="summarize campaign and analysis outputs")
    g.add_argument("dir")
    g.set_defaults(fn=cmd_report)
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.fn(args)
    except PartialCampaign as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARTIAL
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KheError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
