"""Command-line entry point: simulate, estimate, fisher-scan, hb-scaling, calibrate, lrt-calibrate."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, config as cfgmod
from .bayes_estimator import (
    DEFAULT_PHI_HALF_WIDTH,
    DEFAULT_RESOLUTION,
    DEFAULT_V_RANGE,
    PriorSpec,
    calibration_sweep,
    estimate,
    locate_phase,
    sample_counts,
)
from .fisher_analysis import (
    SingularFisherError,
    crb,
    fisher_full,
    fisher_postselected,
    lrt_null_calibration,
    lrt_statistic,
    weighted_postselected,
)
from .hb_scaling import StepSpec, default_phase_grid, scaling_sweep
from .io_formats import digest_config, read_counts_csv, write_counts_csv, write_json, write_manifest, write_table_csv
from .noon2_model import CANONICAL_SETTINGS

log = logging.getLogger("noon_metrology")

UNITS = {"phi": "rad", "v": "dimensionless", "var_phi": "rad^2", "cov_phi_v": "rad", "var_v": "dimensionless"}


def _prior_from(spec: dict, center: float | None) -> PriorSpec:
    v_range = tuple(spec.get("v_range", DEFAULT_V_RANGE))
    resolution = spec.get("resolution", DEFAULT_RESOLUTION)
    if "phi_range" in spec:
        return PriorSpec(tuple(spec["phi_range"]), v_range, resolution)
    center = spec.get("phi_center", center)
    return PriorSpec.around(center, spec.get("half_width", DEFAULT_PHI_HALF_WIDTH), v_range, resolution)


def _comments(cfg: dict) -> dict:
    return {"tool": f"noon-metrology {__version__}", "config_sha256": digest_config(cfg)}


def cmd_simulate(cfg: dict, out: Path) -> list[Path]:
    settings = cfg.get("settings", list(CANONICAL_SETTINGS))
    record = sample_counts(cfg["phi"], cfg["v"], cfg["M"], seed=cfg["seed"], mode=cfg["mode"], settings=settings)
    return [write_counts_csv(out / "counts.csv", record, _comments(cfg))]


def cmd_estimate(cfg: dict, out: Path) -> list[Path]:
    if "counts" not in cfg:
        raise cfgmod.ConfigError("estimate needs a counts file (--counts or config key 'counts')")
    counts = read_counts_csv(cfg["counts"])
    if counts.M <= 0:
        raise ValueError("counts file holds no coincidence events")
    prior_cfg = cfg["prior"]
    center = None
    if "phi_range" not in prior_cfg and "phi_center" not in prior_cfg:
        center = locate_phase(counts, tuple(prior_cfg.get("v_range", DEFAULT_V_RANGE)))
    prior = _prior_from(prior_cfg, center)
    est = estimate(prior, counts)
    M = float(counts.M)
    F = fisher_postselected(est.phi, est.v, counts.settings, convention=cfg["convention"])
    bound = crb(F, M)
    other = "anderson" if cfg["lrt_form"] == "verbatim" else "verbatim"
    report = {
        "config_sha256": digest_config(cfg),
        "units": UNITS,
        "counts": {"M": M, "settings_rad": counts.settings, "sha256": counts.digest()},
        "prior": {"phi_range_rad": prior.phi_range, "v_range": prior.v_range, "resolution": prior.shape},
        "estimate": est.as_dict(),
        "fisher": {
            "flavor": F.flavor, "convention": F.convention,
            "phi_phi": F["phi", "phi"], "v_v": F["v", "v"], "phi_v": F["phi", "v"],
        },
        "crb": bound.as_dict(),
        "lrt": lrt_statistic(F, est.covariance, M, cfg["lrt_form"]).as_dict(),
        "lrt_alternative": lrt_statistic(F, est.covariance, M, other).as_dict(),
    }
    return [write_json(out / "estimate.json", report)]


FISHER_COLUMNS = (
    "phi", "F_ps_phiphi", "F_ps_vv", "F_ps_phiv", "xi_ps",
    "F_full_phiphi", "F_full_vv", "F_full_phiv", "xi_full",
    "Fw_ps_phiphi", "Fw_ps_vv", "Fw_ps_phiv",
    "crb_var_phi", "crb_var_v", "crb_cov_phi_v", "singular",
)


def cmd_fisher_scan(cfg: dict, out: Path) -> list[Path]:
    settings = cfg.get("settings", list(CANONICAL_SETTINGS))
    rows = []
    for phi in np.linspace(cfg["phi_min"], cfg["phi_max"], cfg["points"]):
        ps = fisher_postselected(phi, cfg["v"], settings, cfg["convention"])
        full = fisher_full(phi, cfg["v"], settings)
        w = weighted_postselected(phi, cfg["v"], settings)
        try:
            b = crb(ps, cfg["M"]).bound
        except SingularFisherError:
            b = np.full((2, 2), np.nan)
        rows.append({
            "phi": phi,
            "F_ps_phiphi": ps.matrix[0, 0], "F_ps_vv": ps.matrix[1, 1], "F_ps_phiv": ps.matrix[0, 1],
            "xi_ps": ps.xi if not ps.singular else np.nan,
            "F_full_phiphi": full.matrix[0, 0], "F_full_vv": full.matrix[1, 1], "F_full_phiv": full.matrix[0, 1],
            "xi_full": full.xi if not full.singular else np.nan,
            "Fw_ps_phiphi": w.matrix[0, 0], "Fw_ps_vv": w.matrix[1, 1], "Fw_ps_phiv": w.matrix[0, 1],
            "crb_var_phi": b[0, 0], "crb_var_v": b[1, 1], "crb_cov_phi_v": b[0, 1],
            "singular": int(ps.singular or full.singular),
        })
    return [write_table_csv(out / "fisher_scan.csv", rows, FISHER_COLUMNS, _comments(cfg))]


HB_COLUMNS = (
    "N", "epsilon", "max_eff_F_phi", "phi_opt_phi", "max_eff_F_eps", "phi_opt_eps", "upsilon",
    "guide_2N_Nplus1", "guide_N", "guide_2N2", "flags", "error",
)


def cmd_hb_scaling(cfg: dict, out: Path) -> list[Path]:
    step = StepSpec(cfg["h_phi"], cfg["h_eps"], cfg["richardson"], cfg["check_convergence"])
    Ns = range(cfg["N_min"], cfg["N_max"] + 1)
    table = scaling_sweep(Ns, cfg["epsilons"], step, default_phase_grid(cfg["phase_points"]), cfg["workers"])
    rows = []
    for point in table:
        row = point.as_row()
        N = row["N"]
        row.update(guide_2N_Nplus1=2 * N * (N + 1), guide_N=N, guide_2N2=2 * N * N)
        rows.append(row)
    return [write_table_csv(out / "hb_scaling.csv", rows, HB_COLUMNS, _comments(cfg))]


CALIB_COLUMNS = (
    "imparted_phi", "phi_B", "v_B", "var_phi", "var_v", "cov_phi_v", "M",
    "M_var_phi", "M_var_v", "M_cov_phi_v", "crb_M_var_phi", "crb_M_var_v", "crb_M_cov_phi_v",
)


def cmd_calibrate(cfg: dict, out: Path) -> list[Path]:
    if "phases" in cfg:
        phases = np.asarray(cfg["phases"], dtype=float)
    else:
        phases = np.linspace(
            cfg.get("phase_start", -np.pi / 4), cfg.get("phase_stop", np.pi / 4), cfg.get("phase_count", 20)
        )
    prior = cfg["prior"]
    fit = calibration_sweep(
        phases, cfg["v"], cfg["M"], seed=cfg["seed"], noiseless=cfg["noiseless"],
        half_width=prior.get("half_width", DEFAULT_PHI_HALF_WIDTH),
        v_range=tuple(prior.get("v_range", DEFAULT_V_RANGE)),
        resolution=prior.get("resolution", DEFAULT_RESOLUTION),
    )
    rows = []
    for phase, e in zip(fit.phases, fit.estimates):
        Finv = np.linalg.inv(fisher_postselected(phase, cfg["v"]).matrix)
        rows.append({
            "imparted_phi": phase, "phi_B": e.phi, "v_B": e.v,
            "var_phi": e.var_phi, "var_v": e.var_v, "cov_phi_v": e.cov_phi_v, "M": e.M,
            "M_var_phi": e.M * e.var_phi, "M_var_v": e.M * e.var_v, "M_cov_phi_v": e.M * e.cov_phi_v,
            "crb_M_var_phi": Finv[0, 0], "crb_M_var_v": Finv[1, 1], "crb_M_cov_phi_v": Finv[0, 1],
        })
    table = write_table_csv(out / "calibration.csv", rows, CALIB_COLUMNS, _comments(cfg))
    summary = write_json(out / "calibration_fit.json", {
        "config_sha256": digest_config(cfg),
        "s_phi": fit.phi_fit.as_dict(),
        "s_v": fit.v_fit.as_dict(),
        "units": {"s_phi": "dimensionless", "s_v": "rad^-1"},
    })
    return [table, summary]


def cmd_lrt_calibrate(cfg: dict, out: Path) -> list[Path]:
    prior = _prior_from(cfg["prior"], cfg["phi"])
    cal = lrt_null_calibration(cfg["phi"], cfg["v"], cfg["M"], cfg["repetitions"], cfg["seed"], prior)
    report = {"config_sha256": digest_config(cfg), **cal.as_dict()}
    rows = [
        {"run": i, "l_verbatim": a, "l_anderson": b}
        for i, (a, b) in enumerate(zip(cal.statistics["verbatim"], cal.statistics["anderson"]))
    ]
    return [
        write_json(out / "lrt_calibration.json", report),
        write_table_csv(out / "lrt_statistics.csv", rows, ("run", "l_verbatim", "l_anderson"), _comments(cfg)),
    ]


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "fisher-scan": cmd_fisher_scan,
    "hb-scaling": cmd_hb_scaling,
    "calibrate": cmd_calibrate,
    "lrt-calibrate": cmd_lrt_calibrate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="noon-metrology", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON config file for this subcommand")
        p.add_argument("--seed", type=int, help="RNG seed (overrides the config)")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        if name == "estimate":
            p.add_argument("--counts", type=Path, help="counts CSV (overrides the config)")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    started = datetime.now(timezone.utc)
    try:
        raw = cfgmod.load(args.config)
        if args.seed is not None:
            raw["seed"] = args.seed
        if getattr(args, "counts", None) is not None:
            raw["counts"] = str(args.counts)
        cfg = cfgmod.validate(args.command, raw)
        args.out.mkdir(parents=True, exist_ok=True)
        outputs = COMMANDS[args.command](cfg, args.out)
        write_manifest(args.out, args.command, cfg, cfg.get("seed"), outputs, started)
    except cfgmod.ConfigError as exc:
        _report_error(exc)
        return 2
    except Exception as exc:
        _report_error(exc)
        return 1
    return 0


def _report_error(exc: Exception) -> None:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    line = getattr(exc, "line", None)
    if line is not None:
        payload["line"] = line
    sys.stderr.write(json.dumps(payload) + "\n")


if __name__ == "__main__":
    sys.exit(main())
