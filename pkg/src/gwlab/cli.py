"""Command-line driver binding the lab modules into reproducible experiments.

Every subcommand reads one JSON config (see ``ExperimentConfig``), runs pure
computations keyed by (body, seed, samples, ...), and emits CSV (header row,
'.' decimal, 17-significant-digit floats) or a JSON report carrying the
config echo and the code-version hash.  Reruns with an identical config are
byte-identical.  Exit codes: 0 ok, 1 failed assertion, 2 config error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import acceptance
from .config import ConfigError, ExperimentConfig, code_version, format_float
from .decomposition import (integrate_proj_term, integrate_r_term, pointwise_identity,
                            verify_fp_decomposition, verify_proj_decomposition)
from .entropy import (PointCloud, check_dyadic, check_local_global, cloud_from_body,
                      entropy_fixed_point, entropy_profile, sudakov_minoration_check)
from .fixed_points import LocalWidthCurve, check_chain, fixed_point_report
from .gsm import check_chatterjee, check_small_sigma, risk_curve, stein_check, theta_grid, trivial_lower
from .intrinsic import (check_width_peak, peak_index_at_sigma, profile_for_body,
                        sigma_log_wills, wills_log)
from .l1_ball import medium_sigma_bound, r_profile
from .sampling import est_width, penalized_width, proj_second_moment, sample_set
from .variational import (check_simplepb, crosspolytope_bound, ellipsoid_local_bound,
                          ellipsoid_wills_bound, minimize_bound)


def _write(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv(header, rows, out):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_float(v) if isinstance(v, float) else str(v)
                              for v in row))
    _write("\n".join(lines) + "\n", out)


def _json_report(payload, cfg, out):
    doc = {"config": cfg.echo(), "code_version": code_version(), "report": payload}
    _write(json.dumps(doc, indent=2, sort_keys=True, default=_coerce) + "\n", out)


def _coerce(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "__dict__"):
        return vars(obj)
    if hasattr(obj, "_asdict"):
        return obj._asdict()
    return repr(obj)


def cmd_width(cfg):
    body = cfg.make_body()
    s = sample_set(body.dim, cfg.samples, cfg.seed)
    w = est_width(body, s)
    _csv(["kind", "dim", "n", "seed", "width", "stderr"],
         [[body.kind, body.dim, s.n, s.seed, w.value, w.stderr]], cfg.out)
    return 0


def cmd_fixed_point(cfg):
    body = cfg.make_body()
    s = sample_set(body.dim, cfg.samples, cfg.seed)
    curve = LocalWidthCurve(body, s)
    rows = []
    for sig in cfg.sigmas:
        rep = fixed_point_report(body, sig, s, curve=curve)
        chain = check_chain(body, sig, s, curve=curve)
        rows.append([body.kind, body.dim, s.n, s.seed, rep.sigma, rep.r_sigma,
                     rep.r_star_sigma, rep.tau_sigma, rep.penalized,
                     min(chain.margins.values())])
    _csv(["kind", "dim", "n", "seed", "sigma", "r", "r_star", "tau", "penalized",
          "min_chain_margin"], rows, cfg.out)
    return 0


def cmd_decompose(cfg):
    body = cfg.make_body()
    s = sample_set(body.dim, cfg.samples, cfg.seed)
    grid = cfg.make_grid()
    curve = LocalWidthCurve(body, s)
    payload = []
    ok = True
    for sig in cfg.sigmas:
        fp = verify_fp_decomposition(body, sig, s, spec=grid, curve=curve)
        pj = verify_proj_decomposition(body, sig, s, spec=grid)
        ok &= fp.passed and pj.passed
        payload.append({
            "sigma": sig,
            "width": {"value": fp.width_direct.value, "stderr": fp.width_direct.stderr},
            "fixed_point": {"first_term": fp.first_term, "integral": fp.integral_term,
                            "tail_bound": fp.tail_bound, "residual": fp.residual,
                            "tolerance": fp.tolerance, "passed": fp.passed},
            "projection": {"first_term": pj.first_term, "integral": pj.integral_term,
                           "tail_bound": pj.tail_bound, "residual": pj.residual,
                           "tolerance": pj.tolerance, "passed": pj.passed},
        })
    _json_report(payload, cfg, cfg.out)
    return 0 if ok else 1


def cmd_intrinsic(cfg):
    body = cfg.make_body()
    prof = profile_for_body(body)
    rows = [[body.kind, body.dim, i, lv] for i, lv in enumerate(prof.log_values)]
    _csv(["kind", "dim", "index", "log_intrinsic_volume"], rows, cfg.out)
    return 0


def cmd_wills(cfg):
    body = cfg.make_body()
    prof = profile_for_body(body)
    rows = []
    for sig in cfg.sigmas:
        rows.append([body.kind, body.dim, sig, sigma_log_wills(prof, sig),
                     float(peak_index_at_sigma(prof, sig))])
    _csv(["kind", "dim", "sigma", "sigma_log_wills", "peak_index"], rows, cfg.out)
    return 0


def cmd_peak_index(cfg):
    body = cfg.make_body()
    s = sample_set(body.dim, cfg.samples, cfg.seed)
    grid = cfg.make_grid()
    curve = LocalWidthCurve(body, s)
    sig = cfg.sigmas[0]
    integ = integrate_r_term(body, sig, s, spec=grid, curve=curve)
    rep = check_width_peak(body, samples=s, integral_term=integ.value, sigma=sig)
    _json_report(rep, cfg, cfg.out)
    return 0


def cmd_variational(cfg):
    body = cfg.make_body()
    s = sample_set(body.dim, cfg.samples, cfg.seed)
    pen = penalized_width(body, 1.0, s)
    if body.kind == "l1":
        bound = crosspolytope_bound(body.dim)
        lam = float("nan")
    elif body.kind == "ellipsoid":
        lam, bound = minimize_bound(ellipsoid_wills_bound, body.semi_axes)
        check_simplepb(body.semi_axes, s)
    else:
        raise ConfigError("variational bounds ship for l1 and ellipsoid bodies")
    margin = bound - pen.value
    _csv(["kind", "dim", "lambda_star", "bound", "mc_value", "mc_stderr", "margin"],
         [[body.kind, body.dim, lam, bound, pen.value, pen.stderr, margin]], cfg.out)
    return 0 if margin >= -3.0 * pen.stderr else 1


def cmd_l1_profile(cfg):
    body = cfg.make_body()
    if body.kind != "l1":
        raise ConfigError("l1-profile needs an l1 body")
    s = sample_set(body.dim, cfg.samples, cfg.seed)
    rows = []
    code = 0
    for sig in cfg.sigmas:
        pm = proj_second_moment(body, sig, s)
        rp = r_profile(sig, body.dim)
        ratio = pm.value / rp if rp > 0 else float("nan")
        rows.append([sig, body.dim, s.n, s.seed, pm.value, rp, ratio])
        if sig >= 1.0 / body.dim and pm.value > medium_sigma_bound(sig, body.dim):
            code = 1
    _csv(["sigma", "d", "n", "seed", "mc_second_moment", "R", "ratio"], rows, cfg.out)
    return code


def cmd_entropy(cfg):
    opts = cfg.options
    if "cloud_csv" in opts:
        pts = np.loadtxt(opts["cloud_csv"], delimiter=",", ndmin=2)
        cloud = PointCloud(points=pts)
    else:
        body = cfg.make_body()
        cloud = cloud_from_body(body, budget=int(opts.get("cloud_budget", 400)))
    prof = entropy_profile(cloud, depth=int(opts.get("depth", 10)))
    payload = {"mode": cloud.mode, "n": cloud.n, "diam": cloud.diam,
               "scales": prof.scales, "h": prof.h, "h_loc": prof.h_loc,
               "eps_bar": {format_float(s): entropy_fixed_point(prof, s)
                           for s in cfg.sigmas}}
    if cloud.mode == "exact":
        payload["dyadic"] = check_dyadic(cloud)
        payload["local_global"] = check_local_global(cloud)
    if cfg.body:
        body = cfg.make_body()
        s = sample_set(body.dim, cfg.samples, cfg.seed)
        payload["minoration"] = sudakov_minoration_check(body, cloud, s)
    _json_report(payload, cfg, cfg.out)
    return 0


def cmd_gsm(cfg):
    body = cfg.make_body()
    s = sample_set(body.dim, cfg.samples, cfg.seed)
    curve = LocalWidthCurve(body, s)
    theta = np.asarray(cfg.options.get("theta", np.zeros(body.dim)), dtype=float)
    rc = risk_curve(body, theta, cfg.sigmas, s, curve=curve)
    rows = []
    for k, sig in enumerate(rc.sigmas):
        rows.append([body.kind, body.dim, s.n, s.seed, sig, rc.lse_risk[k],
                     rc.lse_variance[k], rc.proj_moment[k], rc.r_sigma[k],
                     trivial_lower(body, sig)])
    _csv(["kind", "dim", "n", "seed", "sigma", "lse_risk", "lse_variance",
          "proj_second_moment", "r_sigma", "trivial_lower"], rows, cfg.out)
    checks = {}
    for sig in cfg.sigmas:
        checks[format_float(sig)] = {
            "chatterjee": check_chatterjee(body, sig, s, curve=curve),
            "small_sigma": check_small_sigma(body, sig, s, curve=curve),
            "stein": stein_check(body, sig, sample_set(body.dim, min(s.n, 20000),
                                                       cfg.seed + 1)),
        }
    if cfg.options.get("checks_out"):
        _json_report(checks, cfg, cfg.options["checks_out"])
    return 0


def cmd_verify_all(cfg):
    results = acceptance.run_all(seed=cfg.seed)
    payload = [r.as_dict() for r in results]
    doc = {"config": cfg.echo(), "code_version": code_version(), "criteria": payload}
    text = json.dumps(doc, indent=2, sort_keys=True, default=_coerce) + "\n"
    out = cfg.out or "verify_all.json"
    Path(out).write_text(text)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  criterion {r.cid:>2}  "
              f"{r.name}  ({r.runtime:.1f}s)")
    return 0 if all(r.passed for r in results) else 1


COMMANDS = {
    "width": cmd_width,
    "fixed-point": cmd_fixed_point,
    "decompose": cmd_decompose,
    "intrinsic": cmd_intrinsic,
    "wills": cmd_wills,
    "peak-index": cmd_peak_index,
    "variational": cmd_variational,
    "l1-profile": cmd_l1_profile,
    "entropy": cmd_entropy,
    "gsm": cmd_gsm,
    "verify-all": cmd_verify_all,
}


def main(argv=None):
    parser = argparse.ArgumentParser(prog="gwlab",
                                     description="Gaussian-width decomposition laboratory")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON experiment config")
    parser.add_argument("--seed", type=int, help="override config seed")
    parser.add_argument("--samples", type=int, help="override sample count")
    parser.add_argument("--out", help="override output path")
    args = parser.parse_args(argv)
    try:
        cfg = (ExperimentConfig.from_file(args.config) if args.config
               else ExperimentConfig())
        if args.seed is not None:
            cfg.seed = args.seed
        if args.samples is not None:
            cfg.samples = args.samples
        if args.out is not None:
            cfg.out = args.out
        cfg.validate()
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except AssertionError as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
