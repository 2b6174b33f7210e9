"""Command-line front end: ``isacdesign {design,montecarlo,sweep,image}``.

Exit codes: 0 converged (or campaign finished), 2 stopped at the outer
iteration cap without meeting the stopping rule, 1 error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import alm, campaign
from .config import ConfigError, load_config, load_scene
from .evaluation import form_image, image_snr_noise_var, simulate_echo
from .feasibility import InfeasibleError
from .model import ProblemConfig, angle_grid, sample_problem

log = logging.getLogger("isacdesign")

EXIT_OK, EXIT_ERROR, EXIT_MAXITER = 0, 1, 2
TRACE_HEADER = ["iter", "alf", "v", "e", "rho", "sum_rate", "bp_mse", "max_sidelobe", "inner_sweeps"]
SWEEP_HEADER = ["value", "seed", "sum_rate", "bp_mse", "max_sidelobe", "iters", "converged"]


# ---------------------------------------------------------------- file output


def atomic_write(path: Path, data: str | bytes) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix="." + path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def complex_csv(M: np.ndarray) -> str:
    """Complex matrix as CSV, each entry written as a ``re,im`` column pair."""
    M = np.atleast_2d(M)
    header = [f"{p}{j}" for j in range(M.shape[1]) for p in ("re", "im")]
    rows = [[x for z in row for x in (z.real, z.imag)] for row in M]
    return csv_text(header, rows)


def read_complex_csv(path) -> np.ndarray:
    with open(path) as fh:
        rows = list(csv.reader(fh))[1:]
    A = np.array([[float(x) for x in r] for r in rows])
    return A[:, 0::2] + 1j * A[:, 1::2]


def pgm_bytes(values: np.ndarray) -> bytes:
    """8-bit binary PGM, linear min-max scaling; a constant image maps to zeros."""
    v = np.asarray(values, dtype=float)
    lo, hi = float(v.min()), float(v.max())
    g = np.zeros(v.shape, dtype=np.uint8) if hi <= lo else np.round(255 * (v - lo) / (hi - lo)).astype(np.uint8)
    h, w = g.shape
    return f"P5\n{w} {h}\n255\n".encode() + g.tobytes()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_fmt_json) + "\n"


def _fmt_json(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(type(v))


def _finite(v):
    return None if v is None or not np.isfinite(v) else float(v)


# ---------------------------------------------------------------- commands


def _config(args) -> ProblemConfig:
    cfg = load_config(args.config) if args.config else ProblemConfig()
    if getattr(args, "fixed_penalty", False):
        cfg = cfg.replace(gamma=1.0)
    if getattr(args, "squarem", False):
        cfg = cfg.replace(squarem=True)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def write_design(out: Path, data, z, rep) -> None:
    rows = [r for r in rep.rows()]
    atomic_write(out / "trace.csv", csv_text(TRACE_HEADER, rows))
    atomic_write(out / "X.csv", complex_csv(z.X))
    atomic_write(out / "F.csv", complex_csv(z.F))
    summary = {
        "converged": bool(rep.converged),
        "outer_iters": rep.outer_iters,
        "seed": data.cfg.seed,
        "final": {
            "alf": rep.alf_trace[-1], "v": rep.v_trace[-1], "e": rep.e_trace[-1],
            "rho": rep.rho_trace[-1], "sum_rate": rep.rate_trace[-1],
            "bp_mse": rep.bpmse_trace[-1], "max_sidelobe": rep.maxsl_trace[-1],
        },
        "xi": data.xi,
        "stop_threshold": alm.stop_threshold(data),
        "zeta": rep.zeta,
        "zeta_ok": rep.zeta_ok,
        "inner_within_10": float(np.mean(np.asarray(rep.inner_iters) <= 10)),
        "wall_time_s": rep.wall_time,
    }
    atomic_write(out / "summary.json", _json(summary))


def cmd_design(args) -> int:
    cfg = _config(args)
    data = sample_problem(cfg)
    z, rep = alm.run(data)
    write_design(Path(args.out), data, z, rep)
    log.info("design %s after %d outer iterations (max sidelobe %.4g, xi %.4g)",
             "converged" if rep.converged else "stopped", rep.outer_iters,
             rep.maxsl_trace[-1], data.xi)
    return EXIT_OK if rep.converged else EXIT_MAXITER


def _seed_rows(results):
    return [(r.seed, r.converged, r.outer_iters, r.sum_rate, r.bp_mse, r.max_sidelobe, r.v, r.e,
             r.wall_time, r.error or "") for r in results]


def cmd_montecarlo(args) -> int:
    cfg = _config(args)
    if args.seeds < 1:
        raise ConfigError("--seeds must be >= 1")
    out = Path(args.out)
    seeds = range(cfg.seed, cfg.seed + args.seeds)
    t0 = time.perf_counter()
    results = campaign.run_campaign(cfg, seeds, args.workers)
    atomic_write(out / "seeds.csv", csv_text(
        ["seed", "converged", "outer_iters", "sum_rate", "bp_mse", "max_sidelobe", "v", "e",
         "wall_time", "error"], _seed_rows(results)))
    curves = campaign.aggregate_curves(results)
    names = list(curves)
    atomic_write(out / "curves.csv", csv_text(names, zip(*(curves[n] for n in names))))
    sweeps, counts = campaign.inner_histogram(results)
    atomic_write(out / "inner_hist.csv", csv_text(["sweeps", "count"], zip(sweeps, counts)))
    ok = [r for r in results if r.ok]
    summary = {
        "n_seeds": len(results),
        "n_ok": len(ok),
        "n_converged": sum(r.converged for r in ok),
        "inner_within_10": _finite(campaign.inner_fraction_within(results, 10)),
        "constraint_met": sum(r.max_sidelobe <= r.xi * 1.01 for r in ok),
        "mean_final": {k: _finite(np.mean([getattr(r, k) for r in ok])) if ok else None
                       for k in ("sum_rate", "bp_mse", "max_sidelobe", "outer_iters")},
        "errors": {str(r.seed): r.error for r in results if not r.ok},
        "wall_time_s": time.perf_counter() - t0,
    }
    atomic_write(out / "summary.json", _json(summary))
    log.info("%d/%d runs converged", summary["n_converged"], len(results))
    return EXIT_OK if ok else EXIT_ERROR


def _values(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--values must be a comma-separated list of numbers, got {text!r}") from None


def cmd_sweep(args) -> int:
    cfg = _config(args)
    values = _values(args.values)
    if not values:
        raise ConfigError("--values is empty")
    for v in values:  # reject bad values before any design runs
        try:
            campaign.apply_axis(cfg, args.axis, v)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    seeds = range(cfg.seed, cfg.seed + args.seeds)
    rows = campaign.run_sweep(cfg, args.axis, values, seeds, args.workers)
    header = [args.axis] + SWEEP_HEADER[1:]
    atomic_write(Path(args.out) / "sweep.csv", csv_text(header, [
        (v, r.seed, r.sum_rate, r.bp_mse, r.max_sidelobe, r.outer_iters, r.converged) for v, r in rows]))
    ok = [r for _, r in rows if r.ok]
    if not ok:
        return EXIT_ERROR
    return EXIT_OK if all(r.converged for r in ok) else EXIT_MAXITER


def cmd_image(args) -> int:
    cfg = _config(args)
    noise = image_snr_noise_var(args.snr_db, cfg.n_tx, cfg.p_x)
    try:
        scene = load_scene(args.scene, noise_var=noise, k_scene=cfg.k_max)
    except OSError as exc:
        raise ConfigError(f"cannot read scene file: {exc}") from None
    code = EXIT_OK
    if args.design:
        X = read_complex_csv(Path(args.design) / "X.csv")
        F = read_complex_csv(Path(args.design) / "F.csv")
        if X.shape != (cfg.n_tx, cfg.block_len) or F.shape != (cfg.n_rx, cfg.block_len):
            raise ConfigError("stored design does not match the configuration dimensions")
    else:
        data = sample_problem(cfg)
        z, rep = alm.run(data)
        X, F = z.X, z.F
        write_design(Path(args.out), data, z, rep)
        code = EXIT_OK if rep.converged else EXIT_MAXITER
    rng = np.random.default_rng([cfg.seed, 2])
    echo = simulate_echo(scene, X, cfg.n_rx, cfg.lags, rng=rng)
    img = form_image(echo, F, angle_grid())
    deg = np.rad2deg(img.angles)
    header = ["angle_deg"] + [f"bin{b}" for b in img.bins]
    atomic_write(Path(args.out) / "image.csv",
                 csv_text(header, [[a, *row] for a, row in zip(deg, img.values)]))
    atomic_write(Path(args.out) / "image.pgm", pgm_bytes(img.values))
    return code


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="isacdesign", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="flat key = value config file (default: built-in defaults)")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--fixed-penalty", action="store_true", help="keep rho constant (gamma = 1)")
        sp.add_argument("--squarem", action="store_true", help="enable SQUAREM acceleration")

    common(sub.add_parser("design", help="single design"))
    mc = sub.add_parser("montecarlo", help="seeded Monte-Carlo campaign")
    common(mc)
    mc.add_argument("--seeds", type=int, default=20)
    mc.add_argument("--workers", type=int, default=1)
    sw = sub.add_parser("sweep", help="parameter sweep")
    common(sw)
    sw.add_argument("--axis", required=True, choices=campaign.SWEEP_AXES)
    sw.add_argument("--values", required=True, help="comma-separated values")
    sw.add_argument("--seeds", type=int, default=1)
    sw.add_argument("--workers", type=int, default=1)
    im = sub.add_parser("image", help="simulate echoes and form a radar image")
    common(im)
    im.add_argument("--scene", required=True, help="scene file: 'bin angle_deg amp_re amp_im' per line")
    im.add_argument("--snr-db", type=float, default=15.0, help="echo SNR in dB ('inf' for no noise)")
    im.add_argument("--design", help="directory with X.csv and F.csv from a previous design")
    return p


COMMANDS = {"design": cmd_design, "montecarlo": cmd_montecarlo, "sweep": cmd_sweep, "image": cmd_image}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, InfeasibleError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
