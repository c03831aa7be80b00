"""Command-line experiment driver.

``cdinterp run <experiment> [--config FILE] [--jobs N] [--output DIR] [--seed N]``
runs one experiment and writes CSV tables (with the thresholds they were
checked against), plotting-hint sidecars, dataset files, and an
``acceptance.json`` report. ``cdinterp validate --config FILE`` checks a
configuration without running it.

Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import contextlib
import json
import logging
import os
import pickle
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import rom1d, synthetic
from .cdi import (CdiModel, convex_interpolation, fe_matrices, field_norm, optimal_s,
                  sort_training_clouds, two_field_cdi)
from .config import (EXPERIMENTS, ConfigError, load_config, registration_config, sensor_config,
                     validate)
from .core import Snapshot, TrainingDataset, save_dataset
from .regression import CloudRegressor

log = logging.getLogger("cdinterp")


class StageError(RuntimeError):
    pass


@contextlib.contextmanager
def stage(module, operation):
    """Re-raise failures with the module and operation that produced them."""
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(f"{module}.{operation}: {type(exc).__name__}: {exc}") from exc


def pmap(fn, items, jobs):
    """Ordered map over ``items``, in a process pool when ``jobs > 1``.

    The serial path round-trips items through pickle like the pool does:
    array layout after unpickling can change floating-point summation
    order, and outputs must not depend on ``--jobs``.
    """
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(pickle.loads(pickle.dumps(it))) for it in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as ex:
        return list(ex.map(fn, items))


# --------------------------------------------------------------------------
# Output helpers
# --------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, columns, rows, thresholds=None, plot=None):
    """CSV with ``#``-prefixed threshold lines and a ``.plot.json`` sidecar."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for name, text in (thresholds or {}).items():
            fh.write(f"# threshold {name}: {text}\n")
        fh.write(",".join(columns) + "\n")
        for r in rows:
            fh.write(",".join(_fmt(r[c]) for c in columns) + "\n")
    if plot is not None:
        write_json(path + ".plot.json", plot)


def write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, (np.floating, float)):
        f = float(o)
        return f if np.isfinite(f) else str(f)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    return o


def check(name, value, threshold, passed):
    return {"name": name, "value": value, "threshold": threshold, "passed": bool(passed)}


def _sigma_tag(sigma):
    return f"{sigma:g}"


# --------------------------------------------------------------------------
# motivating / data_augmentation
# --------------------------------------------------------------------------

MOTIVATING_COLUMNS = ["mu", "rom_err_n5", "rom_err_n10", "rom_err_n15", "cdi_err", "da_err"]


def _motivating_chunk(args):
    sigma, n_train, mus, pod_sizes = args
    return rom1d.run_motivating(sigma, n_train, pod_sizes=pod_sizes, mus=mus)[0]


def run_motivating(cfg, jobs, out):
    m = cfg["motivating"]
    checks, summaries = [], {}
    for sigma in _as_list(m["sigma"]):
        sigma = float(sigma)
        mus = rom1d.query_parameters(m["n_test"])
        chunks = [c for c in np.array_split(mus, max(jobs, 1)) if c.size]
        with stage("rom1d", "run_motivating"):
            parts = pmap(_motivating_chunk,
                         [(sigma, m["n_train"], c, tuple(m["pod_sizes"])) for c in chunks], jobs)
        rows = [r for part in parts for r in part]
        summary = rom1d.summarize_motivating(rows)
        summaries[_sigma_tag(sigma)] = summary
        cols = [c for c in MOTIVATING_COLUMNS if c in rows[0]]
        tag = _sigma_tag(sigma)
        write_csv(os.path.join(out, f"motivating_sigma{tag}.csv"), cols, rows,
                  thresholds={"cdi_err": "worst < 0.005",
                              "rom_err_n15": "worst in [0.05, 0.5] for sigma <= 1e-3",
                              "da_err": "worst <= 0.5 * worst cdi_err",
                              "cea_ratio": f"<= {rom1d.CEA_CONSTANT!r} + 1e-8"},
                  plot={"x": "mu", "y": cols[1:], "yscale": "log",
                        "title": f"relative H1 error, sigma={tag}"})
        with stage("rom1d", "solve_poisson"):
            mesh = rom1d.Mesh1D.for_sigma(sigma)
            train = rom1d.training_parameters(m["n_train"])
            snaps = [rom1d.solve_poisson(rom1d.PoissonProblem(mu, sigma), mesh) for mu in train]
            save_dataset(TrainingDataset(train[:, None], tuple(snaps), grid=mesh.grid),
                         os.path.join(out, f"dataset_motivating_sigma{tag}.txt"))
        cdi_w = summary["worst_cdi_err"]
        checks.append(check(f"cdi_worst_below_0.5pct[sigma={tag}]", cdi_w, 0.005, cdi_w < 0.005))
        if sigma <= 1e-3 and "worst_rom_err_n15" in summary:
            w15 = summary["worst_rom_err_n15"]
            checks.append(check(f"pod15_worst_in_band[sigma={tag}]", w15, [0.05, 0.5],
                                0.05 <= w15 <= 0.5))
            if "worst_rom_err_n10" in summary:
                w10 = summary["worst_rom_err_n10"]
                dec = (w10 - w15) / w10
                checks.append(check(f"pod10_to_15_decrease_at_most_20pct[sigma={tag}]", dec, 0.2,
                                    dec <= 0.2))
        da = summary["worst_da_err"]
        checks.append(check(f"augmented_worst_at_most_half_cdi[sigma={tag}]", da / cdi_w, 0.5,
                            da <= 0.5 * cdi_w))
        ratio = summary["max_cea_ratio"]
        checks.append(check(f"cea_ratio[sigma={tag}]", ratio, rom1d.CEA_CONSTANT + 1e-8,
                            ratio <= rom1d.CEA_CONSTANT + 1e-8))
    return checks, {"motivating": summaries}


def _augmentation_item(args):
    sigma, a = args
    return rom1d.run_augmentation(sigma, a["n_train"], a["n_test"], a["n_aug"], a["sizes"])


def run_data_augmentation(cfg, jobs, out):
    a = cfg["augmentation"]
    sigmas = [float(s) for s in _as_list(a["sigma"])]
    with stage("rom1d", "augmented_space"):
        results = pmap(_augmentation_item, [(s, a) for s in sigmas], jobs)
    checks, summary = [], {}
    for sigma, rows in zip(sigmas, results):
        tag = _sigma_tag(sigma)
        write_csv(os.path.join(out, f"augmentation_sigma{tag}.csv"), ["n", "pod_worst", "da_worst"],
                  rows, thresholds={"da_worst": "largest n: <= pod_worst"},
                  plot={"x": "n", "y": ["pod_worst", "da_worst"], "yscale": "log"})
        last = rows[-1]
        checks.append(check(f"augmentation_improves[sigma={tag}]", last["da_worst"],
                            last["pod_worst"], last["da_worst"] <= last["pod_worst"]))
        summary[tag] = rows
    return checks, {"augmentation": summary}


# --------------------------------------------------------------------------
# synthetic experiments
# --------------------------------------------------------------------------

def _family(block):
    return synthetic.make_family(block["family"], block["motion"])


def _train_model(cfg, family, grid, params):
    sensor = sensor_config(cfg, family.default_sensor)
    with stage("synthetic", "build_dataset"):
        ds, raw = synthetic.build_dataset(family, params, grid, sensor)
    with stage("psr", "match_clouds"):
        k, sorted_clouds, parts = sort_training_clouds(ds.parameters, raw)
    ds = ds.with_sorted_clouds(sorted_clouds)
    reg = cfg["regression"]
    with stage("regression", "fit"):
        model = CdiModel(ds, registration_config(cfg), min(cfg["cdi"]["kappa"], len(ds)),
                         cfg["cdi"]["p"],
                         CloudRegressor(reg["mode"], r2_threshold=reg["r2_threshold"],
                                        guard_factor=reg["guard_factor"]), parts)
    return model, k, raw


def _model_summary(model, template_index, raw):
    r = model.regressor
    out = {"template_index": template_index, "template_size": len(model.dataset.sorted_clouds[0]),
           "raw_cloud_sizes": [len(c) for c in raw], "regression_mode": r.mode_,
           "kappa": model.kappa, "p": model.p, "registration": model.registration.method}
    if r.mode_ == "rbf":
        m = r.model_
        out.update(r2=m.r2, kept_modes=m.kept_mask, ridge=m.lams, width=m.widths)
    return out


def _sweep_item(args):
    model, mu, exact, mats = args
    est = model.estimate([mu])
    w = est.weights
    ci = sum(wn * model.dataset.snapshots[n].values for n, wn in zip(est.neighbors, w))
    nrm = field_norm(exact, model.grid, "L2", mats)
    mism = max((d.get("cloud_mismatch", 0.0) for d in est.diagnostics), default=0.0)
    return {"mu": float(mu),
            "cdi_l2_err": field_norm(est.values - exact, model.grid, "L2", mats) / nrm,
            "ci_l2_err": field_norm(ci - exact, model.grid, "L2", mats) / nrm,
            "cloud_mismatch_max": float(mism),
            "min": est.values.min(axis=0), "max": est.values.max(axis=0)}


def _transformed_model(model, sign, shift):
    ds = model.dataset
    params = sign * ds.parameters + shift
    snaps = tuple(Snapshot(params[k], s.values, s.component_names)
                  for k, s in enumerate(ds.snapshots))
    tds = TrainingDataset(params, snaps, ds.sorted_clouds, ds.grid)
    r = model.regressor
    return CdiModel(tds, model.registration, model.kappa, model.p,
                    CloudRegressor(r.mode, r.lam_grid, r.width_grid, r.r2_threshold,
                                   r.guard_factor), model.partitions)


def run_synthetic_sweep(cfg, jobs, out):
    s = cfg["synthetic"]
    fam = _family(s)
    grid = fam.grid(tuple(s["resolution"]) if s["resolution"] else None)
    lo, hi = fam.param_range
    params = np.linspace(lo, hi, s["n_train"])
    model, k, raw = _train_model(cfg, fam, grid, params)
    mus = np.linspace(lo, hi, s["n_test"] + 2)[1:-1]
    mats = fe_matrices(grid)
    exact = [synthetic.exact_solution(fam, m, grid).values for m in mus]
    with stage("cdi", "cdi_estimate"):
        rows = pmap(_sweep_item, [(model, m, e, mats) for m, e in zip(mus, exact)], jobs)
    cols = ["mu", "cdi_l2_err", "ci_l2_err", "cloud_mismatch_max"]
    write_csv(os.path.join(out, f"synthetic_sweep_{fam.kind}.csv"), cols, rows,
              thresholds={"cdi_l2_err": "reported; compared against ci_l2_err"},
              plot={"x": "mu", "y": ["cdi_l2_err", "ci_l2_err"], "yscale": "log"})
    save_dataset(model.dataset, os.path.join(out, f"dataset_{fam.kind}.txt"))
    write_json(os.path.join(out, "model_summary.json"), _model_summary(model, k, raw))

    checks = []
    with stage("cdi", "interpolation_property"):
        exact_hits = all(np.array_equal(model.estimate(p).values, model.dataset.snapshots[i].values)
                         for i, p in enumerate(model.parameters))
    checks.append(check("interpolation_property", exact_hits, "bitwise equal", exact_hits))
    vals = np.stack([sn.values for sn in model.dataset.snapshots])
    hi_b, lo_b = vals.max(axis=(0, 1)), vals.min(axis=(0, 1))
    over = max(float(np.max(r["max"] - hi_b)) for r in rows)
    under = max(float(np.max(lo_b - r["min"])) for r in rows)
    checks.append(check("maximum_principle", over, 1e-12, over <= 1e-12))
    checks.append(check("minimum_principle", under, 1e-12, under <= 1e-12))

    rng = np.random.default_rng(int(cfg["seed"]))
    worst_w, worst_f, same_nbrs = 0.0, 0.0, True
    probe = mus[: min(2, len(mus))]
    base = [model.estimate([m]) for m in probe]
    with stage("cdi", "frame_indifference"):
        for _ in range(int(s["frame_checks"])):
            sign = float(rng.choice([-1.0, 1.0]))
            shift = float(rng.uniform(-10, 10))
            tm = _transformed_model(model, sign, shift)
            for m, b in zip(probe, base):
                e = tm.estimate([sign * m + shift])
                same_nbrs &= list(e.neighbors) == list(b.neighbors)
                worst_w = max(worst_w, float(np.abs(e.weights - b.weights).max()))
                worst_f = max(worst_f, float(np.abs(e.values - b.values).max()))
    checks.append(check("frame_indifference_neighbors", same_nbrs, "identical", same_nbrs))
    checks.append(check("frame_indifference_weights", worst_w, 1e-12, worst_w <= 1e-12))
    checks.append(check("frame_indifference_fields", worst_f, 1e-12, worst_f <= 1e-12))
    summary = {"worst_cdi_l2_err": max(r["cdi_l2_err"] for r in rows),
               "worst_ci_l2_err": max(r["ci_l2_err"] for r in rows)}
    return checks, {"synthetic_sweep": summary}


def _two_field_item(args):
    (u0, u1, c0, c1, grid, reg, ut, norm, s_grid, opt_res, mats) = args
    nrm = field_norm(ut, grid, norm, mats)
    rows = []
    for s in s_grid:
        est = two_field_cdi(u0, u1, c0, c1, float(s), grid, reg)
        ci = convex_interpolation(u0, u1, float(s))
        rows.append({"s": float(s), "cdi_err": field_norm(est - ut, grid, norm, mats) / nrm,
                     "ci_err": field_norm(ci - ut, grid, norm, mats) / nrm})
    s_opt, e_opt = optimal_s(ut, u0, u1, c0, c1, grid, norm, opt_res, reg)
    # least-squares optimum of the affine blend
    M, K = mats
    G = M + K if norm == "H1" else M
    d = (u1 - u0).ravel()
    r0 = (ut - u0).ravel()
    s_ci = float(np.clip((r0 @ (G @ d)) / max(d @ (G @ d), 1e-300), 0.0, 1.0))
    e_ci = field_norm(convex_interpolation(u0, u1, s_ci) - ut, grid, norm, mats) / nrm
    return rows, {"s_opt_cdi": s_opt, "cdi_err_at_sopt": e_opt / nrm,
                  "s_opt_ci": s_ci, "ci_err_at_sopt": e_ci}


def _two_field_setup(cfg, fam, grid, mu0, mu1):
    sensor = sensor_config(cfg, fam.default_sensor)
    ds, raw = synthetic.build_dataset(fam, [mu0, mu1], grid, sensor)
    _, clouds, _ = sort_training_clouds(ds.parameters, raw)
    return ds.snapshots[0].values, ds.snapshots[1].values, clouds[0].points, clouds[1].points


def run_two_field_study(cfg, jobs, out):
    t = cfg["two_field"]
    fam = _family(t)
    grid = fam.grid()
    lo, hi = fam.param_range
    mu0 = lo if t["mu0"] is None else float(t["mu0"])
    mu1 = hi if t["mu1"] is None else float(t["mu1"])
    norm = cfg["cdi"]["norm"]
    reg = registration_config(cfg)
    mats = fe_matrices(grid)
    with stage("synthetic", "build_dataset"):
        u0, u1, c0, c1 = _two_field_setup(cfg, fam, grid, mu0, mu1)
    mus = [float(m) for m in t["mus"]]
    s_grid = np.linspace(0.0, 1.0, t["s_resolution"])
    items = [(u0, u1, c0, c1, grid, reg, synthetic.exact_solution(fam, m, grid).values, norm,
              s_grid, t["optimal_s_resolution"], mats) for m in mus]
    with stage("cdi", "optimal_s"):
        results = pmap(_two_field_item, items, jobs)
    grid_rows, opt_rows = [], []
    for m, (rows, opt) in zip(mus, results):
        grid_rows += [{"mu": m, "s": r["s"], "cdi_err": r["cdi_err"], "ci_err": r["ci_err"]}
                      for r in rows]
        opt_rows.append({"mu": m, "s_linear": (m - mu0) / (mu1 - mu0),
                         "s_reference": synthetic.reference_s(fam, m, mu0, mu1), **opt})
    tag = f"{fam.kind}_{fam.motion}"
    write_csv(os.path.join(out, f"two_field_sgrid_{tag}.csv"), ["mu", "s", "cdi_err", "ci_err"],
              grid_rows, thresholds={"cdi_err": f"relative {norm} error; compared to ci_err"},
              plot={"x": "s", "y": ["cdi_err", "ci_err"], "group": "mu", "yscale": "log"})
    write_csv(os.path.join(out, f"two_field_sopt_{tag}.csv"),
              ["mu", "s_linear", "s_reference", "s_opt_cdi", "cdi_err_at_sopt", "s_opt_ci",
               "ci_err_at_sopt"], opt_rows,
              thresholds={"s_opt_cdi": "nonlinear motion: max |s_opt_cdi - s_linear| > 0.05"},
              plot={"x": "mu", "y": ["s_linear", "s_reference", "s_opt_cdi", "s_opt_ci"]})

    checks = []
    dev = max(abs(r["s_opt_cdi"] - r["s_linear"]) for r in opt_rows)
    if fam.motion == "quadratic":
        checks.append(check("s_opt_departs_from_linear", dev, 0.05, dev > 0.05))
    # CDI versus CI at s = 1/2 on the linear-motion front family
    lin = synthetic.make_family("moving_front_2d", "linear")
    lg = lin.grid()
    with stage("cdi", "two_field_cdi"):
        a0, a1, b0, b1 = _two_field_setup(cfg, lin, lg, lin.param_range[0], lin.param_range[1])
        ut = synthetic.exact_solution(lin, 0.5 * sum(lin.param_range), lg).values
        lm = fe_matrices(lg)
        e_cdi = field_norm(two_field_cdi(a0, a1, b0, b1, 0.5, lg, reg) - ut, lg, "L2", lm)
        e_ci = field_norm(convex_interpolation(a0, a1, 0.5) - ut, lg, "L2", lm)
    checks.append(check("front_cdi_below_20pct_of_ci", e_cdi / e_ci, 0.2, e_cdi < 0.2 * e_ci))
    return checks, {"two_field_study": {"max_s_deviation": dev, "s_opt": opt_rows}}


RUNNERS = {
    "motivating": run_motivating,
    "synthetic_sweep": run_synthetic_sweep,
    "two_field_study": run_two_field_study,
    "data_augmentation": run_data_augmentation,
}


def _as_list(x):
    return list(x) if isinstance(x, (list, tuple)) else [x]


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="cdinterp", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment")
    r.add_argument("experiment", nargs="?", choices=EXPERIMENTS)
    r.add_argument("--config", help="YAML experiment configuration")
    r.add_argument("--jobs", type=int, default=1, help="worker processes")
    r.add_argument("--output", help="output directory")
    r.add_argument("--seed", type=int, help="random seed")
    r.add_argument("--sigma", type=float, help="source width for the 1D experiments")
    r.add_argument("--family", choices=synthetic.KINDS, help="synthetic family")
    r.add_argument("-v", "--verbose", action="store_true")
    v = sub.add_parser("validate", help="check a configuration file")
    v.add_argument("--config", required=True)
    return p


def _overrides(args):
    o = {}
    if args.experiment:
        o["experiment"] = args.experiment
    if args.output:
        o["output"] = args.output
    if args.seed is not None:
        o["seed"] = args.seed
    if args.sigma is not None:
        o["motivating"] = {"sigma": [args.sigma]}
        o["augmentation"] = {"sigma": [args.sigma]}
    if args.family:
        o["synthetic"] = {"family": args.family}
        o["two_field"] = {"family": args.family}
    return o


def run(cfg, jobs=1):
    """Run the configured experiment; returns the acceptance report."""
    out = cfg["output"]
    os.makedirs(out, exist_ok=True)
    checks, summary = RUNNERS[cfg["experiment"]](cfg, max(int(jobs), 1), out)
    report = {"experiment": cfg["experiment"], "seed": int(cfg["seed"]), "checks": checks,
              "all_passed": all(c["passed"] for c in checks), "summary": summary}
    write_json(os.path.join(out, "acceptance.json"), report)
    return report


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "validate":
            cfg = load_config(args.config)
        else:
            cfg = load_config(args.config, _overrides(args))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    findings = validate(cfg)
    if args.command == "validate":
        if findings:
            for f in findings:
                print(f"finding: {f}")
            return 2
        print("ok")
        return 0
    if findings:
        for f in findings:
            print(f"config error: {f}", file=sys.stderr)
        return 2
    if args.jobs < 1:
        print("config error: --jobs must be at least 1", file=sys.stderr)
        return 2
    try:
        report = run(cfg, args.jobs)
    except StageError as exc:
        print(f"error in {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - reported with context, nonzero exit
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for c in report["checks"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: {_fmt(c['value'])}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
