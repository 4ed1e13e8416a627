"""Command line: ``dpareto run CONFIG``, ``dpareto account ...``, ``dpareto analyze ...``.

Exit codes: 0 success, 2 configuration or input error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import logging
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__, privacy
from .acquisition import AcquisitionConfig, acquisition_grid
from .config import (ConfigError, acquisition_config, build_problem, gp_config, load_config,
                     sampling_distribution)
from .core import LogFormatError, RngStream, read_log, write_log
from .driver import (compare_hv, dpareto_run, fit_surrogates, grid_search_run, hv_trajectory,
                     random_search_run, split_chunks, transformed_front, variability_fronts)
from .pareto import AntiIdealPoint, hypervolume, pareto_front

logger = logging.getLogger("dpareto")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def fmt(x: float) -> str:
    """Shortest round-trip decimal without exponent; integers lose the '.0'."""
    return np.format_float_positional(float(x), trim="-")


def _write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([r if isinstance(r, str) else repr(float(r)) for r in row])


def _front_rows(front):
    return [(p.epsilon, p.error) for p in front]


def write_artifacts(out: Path, evaluations, anti_ideal) -> None:
    front = pareto_front(ev.objectives for ev in evaluations)
    _write_csv(out / "front.csv", ["epsilon", "error"], _front_rows(front))
    _write_csv(out / "trajectory.csv", ["index", "hypervolume"],
               [(str(i), hv) for i, hv in hv_trajectory(evaluations, anti_ideal)])
    if evaluations and all(ev.per_run_utilities for ev in evaluations):
        rows = []
        for kind, f in zip(("best", "mean", "worst"), variability_fronts(evaluations)):
            rows.extend((p.epsilon, p.error, kind) for p in f)
        _write_csv(out / "variability.csv", ["epsilon", "error", "kind"], rows)


def _read_failures(path: Path) -> list[int]:
    if not path.exists():
        return []
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                try:
                    out.append(int(json.loads(line)["index"]))
                except (ValueError, KeyError, TypeError):
                    break  # partial tail from an interrupted write
    return out


def _manifest(cfg, status, n_evals=0, n_skipped=0, hv=None) -> dict:
    return {
        "config_sha256": cfg.digest(),
        "seed": cfg.seed,
        "problem": cfg.problem,
        "method": cfg.method,
        "status": status,
        "n_evaluations": n_evals,
        "n_skipped": n_skipped,
        "hypervolume": hv,
        "versions": {
            "dpareto": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "written_at": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
    }


def _dump_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_experiment(cfg) -> int:
    problem = build_problem(cfg)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    evals_path, failures_path, manifest_path = out / "evals.jsonl", out / "failures.jsonl", out / "manifest.json"

    if manifest_path.exists():
        old = json.loads(manifest_path.read_text(encoding="utf-8"))
        if old.get("config_sha256") != cfg.digest():
            raise ConfigError("output", f"{out} holds a run with a different config; choose another output")
    prior = read_log(evals_path, drop_partial_tail=True) if evals_path.exists() else []
    if prior and any(ev.method != cfg.method for ev in prior):
        raise ConfigError("method", f"{evals_path} was written by a different method")
    # Rewrite so a dropped partial line does not corrupt later appends.
    write_log(evals_path, prior)
    skipped = _read_failures(failures_path)
    with open(failures_path, "w", encoding="utf-8") as fh:
        fh.writelines(json.dumps({"index": i}) + "\n" for i in skipped)
    if prior or skipped:
        logger.info("resuming at evaluation %d", len(prior) + len(skipped) + 1)
    _dump_json(manifest_path, _manifest(cfg, "running", len(prior), len(skipped)))

    rng = RngStream(cfg.seed)
    with open(evals_path, "a", encoding="utf-8") as log, open(failures_path, "a", encoding="utf-8") as flog:
        def on_evaluation(ev):
            log.write(ev.to_json() + "\n")
            log.flush()

        def on_skip(index):
            flog.write(json.dumps({"index": index}) + "\n")
            flog.flush()

        hooks = dict(prior=prior, skipped=skipped, on_evaluation=on_evaluation, on_skip=on_skip)
        if cfg.method == "bo":
            acq = AcquisitionConfig(**acquisition_config(cfg))
            result = dpareto_run(problem, cfg.k0, cfg.k, acq, rng, gp_config=gp_config(cfg), **hooks)
        elif cfg.method == "random":
            result = random_search_run(problem, sampling_distribution(cfg), cfg.budget, rng, **hooks)
        else:
            result = grid_search_run(problem, cfg.points_per_dim, rng, **hooks)

    write_artifacts(out, result.evaluations, problem.anti_ideal)
    if cfg.export_surface:
        export_surface(out / "surface.csv", problem, result.evaluations, cfg)
    _dump_json(manifest_path, _manifest(cfg, "complete", len(result.evaluations), len(result.skipped),
                                        result.hypervolume))
    if not result.evaluations:
        logger.error("every evaluation failed")
        return EXIT_RUNTIME
    print(f"{len(result.evaluations)} evaluations, {len(result.skipped)} skipped, "
          f"hypervolume {fmt(result.hypervolume)}; outputs in {out}")
    return EXIT_OK


def export_surface(path, problem, evaluations, cfg, points_per_dim: int = 50) -> None:
    """HVPoI and PoI over a 2-D domain given all evaluations, for plotting."""
    domain = problem.domain
    if len(domain) != 2 or len(evaluations) < 2:
        logger.warning("surface export needs a 2-D domain and two evaluations; skipped")
        return
    models = fit_surrogates(domain, evaluations, seed=cfg.seed, gp_config=gp_config(cfg))
    front, v_t = transformed_front(evaluations, problem.anti_ideal)
    U, values, pois = acquisition_grid(models, front, v_t, points_per_dim)
    rows = [(*_relaxed_values(domain, u), a, p) for u, a, p in zip(U, values, pois)]
    _write_csv(path, [*domain.names, "hvpoi", "poi"], rows)


def _relaxed_values(domain, u):
    # Surfaces are drawn over the continuous relaxation, integral dims unrounded.
    out = []
    for d, ui in zip(domain, u):
        if d.scale == "log":
            out.append(float(np.exp(np.log(d.low) + ui * (np.log(d.high) - np.log(d.low)))))
        else:
            out.append(d.low + ui * (d.high - d.low))
    return out


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    return run_experiment(cfg)


def cmd_account(args) -> int:
    if args.mechanism == "svt":
        value = privacy.svt_epsilon(args.b, args.C)
    elif args.mechanism == "gaussian":
        value = privacy.gaussian_mechanism_epsilon(args.sigma, args.sens, args.delta)
    elif args.mechanism == "dpsgd":
        value = privacy.dpsgd_privacy_oracle(args.m, args.T, args.sigma, args.n, args.delta)
    else:
        value = privacy.output_perturbation_epsilon(args.sigma, args.reg, args.n, args.delta)
    print(fmt(value))
    return EXIT_OK


def _anti_ideal(text: str) -> AntiIdealPoint:
    try:
        e, r = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected EPS,ERR, got {text!r}") from None
    return AntiIdealPoint(e, r)


def _emit(args, header, rows) -> None:
    if args.output:
        _write_csv(args.output, header, rows)
        return
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([r if isinstance(r, str) else repr(float(r)) for r in row])


def cmd_analyze(args) -> int:
    logs = [read_log(p) for p in args.logs]
    if args.what == "compare":
        if len(logs) < 2:
            raise ConfigError("logs", "compare needs a BO log and random logs")
        bo, randoms = logs[0], logs[1:]
        if args.chunk_size:
            randoms = [c for log in randoms for c in split_chunks(log, args.chunk_size)]
        if len(randoms) < 2:
            raise ConfigError("logs", "compare needs at least two random chunks")
        res = compare_hv(bo, randoms, args.anti_ideal)
        lo, hi = res.ci95
        print(f"mean_diff {fmt(res.mean_diff)}")
        print(f"ci95 {fmt(lo)} {fmt(hi)}")
        print(f"t_stat {fmt(res.t_stat)}")
        print(f"p_value {res.p_value:.6g}")
        print(f"significant {'yes' if res.significant else 'no'}")
        if res.degenerate:
            print("degenerate zero-variance differences; t reported as 0")
        return EXIT_OK
    evaluations = [ev for log in logs for ev in log]
    if args.what == "front":
        _emit(args, ["epsilon", "error"], _front_rows(pareto_front(ev.objectives for ev in evaluations)))
    elif args.what == "hv":
        print(fmt(hypervolume(pareto_front(ev.objectives for ev in evaluations), args.anti_ideal)))
    elif args.what == "trajectory":
        _emit(args, ["index", "hypervolume"],
              [(str(i), hv) for i, hv in hv_trajectory(evaluations, args.anti_ideal)])
    elif args.what == "variability":
        try:
            fronts = variability_fronts(evaluations)
        except ValueError as exc:
            raise ConfigError("logs", str(exc)) from None
        rows = [(p.epsilon, p.error, kind) for kind, f in zip(("best", "mean", "worst"), fronts) for p in f]
        _emit(args, ["epsilon", "error", "kind"], rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpareto", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment from a YAML config")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("account", help="evaluate a privacy oracle")
    acc = p.add_subparsers(dest="mechanism", required=True)
    a = acc.add_parser("svt", help="sparse vector technique")
    a.add_argument("--b", type=float, required=True)
    a.add_argument("--C", type=float, required=True)
    a = acc.add_parser("gaussian", help="analytic Gaussian mechanism")
    a.add_argument("--sigma", type=float, required=True)
    a.add_argument("--sens", type=float, default=1.0)
    a.add_argument("--delta", type=float, required=True)
    a = acc.add_parser("dpsgd", help="noisy clipped-gradient training (RDP accountant)")
    a.add_argument("--n", type=int, required=True)
    a.add_argument("--m", type=int, required=True)
    a.add_argument("--T", type=int, required=True)
    a.add_argument("--sigma", type=float, required=True, help="noise multiplier")
    a.add_argument("--delta", type=float, required=True)
    a = acc.add_parser("output", help="output-perturbed logistic regression")
    a.add_argument("--sigma", type=float, required=True)
    a.add_argument("--reg", type=float, required=True)
    a.add_argument("--n", type=int, required=True)
    a.add_argument("--delta", type=float, default=1e-6)
    p.set_defaults(func=cmd_account)

    p = sub.add_parser("analyze", help="recompute statistics from evaluation logs")
    p.add_argument("what", choices=["front", "hv", "trajectory", "variability", "compare"])
    p.add_argument("logs", nargs="+", help="evals.jsonl files (compare: BO log first)")
    p.add_argument("--anti-ideal", type=_anti_ideal, default=AntiIdealPoint(10.0, 1.0))
    p.add_argument("--chunk-size", type=int, default=None,
                   help="compare: cut random logs into chunks of this many evaluations")
    p.add_argument("-o", "--output", help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, LogFormatError, privacy.PrivacyDomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
