"""Command-line surface: generate, fit, sweep, cluster, predict, dendro, eval.

Exit codes: 0 success, 1 runtime or data error, 2 usage error.  All file
outputs are written atomically (temp file then rename).  Outputs carry no
timestamps unless ``--timestamp on`` is passed, so identical invocations
produce byte-identical files.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys
import tempfile

import numpy as np

from . import data as datagen
from .components import classify_dataset, component_model_from_dict
from .measure import Dataset
from .npmle import SolverConfig, fit_npmle
from .selection import default_sigma_grid, run_pipeline, sweep, sweep_table_rows
from .structure import Dendrogram, dendrogram_from_dict, eps_component_count, single_linkage, suggest_k

THREADS_ENV = "LATENTSCALE_THREADS"


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path: str, obj: dict, timestamp: str) -> None:
    if timestamp == "on":
        obj = dict(obj)
        obj["generated_at"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    _atomic_write(path, json.dumps(obj) + "\n")


def _resolve_threads(value: int | None) -> int:
    if value is not None:
        return max(1, value)
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    return 1


def _solver_config(args) -> SolverConfig:
    return SolverConfig(seed=args.seed, max_iter=args.max_iter, dual_tol=args.dual_tol)


def _parse_sigmas(args, data: Dataset) -> np.ndarray:
    if getattr(args, "sigmas", None):
        vals = np.array([float(v) for v in args.sigmas.split(",")])
        if np.any(vals <= 0):
            raise ValueError("sigmas must be positive")
        return vals
    return default_sigma_grid(data, args.grid_count)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_gen(args) -> int:
    spec = datagen.GeneratorSpec(
        name=args.dataset, n=args.n, sigma_true=args.sigma_true, seed=args.seed
    )
    dataset = datagen.generate(spec)
    datagen.save_csv(dataset, args.out)
    datagen.write_generator_sidecar(spec, args.out)
    print(f"wrote {args.out} (n={dataset.n}, d={dataset.d})")
    return 0


def cmd_fit(args) -> int:
    dataset = datagen.load_csv(args.input)
    fit = fit_npmle(dataset, args.sigma, _solver_config(args))
    _write_json(args.out, fit.to_dict(), args.timestamp)
    print(
        f"sigma={fit.sigma:g} atoms={fit.measure.m} loglik={fit.loglik:.6f} "
        f"dual_gap={fit.dual_gap:.3e} converged={fit.converged}"
    )
    return 0


def cmd_sweep(args) -> int:
    dataset = datagen.load_csv(args.input)
    sigmas = _parse_sigmas(args, dataset)
    records = sweep(dataset, sigmas, _solver_config(args), threads=_resolve_threads(args.threads))
    header = ["sigma", "loglik", "k_hat", "bic", "atoms", "dual_gap"]
    lines = [",".join(header)]
    for row in sweep_table_rows(records):
        lines.append(
            ",".join(
                [
                    repr(float(row["sigma"])),
                    repr(float(row["loglik"])),
                    str(int(row["k_hat"])),
                    repr(float(row["bic"])),
                    str(int(row["atoms"])),
                    repr(float(row["dual_gap"])),
                ]
            )
        )
    _atomic_write(args.out, "\n".join(lines) + "\n")
    print(f"wrote {args.out} ({len(records)} bandwidths)")
    return 0


def cmd_cluster(args) -> int:
    dataset = datagen.load_csv(args.input)
    sigmas = _parse_sigmas(args, dataset)
    result = run_pipeline(
        dataset,
        sigmas,
        _solver_config(args),
        k_override=args.k,
        threads=_resolve_threads(args.threads),
    )
    _write_json(args.out, result.to_dict(), args.timestamp)
    k_hat_over, _ = eps_component_count(
        result.oversmoothed_fit.measure, 2.0 * result.oversmoothed_fit.sigma
    )
    print(f"sigma_hat={result.sigma_hat!r}")
    print(f"k_hat_oversmoothed={k_hat_over}")
    print(f"k_suggested={result.k_suggested}")
    if result.dendrogram.leaf_count >= 2:
        _, report = suggest_k(result.dendrogram, max(args.k or 1, 10))
        gaps = " ".join(f"K={k}:gap={gap:.6g}" for k, gap in report)
        print(f"gap_report: {gaps}" if gaps else "gap_report: (single merge)")
    else:
        print("gap_report: (single atom)")
    print(f"k_used={result.k_used}")
    return 0


def cmd_predict(args) -> int:
    with open(args.model, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    if "component_model" in obj:
        model = component_model_from_dict(obj["component_model"])
    else:
        model = component_model_from_dict(obj)
    dataset = datagen.load_csv(args.input)
    labels = classify_dataset(model, dataset)
    labeled = Dataset(points=dataset.points, labels=labels, name=dataset.name)
    datagen.save_csv(labeled, args.out)
    print(f"wrote {args.out} (n={dataset.n}, classes={model.k})")
    return 0


def _dendrogram_from_json(obj: dict) -> Dendrogram:
    if "dendrogram" in obj:
        return dendrogram_from_dict(obj["dendrogram"])
    if "merges" in obj and "leaves" in obj:
        return dendrogram_from_dict(obj)
    if "atoms" in obj:
        from .measure import DiscreteMeasure

        return single_linkage(DiscreteMeasure(obj["atoms"], obj["weights"]))
    raise ValueError("input JSON holds neither a dendrogram nor a fitted measure")


def cmd_dendro(args) -> int:
    with open(args.input, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    dg = _dendrogram_from_json(obj)
    _write_json(args.out, dg.to_dict(), args.timestamp)
    if args.svg:
        _atomic_write(args.svg, render_dendrogram_svg(dg))
        print(f"wrote {args.out} and {args.svg}")
    else:
        print(f"wrote {args.out}")
    return 0


def cmd_eval(args) -> int:
    truth = _load_labels(args.truth)
    pred = _load_labels(args.pred)
    if truth.shape != pred.shape:
        raise ValueError(
            f"label lengths differ: {truth.shape[0]} (truth) vs {pred.shape[0]} (pred)"
        )
    from .metrics import ari

    print(json.dumps({"ari": ari(truth, pred), "n": int(truth.shape[0])}))
    return 0


def _load_labels(path: str) -> np.ndarray:
    if path.endswith(".json"):
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
        if "labels" not in obj:
            raise ValueError(f"{path}: JSON has no 'labels' field")
        return np.asarray(obj["labels"], dtype=int)
    dataset = datagen.load_csv(path)
    if dataset.labels is None:
        raise ValueError(f"{path}: CSV has no label column")
    return dataset.labels


# ---------------------------------------------------------------------------
# plain SVG dendrogram rendering (keeps the diagnostic viewable anywhere)
# ---------------------------------------------------------------------------

def render_dendrogram_svg(dg: Dendrogram, width: int = 640, height: int = 420) -> str:
    m = dg.leaf_count
    pad = 36.0
    if m == 1:
        body = f'<circle cx="{width / 2}" cy="{height - pad}" r="3" fill="black"/>'
        return _svg_shell(width, height, body)
    children = {m + i: (int(l), int(r)) for i, (l, r, _, _) in enumerate(dg.merges[:, :4])}
    order: list[int] = []

    def walk(node: int) -> None:
        if node < m:
            order.append(node)
        else:
            left, right = children[node]
            walk(left)
            walk(right)

    walk(2 * m - 2)
    xpos = {leaf: i for i, leaf in enumerate(order)}
    ypos = {leaf: 0.0 for leaf in range(m)}
    hmax = max(dg.heights.max(), 1e-300)

    def sx(x: float) -> float:
        return pad + x * (width - 2 * pad) / max(m - 1, 1)

    def sy(y: float) -> float:
        return height - pad - y * (height - 2 * pad) / hmax

    parts = []
    for i, (l, r, h, _) in enumerate(dg.merges):
        l, r = int(l), int(r)
        xl, xr = xpos[l], xpos[r]
        parts.append(
            f'<polyline fill="none" stroke="black" stroke-width="1" points="'
            f"{sx(xl):.2f},{sy(ypos[l]):.2f} {sx(xl):.2f},{sy(h):.2f} "
            f'{sx(xr):.2f},{sy(h):.2f} {sx(xr):.2f},{sy(ypos[r]):.2f}"/>'
        )
        xpos[m + i] = 0.5 * (xl + xr)
        ypos[m + i] = float(h)
    for leaf in range(m):
        parts.append(
            f'<text x="{sx(xpos[leaf]):.2f}" y="{height - pad + 14:.2f}" '
            f'font-size="9" text-anchor="middle">{leaf}</text>'
        )
    return _svg_shell(width, height, "\n".join(parts))


def _svg_shell(width: int, height: int, body: str) -> str:
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n<rect width="100%" height="100%" fill="white"/>\n'
        f"{body}\n</svg>\n"
    )


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latentscale",
        description="Multiscale mixing-measure estimation and clustering.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    def add_common(p, needs_input=True):
        if needs_input:
            p.add_argument("--in", dest="input", required=True, help="input dataset CSV")
        p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
        p.add_argument("--max-iter", type=int, default=2000, help="solver iteration cap")
        p.add_argument("--dual-tol", type=float, default=1e-2, help="certificate slack")
        p.add_argument(
            "--timestamp", choices=("on", "off"), default="off",
            help="embed a generation timestamp in JSON outputs",
        )

    def add_grid(p):
        p.add_argument("--sigmas", help="comma-separated bandwidths (overrides --grid-count)")
        p.add_argument("--grid-count", type=int, default=16, help="size of the default bandwidth grid")
        p.add_argument("--threads", type=int, default=None,
                       help=f"worker cap for the sweep (default ${THREADS_ENV} or 1)")

    p = sub.add_parser("gen", help="generate a simulated dataset")
    p.add_argument("--dataset", required=True, choices=datagen.GENERATOR_NAMES)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--sigma-true", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("fit", help="fit the mixing measure at one bandwidth")
    add_common(p)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sweep", help="fit along a bandwidth grid and tabulate scores")
    add_common(p)
    add_grid(p)
    p.add_argument("--out", required=True, help="output CSV table")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("cluster", help="run the full clustering pipeline")
    add_common(p)
    add_grid(p)
    p.add_argument("--k", type=int, default=None, help="override the suggested cluster count")
    p.add_argument("--out", required=True, help="output result JSON")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("predict", help="label new samples with a stored component model")
    p.add_argument("--model", required=True, help="result JSON from 'cluster'")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True, help="output CSV with a label column")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("dendro", help="export a dendrogram as JSON (optionally SVG)")
    p.add_argument("--in", dest="input", required=True, help="result or fit JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--svg", default=None, help="also render a flat SVG here")
    p.add_argument("--timestamp", choices=("on", "off"), default="off")
    p.set_defaults(func=cmd_dendro)

    p = sub.add_parser("eval", help="adjusted Rand index between two labelings")
    p.add_argument("--truth", required=True, help="CSV with a label column")
    p.add_argument("--pred", required=True, help="result JSON or CSV with a label column")
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
