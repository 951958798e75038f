"""Command-line pipeline: distances -> covering numbers -> CSV reports.

Exit codes: 0 success, 1 data error, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import bounds, complexity, cover, metric
from .data import (DataFormatError, load_dataset, load_distance_matrix, save_distance_matrix,
                   subsample_indices)
from .transforms import parse_transform, spec_to_dict

ORBIT_FILE = "orbit.dist"
RHO_FILE = "rho.dist"
BASE_FILE = "base.dist"
PROVENANCE_FILE = "provenance.json"


class UsageError(Exception):
    pass


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.9g}"
    return str(x)


def write_csv(rows, header, out) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    if out is None or str(out) == "-":
        sys.stdout.write(buf.getvalue())
    else:
        Path(out).write_text(buf.getvalue())


def parse_epsilons(text: str) -> list[float]:
    """``"0,1,2.5"`` or ``"start:stop:count"`` (inclusive, evenly spaced)."""
    text = (text or "").strip()
    if not text:
        raise UsageError("empty epsilon grid")
    try:
        if ":" in text:
            a, b, k = text.split(":")
            k = int(k)
            if k < 1:
                raise UsageError("empty epsilon grid")
            eps = [float(v) for v in np.linspace(float(a), float(b), k)]
        else:
            eps = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"cannot parse epsilon grid {text!r}") from None
    if not eps:
        raise UsageError("empty epsilon grid")
    if any(not math.isfinite(e) or e < 0 for e in eps):
        raise UsageError("epsilons must be finite and nonnegative")
    if any(b < a for a, b in zip(eps, eps[1:])):
        raise UsageError("epsilon grid must be ascending")
    return eps


def _subset(sample, args):
    idx = np.arange(len(sample))
    if args.subset is not None:
        if args.subset < 1 or args.subset > len(sample):
            raise UsageError(f"--subset {args.subset} outside [1, {len(sample)}]")
        idx = subsample_indices(sample.labels, args.subset, args.seed, args.balanced)
        sample = sample.subset(idx)
    return sample, idx


def _run_dir(path) -> tuple[Path, dict]:
    d = Path(path)
    prov = d / PROVENANCE_FILE
    if not prov.is_file():
        raise DataFormatError(f"{d}: missing {PROVENANCE_FILE}; run 'distances' first")
    return d, json.loads(prov.read_text())


def _rho_input(path):
    """A run directory or a bare ``.dist`` file; returns ``(rho, tag)``."""
    p = Path(path)
    if p.is_dir():
        d, prov = _run_dir(p)
        return load_distance_matrix(d / RHO_FILE), prov.get("tag", "")
    return load_distance_matrix(p), ""


# ---------------------------------------------------------------------------
# subcommands

def cmd_distances(args) -> int:
    spec = parse_transform(args.transform)
    sample, idx = _subset(load_dataset(args.dataset), args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    d = metric.direct_orbit_distances(sample, spec, args.seed, args.workers, indices=idx)
    rho = metric.shortest_path_metric(d, args.workers)
    base = metric.euclidean_distances(sample)
    save_distance_matrix(d, out / ORBIT_FILE)
    save_distance_matrix(rho, out / RHO_FILE)
    save_distance_matrix(base, out / BASE_FILE)
    provenance = {
        "dataset": str(args.dataset),
        "tag": args.tag or spec.tag,
        "transform": spec_to_dict(spec),
        "seed": args.seed,
        "subset_indices": [int(i) for i in idx],
        "labels": [int(v) for v in sample.labels],
    }
    (out / PROVENANCE_FILE).write_text(json.dumps(provenance, indent=1, sort_keys=True) + "\n")
    print(f"wrote {out / ORBIT_FILE}, {out / RHO_FILE}, {out / BASE_FILE} (n={len(sample)})")
    return 0


def cmd_metric(args) -> int:
    rho = metric.shortest_path_metric(load_distance_matrix(args.input), args.workers)
    save_distance_matrix(rho, args.out)
    return 0


def cmd_scn(args) -> int:
    eps = parse_epsilons(args.epsilons)
    rho, tag = _rho_input(args.input)
    curve = cover.scn_curve(rho, eps, args.algo, args.seed, args.faithful, args.tag or tag)
    write_csv(([r.epsilon, r.count, r.algorithm, r.seed, r.tag] for r in curve.records),
              ["epsilon", "count", "algorithm", "seed", "transform"], args.out)
    return 0


def cmd_verify_cover(args) -> int:
    rho, _ = _rho_input(args.input)
    try:
        centers = [int(c) for c in args.centers.split(",") if c.strip()]
    except ValueError:
        raise UsageError(f"cannot parse centers {args.centers!r}") from None
    if any(c < 0 or c >= rho.n for c in centers):
        raise UsageError(f"center indices must lie in [0, {rho.n})")
    check = cover.verify_cover(rho, args.epsilon, centers)
    if check.valid:
        print(f"valid {args.epsilon:.9g}-cover with {check.cover.count} centers")
        return 0
    print(f"invalid: {len(check.uncovered)} uncovered point(s)")
    for i, dist in sorted(check.uncovered.items()):
        print(f"  {i}: nearest center at {dist:.9g}")
    return 1


def cmd_normalize(args) -> int:
    eps = parse_epsilons(args.epsilons)
    d, prov = _run_dir(args.input)
    rho = load_distance_matrix(d / RHO_FILE)
    orbit = load_distance_matrix(d / ORBIT_FILE)
    base = load_distance_matrix(d / BASE_FILE)
    labels = np.asarray(prov["labels"])
    rows = []
    for e in eps:
        count, _ = cover.estimate(rho, e, args.algo, args.seed, args.faithful)
        norm = cover.normalized_scn(rho, base, labels, e, args.algo, args.seed,
                                    d_orbit=orbit, faithful=args.faithful)
        rows.append([e, count, norm.count, norm.ratio, norm.scaled_epsilon, norm.reliable,
                     args.algo, args.seed, args.tag or prov.get("tag", "")])
    write_csv(rows, ["epsilon", "count", "normalized_count", "ratio", "scaled_epsilon",
                     "reliable", "algorithm", "seed", "transform"], args.out)
    return 0


def _transform_matrix(text: str, d: int) -> np.ndarray:
    if text == "reversal":
        return complexity.reversal_matrix(d)
    if text == "shift":
        return complexity.cyclic_shift_matrix(d)
    p = Path(text)
    if p.suffix == ".npy":
        return np.load(p)
    if p.suffix in (".csv", ".txt"):
        return np.loadtxt(p, delimiter=",", ndmin=2)
    raise UsageError(f"--matrix must be 'reversal', 'shift', or a .npy/.csv file, got {text!r}")


def cmd_rademacher(args) -> int:
    if args.mode == "gaussian":
        if args.d is None or args.n is None:
            raise UsageError("--mode gaussian needs --d and --n")
        print(complexity.gaussian_comparison(args.d, args.n, args.sigma, args.W, args.draws,
                                             args.seed))
        return 0
    if not args.dataset:
        raise UsageError(f"--mode {args.mode} needs --dataset")
    sample, _ = _subset(load_dataset(args.dataset), args)
    x = sample.flat().astype(np.float64)
    rows = []
    if args.mode in ("all", "general"):
        rows.append(["general", args.q,
                     complexity.rademacher_general(x, args.W, args.q, args.draws, args.seed)])
    if args.mode != "general":
        if not args.matrix:
            raise UsageError(f"--mode {args.mode} needs --matrix")
        A = _transform_matrix(args.matrix, x.shape[1])
        use_l2 = args.mode == "invariant-l2" or (args.mode == "all" and args.q == 2)
        if use_l2:
            if args.q != 2:
                raise UsageError("--mode invariant-l2 requires --q 2")
            est = complexity.rademacher_invariant_l2(x, A, args.W, args.draws, args.seed)
        else:
            est = complexity.rademacher_invariant_inf(x, A, args.W, args.q, args.draws, args.seed)
        rows.append(["invariant", args.q, est])
    write_csv(([name, q, e.value, e.std_error, e.draws, len(e.unconverged)] for name, q, e in rows),
              ["class", "q", "estimate", "std_error", "draws", "unconverged"], args.out)
    return 0


def cmd_bounds(args) -> int:
    rows = []
    if args.kind == "global":
        rows.append(["global", bounds.global_complexity_bound(args.B, args.m, args.n)])
    elif args.kind == "refined":
        rows.append(["refined", bounds.refined_complexity_bound(args.B, args.kappa, args.epsilon,
                                                      args.m, args.n, args.alpha)])
    elif args.kind == "adversarial":
        adv = bounds.adversarial_loss(bounds.load_loss_table(args.losses))
        rows.append(["adversarial_mean", adv.mean])
    elif args.kind == "selection":
        if args.losses:
            mean = bounds.adversarial_loss(bounds.load_loss_table(args.losses)).mean
            rows.append(["adversarial_mean", mean])
        elif args.mean is not None:
            mean = args.mean
        else:
            raise UsageError("selection needs --mean or --losses")
        n = args.n
        if n is None:
            if not args.losses:
                raise UsageError("selection needs --n")
            n = bounds.load_loss_table(args.losses).shape[0]
        rows.append(["selection", bounds.selection_bound(mean, args.rad, args.k, n, args.delta)])
    write_csv(rows, ["quantity", "value"], args.out)
    return 0


def _read_curve(path) -> list[dict]:
    p = Path(path)
    try:
        with p.open(newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as e:
        raise DataFormatError(f"{p}: {e.strerror}") from None
    if rows and ("epsilon" not in rows[0] or "count" not in rows[0]):
        raise DataFormatError(f"{p}: expected 'epsilon' and 'count' columns")
    return rows


def cmd_report(args) -> int:
    table: dict[tuple[str, float], dict] = {}
    order = []
    for path in args.inputs:
        for line, r in enumerate(_read_curve(path), start=2):
            try:
                key = (r.get("transform") or Path(path).stem, float(r["epsilon"]))
                count = int(r["count"])
                norm = r.get("normalized_count") or ""
                norm = int(norm) if norm else None
            except ValueError as e:
                raise DataFormatError(f"{path}:{line}: {e}") from None
            if key not in table:
                table[key] = {"count": count, "normalized_count": norm}
                order.append(key)
            else:
                entry = table[key]
                if entry["count"] != count:
                    raise DataFormatError(
                        f"{path}:{line}: count {count} for {key[0]} at epsilon {key[1]:.9g} "
                        f"conflicts with {entry['count']}")
                if norm is not None:
                    entry["normalized_count"] = norm
    rows = []
    for key in order:
        e = table[key]
        rows.append([key[0], key[1], e["count"],
                     "" if e["normalized_count"] is None else e["normalized_count"]])
    write_csv(rows, ["transform", "epsilon", "count", "normalized_count"], args.out)
    return 0


# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="samplecover",
                description="Measure how well a set of data transformations suits invariant learning.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, seed=True):
        if seed:
            sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default=None)

    def algo(sp):
        sp.add_argument("--epsilons", required=True,
                        help="comma list or start:stop:count, ascending")
        sp.add_argument("--algo", choices=cover.ALGORITHMS, default="kmedoids")
        sp.add_argument("--faithful", action="store_true",
                        help="k-medoids: scan every k instead of a coarse-to-fine schedule")
        sp.add_argument("--tag", default=None, help="transform label for the output rows")

    def subset(sp):
        sp.add_argument("--subset", type=int, default=None, help="random subset size")
        sp.add_argument("--balanced", action="store_true", help="balance the subset across classes")

    s = sub.add_parser("distances", help="orbit distances and their shortest-path metric")
    s.add_argument("--dataset", required=True)
    s.add_argument("--transform", default="base")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--tag", default=None)
    subset(s)
    common(s)
    s.set_defaults(func=cmd_distances)

    s = sub.add_parser("metric", help="shortest-path closure of a distance file")
    s.add_argument("input")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_metric)

    s = sub.add_parser("scn", help="sample covering numbers over an epsilon grid")
    s.add_argument("input", help="run directory or rho .dist file")
    algo(s)
    common(s)
    s.set_defaults(func=cmd_scn)

    s = sub.add_parser("verify-cover", help="check that given centers form an epsilon-cover")
    s.add_argument("input", help="run directory or rho .dist file")
    s.add_argument("--epsilon", type=float, required=True)
    s.add_argument("--centers", required=True, help="comma-separated indices")
    s.set_defaults(func=cmd_verify_cover)

    s = sub.add_parser("normalize", help="raw and inter-class-normalized covering numbers")
    s.add_argument("input", help="run directory written by 'distances'")
    algo(s)
    common(s)
    s.set_defaults(func=cmd_normalize)

    s = sub.add_parser("rademacher", help="Monte-Carlo complexity of linear classes")
    s.add_argument("--mode", default="all",
                   choices=("all", "general", "invariant-l2", "invariant-inf", "gaussian"))
    s.add_argument("--dataset", default=None)
    s.add_argument("--matrix", default=None,
                   help="'reversal', 'shift', or a d x d matrix as .npy or .csv")
    s.add_argument("--d", type=int, default=None, help="dimension for --mode gaussian")
    s.add_argument("--n", type=int, default=None, help="sample size for --mode gaussian")
    s.add_argument("--sigma", type=float, default=1.0)
    s.add_argument("--W", type=float, default=1.0)
    s.add_argument("--q", type=float, default=2.0)
    s.add_argument("--draws", type=int, default=1000)
    subset(s)
    common(s)
    s.set_defaults(func=cmd_rademacher)

    s = sub.add_parser("bounds", help="evaluate complexity and generalization bounds")
    s.add_argument("kind", choices=("global", "refined", "adversarial", "selection"))
    s.add_argument("--B", type=float, default=1.0)
    s.add_argument("--m", type=int, default=None)
    s.add_argument("--n", type=int, default=None)
    s.add_argument("--kappa", type=float, default=0.0)
    s.add_argument("--epsilon", type=float, default=0.0)
    s.add_argument("--alpha", type=float, default=0.0)
    s.add_argument("--losses", default=None, help="CSV loss table, one row per example")
    s.add_argument("--mean", type=float, default=None)
    s.add_argument("--rad", type=float, default=0.0)
    s.add_argument("--k", type=int, default=1)
    s.add_argument("--delta", type=float, default=0.05)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_bounds)

    s = sub.add_parser("report", help="join covering-number curves into one long CSV")
    s.add_argument("inputs", nargs="+", help="CSV files written by 'scn' or 'normalize'")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_report)
    return p


def _check_bounds_args(args):
    if args.command != "bounds":
        return
    needed = {"global": ("m", "n"), "refined": ("m", "n"), "adversarial": ("losses",)}
    for name in needed.get(args.kind, ()):
        if getattr(args, name) is None:
            raise UsageError(f"bounds {args.kind} needs --{name}")


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        _check_bounds_args(args)
        return args.func(args)
    except UsageError as e:
        print(f"samplecover: usage error: {e}", file=sys.stderr)
        return 2
    except (DataFormatError, OSError, KeyError, ValueError) as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"samplecover: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
