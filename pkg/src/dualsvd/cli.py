"""``dualsvd`` command-line interface.

Exit codes: 0 success, 1 usage error, 2 the compact dual SVD (and hence the
pseudoinverse) does not exist for the input, 3 I/O or file-format error.
Numeric results go to files; standard output carries a short summary.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import sys
from pathlib import Path

from threadpoolctl import threadpool_limits

from . import __version__
from .approx import dmpgi, penrose_residuals, rank_k_approx
from .cdsvd import DEFAULT_TOL_GROUP, compute_cdsvd, normalize_gauge
from .config import THREADS_ENV, RunConfig, child_generator, thread_limit
from .errors import ContainerFormatError, DualSvdError, InfeasibleError
from .io import (
    INFINITESIMAL_SUFFIX,
    STANDARD_SUFFIX,
    MatrixContainer,
    parse_container,
    read_matrix_csv,
    serialize_container,
    write_matrix_csv,
)
from .matrix import DualMatrix
from .scalar import format_dual
from .waves import (
    RANK_SIGNIFICANCE,
    TAU_PAIR,
    TAU_STANDING,
    Scene,
    StandingSource,
    TravelingSource,
    build_dual_from_series,
    detect_waves,
    extract_traveling_wave,
    rank_recovery,
    render_scene,
    snr_noise,
)

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with status 2
        raise UsageError(f"{self.prog}: {message}")


# -- helpers -----------------------------------------------------------------

def _grid(text: str) -> tuple[int, int]:
    try:
        h, w = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like HxW, got {text!r}") from None
    if h <= 0 or w <= 0:
        raise argparse.ArgumentTypeError(f"grid dimensions must be positive, got {text!r}")
    return h, w


def _floats(count: int, label: str):
    def parse(text: str) -> tuple[float, ...]:
        try:
            vals = tuple(float(v) for v in text.split(","))
        except ValueError:
            raise argparse.ArgumentTypeError(f"{label} must be {count} comma-separated numbers, got {text!r}") from None
        if len(vals) != count:
            raise argparse.ArgumentTypeError(f"{label} must be {count} comma-separated numbers, got {text!r}")
        return vals
    return parse


def _pair(text: str) -> tuple[int, int]:
    try:
        x, y = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"pair must look like x,y, got {text!r}") from None
    return x, y


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _flags(args: argparse.Namespace) -> dict:
    out = {}
    for key, value in sorted(vars(args).items()):
        if key == "func":
            continue
        if isinstance(value, Path):
            value = str(value)
        elif isinstance(value, tuple):
            value = list(value)
        elif isinstance(value, list):
            value = [list(v) if isinstance(v, tuple) else v for v in value]
        out[key] = value
    return out


def _config(args: argparse.Namespace, tolerances: dict, seed: int | None = None) -> RunConfig:
    return RunConfig(command=args.command_path, flags=_flags(args), tolerances=tolerances, seed=seed)


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")


def _sidecar(container: MatrixContainer) -> Path:
    return container.standard_path.with_name(container.name + ".json")


def _cdsvd_opts(args: argparse.Namespace) -> dict:
    return {"tol_group": args.tol_group, "rank_tol": args.rank_tol, "threshold": args.threshold}


def _is_raw_series(path: Path) -> bool:
    return (path.is_file() and path.suffix == ".csv"
            and not path.name.endswith((STANDARD_SUFFIX, INFINITESIMAL_SUFFIX)))


def load_dual(path: Path, derive: str, dt: float) -> DualMatrix:
    """A container as is, or a raw series CSV turned into a dual matrix."""
    if _is_raw_series(path):
        return build_dual_from_series(read_matrix_csv(path), derive, dt)
    return parse_container(path)


# -- subcommands -------------------------------------------------------------

def cmd_cdsvd(args: argparse.Namespace) -> int:
    a = parse_container(args.input)
    res = compute_cdsvd(a, **_cdsvd_opts(args))
    if args.normalize_gauge:
        res = normalize_gauge(res)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    if res.rank:
        serialize_container(res.U, out / "U")
        serialize_container(res.Sigma, out / "Sigma")
        serialize_container(res.V, out / "V")
    sv = res.singular_values
    payload = {
        "rank": res.rank,
        "distinct_values": list(res.blocks.distinct_values),
        "multiplicities": list(res.blocks.multiplicities),
        "singular_values": {"standard": [s.standard for s in sv], "infinitesimal": [s.infinitesimal for s in sv]},
        "existence_residual": res.existence_residual,
        "sigma_offdiag_mass": res.sigma_offdiag_mass,
        "tolerances": res.tolerances,
        "config": _config(args, res.tolerances).to_json(),
    }
    _write_json(out / "cdsvd.json", payload)
    print(f"rank {res.rank}; blocks {list(res.blocks.multiplicities)}; "
          f"existence residual {res.existence_residual:.3g}")
    for j, s in enumerate(sv[:10]):
        print(f"  σ[{j}] = {format_dual(s, 10)}")
    return EXIT_OK


def cmd_lowrank(args: argparse.Namespace) -> int:
    a = parse_container(args.input)
    approx = rank_k_approx(a, args.k)
    c = serialize_container(approx.approx, args.output)
    d = approx.distance
    _write_json(_sidecar(c), {
        "k": approx.k,
        "standard_error": approx.standard_error,
        "infinitesimal_error": approx.infinitesimal_error,
        "distance": {"standard": d.standard, "infinitesimal": d.infinitesimal},
        "config": _config(args, {}).to_json(),
    })
    print(f"rank-{approx.k} approximation: d* = {format_dual(d, 10)}")
    return EXIT_OK


def cmd_pinv(args: argparse.Namespace) -> int:
    a = parse_container(args.input)
    res = dmpgi(a, args.threshold)
    c = serialize_container(res.pinv, args.output)
    residuals = penrose_residuals(a, res.pinv)
    _write_json(_sidecar(c), {
        "existence_residual": res.existence_residual,
        "penrose_residuals": residuals,
        "config": _config(args, {"existence_threshold": args.threshold}).to_json(),
    })
    print(f"pseudoinverse written; worst Penrose residual {max(residuals.values()):.3g}")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    if not args.standing and not args.traveling:
        raise UsageError("simulate: give at least one --standing or --traveling source")
    scene = Scene(
        grid=args.grid,
        standing=tuple(StandingSource(*v) for v in args.standing),
        traveling=tuple(TravelingSource(*v) for v in args.traveling),
        frames=args.frames,
        dt=args.dt,
    )
    try:
        series = render_scene(scene)
    except ValueError as exc:
        raise UsageError(f"simulate: {exc}") from None
    if args.noise_snr is not None:
        series = series + snr_noise(series, args.noise_snr, child_generator(args.seed, 0))
    out = Path(args.output)
    if out.suffix == ".csv" and not out.name.endswith((STANDARD_SUFFIX, INFINITESIMAL_SUFFIX)):
        out.parent.mkdir(parents=True, exist_ok=True)
        write_matrix_csv(series, out)
        sidecar = out.with_suffix(".json")
    else:
        sidecar = _sidecar(serialize_container(build_dual_from_series(series, args.derive, args.dt), out))
    _write_json(sidecar, {
        "shape": list(series.shape),
        "ground_truth": {
            "standing_peaks": [[s.row, s.col] for s in scene.standing],
            "traveling_peaks": [[[s.row1, s.col1], [s.row2, s.col2]] for s in scene.traveling],
        },
        "config": _config(args, {}, seed=args.seed).to_json(),
    })
    print(f"simulated {series.shape[0]}×{series.shape[1]} series with "
          f"{len(scene.standing)} standing and {len(scene.traveling)} traveling waves")
    return EXIT_OK


def cmd_waves_detect(args: argparse.Namespace) -> int:
    if (args.extract_pair is None) != (args.movie is None):
        raise UsageError("waves detect: --extract-pair and --movie go together")
    a = load_dual(Path(args.input), args.derive, args.dt)
    if args.grid is not None and args.grid[0] * args.grid[1] != a.shape[0]:
        raise UsageError(f"waves detect: grid {args.grid} does not match {a.shape[0]} rows")
    rep = detect_waves(a, args.K, grid=args.grid, tau_pair=args.tau_pair, tau_standing=args.tau_standing,
                       separation=args.separation, **_cdsvd_opts(args))
    payload = rep.to_json()
    payload["config"] = _config(args, {
        "tol_group": args.tol_group, "rank_tol": args.rank_tol, "existence_threshold": args.threshold,
        "tau_pair": args.tau_pair, "tau_standing": args.tau_standing,
    }).to_json()
    if args.extract_pair is not None:
        try:
            movie = extract_traveling_wave(rep.result, tuple(args.extract_pair))
        except ValueError as exc:
            raise UsageError(f"waves detect: {exc}") from None
        movie_path = Path(str(args.movie) + ".csv")
        movie_path.parent.mkdir(parents=True, exist_ok=True)
        write_matrix_csv(movie, movie_path)
        payload["movie"] = str(movie_path)
    _write_json(Path(args.report), payload)
    sim = rep.similarity
    print(f"{len(sim.pairs)} traveling pair(s), {len(sim.standing)} standing component(s) "
          f"among the leading {len(sim.classification)}")
    for p in sim.pairs:
        print(f"  pair ({p.x},{p.y}): alpha={p.alpha:.4g} beta={p.beta:.4g} peaks {rep.traveling_peaks[(p.x, p.y)]}")
    for x, peak in sorted(rep.standing_peaks.items()):
        print(f"  standing {x}: peak {peak}")
    return EXIT_OK


def cmd_waves_rank(args: argparse.Namespace) -> int:
    a = load_dual(Path(args.input), args.derive, args.dt)
    rep = rank_recovery(a, args.true_rank, window=args.window, significance=args.significance,
                        **_cdsvd_opts(args))
    payload = rep.to_json()
    payload["config"] = _config(args, {
        "tol_group": args.tol_group, "rank_tol": args.rank_tol, "existence_threshold": args.threshold,
        "significance": args.significance,
    }).to_json()
    _write_json(Path(args.report), payload)
    flag = " (low confidence)" if rep.low_confidence else ""
    print(f"estimated rank {rep.estimated_rank}{flag}, gap ratio {rep.gap_ratio:.4g}; "
          f"standard part alone: {rep.classical_rank}")
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def _add_cdsvd_tolerances(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol-group", type=_positive, default=DEFAULT_TOL_GROUP,
                   help="relative gap (to the largest singular value) below which consecutive "
                        "singular values are treated as equal (default %(default)g)")
    p.add_argument("--rank-tol", type=_positive, default=None,
                   help="absolute numerical-rank cut for the standard part "
                        "(default max(m,n)·eps·σ₁)")
    p.add_argument("--threshold", type=_positive, default=None,
                   help="existence-residual threshold (default 1e-10·‖A_i‖_F, or 1e-12 if A_i = 0)")


def _add_series_input(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", type=Path, required=True,
                   help="raw series CSV (space × time) or a dual-matrix container")
    p.add_argument("--derive", choices=("first-diff", "one-sided-2nd"), default="first-diff",
                   help="time-derivative scheme for raw series input (default %(default)s)")
    p.add_argument("--dt", type=_positive, default=1.0, help="time step h (default %(default)g)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dualsvd", description=__doc__.split("\n\n")[0],
                     epilog=f"{THREADS_ENV}=n caps BLAS/LAPACK threads (0 or unset: library default).")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("cdsvd", help="compact dual SVD A = UΣV*")
    p.add_argument("--input", type=Path, required=True, help="dual-matrix container (prefix or directory)")
    p.add_argument("--output", type=Path, required=True,
                   help="directory receiving U, Sigma, V containers and cdsvd.json")
    p.add_argument("--normalize-gauge", action="store_true",
                   help="make one anchor entry per column of V_i real (simple singular values only)")
    _add_cdsvd_tolerances(p)
    p.set_defaults(func=cmd_cdsvd, command_path="cdsvd")

    p = sub.add_parser("lowrank", help="optimal rank-k approximation under the quasi-metric d*")
    p.add_argument("--input", type=Path, required=True, help="dual-matrix container")
    p.add_argument("-k", type=int, required=True, help="target rank, 1 ≤ k ≤ rank(A_s)")
    p.add_argument("--output", type=Path, required=True, help="output container prefix; sidecar <prefix>.json")
    p.set_defaults(func=cmd_lowrank, command_path="lowrank")

    p = sub.add_parser("pinv", help="dual Moore-Penrose generalized inverse")
    p.add_argument("--input", type=Path, required=True, help="dual-matrix container")
    p.add_argument("--output", type=Path, required=True, help="output container prefix; sidecar <prefix>.json")
    p.add_argument("--threshold", type=_positive, default=None,
                   help="existence-residual threshold (default 1e-10·‖A_i‖_F, or 1e-12 if A_i = 0)")
    p.set_defaults(func=cmd_pinv, command_path="pinv")

    p = sub.add_parser("simulate", help="synthesize Gaussian standing/traveling waves on a grid")
    p.add_argument("--grid", type=_grid, required=True, help="grid size HxW")
    p.add_argument("--standing", type=_floats(5, "--standing"), action="append", default=[],
                   metavar="r,c,σ,ω,w", help="standing wave: 0-based center, width, angular frequency, weight "
                                             "(repeatable)")
    p.add_argument("--traveling", type=_floats(7, "--traveling"), action="append", default=[],
                   metavar="r1,c1,r2,c2,σ,ω,w",
                   help="traveling wave between two 0-based centers (repeatable)")
    p.add_argument("--frames", type=int, required=True, help="number of time samples T")
    p.add_argument("--dt", type=_positive, default=1.0, help="time step h (default %(default)g)")
    p.add_argument("--noise-snr", type=_positive, default=None,
                   help="add Gaussian noise with ‖signal‖²/‖noise‖² equal to this value")
    p.add_argument("--seed", type=_seed, default=0, help="master seed for the noise stream (default %(default)s)")
    p.add_argument("--derive", choices=("first-diff", "one-sided-2nd"), default="first-diff",
                   help="derivative scheme when writing a container (default %(default)s)")
    p.add_argument("--output", type=Path, required=True,
                   help="raw series if it ends in .csv, otherwise a dual-matrix container prefix")
    p.set_defaults(func=cmd_simulate, command_path="simulate")

    waves = sub.add_parser("waves", help="standing/traveling wave analysis")
    wsub = waves.add_subparsers(dest="waves_command", required=True, parser_class=_Parser)

    p = wsub.add_parser("detect", help="classify components as standing or traveling waves")
    _add_series_input(p)
    p.add_argument("-K", type=int, default=8, help="number of leading components to analyse (default %(default)s)")
    p.add_argument("--grid", type=_grid, default=None, help="grid HxW for reporting peaks as (row, col)")
    p.add_argument("--tau-pair", type=_positive, default=TAU_PAIR,
                   help="pair threshold relative to max|G| (default %(default)g)")
    p.add_argument("--tau-standing", type=_positive, default=TAU_STANDING,
                   help="standing threshold relative to max|G| (default %(default)g)")
    p.add_argument("--separation", type=_positive, default=5.0,
                   help="minimum distance between the two peaks of a traveling pair (default %(default)g)")
    p.add_argument("--report", type=Path, required=True, help="JSON report path")
    p.add_argument("--extract-pair", type=_pair, default=None, metavar="x,y",
                   help="0-based component pair whose rank-2 movie to export")
    p.add_argument("--movie", type=Path, default=None, metavar="PREFIX", help="movie CSV is written to PREFIX.csv")
    _add_cdsvd_tolerances(p)
    p.set_defaults(func=cmd_waves_detect, command_path="waves detect")

    p = wsub.add_parser("rank", help="estimate the signal rank of a noisy series")
    _add_series_input(p)
    p.add_argument("--report", type=Path, required=True, help="JSON report path")
    p.add_argument("--true-rank", type=int, default=None, help="known rank, echoed into the report")
    p.add_argument("--window", type=int, default=None, help="components scanned (default ⌈min(m,n)/2⌉)")
    p.add_argument("--significance", type=_positive, default=RANK_SIGNIFICANCE,
                   help="gap ratio below which the estimate is reported as 0 (default %(default)g)")
    _add_cdsvd_tolerances(p)
    p.set_defaults(func=cmd_waves_rank, command_path="waves rank")
    return parser


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        limit = thread_limit()
    except ValueError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    ctx = threadpool_limits(limits=limit) if limit else contextlib.nullcontext()
    with ctx:
        try:
            return args.func(args)
        except InfeasibleError as exc:
            print(f"infeasible: existence residual {exc.residual:.17g} exceeds threshold {exc.threshold:.3g}")
            return EXIT_INFEASIBLE
        except UsageError as exc:
            print(exc, file=sys.stderr)
            return EXIT_USAGE
        except (OSError, ContainerFormatError) as exc:
            print(f"I/O error: {exc}", file=sys.stderr)
            return EXIT_IO
        except (DualSvdError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
