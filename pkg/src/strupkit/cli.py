"""Command-line entry point.

Exit codes: 0 success, 1 invalid input or failed check, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import errors
from .config import RunConfig, apply_overrides, load_config
from .model import init_model, load_model, param_stats
from .phase import symplecticity_residual
from .poly import MultiPoly
from .systems import SnapshotDataset, builtin_system, generate_dataset

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2

_INVALID = (errors.ConfigurationError, errors.DimensionError, errors.ArgumentError,
            errors.UnknownSystemError, errors.CapabilityError, errors.UndefinedMetricError,
            FileNotFoundError, json.JSONDecodeError, ValueError)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config(args, **flags) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    return apply_overrides(cfg, flags)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


# --------------------------------------------------------------------------


def cmd_gen_data(args) -> int:
    cfg = _config(args, system=args.system, n_data=args.n, h=args.h, data_seed=args.seed,
                  tol=args.tol)
    if cfg.system is None or cfg.h is None:
        raise errors.ConfigurationError("gen-data needs --system and --h")
    system = builtin_system(cfg.system)
    data = generate_dataset(system, cfg.n_data, cfg.h, cfg.data_seed, cfg.integrator_config())
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    data.to_csv(out)
    print(f"wrote {len(data)} pairs to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    from .plotting import plot_loss_history
    from .training import train

    cfg = _config(args, method=args.method, layers=args.layers, width=args.width,
                  degree=args.degree, sublayers=args.sublayers, epochs=args.epochs, lr=args.lr,
                  l2=args.l2, seed=args.seed, log_every=args.log_every,
                  bounded=True if args.bounded else None)
    if cfg.method is None:
        raise errors.ConfigurationError("train needs --method")
    train_set = SnapshotDataset.from_csv(args.data)
    test_set = SnapshotDataset.from_csv(args.test) if args.test else None
    from .model import InitScales
    model = init_model(cfg.method, train_set.dim_n, cfg.hyper(), seed=cfg.seed,
                       scales=InitScales(coeff=cfg.init_scale))
    out = _out_dir(args.out)

    def progress(epoch, tr, te):
        logging.getLogger("strupkit.train").info("epoch %d train %.3e test %.3e", epoch, tr, te)

    trained, report = train(model, train_set, test_set, cfg.train_config(), progress)
    trained.metadata["system"] = train_set.system
    trained.save(out / "model.json")
    _write_json(out / "train_report.json", report.to_dict())
    with open(out / "loss_history.csv", "w") as fh:
        fh.write("epoch,train_loss,test_loss\n")
        for e, tr, te in report.loss_history:
            fh.write(f"{e},{tr!r},{te!r}\n")
    plot_loss_history(report.epochs_logged, report.train_history, report.test_history,
                      out / "loss_history.png")
    print(f"best train loss {report.best_train_loss:.3e}, test loss {report.best_test_loss:.3e}, "
          f"{report.wall_time_seconds:.1f}s -> {out}")
    return EXIT_OK


def cmd_grid(args) -> int:
    from .plotting import plot_grid
    from .training import grid_run

    cfg = _config(args, epochs=args.epochs, lr=args.lr, seed=args.seed, workers=args.workers)
    spec = json.loads(args.grid) if args.grid else cfg.grid
    if not spec:
        raise errors.ConfigurationError("grid needs a grid spec (--grid or config key 'grid')")
    train_set = SnapshotDataset.from_csv(args.data)
    test_set = SnapshotDataset.from_csv(args.test)
    out = _out_dir(args.out)
    rows = grid_run(spec, train_set, test_set, cfg.train_config(), out, cfg.workers)
    plot_grid(rows, out / "grid.png")
    failed = sum(1 for r in rows if not np.isfinite(r["train_loss"]))
    print(f"{len(rows)} runs ({failed} failed) -> {out / 'grid.csv'}")
    return EXIT_OK


def cmd_eval(args) -> int:
    model = load_model(args.model)
    data = SnapshotDataset.from_csv(args.data)
    h = args.h if args.h is not None else data.h
    from .training import mse_loss
    x0 = data.x[0]
    result = {
        "mse": mse_loss(model, data, h),
        "param_stats": list(param_stats(model)),
        "param_count": model.num_params,
        "symplecticity_residual": symplecticity_residual(lambda z: model.forward(z, h), x0),
        "inverse_error": float(np.max(np.abs(model.inverse(model.forward(data.x, h), h) - data.x))),
        "h": h,
    }
    text = json.dumps(result, indent=1, sort_keys=True)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n")
    print(text)
    return EXIT_OK


def cmd_regress(args) -> int:
    from .plotting import plot_mae
    from .regression import regress

    model = load_model(args.model)
    h = args.h if args.h is not None else model.metadata.get("h")
    if h is None:
        raise errors.ConfigurationError("timestep unknown: pass --h (model metadata has none)")
    truth = None
    if args.truth:
        truth = MultiPoly.from_text(Path(args.truth).read_text(), model.dim_n)
    elif args.truth_system:
        truth = builtin_system(args.truth_system).poly_form
        if truth is None:
            raise errors.CapabilityError(f"system {args.truth_system!r} is not polynomial")
    report = regress(model, float(h), args.max_order, truth,
                     "intersection" if args.intersection else "union")
    out = _out_dir(args.out)
    (out / "regression.json").write_text(report.to_json())
    table = report.to_table()
    (out / "regression.txt").write_text(table)
    if truth is not None:
        plot_mae([r.order for r in report.rows], report.maes(), out / "mae.png")
    print(table, end="")
    return EXIT_OK


def cmd_linrep(args) -> int:
    from .linrep import factor_symplectic, matrix_flow_oracle, model_from_symplectic_matrix
    import scipy.linalg
    from .phase import symplectic_matrix

    if args.matrix:
        M = np.loadtxt(args.matrix, delimiter=",", ndmin=2)
    elif args.system:
        system = builtin_system(args.system)
        if system.matrix is None:
            raise errors.CapabilityError(f"system {args.system!r} is not linear")
        M = scipy.linalg.expm(args.h * symplectic_matrix(system.dim_n) @ system.matrix)
    else:
        raise errors.ConfigurationError("linrep needs --matrix or --system")
    n = M.shape[0] // 2
    result = factor_symplectic(M, args.seed)
    model = model_from_symplectic_matrix(M, args.h, args.seed)
    rng = np.random.default_rng(args.seed)
    X = rng.uniform(-0.5, 0.5, size=(20, 2 * n))
    report = {
        "dim": 2 * n,
        "h": args.h,
        "factorization_residual": result.residual,
        "five_factor": result.delta is not None,
        "delta": None if result.delta is None else result.delta.tolist(),
        "layers": len(model.layers),
        "layer_bound": (5 if result.delta is not None else 4) * n,
        "action_error": float(np.max(np.abs(model.forward(X, args.h) - X @ M.T))),
    }
    out = _out_dir(args.out)
    model.save(out / "model.json")
    _write_json(out / "linrep.json", report)
    print(json.dumps(report, indent=1, sort_keys=True))
    return EXIT_OK


def cmd_check(args) -> int:
    from .checks import run_checks

    results = run_checks(quick=not args.full, log=print)
    failed = [r for r in results if not r.passed]
    if args.out:
        out = _out_dir(args.out)
        with open(out / "checks.csv", "w") as fh:
            fh.write("name,value,tol,passed\n")
            for r in results:
                fh.write(f"{r.name},{r.value!r},{r.tol!r},{int(r.passed)}\n")
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_OK if not failed else EXIT_INVALID


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="strupkit", description="Learn symplectic maps with shear-layer networks "
                                             "and recover Hamiltonians from them.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    g = sub.add_parser("gen-data", help="integrate a builtin system into a snapshot CSV")
    g.add_argument("--system", help="e.g. henon-heiles, fpu(4), dense-linear(2,0)")
    g.add_argument("--n", type=int, help="number of pairs (default 100)")
    g.add_argument("--h", type=float, help="timestep")
    g.add_argument("--seed", type=int, help="sampling seed (default 1)")
    g.add_argument("--tol", type=float, help="integrator tolerance (default 1e-13)")
    g.add_argument("--config")
    g.add_argument("--out", required=True, help="output CSV path")
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train one model")
    t.add_argument("--method", choices=["P", "R", "GR", "G", "LA", "H"])
    t.add_argument("--layers", type=int)
    t.add_argument("--width", type=int)
    t.add_argument("--degree", type=int)
    t.add_argument("--sublayers", type=int)
    t.add_argument("--bounded", action="store_true", help="wrap P ridge polynomials in tanh")
    t.add_argument("--data", required=True)
    t.add_argument("--test")
    t.add_argument("--epochs", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--l2", type=float)
    t.add_argument("--seed", type=int)
    t.add_argument("--log-every", type=int)
    t.add_argument("--config")
    t.add_argument("--out", default="out")
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("grid", help="train a hyperparameter grid")
    r.add_argument("--grid", help='JSON list, e.g. \'[{"method":"P","layers":[8],"degree":[2,3]}]\'')
    r.add_argument("--data", required=True)
    r.add_argument("--test", required=True)
    r.add_argument("--epochs", type=int)
    r.add_argument("--lr", type=float)
    r.add_argument("--seed", type=int)
    r.add_argument("--workers", type=int)
    r.add_argument("--config")
    r.add_argument("--out", default="grid_out")
    r.set_defaults(func=cmd_grid)

    e = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--h", type=float)
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("regress", help="backward error regression of a P checkpoint")
    b.add_argument("--model", required=True)
    b.add_argument("--max-order", type=int, default=5)
    b.add_argument("--h", type=float)
    b.add_argument("--truth", help="polynomial text file")
    b.add_argument("--truth-system", help="builtin polynomial system as ground truth")
    b.add_argument("--intersection", action="store_true",
                   help="average MAE over monomials present in both polynomials")
    b.add_argument("--out", default="regress_out")
    b.set_defaults(func=cmd_regress)

    m = sub.add_parser("linrep", help="exact P model of a linear symplectic map")
    m.add_argument("--matrix", help="CSV file with a symplectic matrix")
    m.add_argument("--system", help="linear builtin system; uses expm(h J A)")
    m.add_argument("--h", type=float, default=0.1)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out", default="linrep_out")
    m.set_defaults(func=cmd_linrep)

    c = sub.add_parser("check", help="run the invariant suite")
    c.add_argument("--full", action="store_true")
    c.add_argument("--out")
    c.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except _INVALID as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (errors.StrupkitError, ArithmeticError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def dispatch(argv) -> int:
    return main(argv)


if __name__ == "__main__":
    sys.exit(main())
