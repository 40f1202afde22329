"""Command line entry point.

Exit codes: 0 when every check passes, 2 on a numerical check failure,
3 on a configuration error.
"""

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, EignetError
from .filtered_ops import SpectralFunction

EXIT_OK, EXIT_NUMERICAL, EXIT_CONFIG = 0, 2, 3


def _load(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def _target(cfg, kernel):
    from .harness import make_sobolev_function

    spec = cfg.get("target")
    if spec is None:
        raise ConfigError("synth config needs a 'target'")
    kind = spec.get("type", "sobolev")
    if kind == "sobolev":
        levels = int(spec.get("levels", 5))
        allowed = None
        if kernel.variant == "relu":
            from .harness import _allowed

            allowed = _allowed(kernel, levels)
        return make_sobolev_function(
            kernel.X,
            float(spec.get("gamma", cfg["gamma"])),
            int(spec.get("seed", 0)),
            spec.get("profile", "random-phase"),
            levels,
            float(spec.get("c", 1.0)),
            allowed,
        )
    if kind == "coefficients":
        src = _load(spec["path"]) if "path" in spec else spec["function"]
        return SpectralFunction.from_json(src)
    raise ConfigError(f"unknown target type {kind!r}")


def cmd_validate(args):
    from .kernels import kernel_from_config, validate_kernel

    kernel = kernel_from_config(_load(args.kernel))
    rep = validate_kernel(kernel, args.max_lambda, args.tolerance, args.test_points)
    print(json.dumps(rep.summary(), indent=2, default=float))
    return EXIT_OK if rep.passed else EXIT_NUMERICAL


def cmd_synth(args):
    from .harness import _spec_for
    from .kernels import kernel_from_config, validate_kernel
    from .synthesis import _as_ops, synthesize

    cfg = _load(args.config)
    if "kernel" not in cfg or "M" not in cfg:
        raise ConfigError("synth config needs 'kernel' and 'M'")
    kernel = kernel_from_config(cfg["kernel"])
    rep = validate_kernel(kernel, cfg.get("validate_max_lambda", 4.0), test_points=16, max_indices=500)
    if not rep.passed:
        print(json.dumps(rep.summary(), indent=2, default=float))
        return EXIT_NUMERICAL
    f = _target(cfg, kernel)
    ops = _as_ops(cfg.get("operators"))
    spec = _spec_for(kernel, float(cfg.get("gamma", f.meta.get("gamma", 1.0))), cfg.get("beta"), ops)
    net, diag = synthesize(
        f,
        kernel,
        spec,
        int(cfg["M"]),
        ops,
        seed=int(cfg.get("seed", 0)),
        n=cfg.get("n"),
        c1=float(cfg.get("c1", 1.0)),
        c2=float(cfg.get("c2", 1.0)),
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(net.dumps())
    print(json.dumps(diag.to_json(), indent=2, default=float))
    return EXIT_OK


def cmd_rates(args):
    from .harness import run_rate_experiment

    cfg = _load(args.config)
    experiments = cfg["experiments"] if "experiments" in cfg else [cfg]
    ok = True
    for exp in experiments:
        rep = run_rate_experiment(exp)
        rep.write(args.out)
        for op, fit in rep.fits.items():
            status = "PASS" if fit["passed"] else "FAIL"
            print(
                f"[{status}] {rep.name} {op}: measured {fit['measured_exponent']:.3f}, "
                f"predicted {fit['predicted_exponent']:.3f} on {fit['abscissa']} ({rep.regime})"
            )
        ok &= rep.passed
    return EXIT_OK if ok else EXIT_NUMERICAL


def cmd_selftest(args):
    from .selftest import run_selftest

    return EXIT_OK if run_selftest(args.seed) else EXIT_NUMERICAL


def build_parser():
    p = argparse.ArgumentParser(prog="eignet", description="Eignet construction and rate experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a kernel's connection identities")
    v.add_argument("--kernel", required=True, help="kernel JSON config")
    v.add_argument("--max-lambda", type=float, default=8.0)
    v.add_argument("--tolerance", type=float, default=1e-6)
    v.add_argument("--test-points", type=int, default=64)
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("synth", help="build a network for a target function")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True, help="network JSON output path")
    s.set_defaults(func=cmd_synth)

    r = sub.add_parser("rates", help="run error-versus-M sweeps and fit slopes")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True, help="output directory for CSV and JSON")
    r.set_defaults(func=cmd_rates)

    t = sub.add_parser("selftest", help="run the fast invariant checks")
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(func=cmd_selftest)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EignetError as exc:
        report = getattr(exc, "report", None)
        if report is not None:
            print(json.dumps(report.summary(), indent=2, default=float))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
