"""Command-line front end.

Exit codes: 0 on success, 1 for usage or validation errors, 2 when a proven
inequality or the statistical gate fails.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import _jsonio
from .experiments import ExperimentConfig, draw_sample, trial_generator, violation_experiment
from .kl_core import kl, kl_inv_lower, kl_inv_upper
from .moment import (
    CostGuardError,
    InvariantViolation,
    moment_bernoulli_at_mu,
    moment_report,
    xi_exact,
    xi_exact_rational,
)
from .pacbayes import Scenario, Variant, bound_rhs, certify, check_distribution, optimize_posterior

EXIT_OK, EXIT_USAGE, EXIT_GATE = 0, 1, 2
CSV_HEADER = "n,xi,lower_env,upper_env,sqrt_n,two_sqrt_n,c_n"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(payload, out=None):
    text = payload if isinstance(payload, str) else _jsonio.dumps(payload)
    if out:
        Path(out).write_text(text, newline="\n")
    else:
        sys.stdout.write(text)


def cmd_kl(args):
    _emit({"value": kl(args.p, args.q)})
    return EXIT_OK


def cmd_klinv(args):
    inv = kl_inv_upper if args.side == "upper" else kl_inv_lower
    _emit({"value": float(inv(args.qhat, args.budget))})
    return EXIT_OK


def cmd_xi(args):
    out = {"n": args.n, "xi": xi_exact(args.n)}
    if args.rational:
        out["xi_rational"] = str(xi_exact_rational(args.n))
    if args.mu is not None:
        at_mu = moment_bernoulli_at_mu(args.n, args.mu)
        out["mu"] = args.mu
        out["xi_at_mu"] = at_mu
        out["difference"] = at_mu - out["xi"]
    _emit(out)
    return EXIT_OK


def log_grid(n_min: int, n_max: int, points: int) -> list[int]:
    """Log-spaced integers in ``[n_min, n_max]``, rounded, deduplicated, ascending."""
    raw = np.geomspace(n_min, n_max, points)
    return sorted({min(max(int(round(x)), n_min), n_max) for x in raw})


def cmd_envelopes(args):
    if not 2 <= args.n_min <= args.n_max:
        raise UsageError("need 2 <= --n-min <= --n-max")
    if args.points < 1:
        raise UsageError("--points must be >= 1")
    lines = [CSV_HEADER]
    problems = []
    for n in log_grid(args.n_min, args.n_max, args.points):
        report = moment_report(n, check=False)
        problems.extend(report.violations())
        row = report.as_row()
        lines.append(",".join([str(row[0])] + [_jsonio.format_float(v) for v in row[1:]]))
    _emit("\n".join(lines) + "\n", args.out)
    if problems:
        for p in problems:
            print(p, file=sys.stderr)
        return EXIT_GATE
    return EXIT_OK


def _load_sample(path):
    data = _jsonio.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = data.get("indices")
    if not isinstance(data, list):
        raise UsageError("sample file must hold a JSON list or an object with an 'indices' list")
    return np.asarray(data, dtype=np.int64)


def cmd_certify(args):
    scenario = Scenario.from_json(args.scenario)
    variant = Variant(args.variant)
    # gate first so the message names the threshold even before any sampling
    bound_rhs(0.0, scenario.n, scenario.delta, variant)
    if args.sample is not None:
        sample = _load_sample(args.sample)
        if sample.size != scenario.n:
            raise UsageError(f"sample has {sample.size} indices but the scenario says n={scenario.n}")
    elif args.draw:
        sample = draw_sample(scenario, trial_generator(args.seed))
    else:
        raise UsageError("provide --sample PATH or --draw --seed SEED")
    out = {}
    if args.optimize:
        lam, q, cert = optimize_posterior(scenario, sample, variant)
        out["lambda_star"] = lam
        out["posterior"] = q.tolist()
    else:
        if args.posterior is not None:
            q = check_distribution(_jsonio.loads(Path(args.posterior).read_text()), "posterior", scenario.h_size)
        else:
            q = scenario.prior
        cert = certify(q, scenario, sample, variant)
    out.update(cert.to_dict(scenario.digest()))
    out["n"] = scenario.n
    out["delta"] = scenario.delta
    _emit(out)
    return EXIT_OK


def cmd_experiment(args):
    config = ExperimentConfig.from_json(args.config)
    report = violation_experiment(config, workers=args.workers)
    _emit(report.to_json(), args.out)
    if not report.within_band():
        print(f"violation rate {report.rate!r} exceeds {report.band!r}", file=sys.stderr)
        return EXIT_GATE
    return EXIT_OK


def cmd_compare_bounds(args):
    n, delta = args.n, args.delta
    if n < 8:
        raise UsageError("compare-bounds requires n >= 8")
    maurer = bound_rhs(args.kl, n, delta, Variant.MAURER)
    mcallester = bound_rhs(args.kl, n, delta, Variant.MCALLESTER)
    shrunk = bound_rhs(args.kl, n, delta / math.sqrt(n), Variant.MAURER)
    _emit(
        {
            "n": n,
            "delta": delta,
            "kl": args.kl,
            "rhs_maurer": maurer,
            "rhs_mcallester": mcallester,
            "rhs_maurer_delta_over_sqrt_n": shrunk,
            "maurer_at_reduced_delta_is_smaller": shrunk < mcallester,
        }
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pactight", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("kl", help="binary KL divergence")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--q", type=float, required=True)
    p.set_defaults(func=cmd_kl)

    p = sub.add_parser("klinv", help="invert the binary KL")
    p.add_argument("--qhat", type=float, required=True)
    p.add_argument("--budget", type=float, required=True)
    p.add_argument("--side", choices=("upper", "lower"), default="upper")
    p.set_defaults(func=cmd_klinv)

    p = sub.add_parser("xi", help="exponential moment xi(n)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--rational", action="store_true", help="also print the exact fraction (n <= 200)")
    p.add_argument("--mu", type=float, help="also evaluate the direct binomial sum at this mean")
    p.set_defaults(func=cmd_xi)

    p = sub.add_parser("envelopes", help="CSV table of xi(n) against its envelopes")
    p.add_argument("--n-min", type=int, required=True)
    p.add_argument("--n-max", type=int, required=True)
    p.add_argument("--points", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_envelopes)

    p = sub.add_parser("certify", help="risk certificate for a Gibbs posterior")
    p.add_argument("--scenario", required=True)
    p.add_argument("--sample")
    p.add_argument("--draw", action="store_true", help="draw the sample from the scenario's D")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--variant", choices=[v.value for v in Variant], default="maurer")
    p.add_argument("--posterior", help="JSON list of posterior weights (default: the prior)")
    p.add_argument("--optimize", action="store_true", help="optimise over the Gibbs family")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("experiment", help="seeded violation-rate experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("compare-bounds", help="compare the two bound variants")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--kl", type=float, required=True)
    p.set_defaults(func=cmd_compare_bounds)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InvariantViolation as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_GATE
    except (UsageError, CostGuardError, ValueError, TypeError, IndexError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
