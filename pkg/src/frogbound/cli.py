"""Command-line front end unifying all pipelines.

Every subcommand supports ``--json`` (machine-readable stdout) and
``--manifest PATH`` (reproducibility record: command, arguments, seed,
versions, timestamps, output paths). Exit codes: 0 success, 1 domain error
or definitive certification failure (structured ``{"error", "message"}``
JSON on stderr), 2 inconclusive certification. Usage errors print the
subcommand help and exit 1, keeping 2 reserved for the inconclusive
verdict.

Rational inputs use the literal ``a/b`` form. Decimal drifts are accepted
only where the computation is numeric anyway: ``approx-bound``, ``qcrit``
and ``simulate`` (a decimal drift for the self-similar model is read with
exact decimal semantics, so ``0.4`` means ``2/5``).
"""

from __future__ import annotations

import argparse
import datetime
import json
import platform
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import gmpy2
import numpy as np

from . import __version__
from .certify import Certificate, CertifyConfig, certify_sup_below_one
from .errors import FrogboundError, OutOfRange
from .genfun import build_g
from .params import derive_params
from .search import (
    RIGOROUS_LIMIT,
    approx_bound,
    figure_rows,
    q_crit,
    rigorous_bound,
)
from .sim import InitMeasure, SimConfig, sample_u, simulate_fm, simulate_sfm
from .u_dist import u_pmf

CERTIFIED = "CERTIFIED_BELOW_ONE"
INCONCLUSIVE = "INCONCLUSIVE"


@dataclass(frozen=True)
class RunManifest:
    """Reproducibility record emitted by ``--manifest PATH``.

    ``argv`` is the exact argument vector, so feeding it back to the CLI
    reruns the command; with equal arguments all JSON/CSV outputs are
    byte-identical and the manifest differs only in its timestamps.
    """

    command: str
    argv: tuple[str, ...]
    arguments: dict
    seed: int | None
    versions: dict
    started_at: str
    finished_at: str
    outputs: tuple[str, ...]

    def as_dict(self) -> dict:
        return {
            "command": self.command,
            "argv": list(self.argv),
            "arguments": self.arguments,
            "seed": self.seed,
            "versions": self.versions,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "outputs": list(self.outputs),
        }


# ---------------------------------------------------------------------------
# small helpers


def _dumps(payload) -> str:
    return json.dumps(payload, sort_keys=True, indent=2)


def _utcnow() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat(
        timespec="microseconds"
    )


def _versions() -> dict:
    return {
        "frogbound": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "gmpy2": gmpy2.version(),
    }


def _frac_str(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}"


def _jsonable(value):
    if isinstance(value, Fraction):
        return _frac_str(value)
    return value


def _rational_arg(text: str) -> Fraction:
    parts = text.split("/")
    try:
        if len(parts) != 2:
            raise ValueError(text)
        return Fraction(int(parts[0]), int(parts[1]))
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(
            f"expected a rational like 'a/b', got {text!r}"
        ) from exc


def _numeric_arg(text: str) -> float:
    """A real-valued input: 'a/b' (parsed exactly) or a decimal literal."""
    if "/" in text:
        return float(_rational_arg(text))
    try:
        return float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            f"expected a number or 'a/b', got {text!r}"
        ) from exc


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from exc
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _nonneg_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from exc
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {value}")
    return value


def _parse_nu(text: str) -> InitMeasure:
    if text == "one":
        return InitMeasure.one_per_site()
    if text.startswith("poi:"):
        try:
            mean = float(text[4:])
        except ValueError as exc:
            raise OutOfRange(f"cannot parse Poisson mean in {text!r}") from exc
        return InitMeasure.poisson(mean)
    raise OutOfRange(f"initial measure must be 'one' or 'poi:MEAN', got {text!r}")


def _parse_sim_p(text: str, model: str):
    """Drift for `simulate`: exact 'a/b', or a decimal literal.

    For the self-similar model a decimal is read with exact decimal
    semantics (0.4 means 2/5); for the plain frog model it stays a float.
    """
    try:
        if "/" in text:
            num, den = text.split("/")
            frac = Fraction(int(num), int(den))
        else:
            frac = Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise OutOfRange(f"cannot parse drift {text!r}") from exc
    return frac if model == "sfm" else float(frac)


def _write_text(path: str, text: str, outputs: list[str]) -> None:
    Path(path).write_text(text)
    outputs.append(str(path))


def _write_json_file(path: str, payload: dict, args, outputs: list[str]) -> None:
    body = dict(payload)
    if args.manifest:
        body["manifest"] = str(args.manifest)
    _write_text(path, _dumps(body) + "\n", outputs)


def _emit(args, payload, plain_lines) -> None:
    if args.json:
        print(_dumps(payload))
    else:
        for line in plain_lines:
            print(line)


def _error_out(name: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": name, "message": message}) + "\n")


def load_certificate(path: str) -> Certificate:
    """Read a certificate JSON file back into a validated Certificate.

    Raises FrogboundError if the record is malformed or internally
    inconsistent (bounds out of order, or a below-one verdict whose upper
    bound is not actually below one).
    """
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FrogboundError(f"cannot read certificate {path!r}: {exc}") from exc
    fields = [
        "d",
        "a",
        "b",
        "verdict",
        "sup_upper_bound",
        "sup_lower_bound",
        "argmax_estimate",
        "precision_bits",
        "boxes_processed",
        "unique_max_verified",
    ]
    missing = [k for k in fields if k not in raw]
    if missing:
        raise FrogboundError(f"certificate {path!r} missing fields {missing}")
    cert = Certificate(**{k: raw[k] for k in fields})
    if cert.sup_lower_bound > cert.sup_upper_bound:
        raise FrogboundError(f"certificate {path!r} has inverted bounds")
    if cert.verdict == CERTIFIED and not cert.sup_upper_bound < 1.0:
        raise FrogboundError(
            f"certificate {path!r} claims below-one but upper bound is "
            f"{cert.sup_upper_bound}"
        )
    return cert


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_pmf(args, outputs: list[str]) -> int:
    params = derive_params(args.d, args.p)
    pmf = u_pmf(params, args.lam)
    payload = {
        "d": pmf.d,
        "p": _frac_str(pmf.p),
        "lambda": float(pmf.lam),
        "probs": list(pmf.probs),
    }
    plain = [f"P(U={u}) = {prob!r}" for u, prob in enumerate(pmf.probs)]
    _emit(args, payload, plain)
    return 0


def _cmd_gpoly(args, outputs: list[str]) -> int:
    params = derive_params(args.d, args.p)
    g = build_g(params)
    dump = [
        {
            "k": k,
            "terms": [
                {"c": _frac_str(c), "q": _frac_str(q)}
                for q, c in sorted(g.coeffs[k].terms.items())
            ],
        }
        for k in g.exponents()
    ]
    if args.out:
        _write_text(args.out, _dumps(dump) + "\n", outputs)
    plain = [
        f"degree {g.degree()} with {len(g.coeffs)} monomials",
        f"g(1) = {g.eval_float(1.0)!r}",
    ]
    if args.out:
        plain.append(f"written to {args.out}")
    _emit(args, dump, plain)
    return 0


def _cmd_certify(args, outputs: list[str]) -> int:
    params = derive_params(args.d, args.p)
    g = build_g(params)
    config = CertifyConfig(target_gap=args.target_gap, max_boxes=args.max_boxes)
    cert = certify_sup_below_one(g, config, verify_unique=args.verify_unique)
    payload = cert.as_dict()
    if args.emit_cert:
        _write_json_file(args.emit_cert, payload, args, outputs)
    plain = [
        f"verdict: {cert.verdict}",
        f"sup bracket: [{cert.sup_lower_bound!r}, {cert.sup_upper_bound!r}]",
        f"argmax estimate: {cert.argmax_estimate!r}",
        f"precision: {cert.precision_bits} bits, boxes: {cert.boxes_processed}",
    ]
    if args.emit_cert:
        plain.append(f"certificate: {args.emit_cert}")
    _emit(args, payload, plain)
    if cert.verdict == CERTIFIED:
        return 0
    if cert.verdict == INCONCLUSIVE:
        return 2
    _error_out(cert.verdict, f"supremum is at least {cert.sup_lower_bound!r}")
    return 1


def _cmd_bound(args, outputs: list[str]) -> int:
    result = rigorous_bound(
        args.d, window=args.window, max_denominator=args.max_denominator
    )
    cert_path = args.emit_cert or f"bound_d{args.d}_cert.json"
    _write_json_file(cert_path, result.certificate.as_dict(), args, outputs)
    loaded = load_certificate(cert_path)
    if loaded.verdict != CERTIFIED:
        raise FrogboundError(
            f"re-verification of {cert_path!r} failed: verdict {loaded.verdict}"
        )
    payload = {
        "d": result.d,
        "p": _frac_str(result.p),
        "bound": float(result.p),
        "certificate": result.certificate.as_dict(),
        "certificate_path": str(cert_path),
        "search_trace": [
            [_frac_str(frac), status] for frac, status in result.search_trace
        ],
    }
    plain = [_frac_str(result.p), f"certificate: {cert_path}"]
    _emit(args, payload, plain)
    return 0


def _cmd_approx_bound(args, outputs: list[str]) -> int:
    value = approx_bound(args.d, lambda_step=args.lambda_step, p_step=args.p_step)
    payload = {
        "d": args.d,
        "bound": value,
        "lambda_step": args.lambda_step,
        "p_step": args.p_step,
    }
    _emit(args, payload, [repr(value)])
    return 0


def _cmd_qcrit(args, outputs: list[str]) -> int:
    result = q_crit(args.d, tol=args.tol)
    payload = {
        "d": result.d,
        "lower": result.lower,
        "upper": result.upper,
        "iterations": result.iterations,
        "tol": args.tol,
    }
    plain = [
        f"threshold bracket: [{result.lower!r}, {result.upper!r}]"
        f" ({result.iterations} bisections)"
    ]
    _emit(args, payload, plain)
    return 0


def _cmd_figure(args, outputs: list[str]) -> int:
    rows = figure_rows(
        args.dmin, args.dmax, window=args.window, rigorous_limit=args.rigorous_limit
    )
    csv_lines = ["m,bound,mode"] + [
        f"{row['m']},{row['bound']!r},{row['mode']}" for row in rows
    ]
    csv_text = "\n".join(csv_lines) + "\n"
    if args.out:
        _write_text(args.out, csv_text, outputs)
    if args.json:
        print(_dumps(rows))
    elif args.out:
        print(f"written to {args.out}")
    else:
        sys.stdout.write(csv_text)
    return 0


def _cmd_simulate(args, outputs: list[str]) -> int:
    nu = _parse_nu(args.nu)
    cfg = SimConfig(
        depth=args.depth,
        max_steps=args.steps,
        seed=args.seed,
        replications=args.reps,
    )
    drift = _parse_sim_p(args.p, args.model)
    if args.model == "sfm":
        params = derive_params(args.d, drift)
        summary = simulate_sfm(params, nu, cfg, threads=args.threads)
    else:
        summary = simulate_fm(args.d, drift, nu, cfg, threads=args.threads)
    payload = summary.as_dict()
    plain = [
        f"root visits over {cfg.replications} replications:",
        f"mean = {summary.mean!r}",
        f"variance = {summary.variance!r}",
        f"ci95 = {summary.ci95!r}",
        f"step-capped replications: {len(summary.capped)}",
    ]
    _emit(args, payload, plain)
    return 0


def _cmd_sample_u(args, outputs: list[str]) -> int:
    params = derive_params(args.d, args.p)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(args.seed)))
    counts = np.zeros(params.d, dtype=np.int64)
    for _ in range(args.n):
        counts[sample_u(params, args.lam, rng)] += 1
    freqs = (counts / args.n).tolist()
    payload = {
        "d": params.d,
        "p": _frac_str(params.p),
        "lambda": args.lam,
        "n": args.n,
        "seed": args.seed,
        "probs": freqs,
    }
    plain = [f"freq(U={u}) = {freq!r}" for u, freq in enumerate(freqs)]
    _emit(args, payload, plain)
    return 0


# ---------------------------------------------------------------------------
# parser


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Parser whose usage errors print help and leave exit code 2 free."""

    def error(self, message):
        sys.stderr.write(f"error: {message}\n\n")
        self.print_help(sys.stderr)
        raise _UsageError(message)


def _add_common(sub) -> None:
    sub.add_argument(
        "--json", action="store_true", help="machine-readable JSON on stdout"
    )
    sub.add_argument(
        "--manifest", metavar="PATH", help="write a reproducibility manifest"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="frogbound",
        description=(
            "Certified bounds on the critical drift of the frog model on "
            "d-ary trees."
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    sub = subs.add_parser("pmf", help="exact activation-count distribution")
    sub.add_argument("--d", type=_positive_int, required=True, help="tree arity")
    sub.add_argument("--p", type=_rational_arg, required=True, help="drift a/b")
    sub.add_argument(
        "--lambda", dest="lam", type=_numeric_arg, required=True, help="Poisson mean"
    )
    _add_common(sub)
    sub.set_defaults(handler=_cmd_pmf)

    sub = subs.add_parser("gpoly", help="exact generating polynomial dump")
    sub.add_argument("--d", type=_positive_int, required=True, help="tree arity")
    sub.add_argument("--p", type=_rational_arg, required=True, help="drift a/b")
    sub.add_argument("--out", metavar="PATH", help="also write the dump to a file")
    _add_common(sub)
    sub.set_defaults(handler=_cmd_gpoly)

    sub = subs.add_parser("certify", help="certify sup of the polynomial below one")
    sub.add_argument("--d", type=_positive_int, required=True, help="tree arity")
    sub.add_argument("--p", type=_rational_arg, required=True, help="drift a/b")
    sub.add_argument(
        "--emit-cert", metavar="PATH", help="write the certificate JSON here"
    )
    sub.add_argument(
        "--target-gap",
        type=float,
        default=1e-6,
        help="stop once the sup bracket is this tight (default 1e-6)",
    )
    sub.add_argument(
        "--max-boxes",
        type=_positive_int,
        default=500_000,
        help="subdivision budget before giving up (default 500000)",
    )
    sub.add_argument(
        "--verify-unique",
        action="store_true",
        help="also verify the maximizer is unique via derivative sign runs",
    )
    _add_common(sub)
    sub.set_defaults(handler=_cmd_certify)

    sub = subs.add_parser("bound", help="certified drift bound search for one arity")
    sub.add_argument("--d", type=_positive_int, required=True, help="tree arity")
    sub.add_argument(
        "--window",
        type=float,
        default=0.9994,
        help="accept only certified sups above this value (default 0.9994)",
    )
    sub.add_argument(
        "--max-denominator",
        type=_positive_int,
        default=300,
        help="largest denominator considered (default 300)",
    )
    sub.add_argument(
        "--emit-cert",
        metavar="PATH",
        help="certificate path (default bound_dN_cert.json)",
    )
    _add_common(sub)
    sub.set_defaults(handler=_cmd_bound)

    sub = subs.add_parser("approx-bound", help="fast uncertified drift bound")
    sub.add_argument("--d", type=_positive_int, required=True, help="tree arity")
    sub.add_argument(
        "--lambda-step",
        type=float,
        default=0.01,
        help="grid step for the inner maximization (default 0.01)",
    )
    sub.add_argument(
        "--p-step",
        type=float,
        default=1e-4,
        help="drift decrement of the descent (default 0.0001)",
    )
    _add_common(sub)
    sub.set_defaults(handler=_cmd_approx_bound)

    sub = subs.add_parser("qcrit", help="numeric bracket for the technique threshold")
    sub.add_argument("--d", type=_positive_int, required=True, help="tree arity")
    sub.add_argument(
        "--tol", type=float, default=1e-4, help="bracket width target (default 1e-4)"
    )
    _add_common(sub)
    sub.set_defaults(handler=_cmd_qcrit)

    sub = subs.add_parser("figure", help="bound-per-arity table as CSV")
    sub.add_argument("--dmin", type=_positive_int, required=True, help="first arity")
    sub.add_argument("--dmax", type=_positive_int, required=True, help="last arity")
    sub.add_argument(
        "--window",
        type=float,
        default=0.9994,
        help="window for the rigorous rows (default 0.9994)",
    )
    sub.add_argument(
        "--rigorous-limit",
        type=_nonneg_int,
        default=RIGOROUS_LIMIT,
        help=f"largest arity searched rigorously (default {RIGOROUS_LIMIT})",
    )
    sub.add_argument("--out", metavar="PATH", help="write the CSV to a file")
    _add_common(sub)
    sub.set_defaults(handler=_cmd_figure)

    sub = subs.add_parser("simulate", help="Monte Carlo frog-model simulation")
    sub.add_argument(
        "--model", choices=("fm", "sfm"), required=True, help="which dynamics to run"
    )
    sub.add_argument("--d", type=_positive_int, required=True, help="tree arity")
    sub.add_argument(
        "--p", required=True, help="drift: a/b, or a decimal (exact for sfm)"
    )
    sub.add_argument(
        "--nu",
        default="one",
        help="initial frogs per site: 'one' or 'poi:MEAN' (default one)",
    )
    sub.add_argument(
        "--depth", type=_positive_int, required=True, help="tree truncation depth"
    )
    sub.add_argument(
        "--steps",
        type=_positive_int,
        default=1000,
        help="per-frog step budget / observation horizon (default 1000)",
    )
    sub.add_argument(
        "--reps", type=_positive_int, required=True, help="number of replications"
    )
    sub.add_argument("--seed", type=_nonneg_int, required=True, help="base RNG seed")
    sub.add_argument(
        "--threads",
        type=_positive_int,
        default=1,
        help="worker threads; results are thread-count invariant (default 1)",
    )
    _add_common(sub)
    sub.set_defaults(handler=_cmd_simulate)

    sub = subs.add_parser("sample-u", help="empirical activation-count distribution")
    sub.add_argument("--d", type=_positive_int, required=True, help="tree arity")
    sub.add_argument("--p", type=_rational_arg, required=True, help="drift a/b")
    sub.add_argument(
        "--lambda", dest="lam", type=_numeric_arg, required=True, help="Poisson mean"
    )
    sub.add_argument(
        "--n", type=_positive_int, required=True, help="number of samples"
    )
    sub.add_argument(
        "--seed", type=_nonneg_int, default=0, help="RNG seed (default 0)"
    )
    _add_common(sub)
    sub.set_defaults(handler=_cmd_sample_u)

    return parser


def _write_manifest(args, argv: list[str], started: str, outputs: list[str]) -> None:
    arguments = {
        key: _jsonable(value)
        for key, value in vars(args).items()
        if key != "handler"
    }
    manifest = RunManifest(
        command=args.command,
        argv=tuple(argv),
        arguments=arguments,
        seed=getattr(args, "seed", None),
        versions=_versions(),
        started_at=started,
        finished_at=_utcnow(),
        outputs=tuple(outputs),
    )
    Path(args.manifest).write_text(_dumps(manifest.as_dict()) + "\n")


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError:
        return 1
    except SystemExit as exc:  # --help / --version
        return 0 if exc.code in (0, None) else int(exc.code)
    started = _utcnow()
    outputs: list[str] = []
    try:
        code = args.handler(args, outputs)
    except (FrogboundError, ValueError) as exc:
        _error_out(type(exc).__name__, str(exc))
        return 1
    if args.manifest:
        _write_manifest(args, argv, started, outputs)
    return code


if __name__ == "__main__":
    sys.exit(main())
