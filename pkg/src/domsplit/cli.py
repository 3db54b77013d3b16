"""Command-line surface: domination checks, multicones, splittings, the
4-dimensional example, and file I/O.

Family specification files are JSON with exactly one of "matrices" (explicit
entries, row-major) or "generator".  Exit codes are a stable contract:
0 = dominated / full pass, 2 = not dominated / stage failure,
3 = inconclusive / gate refusal, 1 = error.  Output files are written to a
temporary name and renamed, so no command leaves partial files behind.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import example4d, multicone, splitting, words
from .errors import DomsplitError, DominationGateError, MulticoneConstructionError
from .words import FamilySource, MatrixFamily, SearchConfig

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_DOMINATED = 2
EXIT_INCONCLUSIVE = 3

_VERDICT_EXIT = {
    words.DOMINATED: EXIT_OK,
    words.NOT_DOMINATED: EXIT_NOT_DOMINATED,
    words.INCONCLUSIVE: EXIT_INCONCLUSIVE,
}


def _write_atomic(path: Path, data: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(data)
    os.replace(tmp, path)


def _write_json(path: Path, payload: dict) -> None:
    _write_atomic(path, json.dumps(payload, indent=2) + "\n")


def _write_csv(path: Path, rows: list[list]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    _write_atomic(path, buf.getvalue())


# ---------------------------------------------------------------------------
# family specification files


def _build_generator(spec: dict) -> MatrixFamily:
    kind = spec.get("kind")
    if kind == "example4d":
        lam = float(spec.get("lambda", 16.0))
        samples = int(spec.get("samples", 64))
        return example4d.curve_family(lam, samples)
    if kind == "conjugated_diagonal":
        entries = [float(x) for x in spec["entries"]]
        seed = int(spec.get("rotation_seed", 0))
        rng = np.random.default_rng(seed)
        d = len(entries)
        basis, _ = np.linalg.qr(rng.normal(size=(d, d)))
        M = basis @ np.diag(entries) @ basis.T
        return MatrixFamily(
            members=(("conj_diag", M),),
            source=FamilySource(description=f"conjugated diagonal, seed={seed}"),
        )
    if kind == "random_perturbation":
        base = load_family_dict(spec["base"])
        noise = float(spec.get("noise", 0.0))
        seed = int(spec.get("seed", 0))
        copies = int(spec.get("copies", 1))
        return words.perturb_family(base, noise, seed, copies=copies)
    raise ValueError(f"unknown generator kind: {kind!r}")


def load_family_dict(spec: dict) -> MatrixFamily:
    has_matrices = "matrices" in spec
    has_generator = "generator" in spec
    if has_matrices == has_generator:
        raise ValueError("family spec needs exactly one of 'matrices' or 'generator'")
    if has_generator:
        return _build_generator(spec["generator"])
    dim = int(spec["dim"])
    members = []
    for k, item in enumerate(spec["matrices"]):
        label = str(item.get("label", f"M{k}"))
        entries = [float(x) for x in item["entries"]]
        if len(entries) != dim * dim:
            raise ValueError(
                f"matrix {label!r} has {len(entries)} entries, expected {dim * dim}"
            )
        members.append((label, np.array(entries).reshape(dim, dim)))
    return MatrixFamily(members=tuple(members))


def load_family_spec(path: str | Path) -> MatrixFamily:
    text = Path(path).read_text()
    spec = json.loads(text)  # JSONDecodeError carries line/column diagnostics
    return load_family_dict(spec)


# ---------------------------------------------------------------------------
# commands


def cmd_check(args) -> int:
    family = load_family_spec(args.input)
    config = SearchConfig(max_len=args.max_len, budget=args.budget, beam_width=args.beam)
    report = words.is_dominated(family, args.index, config)
    out = Path(args.out)
    _write_json(out / "gap_report.json", report.to_json_dict())
    _write_csv(out / "gap_report.csv", report.csv_rows())
    print(f"verdict: {report.verdict.kind}")
    if report.verdict.reason:
        print(f"reason: {report.verdict.reason}")
    if report.verdict.witness is not None:
        print(f"witness: {list(family.word_labels(report.verdict.witness))}")
    return _VERDICT_EXIT[report.verdict.kind]


def cmd_multicone(args) -> int:
    family = load_family_spec(args.input)
    config = multicone.MulticoneConfig(
        attractor_word_len=args.word_len,
        attractor_words=args.words,
        attractor_rng_seed=args.seed,
        override_domination_gate=args.override_domination_gate,
        gate_search=SearchConfig(max_len=args.max_len, budget=args.budget, beam_width=args.beam),
    )
    try:
        mc = multicone.build_multicone(family, args.index, config)
    except DominationGateError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    except MulticoneConstructionError as exc:
        print(f"construction failed: {exc}", file=sys.stderr)
        for eps, count in exc.table:
            print(f"  epsilon={eps:.6g} components={count}", file=sys.stderr)
        return EXIT_NOT_DOMINATED
    out = Path(args.out)
    audit = multicone.semiconvexity_audit(
        mc,
        [example4d.axis_plane()] if family.dim == 4 else [],
        arc_resolution=args.arc_resolution,
    )
    payload = mc.to_json_dict()
    payload["semiconvexity_audit"] = [
        {"line_frame": line.frame.tolist(), "arc_count": count} for line, count in audit
    ]
    _write_json(out / "multicone.json", payload)
    for which in range(len(mc.components)):
        _write_csv(out / f"component_{which}.csv", mc.component_cone(which).csv_rows())
    print(
        f"components: {len(mc.components)}, radius: {mc.cone.radius:.6g}, "
        f"invariance margin: {mc.invariance_margin:.6g}"
    )
    return EXIT_OK


def cmd_splitting(args) -> int:
    family = load_family_spec(args.input)
    rng = np.random.default_rng(args.word_seed)
    past_len = args.past_len or splitting.default_window_length(family, args.index, args.word_seed)
    future_len = args.future_len or past_len
    past = tuple(int(j) for j in rng.integers(family.size, size=past_len))
    future = tuple(int(j) for j in rng.integers(family.size, size=future_len))
    estimate = splitting.splitting_from_window(family, past, future, args.index)
    check = splitting.verify_domination(family, estimate, future)
    out = Path(args.out)
    payload = estimate.to_json_dict()
    payload["verification"] = {
        "passes": check.passes,
        "fitted_slope": check.fitted_slope,
        "residual": check.residual,
    }
    _write_json(out / "splitting.json", payload)
    _write_csv(out / "ratio_curve.csv", check.csv_rows())
    print(f"angle: {estimate.angle:.6g}, verification passes: {check.passes}")
    return EXIT_OK if check.passes else EXIT_NOT_DOMINATED


def cmd_example4d(args) -> int:
    if args.grid < 8:
        print(f"warning: grid {args.grid} badly under-samples the curves", file=sys.stderr)
    config = example4d.ExampleConfig(
        grid_n=args.grid,
        run_perturbed=not args.skip_perturbed,
    )
    lam = args.lam if args.lam is not None else None
    report = example4d.verify_example(lam=lam, config=config)
    out = Path(args.out)
    _write_json(out / "example4d_report.json", report.to_json_dict())
    _write_csv(out / "curves.csv", example4d.curve_csv_rows())
    _write_csv(out / "ruled_surface.csv", example4d.ruled_surface_csv_rows(args.grid))
    if report.passed:
        print(f"pass: lambda={report.lam}, both sides certified")
        return EXIT_OK
    print(f"fail at stage: {report.failing_stage}")
    for entry in report.scan:
        print(
            f"  lambda={entry.lam}: unstable margin {entry.unstable_margin:.4g}, "
            f"stable margin {entry.stable_margin:.4g}"
        )
    return EXIT_NOT_DOMINATED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="domsplit",
        description="Decide and certify domination for compact sets of invertible matrices.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="gap-decay domination verdict for a family")
    p.add_argument("input", help="family spec JSON file")
    p.add_argument("--index", type=int, required=True)
    p.add_argument("--max-len", type=int, default=12)
    p.add_argument("--budget", type=int, default=250_000)
    p.add_argument("--beam", type=int, default=1024)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("multicone", help="build a strictly invariant multicone")
    p.add_argument("input")
    p.add_argument("--index", type=int, required=True)
    p.add_argument("--max-len", type=int, default=12)
    p.add_argument("--budget", type=int, default=250_000)
    p.add_argument("--beam", type=int, default=1024)
    p.add_argument("--word-len", type=int, default=40)
    p.add_argument("--words", type=int, default=256)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--arc-resolution", type=int, default=180)
    p.add_argument("--override-domination-gate", action="store_true")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_multicone)

    p = sub.add_parser("splitting", help="estimate and verify a splitting from windows")
    p.add_argument("input")
    p.add_argument("--index", type=int, required=True)
    p.add_argument("--past-len", type=int, default=None)
    p.add_argument("--future-len", type=int, default=None)
    p.add_argument("--word-seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_splitting)

    p = sub.add_parser("example4d", help="run the 4-dimensional two-curve certificate")
    p.add_argument("--grid", type=int, default=64)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--skip-perturbed", action="store_true")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_example4d)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except json.JSONDecodeError as exc:
        print(f"error: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}", file=sys.stderr)
        return EXIT_ERROR
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (DomsplitError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
