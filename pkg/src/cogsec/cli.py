"""``cogsec`` command line.

Exit codes: 0 success, 1 domain violation, 2 parse error, 3 resource cap,
4 internal consistency failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from pathlib import Path

from . import __version__
from ._accel import backend_name
from .bounds import case_split, inner_bound_point, outer_bound_point, reduce_no_secrecy, reduce_no_state
from .channel import (
    build_joint,
    check_compatible,
    parse_channel_spec,
    parse_policy,
    serialize_channel_spec,
    serialize_policy,
    validate_channel,
    validate_policy,
)
from .errors import ConsistencyError, DomainError, GenerationError, ParseError, ResourceError
from .instances import CHANNELS, POLICIES, uniform_split_policy

EXIT_OK, EXIT_DOMAIN, EXIT_PARSE, EXIT_RESOURCE, EXIT_INTERNAL = 0, 1, 2, 3, 4


def _r12(x):
    return float(format(float(x), ".12g"))


def _read(path) -> tuple[str, str]:
    """File text and its sha256; unreadable files are parse errors."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc.strerror}", str(path)) from None
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError:
        raise ParseError("file is not valid UTF-8", str(path)) from None
    return text, hashlib.sha256(data).hexdigest()


def _load_spec(path):
    text, digest = _read(path)
    return parse_channel_spec(text), digest


def _load_policy(path, spec):
    text, digest = _read(path)
    policy = parse_policy(text)
    check_compatible(spec, policy)
    return policy, digest


def _sha(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _manifest(command, inputs, config, seed) -> dict:
    """Run manifest without the output list; its digest identifies the run."""
    body = {
        "command": command,
        "inputs": inputs,
        "config": config,
        "seed": int(seed),
        "version": __version__,
    }
    body["digest"] = _sha(json.dumps(body, sort_keys=True))
    return body


def _write_outputs(prefix: Path, manifest: dict, files: dict[str, str]):
    """Write ``files`` (suffix -> text) next to ``prefix`` plus the manifest."""
    prefix.parent.mkdir(parents=True, exist_ok=True)
    listing = []
    for suffix, text in files.items():
        p = prefix.with_name(prefix.name + suffix)
        p.write_text(text, encoding="utf-8")
        listing.append({"path": p.name, "sha256": _sha(text)})
    doc = {**manifest, "outputs": listing}
    mpath = prefix.with_name(prefix.name + ".manifest.json")
    mpath.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return [prefix.with_name(prefix.name + s) for s in files] + [mpath]


# --- commands ------------------------------------------------------------------


def cmd_validate(args) -> int:
    text, _ = _read(args.spec)
    spec = parse_channel_spec(text, strict=False)
    problems = validate_channel(spec)
    if args.policy:
        ptext, _ = _read(args.policy)
        policy = parse_policy(ptext, strict=False)
        problems += validate_policy(policy)
        if not problems:
            check_compatible(spec, policy)
    for note in spec.notes:
        print(f"note: {note}")
    if problems:
        for p in problems:
            print(f"violation: {p}")
        return EXIT_DOMAIN
    print("valid")
    return EXIT_OK


def cmd_eval(args) -> int:
    spec, _ = _load_spec(args.spec)
    policy, _ = _load_policy(args.policy, spec)
    joint = build_joint(spec, policy)
    point = inner_bound_point(joint) if args.bound == "inner" else outer_bound_point(joint)
    print(json.dumps({k: _r12(v) for k, v in point.as_dict().items()}))
    return EXIT_OK


def cmd_reduce(args) -> int:
    spec, _ = _load_spec(args.spec)
    policy, _ = _load_policy(args.policy, spec)
    if args.kind == "no-secrecy":
        r1, r2 = reduce_no_secrecy(spec, policy)
        out = {"r1": _r12(r1), "r2": _r12(r2)}
    elif args.kind == "no-state":
        out = {k: _r12(v) for k, v in reduce_no_state(spec, policy).as_dict().items()}
    else:
        cs = case_split(build_joint(spec, policy))
        out = {
            "regime": cs.regime.value,
            "state_term": _r12(cs.state_term),
            "output_term": _r12(cs.output_term),
            "pair": None if cs.remark_pair is None else [_r12(x) for x in cs.remark_pair],
        }
    print(json.dumps(out))
    return EXIT_OK


def cmd_search(args) -> int:
    from dataclasses import asdict

    from .search import SearchConfig, search_outer, search_region

    spec, digest = _load_spec(args.spec)
    config = SearchConfig(
        n_u=args.u_size,
        n_v=args.v_size,
        sampler=args.sampler,
        grid=args.grid,
        samples=args.samples,
        refine=args.refine,
        seed=args.seed,
        workers=args.workers or os.cpu_count() or 1,
    )
    run = search_region if args.bound == "inner" else search_outer
    region = run(spec, config, keep_all=args.all_points)
    # worker count does not affect results, so it stays out of the run identity
    cfg = {k: v for k, v in asdict(config.resolved(spec)).items() if k != "workers"}
    cfg.update(bound=args.bound, all_points=args.all_points)
    manifest = _manifest("search", {"spec": digest}, cfg, args.seed)
    csv_text = region.to_csv()
    side = region.sidecar()
    side["config"].pop("workers", None)
    side.update(manifest=manifest["digest"], csv_sha256=_sha(csv_text))
    files = {".csv": csv_text, ".json": json.dumps(side, indent=2, sort_keys=True) + "\n"}
    for p in _write_outputs(Path(args.out), manifest, files):
        print(p)
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .coding import CodebookParams, run_trials

    spec, digest = _load_spec(args.spec)
    inputs = {"spec": digest}
    if args.policy:
        policy, inputs["policy"] = _load_policy(args.policy, spec)
    else:
        policy = uniform_split_policy(spec)
    params = CodebookParams.from_policy(
        spec,
        policy,
        n=args.n,
        r1=args.r1,
        r2=args.r2,
        eps=args.eps,
        seed=args.seed,
        fibers=args.fibers,
        slack=args.slack,
        max_codewords=args.max_codewords,
    )
    log = [] if args.log else None
    report = run_trials(spec, params, args.trials, log=log)
    cfg = {k: v for k, v in report.params.items() if k not in ("sizes",)}
    cfg.update(trials=args.trials, max_codewords=args.max_codewords, policy_default=args.policy is None)
    manifest = _manifest("simulate", inputs, cfg, args.seed)
    doc = report.as_dict()
    doc["manifest"] = manifest["digest"]
    files = {".json": json.dumps(doc, indent=2, sort_keys=True) + "\n"}
    if log is not None:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(log[0]), lineterminator="\n")
        w.writeheader()
        for row in log:
            w.writerow({k: (format(v, ".12g") if isinstance(v, float) else v) for k, v in row.items()})
        files[".trials.csv"] = buf.getvalue()
    if args.out:
        for p in _write_outputs(Path(args.out), manifest, files):
            print(p)
    else:
        sys.stdout.write(files[".json"])
    return EXIT_OK


def cmd_example(args) -> int:
    spec = CHANNELS[args.name]()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{args.name}.json").write_text(serialize_channel_spec(spec) + "\n", encoding="utf-8")
    print(out / f"{args.name}.json")
    for pname, make in POLICIES.items():
        if pname == "state-cancel" and spec.n_x2 < spec.n_s:
            continue
        path = out / f"{args.name}.{pname}.policy.json"
        path.write_text(serialize_policy(make(spec)) + "\n", encoding="utf-8")
        print(path)
    return EXIT_OK


# --- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cogsec", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({backend_name()})")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a channel spec (and optionally a policy)")
    p.add_argument("spec")
    p.add_argument("--policy")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("eval", help="evaluate a bound at one policy")
    p.add_argument("spec")
    p.add_argument("policy")
    p.add_argument("--bound", choices=("inner", "outer"), default="inner")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("reduce", help="special-case reductions at one policy")
    p.add_argument("spec")
    p.add_argument("policy")
    p.add_argument("--kind", choices=("no-secrecy", "no-state", "case-split"), default="no-secrecy")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("search", help="trace a rate region by sampling policies")
    p.add_argument("spec")
    p.add_argument("--bound", choices=("inner", "outer"), default="inner")
    p.add_argument("--u-size", type=int)
    p.add_argument("--v-size", type=int)
    p.add_argument("--sampler", choices=("grid", "dirichlet", "hybrid"), default="hybrid")
    p.add_argument("--grid", type=int, default=3)
    p.add_argument("--samples", type=int, default=256)
    p.add_argument("--refine", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, help="worker processes (default: all CPUs)")
    p.add_argument("--all-points", action="store_true", help="keep dominated points in the CSV")
    p.add_argument("--out", required=True, help="output prefix")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("simulate", help="Monte Carlo run of the binning code")
    p.add_argument("spec")
    p.add_argument("--policy", help="generating policy (default: U constant, V = X2 uniform)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r1", type=float, required=True)
    p.add_argument("--r2", type=float, required=True)
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fibers", type=int, default=1)
    p.add_argument("--slack", type=float, default=0.0, help="extra randomization exponent per subbin")
    p.add_argument("--max-codewords", type=int, default=2**16)
    p.add_argument("--log", action="store_true", help="also write a per-trial CSV")
    p.add_argument("--out", help="output prefix (default: report on stdout)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("example", help="write a built-in channel and its policies as JSON")
    p.add_argument("name", choices=sorted(CHANNELS))
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_example)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ResourceError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (DomainError, GenerationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except ConsistencyError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
