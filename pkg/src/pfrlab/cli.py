"""Command-line entry point: generate instances, run the pipeline, verify, benchmark."""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np

from . import access
from .access import MembershipOracle, gen_planted_affine, gen_planted_cover, gen_small_image, read_set, write_set
from .errors import PfrlabError, ParseError
from .gf2core import Subspace, from_bits, span, to_bits
from .homo import FuncTable, approx_hom_decompose, hom_test_fit, read_table, write_table
from .pfr import PipelineConfig, run_pipeline
from .setops import PointSet, doubling_constant, verify_cover


def default_seed() -> int:
    return int(os.environ.get("PFRLAB_SEED", "0"))


def parse_seeds(text: Optional[str]) -> list[int]:
    """``"a..b"`` (inclusive) or a single integer."""
    if text is None:
        return [default_seed()]
    if ".." in text:
        a, b = text.split("..", 1)
        lo, hi = int(a), int(b)
        if hi < lo:
            raise argparse.ArgumentTypeError(f"empty seed range {text!r}")
        return list(range(lo, hi + 1))
    return [int(text)]


def _emit(lines: list[str], out: Optional[str]):
    text = "".join(line + "\n" for line in lines)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True)


def _matrix_bits(M) -> list[str]:
    return [to_bits(r, M.cols) for r in M.rows]


# -- gen ---------------------------------------------------------------------

def cmd_gen(args) -> int:
    seed = args.seed if args.seed is not None else default_seed()
    rng = np.random.default_rng(seed)
    out = Path(args.out)
    if args.kind == "cover":
        inst = gen_planted_cover(args.n, args.dim, args.cosets, args.noise, rng, seed=seed)
        write_set(out, inst.set)
        access.write_sidecar(out.with_name(out.name + ".json"), inst.sidecar())
    else:
        if args.m is None:
            raise SystemExit("gen affine/smallimage needs --m")
        if args.kind == "affine":
            inst = gen_planted_affine(args.m, args.n, args.rho, rng, seed=seed)
        else:
            inst = gen_small_image(args.m, args.n, args.imgk, rng, seed=seed)
        write_table(out, FuncTable(args.m, args.n, inst.values))
        access.write_sidecar(out.with_name(out.name + ".json"), inst.sidecar())
    return 0


# -- pfr ---------------------------------------------------------------------

def _config_from(args, seed: int, K: int) -> PipelineConfig:
    return PipelineConfig(
        K=K,
        size=args.size,
        t_override=args.t,
        m_slack=args.m_slack,
        restarts=args.restarts,
        backend=args.backend,
        exact_iso=args.exact_iso,
        seed=seed,
    )


def _pfr_one(job) -> dict:
    A, config, timings = job
    try:
        report = run_pipeline(MembershipOracle(A), config)
    except PfrlabError as exc:
        return {"seed": config.seed, "error": f"{type(exc).__name__}: {exc}", "success": False}
    row = report.to_dict(timings=timings)
    cert = report.certificate
    if cert is not None:
        row["basis"] = [to_bits(b, A.n) for b in cert.subspace.basis]
        row["reps"] = [to_bits(r, A.n) for r in cert.reps]
    return row


def _run_jobs(fn, jobs: list, workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def _median(values):
    values = [v for v in values if v is not None]
    return statistics.median(values) if values else None


def cmd_pfr(args) -> int:
    A = read_set(args.set)
    K = args.K if args.K is not None else doubling_constant(A)
    seeds = parse_seeds(args.seeds)
    jobs = [(A, _config_from(args, s, K), args.timings) for s in seeds]
    rows = _run_jobs(_pfr_one, jobs, args.workers)
    ok = [r for r in rows if "error" not in r]
    summary = {
        "summary": True,
        "seeds": len(rows),
        "completed": len(ok),
        "success_rate": sum(r["success"] for r in rows) / len(rows),
        "median_cover_size": _median(r.get("cover_size") for r in ok),
        "median_membership_queries": _median(r["membership_queries"] for r in ok),
        "median_samples": _median(r["samples"] for r in ok),
    }
    _emit([_dumps(r) for r in rows] + [_dumps(summary)], args.out)
    return 0 if len(ok) == len(rows) else 1


# -- homtest / approxhom -----------------------------------------------------

def _fit_config(args) -> PipelineConfig:
    seed = args.seed if args.seed is not None else default_seed()
    return PipelineConfig(K=args.K or 1, backend=args.backend, seed=seed)


def cmd_homtest(args) -> int:
    f = read_table(args.table)
    config = _fit_config(args)
    fit = hom_test_fit(f, config)
    row = {
        "agreement": fit.agreement,
        "agreement_fraction": fit.agreement / (1 << f.m),
        "M": _matrix_bits(fit.M),
        "v": to_bits(fit.v, f.n),
        "seed": config.seed,
    }
    _emit([_dumps(row)], args.out)
    return 0


def cmd_approxhom(args) -> int:
    f = read_table(args.table)
    config = _fit_config(args)
    res = approx_hom_decompose(f, config)
    row = {
        "residual_image_size": res.residual_image_size,
        "delta_size": res.delta_size,
        "cover_size": res.cover_size,
        "bound": res.bound,
        "within_bound": res.within_bound,
        "agreement": res.agreement,
        "M": _matrix_bits(res.M),
        "v": to_bits(res.v, f.n),
        "seed": config.seed,
    }
    _emit([_dumps(row)], args.out)
    return 0


# -- verify ------------------------------------------------------------------

def cmd_verify(args) -> int:
    """Check that translates of span(basis) by reps cover the set.

    The certificate is a sidecar JSON or a pipeline report line; both carry
    ``basis`` and ``reps`` as bitstrings.
    """
    A = read_set(args.set)
    text = Path(args.certificate).read_text().strip()
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        data = json.loads(text.splitlines()[0])
    if "basis" not in data or "reps" not in data:
        raise ParseError(args.certificate, 1, "certificate needs 'basis' and 'reps'")
    V = span([from_bits(b) for b in data["basis"]], A.n)
    reps = [from_bits(r) for r in data["reps"]]
    cert = verify_cover(A, V, reps)
    row = {
        "covered": cert.covered,
        "cover_size": cert.cover_size,
        "dimV": V.dim,
        "size_ok": V.size <= len(A),
    }
    _emit([_dumps(row)], args.out)
    return 0 if cert.covered else 1


# -- bench-queries -----------------------------------------------------------

def _bench_one(job) -> str:
    n, k, K, seed, args_t, m_slack = job
    rng = np.random.default_rng(seed)
    V = access.random_subspace(n, k, rng)
    A = PointSet.from_subspace(V)
    oracle = MembershipOracle(A)
    config = PipelineConfig(K=K, t_override=args_t, m_slack=m_slack, seed=seed)
    report = run_pipeline(oracle, config)
    return (f"{len(A)},{n},{K},{seed},{config.t(len(A))},{report.samples},"
            f"{report.membership_queries},{int(report.success)}")


def cmd_bench(args) -> int:
    lo, hi = (int(v) for v in args.sizes.split("..", 1))
    n = args.n if args.n is not None else max(16, hi + 4)
    seeds = parse_seeds(args.seeds)
    jobs = [(n, k, args.K, s, args.t, args.m_slack) for k in range(lo, hi + 1) for s in seeds]
    lines = ["size,n,K,seed,t,samples,membership_queries,success"]
    lines += _run_jobs(_bench_one, jobs, args.workers)
    _emit(lines, args.out)
    return 0


# -- manifests ---------------------------------------------------------------

def _sha256(path) -> Optional[str]:
    p = Path(path)
    return hashlib.sha256(p.read_bytes()).hexdigest() if p.is_file() else None


def write_manifest(path, argv: list[str], args):
    inputs = {}
    for key in ("set", "table", "certificate"):
        val = getattr(args, key, None)
        if val:
            inputs[val] = _sha256(val)
    outputs = {}
    if getattr(args, "out", None):
        outputs[args.out] = _sha256(args.out)
        side = args.out + ".json"
        if args.command == "gen" and Path(side).is_file():
            outputs[side] = _sha256(side)
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "manifest")}
    manifest = {
        "command": args.command,
        "argv": [a for a in argv],
        "config": config,
        "seeds": getattr(args, "seeds", None),
        "inputs": inputs,
        "outputs": outputs,
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _strip_manifest_flag(argv: list[str]) -> list[str]:
    out, skip = [], False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == "--manifest":
            skip = True
            continue
        if a.startswith("--manifest="):
            continue
        out.append(a)
    return out


def cmd_replay(args) -> int:
    """Re-run a manifest and compare every recorded output hash."""
    manifest = json.loads(Path(args.manifest_file).read_text())
    for path, digest in manifest["inputs"].items():
        if _sha256(path) != digest:
            print(f"input changed: {path}", file=sys.stderr)
            return 1
    code = main(_strip_manifest_flag(manifest["argv"]))
    if code != 0:
        return code
    bad = [p for p, d in manifest["outputs"].items() if _sha256(p) != d]
    for p in bad:
        print(f"output differs: {p}", file=sys.stderr)
    return 1 if bad else 0


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pfrlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=False):
        p.add_argument("--out", required=out_required)
        p.add_argument("--manifest", help="write a run manifest to this path")
        p.add_argument("--workers", type=int, default=1)

    g = sub.add_parser("gen", help="generate a planted instance")
    g.add_argument("kind", choices=["cover", "affine", "smallimage"])
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--m", type=int)
    g.add_argument("--dim", type=int, default=0)
    g.add_argument("--cosets", type=int, default=1)
    g.add_argument("--noise", type=float, default=0.0)
    g.add_argument("--rho", type=float, default=1.0)
    g.add_argument("--imgk", type=int, default=1)
    g.add_argument("--seed", type=int)
    common(g, out_required=True)
    g.set_defaults(func=cmd_gen)

    def pipeline_flags(p):
        p.add_argument("--K", type=int, help="doubling bound (default: exact doubling of the input)")
        p.add_argument("--m-slack", type=int, default=10)
        p.add_argument("--t", type=int, help="override the localization sample count")
        p.add_argument("--restarts", type=int, default=8)
        p.add_argument("--backend", choices=["bilinear", "exhaustive"], default="bilinear")

    p = sub.add_parser("pfr", help="run the covering pipeline over a seed range")
    p.add_argument("set")
    pipeline_flags(p)
    p.add_argument("--size", type=int, help="|A| bound given to the algorithm")
    p.add_argument("--seeds")
    p.add_argument("--exact-iso", action="store_true")
    p.add_argument("--timings", action="store_true", help="report wall-clock stage timings")
    common(p)
    p.set_defaults(func=cmd_pfr)

    for name, fn in (("homtest", cmd_homtest), ("approxhom", cmd_approxhom)):
        h = sub.add_parser(name)
        h.add_argument("table")
        h.add_argument("--K", type=int)
        h.add_argument("--seed", type=int)
        h.add_argument("--backend", choices=["bilinear", "exhaustive"], default="bilinear")
        common(h)
        h.set_defaults(func=fn)

    v = sub.add_parser("verify", help="check a cover certificate against a set")
    v.add_argument("set")
    v.add_argument("certificate")
    common(v)
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench-queries", help="query counts on the subspace family")
    b.add_argument("--K", type=int, default=1)
    b.add_argument("--sizes", default="6..12", help="log2|A| range, inclusive")
    b.add_argument("--n", type=int)
    b.add_argument("--t", type=int)
    b.add_argument("--m-slack", type=int, default=10)
    b.add_argument("--seeds")
    common(b)
    b.set_defaults(func=cmd_bench)

    r = sub.add_parser("replay", help="re-run a manifest and compare output hashes")
    r.add_argument("manifest_file")
    r.set_defaults(func=cmd_replay, manifest=None)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        code = args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (PfrlabError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    if getattr(args, "manifest", None):
        write_manifest(args.manifest, argv, args)
    return code


if __name__ == "__main__":
    sys.exit(main())
