"""polarlab command line.

Exit codes: 0 ok, 1 computation error (guards, non-convergence), 2 bad input.
Every output carries the tool version, the seed and sha256 digests of the
inputs: CSV files as leading ``#`` comment lines, JSON files as a "meta" block.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys

import numpy as np

from . import __version__, _rng
from .channel import channel_from_json, gallager_e0, params
from .codec import simulate_fer, wilson
from .construct import CodeSpec, build_frozen, build_pruned
from .gf import get_field, sample_gl
from .kernel import DistanceStats, Kernel, arikan, distances, g_barg, g_ye, is_ergodic
from .mdp import RHO_SBDMC, RegionSpec, bec_scaling_exponent, region_boundary
from .multiterminal import JointSource, SplitConfig, duty_point, region_check, solve_knob, task_list
from .process import bec_density, enumerate_tree, sample_paths
from .transform import DEFAULT_MERGE_CAP, erasure_of, synthesize_all

BUILTIN_KERNELS = {"arikan": arikan, "gye": g_ye, "gbarg": g_barg}


class InputError(Exception):
    pass


class Inputs:
    """Loads input files and remembers their digests."""

    def __init__(self):
        self.digests: dict = {}

    def _record(self, name: str, data: bytes):
        self.digests[name] = hashlib.sha256(data).hexdigest()

    def json(self, name: str, path: str):
        try:
            with open(path, "rb") as fh:
                data = fh.read()
        except OSError as exc:
            raise InputError(f"cannot read {path}: {exc.strerror}") from exc
        self._record(name, data)
        try:
            return json.loads(data)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise InputError(f"{path}: malformed JSON ({exc})") from exc

    def parsed(self, name: str, path: str, ctor):
        obj = self.json(name, path)
        try:
            return ctor(obj)
        except (ValueError, KeyError, TypeError, IndexError) as exc:
            raise InputError(f"{path}: {exc}") from exc

    def channel(self, path: str):
        return self.parsed("channel", path, channel_from_json)

    def kernel(self, ref: str) -> Kernel:
        if ref in BUILTIN_KERNELS:
            K = BUILTIN_KERNELS[ref]()
            self._record("kernel", json.dumps(K.to_json(), sort_keys=True).encode())
            return K
        return self.parsed("kernel", ref, Kernel.from_json)

    def literal(self, name: str, text: str):
        self._record(name, text.encode())
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"--{name}: malformed JSON ({exc})") from exc


def _meta(args, inputs: Inputs) -> dict:
    return {"tool": "polarlab", "version": __version__, "seed": args.seed, "inputs": dict(sorted(inputs.digests.items()))}


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, float) and not np.isfinite(x):
        return None
    return x


def _emit(args, text: str):
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def emit_json(args, inputs: Inputs, body: dict):
    doc = {"meta": _meta(args, inputs), **_clean(body)}
    _emit(args, json.dumps(doc, indent=2) + "\n")


def emit_csv(args, inputs: Inputs, header: list, rows):
    buf = io.StringIO()
    m = _meta(args, inputs)
    buf.write(f"# polarlab {m['version']} seed={m['seed']}\n")
    for k, v in m["inputs"].items():
        buf.write(f"# input {k} sha256={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    _emit(args, buf.getvalue())


def _floats(text: str, name: str) -> list:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise InputError(f"--{name} expects comma-separated numbers") from exc


# subcommands


def cmd_channel(args, inp: Inputs):
    W = inp.channel(args.channel)
    body = {"params": params(W).as_dict(), "q": W.q, "outputs": W.n_out, "erasure": erasure_of(W)}
    if args.e0 is not None:
        e0, e0bar = gallager_e0(W, args.e0)
        body["E0"] = {"t": args.e0, "E0": e0, "E0bar": e0bar}
    emit_json(args, inp, body)


def cmd_transform(args, inp: Inputs):
    W = inp.channel(args.channel)
    K = inp.kernel(args.kernel)
    res = synthesize_all(W, K, args.merge_cap)
    emit_json(args, inp, {
        "parent": params(W).as_dict(),
        "children": [
            {"j": j + 1, "params": p.as_dict(), "outputs": s, "degraded": c.degraded}
            for j, (c, p, s) in enumerate(zip(res.children, res.params, res.merged_output_sizes))
        ],
    })


def cmd_kernel(args, inp: Inputs):
    if args.action == "analyze":
        K = inp.kernel(args.kernel)
        prof = distances(K)
        st = DistanceStats(prof.dz, K.l)
        ts = np.linspace(-4.0, 0.0, 9)
        ss = np.linspace(0.0, st.varpi, 9)
        emit_json(args, inp, {
            **prof.as_dict(),
            "l": K.l,
            "q": K.q,
            "ergodic": is_ergodic(K),
            "lowered": None if K.lowered is None else K.lowered.tolist(),
            "varpi": st.varpi,
            "K_samples": [[t, st.K(t)] for t in ts],
            "L_samples": [[s, st.L(s)] for s in ss],
        })
    else:
        F = get_field(args.q)
        rows = []
        for i in range(args.trials):
            G = sample_gl(F, args.l, _rng.stream(args.seed, i).integers(0, 2**63))
            prof = distances(Kernel(F, G))
            rows.append({"index": i, "dz": list(prof.dz), "ds": list(prof.ds)})
        emit_json(args, inp, {"l": args.l, "q": args.q, "samples": rows})


def cmd_process(args, inp: Inputs):
    W = inp.channel(args.channel)
    K = inp.kernel(args.kernel)
    eps = erasure_of(W)
    if args.mode == "exact":
        st = bec_density(eps, K, args.depth) if eps is not None else enumerate_tree(W, K, args.depth, args.merge_cap)
    elif eps is not None:
        st = bec_density(eps, K, args.depth, "sampled", args.trials, args.seed, args.threads)
    else:
        st = sample_paths(W, K, args.depth, args.trials, args.seed, args.merge_cap, args.threads)
    emit_csv(args, inp, ["depth", "statistic", "value", "samples", "degraded_flag"], st.csv_rows())


def cmd_construct(args, inp: Inputs):
    W = inp.channel(args.channel)
    K = inp.kernel(args.kernel)
    if args.pruned:
        spec = build_pruned(W, K, args.depth, args.theta, args.merge_cap)
    else:
        chosen = [x is not None for x in (args.theta, args.budget, args.top_k)]
        if sum(chosen) != 1:
            raise InputError("full codes need exactly one of --theta, --budget, --top-k")
        spec = build_frozen(W, K, args.depth, args.theta, args.top_k, args.budget, args.merge_cap)
    body = spec.to_json()
    body.pop("meta", None)
    body["strategy"] = spec.meta
    body["K"] = spec.K
    emit_json(args, inp, body)


def cmd_sim(args, inp: Inputs):
    spec = inp.parsed("spec", args.spec, CodeSpec.from_json)
    W = inp.channel(args.channel)
    print(f"simulating {args.trials} frames, N={spec.N}, K={spec.K}", file=sys.stderr)
    res = simulate_fer(spec, W, args.trials, args.seed, args.threads)
    rows = []
    for b, err, cnt, ops in res["blocks"]:
        lo, hi = wilson(err, cnt)
        rows.append([b, err, err / cnt, lo, hi, float(ops)])
    if res["trials"]:
        lo, hi = res["ci"]
        rows.append(["total", res["errors"], res["fer"], lo, hi, float(res["avg_op_count"])])
    emit_csv(args, inp, ["trial_block", "errors", "fer", "ci_low", "ci_high", "ops_per_frame"], rows)


def cmd_region(args, inp: Inputs):
    if args.binary == bool(args.profile):
        raise InputError("give exactly one of --binary or --profile")
    if args.binary:
        spec = RegionSpec.binary(args.rho0)
    else:
        K = inp.kernel(args.profile)
        spec = RegionSpec.from_profile(args.rho0, distances(K).dz, K.l)
    res = region_boundary(spec, args.grid)
    emit_csv(args, inp, ["pi", "rho_boundary"], res["samples"])


def cmd_scaling(args, inp: Inputs):
    K = inp.kernel(args.kernel)
    res = bec_scaling_exponent(K, args.grid)
    emit_json(args, inp, {"lambda": res.lam, "rho": res.rho, "inverse_rho": 1 / res.rho, "iterations": res.iterations})


def cmd_sw(args, inp: Inputs):
    P = inp.parsed("source", args.source, JointSource.from_json)
    if args.action == "duty":
        if args.knob is None:
            raise InputError("duty needs --knob")
        knob = inp.literal("knob", args.knob)
        try:
            cfg = SplitConfig(P.M, {str(k): float(v) for k, v in knob.items()})
        except (ValueError, AttributeError) as exc:
            raise InputError(f"--knob: {exc}") from exc
        B = duty_point(P, cfg)
        emit_json(args, inp, {"knob": cfg.knob, "B": B, "sum": float(B.sum()), "tasks": task_list(P, cfg)})
    elif args.action == "solve":
        if args.target is None:
            raise InputError("solve needs --target")
        target = _floats(args.target, "target")
        cfg = solve_knob(P, target, args.tol)
        B = duty_point(P, cfg)
        emit_json(args, inp, {"target": target, "knob": cfg.knob, "B": B, "residual": float(np.abs(B - target).max())})
    else:
        if args.rates is None:
            raise InputError("check needs --rates")
        rates = _floats(args.rates, "rates")
        helper = None
        if args.helper:
            helper = inp.parsed("helper", args.helper, dict)
        emit_json(args, inp, {"rates": rates, "feasible": region_check(P, rates, helper)})


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=lambda s: int(s, 0), default=_rng.DEFAULT_SEED, help="RNG seed (default 0xC0DE)")
    common.add_argument("--threads", type=int, default=None, help="worker threads (default $POLARLAB_THREADS or 1)")
    common.add_argument("--out", default=None, help="output file (default stdout)")
    common.add_argument("--merge-cap", type=int, default=DEFAULT_MERGE_CAP, help="output-alphabet cap for degrading merges")

    p = argparse.ArgumentParser(prog="polarlab", description="Polar coding toolkit over finite fields.")
    p.add_argument("--version", action="version", version=f"polarlab {__version__}")
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("channel", parents=[common], help="channel parameters")
    s.add_argument("channel")
    s.add_argument("--e0", type=float, default=None, help="also evaluate Gallager E0 at this t")
    s.set_defaults(fn=cmd_channel)

    s = sub.add_parser("transform", parents=[common], help="one polar transform step")
    s.add_argument("channel")
    s.add_argument("--kernel", default="arikan")
    s.set_defaults(fn=cmd_transform)

    s = sub.add_parser("kernel", parents=[common], help="kernel analysis")
    s.add_argument("action", choices=["analyze", "random"])
    s.add_argument("kernel", nargs="?", default="arikan")
    s.add_argument("--l", type=int, default=16)
    s.add_argument("--q", type=int, default=2)
    s.add_argument("--trials", type=int, default=10)
    s.set_defaults(fn=cmd_kernel)

    s = sub.add_parser("process", parents=[common], help="channel process statistics per depth")
    s.add_argument("channel")
    s.add_argument("--kernel", default="arikan")
    s.add_argument("--depth", type=int, default=8)
    s.add_argument("--trials", type=int, default=1000)
    s.add_argument("--mode", choices=["exact", "sampled"], default="sampled")
    s.set_defaults(fn=cmd_process)

    s = sub.add_parser("construct", parents=[common], help="build a code specification")
    s.add_argument("channel")
    s.add_argument("--kernel", default="arikan")
    s.add_argument("--depth", type=int, required=True)
    s.add_argument("--theta", type=float, default=None)
    s.add_argument("--budget", type=float, default=None)
    s.add_argument("--top-k", type=int, default=None)
    s.add_argument("--pruned", action="store_true")
    s.set_defaults(fn=cmd_construct)

    s = sub.add_parser("sim", parents=[common], help="Monte Carlo frame error rate")
    s.add_argument("--spec", required=True)
    s.add_argument("--channel", required=True)
    s.add_argument("--trials", type=int, default=1000)
    s.set_defaults(fn=cmd_sim)

    s = sub.add_parser("region", parents=[common], help="moderate-deviation region boundary")
    s.add_argument("--rho0", type=float, default=RHO_SBDMC)
    s.add_argument("--binary", action="store_true")
    s.add_argument("--profile", default=None, help="kernel file or builtin name")
    s.add_argument("--grid", type=int, default=101)
    s.set_defaults(fn=cmd_region)

    s = sub.add_parser("scaling", parents=[common], help="BEC scaling exponent")
    s.add_argument("--kernel", default="arikan")
    s.add_argument("--grid", type=int, default=10_000)
    s.set_defaults(fn=cmd_scaling)

    s = sub.add_parser("sw", parents=[common], help="Slepian-Wolf duties and knobs")
    s.add_argument("action", choices=["duty", "solve", "check"])
    s.add_argument("source")
    s.add_argument("--knob", default=None, help='JSON map, e.g. {"1": 0.5, "2": 0.5}')
    s.add_argument("--target", default=None)
    s.add_argument("--rates", default=None)
    s.add_argument("--helper", default=None, help="JSON file {index, channel, rate}")
    s.add_argument("--tol", type=float, default=1e-9)
    s.set_defaults(fn=cmd_sw)

    # flags accepted everywhere so scripts can pass them uniformly
    for name, sp in sub.choices.items():
        known = {a.dest for a in sp._actions}
        if "theta" not in known:
            sp.add_argument("--theta", type=float, default=None, help=argparse.SUPPRESS)
        if "trials" not in known:
            sp.add_argument("--trials", type=int, default=0, help=argparse.SUPPRESS)
        if "depth" not in known:
            sp.add_argument("--depth", type=int, default=None, help=argparse.SUPPRESS)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    inp = Inputs()
    try:
        args.fn(args, inp)
    except InputError as exc:
        print(f"polarlab: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, ArithmeticError, MemoryError) as exc:
        print(f"polarlab: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
