"""Command-line entry point: ``ssperm {party,bench,train,privacy}``.

Exit codes: 0 success, 1 protocol or transport failure, 2 usage or input
error. Set ``SSPERM_LOG=DEBUG`` (or INFO, WARNING) for diagnostics.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time

import numpy as np

from . import data, jobs, nn, privacy
from . import protocols as P
from .runtime import ConfigError, LinkClosed, ProtocolError, SessionConfig, run_local, run_party
from .runtime.accounting import REFERENCE_RELU_COSTS
from .runtime.wire import DecodeError
from .sharing import PartyId

log = logging.getLogger("ssperm")

EXIT_OK, EXIT_PROTOCOL, EXIT_USAGE = 0, 1, 2

MODEL_DEFAULTS = {"lr": (100, None), "dnn1": (100, 50), "dnn2": (1000, 500)}


class UsageError(Exception):
    pass


def _positive(name):
    def conv(v):
        try:
            x = int(v)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be an integer") from None
        if x < 1:
            raise argparse.ArgumentTypeError(f"{name} must be >= 1")
        return x

    return conv


def _nonneg(v):
    x = int(v)
    if x < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return x


# ----------------------------------------------------------------------------
# party


def cmd_party(args) -> int:
    cfg = SessionConfig.load(args.config)
    if not cfg.job:
        raise UsageError("config has no 'job' section")
    role = PartyId.parse(args.role)
    result, party = run_party(role, cfg, lambda p: jobs.run_job(p, cfg.job))
    out = {"role": str(role), "result": result, "traffic": party.accounting.report()}
    if args.out:
        data.write_json(out, args.out)
    log.info("party %s finished", role)
    return EXIT_OK


# ----------------------------------------------------------------------------
# bench


def bench_arch(args) -> str:
    if args.model == "custom":
        if not args.arch:
            raise UsageError("--model custom needs --arch")
        return args.arch
    dim_d, hid_d = MODEL_DEFAULTS[args.model]
    dim = args.dim or dim_d
    if args.model == "lr":
        return f"{dim}-1-sigmoid"
    return f"{dim}-{args.hidden or hid_d}-relu-1-sigmoid"


def run_bench(arch: str, batch: int, train: bool = False, steps: int = 1, seed: int = 0,
              config: SessionConfig | None = None) -> dict:
    """Random-data benchmark in local simulation; returns a report dict."""
    layers = nn.parse_arch(arch)
    if batch < 1:
        raise UsageError("batch must be >= 1")
    d, out_dim = layers[0].fan_in, layers[-1].fan_out
    start_seq = {}

    def program(party):
        holds = party.role == PartyId.P0
        rng = np.random.default_rng(seed)
        params = nn.init_params(layers, seed) if holds else None
        X = rng.normal(size=(batch, d)) if holds else None
        Y = (rng.uniform(size=(batch, out_dim)) > 0.5).astype(float) if holds else None
        net = nn.Network.share(party, layers, params)
        Xs = P.share_input(party, X, PartyId.P0, (batch, d))
        Ys = P.share_input(party, Y, PartyId.P0, (batch, out_dim))
        start_seq[party.role] = party.op_seq + 1
        t0 = time.perf_counter()
        if train:
            cfg = nn.TrainConfig(lr=0.1, epochs=1, batch_size=batch, seed=seed)
            for _ in range(steps):
                nn.nn_backprop(Xs, Ys, net, cfg)
        else:
            nn.nn_infer(Xs, net)
        # drain outstanding clip indices so every share is materialised
        for layer in net.layers:
            party.flush(layer.W, layer.b)
        return time.perf_counter() - t0

    res = run_local(program, config or SessionConfig(data_seed=seed))
    view = res.accounting.view(min_op_seq=start_seq[PartyId.P0])
    timings = {}
    for party in res.parties:
        for name, sec in party.timings.items():
            timings[name] = max(timings.get(name, 0.0), sec)
    rep = view.report()
    return {
        "model": {"arch": arch, "batch": batch, "mode": "train" if train else "infer",
                  "steps": steps if train else 1, "seed": seed},
        "wall_seconds": max(res.outputs),
        "per_op_seconds": timings,
        "per_op": rep["per_op"],
        "links": rep["links"],
        "rounds_total": rep["rounds_total"],
        "total_payload_bits": rep["total_payload_bits"],
        "online_payload_bits": rep["online_payload_bits"],
        "total_raw_bytes": rep["total_raw_bytes"],
        "invocations": view.invocations(),
        "reference_relu_costs": REFERENCE_RELU_COSTS,
    }


def cmd_bench(args) -> int:
    report = run_bench(bench_arch(args), args.batch, args.train, args.steps, args.seed)
    if args.out:
        data.write_json(report, args.out)
    else:
        print(_summary(report))
    return EXIT_OK


def _summary(report: dict) -> str:
    lines = [f"model {report['model']}", f"{'op':<16}{'calls':>7}{'rounds':>8}{'payload bits':>16}"]
    for op, row in sorted(report["per_op"].items()):
        lines.append(f"{op:<16}{row['calls']:>7}{row['rounds_total']:>8}{row['payload_bits']:>16}")
    lines.append(f"total payload bits {report['total_payload_bits']}, rounds {report['rounds_total']}")
    return "\n".join(lines)


# ----------------------------------------------------------------------------
# train


def cmd_train(args) -> int:
    if args.data == "synthetic":
        X, Y = data.two_gaussians(args.n, args.dim, args.seed)
    else:
        try:
            X, Y = data.load_dataset(args.data, args.label)
        except (OSError, ValueError) as e:
            raise UsageError(str(e)) from None
    arch = args.arch or f"{X.shape[1]}-16-relu-1-sigmoid"
    layers = nn.parse_arch(arch)
    if layers[0].fan_in != X.shape[1]:
        raise UsageError(f"architecture input width {layers[0].fan_in} != data width {X.shape[1]}")
    Xt, Yt, Xv, Yv = data.split(X, Y, args.val_frac)
    cfg = nn.TrainConfig(lr=args.lr, epochs=args.epochs, batch_size=args.batch, seed=args.seed)

    def program(party):
        holds = party.role == PartyId.P0
        net, hist, ref = nn.train_shared(
            party, layers, cfg,
            *((Xt, Yt, Xv, Yv) if holds else (None,) * 4),
            shapes=(Xt.shape, Yt.shape, Xv.shape, Yv.shape),
            compare_plaintext=args.compare_plaintext,
        )
        if args.checkpoint_dir and party.role != PartyId.P2:
            os.makedirs(args.checkpoint_dir, exist_ok=True)
            party.flush(*[t for l in net.layers for t in (l.W, l.b)])
            data.dump_checkpoint(net, os.path.join(args.checkpoint_dir, f"{party.role.name.lower()}.ckpt"))
        return hist

    res = run_local(program, SessionConfig(data_seed=args.seed))
    hist = res.outputs[0]
    rows = hist.rows()
    if args.out:
        data.write_csv(rows, args.out)
    else:
        for r in rows:
            print(",".join(f"{k}={v:.4f}" if isinstance(v, float) else f"{k}={v}" for k, v in r.items()))
    if args.report:
        data.write_json({"arch": arch, "train": vars(cfg), "history": rows,
                         "traffic": res.accounting.report(), "per_op_seconds": res.timings()},
                        args.report)
    return EXIT_OK


# ----------------------------------------------------------------------------
# privacy


def cmd_dcor_sim(args) -> int:
    kinds = args.dists.split(",") if args.dists else list(privacy.DISTRIBUTIONS)
    for k in kinds:
        if k not in privacy.DISTRIBUTIONS:
            raise UsageError(f"unknown distribution {k!r}")
    rows = privacy.dcor_simulation(kinds, args.n, args.d, args.h, args.repeats, args.seed,
                                   unbiased=args.unbiased, include_expected=args.expected)
    _emit(rows, args, ["distribution", "method", "dcor", "ci_low", "ci_high"])
    return EXIT_OK


def cmd_attack(args) -> int:
    batches = args.batch or [1, 2, 5, 10]
    rows = [privacy.attack_success(args.n, args.d, args.h, None, args.k, args.targets, seed=args.seed)]
    rows += [privacy.attack_success(args.n, args.d, args.h, b, args.k, args.targets, seed=args.seed)
             for b in batches]
    for r in rows:
        r["batch_size"] = "none" if r["batch_size"] is None else r["batch_size"]
    _emit(rows, args, ["batch_size", "rate", "chance", "k", "n_targets"])
    return EXIT_OK


def cmd_perm_stats(args) -> int:
    rng = np.random.default_rng(args.seed)
    mode = "sample" if args.samples else "enumerate"
    rows = []
    for _ in range(args.trials):
        x = rng.normal(size=args.n)
        y = privacy.random_orthogonal_unit(args.n, rng)
        st = privacy.perm_error_stats(x, y, mode, args.samples or 0, rng)
        rows.append(st.as_dict())
    _emit(rows, args, ["n", "mode", "count", "mean", "variance", "e_norm2", "approx_1_over_n",
                       "approx_1_over_n_plus", "exact_formula", "ratio_to_1_over_n"])
    return EXIT_OK


def cmd_flip_test(args) -> int:
    z = np.abs(np.random.default_rng(args.seed).normal(size=args.length)) + 1e-3
    if args.sign == "negative":
        z = -z
    elif args.sign == "zero":
        z = np.zeros(args.length)
    res = privacy.flipping_distribution_test(z, args.trials, seed=args.seed.to_bytes(32, "little"))
    _emit([{"sign": args.sign, "n": res.n, "p_negative": res.p_negative, "stderr": res.stderr}],
          args, ["sign", "n", "p_negative", "stderr"])
    return EXIT_OK


def _emit(rows, args, fields):
    if getattr(args, "json", None):
        data.write_json(rows, args.json)
    if args.out:
        data.write_csv(rows, args.out, fields)
    if not args.out and not getattr(args, "json", None):
        print(",".join(fields))
        for r in rows:
            print(",".join(_fmt(r.get(f)) for f in fields))


def _fmt(v) -> str:
    return f"{v:.6g}" if isinstance(v, float) else str(v)


# ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ssperm", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("party", help="run one networked party")
    p.add_argument("--role", required=True, choices=["p0", "p1", "p2"])
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="write this party's result and traffic as JSON")
    p.set_defaults(func=cmd_party)

    p = sub.add_parser("bench", help="local-sim traffic/timing benchmark on random data")
    p.add_argument("--model", choices=["lr", "dnn1", "dnn2", "custom"], default="lr")
    p.add_argument("--dim", type=_positive("--dim"))
    p.add_argument("--hidden", type=_positive("--hidden"))
    p.add_argument("--arch", help="architecture for --model custom, e.g. 20-16-relu-1-sigmoid")
    p.add_argument("--batch", type=int, default=64)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--train", action="store_true")
    g.add_argument("--infer", action="store_true")
    p.add_argument("--steps", type=_positive("--steps"), default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("train", help="train a shared model (optionally beside a float one)")
    p.add_argument("--data", default="synthetic", help="CSV/binary path or 'synthetic'")
    p.add_argument("--label", default="-1", help="label column name or index")
    p.add_argument("--n", type=_positive("--n"), default=1000, help="synthetic sample count")
    p.add_argument("--dim", type=_positive("--dim"), default=20, help="synthetic dimension")
    p.add_argument("--arch")
    p.add_argument("--epochs", type=_nonneg, default=20)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--batch", type=_positive("--batch"), default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--val-frac", type=float, default=0.2)
    p.add_argument("--compare-plaintext", action="store_true")
    p.add_argument("--out", help="per-epoch accuracy CSV")
    p.add_argument("--report", help="JSON report with traffic")
    p.add_argument("--checkpoint-dir")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("privacy", help="leakage simulations")
    psub = p.add_subparsers(dest="privacy_command", required=True)

    q = psub.add_parser("dcor-sim", help="permuted vs 1-d projected dcor per distribution")
    q.add_argument("--n", type=_positive("--n"), default=1000)
    q.add_argument("--d", type=_positive("--d"), default=100)
    q.add_argument("--h", type=_positive("--h"), default=100)
    q.add_argument("--repeats", type=_positive("--repeats"), default=200)
    q.add_argument("--dists", help="comma-separated subset of normal,uniform,sparse,subspace")
    q.add_argument("--unbiased", action="store_true", help="bias-corrected estimator")
    q.add_argument("--expected", action="store_true", help="add the closed-form linear value")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out")
    q.add_argument("--json")
    q.set_defaults(func=cmd_dcor_sim)

    q = psub.add_parser("attack", help="histogram attack success vs batch size")
    q.add_argument("--batch", type=_positive("--batch"), action="append")
    q.add_argument("--n", type=_positive("--n"), default=1000)
    q.add_argument("--d", type=_positive("--d"), default=50)
    q.add_argument("--h", type=_positive("--h"), default=16)
    q.add_argument("--k", type=_positive("--k"), default=10)
    q.add_argument("--targets", type=_positive("--targets"), default=100)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out")
    q.add_argument("--json")
    q.set_defaults(func=cmd_attack)

    q = psub.add_parser("perm-stats", help="error-vector projection statistics")
    q.add_argument("--n", type=_positive("--n"), default=6)
    q.add_argument("--enumerate", action="store_true", help="exact enumeration (default)")
    q.add_argument("--samples", type=_positive("--samples"), help="sample permutations instead")
    q.add_argument("--trials", type=_positive("--trials"), default=5)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out")
    q.add_argument("--json")
    q.set_defaults(func=cmd_perm_stats)

    q = psub.add_parser("flip-test", help="sign frequency after random flipping")
    q.add_argument("--length", type=_positive("--length"), default=1000)
    q.add_argument("--trials", type=_positive("--trials"), default=100)
    q.add_argument("--sign", choices=["positive", "negative", "zero"], default="positive")
    q.add_argument("--seed", type=_nonneg, default=0)
    q.add_argument("--out")
    q.add_argument("--json")
    q.set_defaults(func=cmd_flip_test)
    return ap


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("SSPERM_LOG", "WARNING").upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ProtocolError, LinkClosed, DecodeError) as e:
        print(f"ssperm: protocol error: {e}", file=sys.stderr)
        return EXIT_PROTOCOL
    except (UsageError, ConfigError, ValueError, OSError) as e:
        print(f"ssperm: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
