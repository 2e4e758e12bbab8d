"""``spreadmenot`` command line.

Exit codes: 0 ok/true, 1 false/no match where a boolean is asked, 2 usage or
malformed input, 3 I/O or network, 4 unauthorized, 5 invariant violation.
"""
from __future__ import annotations

import argparse
import json
import logging
import random
import secrets
import signal
import sys
from pathlib import Path

from . import bench as benchmod
from .authority import AuthorityClient, CurveMismatch, ReportStore, ServiceConfig, Unauthorized, make_server
from .authority.http import ServiceUnavailable
from .beacon import Beacon, KeyPair, gen_beacon, gen_key, rand_beacon, test_beacon
from .device import ContactRecord, check_exposure, load_contacts, prepare_report
from .ecc import STANDARD_CURVES, CurveId, GroupElement, InvalidPoint, get_params
from .signed import decode_signed_beacon, encode_signed_beacon, sign_beacon, verify_signed_beacon
from .sim import (ConfigError, SimConfig, relay_scenario, replay_scenario, end_to_end_scenario,
                  run_indistinguishability_experiment, run_simulation)
from .sim.experiments import BAND, DISTINGUISHERS, PASSIVE
from .wire import DecodeError, Location, fits_ble_payload, paper_payload_accounting, signed_beacon_size

EXIT_OK, EXIT_FALSE, EXIT_USAGE, EXIT_IO, EXIT_AUTH, EXIT_INVARIANT = range(6)
SCENARIOS = {"replay": replay_scenario, "relay": relay_scenario, "end-to-end": end_to_end_scenario}


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


# -- helpers ---------------------------------------------------------------------

def _rng(args, label: str):
    if args.seed is None:
        return secrets.SystemRandom()
    return random.Random(f"cli:{label}:{args.seed}")


def _params(args):
    return get_params(args.curve)


def _unhex(text: str, what: str) -> bytes:
    try:
        return bytes.fromhex(text.strip())
    except ValueError:
        raise CliError(f"{what}: not a hex string") from None


def _scalar(params, text: str) -> int:
    x = int.from_bytes(_unhex(text, "private key"), "big")
    if not 1 <= x < params.q:
        raise CliError(f"private key out of range for {params.curve_id.value}")
    return x


def _read_key(params, args) -> KeyPair:
    """From --private HEX or --key FILE (keygen output, text or json, or bare hex)."""
    if args.private:
        return KeyPair.from_private(params, _scalar(params, args.private))
    if not args.key:
        raise CliError("need --private or --key")
    try:
        text = Path(args.key).read_text()
    except OSError as exc:
        raise CliError(f"{args.key}: {exc.strerror}", EXIT_IO) from None
    try:
        doc = json.loads(text)
    except ValueError:
        doc = None
    if isinstance(doc, dict):
        if doc.get("curve") and CurveId.parse(doc["curve"]) is not params.curve_id:
            raise CliError(f"key file is for {doc['curve']}, not {params.curve_id.value}")
        return KeyPair.from_private(params, _scalar(params, doc["private"]))
    for line in text.splitlines():
        parts = line.split()
        if len(parts) == 2 and parts[0] == "private":
            return KeyPair.from_private(params, _scalar(params, parts[1]))
    return KeyPair.from_private(params, _scalar(params, text))


def _beacon(params, text: str) -> Beacon:
    """Plain beacon hex, or a full signed-beacon frame (its signature must verify)."""
    raw = _unhex(text, "beacon")
    if len(raw) == signed_beacon_size(params):
        sb = decode_signed_beacon(params, raw)
        if not verify_signed_beacon(sb):
            raise CliError("signed beacon: bad signature")
        return sb.beacon
    if len(raw) != Beacon.encoded_size(params):
        raise CliError(f"beacon: expected {Beacon.encoded_size(params)} bytes for "
                       f"{params.curve_id.value}, got {len(raw)}")
    return Beacon.from_bytes(params, raw)


def _emit(args, doc: dict, text_lines) -> None:
    if args.output == "json":
        print(json.dumps(doc, sort_keys=False, separators=(",", ":")))
    else:
        for line in text_lines:
            print(line)


# -- protocol commands -------------------------------------------------------------

def cmd_keygen(args) -> int:
    params = _params(args)
    kp = gen_key(params, _rng(args, "keygen"))
    priv = kp.x.to_bytes(params.scalar_bytes, "big").hex()
    pub = kp.P.to_bytes().hex()
    _emit(args, {"curve": params.curve_id.value, "private": priv, "public": pub},
          [f"curve {params.curve_id.value}", f"private {priv}", f"public {pub}"])
    return EXIT_OK


def cmd_beacon(args) -> int:
    params = _params(args)
    rng = _rng(args, "beacon")
    if args.public:
        if args.signed:
            raise CliError("--signed needs the private key (--private or --key)")
        try:
            P = GroupElement.from_bytes(params, _unhex(args.public, "public key"))
        except (InvalidPoint, ValueError) as exc:
            raise CliError(f"public key: {exc}") from None
        kp = None
    else:
        kp = _read_key(params, args)
        P = kp.P
    beacon, r = gen_beacon(P, rng)
    doc = {"curve": params.curve_id.value, "beacon": beacon.to_bytes().hex()}
    lines = [f"beacon {doc['beacon']}"]
    if args.signed:
        loc = Location.from_degrees(args.lat, args.lon)
        sb = sign_beacon(beacon, r, kp.x, loc, args.time)
        doc["signed"] = encode_signed_beacon(sb).hex()
        lines.append(f"signed {doc['signed']}")
    _emit(args, doc, lines)
    return EXIT_OK


def cmd_randomize(args) -> int:
    params = _params(args)
    out = rand_beacon(_beacon(params, args.beacon), _rng(args, "randomize"))
    hexed = out.to_bytes().hex()
    _emit(args, {"curve": params.curve_id.value, "beacon": hexed}, [f"beacon {hexed}"])
    return EXIT_OK


def cmd_test(args) -> int:
    params = _params(args)
    kp = _read_key(params, args)
    result = test_beacon(_beacon(params, args.beacon), kp.x)
    _emit(args, {"curve": params.curve_id.value, "match": result}, ["true" if result else "false"])
    return EXIT_OK if result else EXIT_FALSE


def cmd_payload_report(args) -> int:
    rows = []
    for params in STANDARD_CURVES:
        real = signed_beacon_size(params)
        rows.append({"curve": params.curve_id.value, "security_bits": params.security_bits,
                     "accounted": paper_payload_accounting(params.security_bits),
                     "wire": real, "fits_ble": fits_ble_payload(real)})
    lines = [f"{'curve':<10} {'bits':>4} {'compat':>6} {'wire':>5}  ble-251"]
    lines += [f"{r['curve']:<10} {r['security_bits']:>4} {r['accounted']:>6} {r['wire']:>5}  "
              f"{'fits' if r['fits_ble'] else 'TOO BIG'}" for r in rows]
    _emit(args, {"rows": rows}, lines)
    return EXIT_OK if all(r["fits_ble"] for r in rows) else EXIT_INVARIANT


# -- benchmarks ----------------------------------------------------------------------

def cmd_bench(args) -> int:
    rng = _rng(args, "bench")
    params = _params(args)
    failures = []
    if args.op == "scalar-mul":
        stats = {c.curve_id.value: benchmod.bench_scalar_mul(c, args.n, rng) for c in STANDARD_CURVES}
        if not stats["secp256k1"].mean > stats["secp128r1"].mean:
            failures.append("secp256k1 scalar multiplication not slower than secp128r1")
        doc = {"op": args.op, "results": [s.to_dict() for s in stats.values()]}
        lines = [_fmt_stats(s) for s in stats.values()]
    elif args.op == "beacon-roundtrip":
        kp = gen_key(params, rng)
        pooled = benchmod.bench_beacon_generation(kp, args.n, pooled=True, rng=rng)
        unpooled = benchmod.bench_beacon_generation(kp, args.n, pooled=False, rng=rng)
        if pooled.scalar_muls_per_op != 0:
            failures.append("pooled path performed point multiplications")
        if not pooled.mean < unpooled.mean:
            failures.append("pooled path not faster than unpooled")
        doc = {"op": args.op, "results": [pooled.to_dict(), unpooled.to_dict()]}
        lines = [_fmt_stats(pooled), _fmt_stats(unpooled)]
    else:
        sizes = tuple(args.n * k // 4 for k in (1, 2, 3, 4))
        fit = benchmod.bench_exposure_scan(params, sizes, rng)
        if fit.r_squared < 0.95:
            failures.append(f"scan time not linear in entries (R^2={fit.r_squared:.4f})")
        doc = {"op": args.op, "curve": params.curve_id.value, **fit.to_dict()}
        lines = [f"{n:>8} entries  {s:.4f} s" for n, s in zip(fit.sizes, fit.seconds)]
        lines.append(f"slope {fit.slope * 1e6:.2f} us/entry  R^2 {fit.r_squared:.4f}")
    doc["ok"] = not failures
    doc["failures"] = failures
    _emit(args, doc, lines + [f"FAIL {f}" for f in failures] + (["ok"] if not failures else []))
    return EXIT_INVARIANT if failures else EXIT_OK


def _fmt_stats(s) -> str:
    return (f"{s.name:<28} n={s.n:<6} mean {s.mean * 1e3:9.4f} ms  +/- {s.ci95 * 1e3:.4f} ms"
            f"  mults/op {s.scalar_muls_per_op:g}")


# -- authority -------------------------------------------------------------------------

def cmd_serve(args) -> int:
    try:
        cfg = ServiceConfig.load(args.config)
    except (OSError, ValueError) as exc:
        raise CliError(f"service config: {exc}") from None
    if args.listen:
        cfg.listen = args.listen
    if args.token:
        cfg.tokens = list(args.token)
    if args.data:
        cfg.data = args.data
    if args.curve_given:
        cfg.curve = args.curve
    params = get_params(cfg.curve)
    store = ReportStore(params, tokens=set(cfg.tokens), retention_window=cfg.retention_days * 86400,
                        log_path=cfg.data)
    host, port = cfg.host_port
    server = make_server(store, host, port)
    signal.signal(signal.SIGTERM, lambda *_: (_ for _ in ()).throw(KeyboardInterrupt))
    h, p = server.server_address[:2]
    print(f"listening on http://{h}:{p} curve={params.curve_id.value}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
        store.close()
    return EXIT_OK


def cmd_report(args) -> int:
    params = _params(args)
    records = []
    if args.contacts:
        try:
            file_params, records = load_contacts(args.contacts)
        except OSError as exc:
            raise CliError(f"{args.contacts}: {exc.strerror}", EXIT_IO) from None
        if file_params != params:
            raise CliError(f"contact file is for {file_params.curve_id.value}, not {params.curve_id.value}")
    for text in args.beacon or ():
        records.append(ContactRecord(_beacon(params, text), 0, 0, 1, False))
    if not records:
        raise CliError("nothing to report: give --contacts or --beacon")
    report = prepare_report(records, _rng(args, "report"))
    rid = AuthorityClient(args.url, params, args.token).submit(report)
    _emit(args, {"report_id": rid, "entries": len(report)}, [f"report_id {rid}", f"entries {len(report)}"])
    return EXIT_OK


def cmd_fetch_check(args) -> int:
    params = _params(args)
    kp = _read_key(params, args)
    reports, cursor = AuthorityClient(args.url, params).fetch_all(args.cursor)
    matches = check_exposure(kp, reports)
    doc = {"reports": len(reports), "entries": sum(len(r) for r in reports), "next_cursor": cursor,
           "matches": [{"report_id": rid, "index": i} for rid, i in matches]}
    lines = [f"reports {doc['reports']} entries {doc['entries']} next_cursor {cursor}"]
    lines += [f"match {rid} {i}" for rid, i in matches] or ["no matches"]
    _emit(args, doc, lines)
    return EXIT_OK


# -- simulation -------------------------------------------------------------------------

def cmd_sim(args) -> int:
    if bool(args.config) == bool(args.scenario):
        raise CliError("give exactly one of --config or --scenario")
    try:
        if args.config:
            cfg = SimConfig.from_file(args.config)
            if args.seed is not None:
                cfg = cfg.replace(seed=args.seed)
        else:
            cfg = SCENARIOS[args.scenario](args.seed or 0)
            if args.curve_given:
                cfg = cfg.replace(curve=args.curve)
    except OSError as exc:
        raise CliError(f"{args.config}: {exc.strerror}", EXIT_IO) from None
    except (ConfigError, ValueError) as exc:
        raise CliError(f"config: {exc}") from None
    if args.ablate:
        cfg = cfg.ablated()
    log, metrics = run_simulation(cfg)
    if args.log:
        try:
            Path(args.log).write_text("".join(line + "\n" for line in log))
        except OSError as exc:
            raise CliError(f"{args.log}: {exc.strerror}", EXIT_IO) from None
    violations = metrics.violations()
    doc = {"config": {"seed": cfg.seed, "curve": cfg.curve, "extension": cfg.extension_enabled},
           "metrics": metrics.to_dict(), "violations": violations}
    lines = [f"{k} {v}" for k, v in metrics.to_dict().items()]
    lines += [f"VIOLATION {v}" for v in violations]
    _emit(args, doc, lines)
    return EXIT_INVARIANT if violations else EXIT_OK


def cmd_experiment(args) -> int:
    names = args.distinguisher or list(PASSIVE) + ["key-oracle"]
    seed = args.seed or 0
    results, failed = [], []
    for name in names:
        try:
            res = run_indistinguishability_experiment(args.trials, name, args.curve, seed=seed)
        except ValueError as exc:
            raise CliError(str(exc)) from None
        expect_perfect = name in ("key-oracle", "toy-dlog")
        ok = res.rate == 1.0 if expect_perfect else res.within_band()
        if not ok:
            failed.append(name)
        results.append({**res.to_dict(), "expected": "1.0" if expect_perfect else f"[{BAND[0]}, {BAND[1]}]",
                        "pass": ok})
    lines = [f"{r['distinguisher']:<17} {r['curve']:<10} trials={r['trials']} rate={r['rate']:.4f} "
             f"expected {r['expected']} {'PASS' if r['pass'] else 'FAIL'}" for r in results]
    _emit(args, {"experiment": "indistinguishability", "results": results}, lines)
    return EXIT_INVARIANT if failed else EXIT_OK


# -- parser --------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    curves = [c.value for c in CurveId]
    common = argparse.ArgumentParser(add_help=False)
    # SUPPRESS lets the global flags appear before or after the subcommand
    common.add_argument("--curve", choices=curves, default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--output", choices=("text", "json"), default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="spreadmenot", parents=[common],
                                     description="Privacy-preserving proximity beacons: tools, service and simulator.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, fn, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(func=fn)
        return p

    def key_args(p):
        g = p.add_mutually_exclusive_group()
        g.add_argument("--private", help="private key, hex")
        g.add_argument("--key", help="key file written by keygen")

    add("keygen", cmd_keygen, "generate a long-term key pair")

    p = add("beacon", cmd_beacon, "generate a beacon for a public key")
    key_args(p)
    p.add_argument("--public", help="public key, hex (compressed point)")
    p.add_argument("--signed", action="store_true", help="also emit a signed over-the-air frame")
    p.add_argument("--lat", type=float, default=0.0)
    p.add_argument("--lon", type=float, default=0.0)
    p.add_argument("--time", type=int, default=0, help="Unix timestamp for the signed frame")

    p = add("randomize", cmd_randomize, "re-randomize a beacon")
    p.add_argument("--beacon", required=True)

    p = add("test", cmd_test, "check whether a beacon belongs to a key (exit 0 yes, 1 no)")
    p.add_argument("--beacon", required=True)
    key_args(p)

    add("payload-report", cmd_payload_report, "payload size per security level vs the BLE limit")

    p = add("bench", cmd_bench, "timing benchmarks (ordering checks only)")
    p.add_argument("op", choices=("scalar-mul", "beacon-roundtrip", "exposure-scan"))
    p.add_argument("-n", type=int, default=1000, help="repetitions, or the largest scan size")

    p = add("serve", cmd_serve, "run the report authority")
    p.add_argument("--config", help="YAML service config")
    p.add_argument("--listen", help="host:port")
    p.add_argument("--token", action="append", help="accepted upload token (repeatable)")
    p.add_argument("--data", help="append-only log file")

    p = add("report", cmd_report, "re-randomize a contact list and upload it")
    p.add_argument("--url", required=True)
    p.add_argument("--token")
    p.add_argument("--contacts", help="contact-list file")
    p.add_argument("--beacon", action="append", help="beacon hex to include (repeatable)")

    p = add("fetch-check", cmd_fetch_check, "download reports and look for our own beacons")
    p.add_argument("--url", required=True)
    p.add_argument("--cursor", type=int, default=0)
    key_args(p)

    p = add("sim", cmd_sim, "run a simulation")
    p.add_argument("--config", help="YAML scenario file")
    p.add_argument("--scenario", choices=sorted(SCENARIOS))
    p.add_argument("--ablate", action="store_true", help="disable timestamp, location and signature checks")
    p.add_argument("--log", help="write the JSON-lines event log here")

    p = add("experiment", cmd_experiment, "run the beacon indistinguishability experiment")
    p.add_argument("name", choices=("indistinguishability",))
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--distinguisher", action="append", choices=sorted(DISTINGUISHERS))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.curve_given = hasattr(args, "curve")
    defaults = {"curve": "secp256k1", "seed": None, "output": "text"}
    for k, v in defaults.items():
        if not hasattr(args, k):
            setattr(args, k, v)
    if args.seed is not None and not 0 <= args.seed < 1 << 64:
        parser.error("--seed must be a 64-bit unsigned integer")
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except Unauthorized as exc:
        print(f"error: unauthorized: {exc}", file=sys.stderr)
        return EXIT_AUTH
    except CurveMismatch as exc:
        print(f"error: curve mismatch: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ServiceUnavailable, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DecodeError, InvalidPoint, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
