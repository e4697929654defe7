"""Operator command line: key and fleet management, reports, scenarios.

Exit codes: 0 on success, 1 when a scenario expectation or verification
fails, 2 for usage and validation errors. Relative --out paths resolve under
$BSCERT_OUT_DIR when that variable is set.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources
from typing import Optional

from . import __version__, certificate, crypto, ledger, rrc, sim

try:
    import tomllib  # Python 3.11+
except ImportError:  # pragma: no cover - version-dependent
    import tomli as tomllib

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

KEYFILE_KIND = "bscert-keypair"


class CliError(Exception):
    """Validation problem surfaced to the user (exit code 2)."""


def _out_path(path: str) -> str:
    base = os.environ.get("BSCERT_OUT_DIR")
    if base and not os.path.isabs(path):
        os.makedirs(base, exist_ok=True)
        return os.path.join(base, path)
    return path


def _write_keypair(keypair: crypto.KeyPair, path: str, force: bool) -> None:
    if os.path.exists(path) and not force:
        raise CliError(f"refusing to overwrite existing file {path} (use --force)")
    doc = {
        "kind": KEYFILE_KIND,
        "suite": keypair.suite_id.value,
        "public_key": keypair.public_key.hex(),
        "private_key": keypair.private_key.hex(),
    }
    with open(path, "w") as handle:
        json.dump(doc, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _read_keypair(path: str) -> crypto.KeyPair:
    try:
        with open(path) as handle:
            doc = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read keypair file {path}: {exc}") from exc
    if doc.get("kind") != KEYFILE_KIND:
        raise CliError(f"{path} is not a {KEYFILE_KIND} file")
    try:
        return crypto.KeyPair(
            suite_id=crypto.SuiteId(doc["suite"]),
            public_key=bytes.fromhex(doc["public_key"]),
            private_key=bytes.fromhex(doc["private_key"]),
        )
    except (KeyError, ValueError) as exc:
        raise CliError(f"malformed keypair file {path}: {exc}") from exc


def _cmd_keygen(args: argparse.Namespace) -> int:
    suite = crypto.get_suite(args.suite)
    keypair = crypto.generate_keypair(suite, seed=args.seed)
    path = _out_path(args.out)
    _write_keypair(keypair, path, args.force)
    print(f"wrote {suite.suite_id.value} keypair to {path}")
    return EXIT_OK


def _cmd_ledger_build(args: argparse.Namespace) -> int:
    records = certificate.read_fleet_csv(args.fleet)
    core = _read_keypair(args.core)
    start = args.timestamp
    validity = certificate.Validity(start, start + int(args.validity_years * ledger.SECONDS_PER_YEAR))
    self_cert = certificate.make_self_certificate(core, args.issuer_id, validity)
    chain = ledger.create_genesis(core, self_cert, timestamp=start)
    issuer = certificate.Issuer(core, certificate.IssuancePolicy(issuer_id=args.issuer_id))
    for pos, rec in enumerate(records):
        seed = None if args.seed is None else args.seed + pos
        bs_kp = crypto.generate_keypair(core.suite_id, seed=seed)
        csr = certificate.build_csr(rec.cell_id, bs_kp, (rec.latitude, rec.longitude), validity)
        chain = ledger.append_certificate(chain, issuer.sign_csr(csr), core, timestamp=start)
    out = _out_path(args.out)
    ledger.export_ledger(chain, out)
    check = ledger.verify_chain(chain, core.public)
    sizes = ledger.measured_block_sizes(chain)
    print(f"ledger written to {out}")
    print(f"height: {chain.height} (genesis + {chain.height - 1} certificates)")
    print(f"chain verifies: {bool(check)}")
    print(
        "measured block size bytes: "
        f"min={min(sizes)} mean={sum(sizes) / len(sizes):.1f} max={max(sizes)}"
    )
    return EXIT_OK if check else EXIT_FAILURE


def _cmd_ledger_verify(args: argparse.Namespace) -> int:
    chain = ledger.import_ledger(args.ledger)
    check = ledger.verify_chain(chain, chain.core_public_key)
    print(f"height: {chain.height}")
    print(f"chain verifies: {bool(check)}")
    return EXIT_OK if check else EXIT_FAILURE


def _format_table(headers: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(headers)]
    def fmt(row: list[str]) -> str:
        return "| " + " | ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)) + " |"
    sep = "|" + "|".join("-" * (w + 2) for w in widths) + "|"
    return "\n".join([fmt(headers), sep] + [fmt(r) for r in rows])


def _cmd_report_sizes(args: argparse.Namespace) -> int:
    rows = rrc.budget_table(args.base_size)
    table = [
        [row.scheme.value, row.suite_id.value, str(row.size), "yes" if row.fits else "no"]
        for row in rows
    ]
    print(f"SIB1 sizes at base_size={args.base_size} (limit {rrc.SIB1_SIZE_LIMIT} bytes)")
    print(_format_table(["scheme", "suite", "bytes", "fits"], table))
    if args.csv:
        path = _out_path(args.csv)
        with open(path, "w") as handle:
            handle.write("scheme,suite,bytes,fits\n")
            for row in rows:
                handle.write(
                    f"{row.scheme.value},{row.suite_id.value},{row.size},{str(row.fits).lower()}\n"
                )
        print(f"csv written to {path}")
    return EXIT_OK


def _cmd_report_scalability(args: argparse.Namespace) -> int:
    try:
        report = ledger.scalability(args.x, args.y, args.block_size)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    print(f"base stations (x):        {report.x:g}")
    print(f"average lifespan (y):     {report.y:g} years")
    print(f"block size:               {report.block_size} bytes")
    print(f"certificate rate:         {report.cert_rate:.4g} certificates/s")
    print(f"ledger growth:            {report.ledger_growth:.4g} bytes/s")
    headroom = ledger.ETHEREUM_RECOMMENDED_TPS / report.cert_rate if report.cert_rate else float("inf")
    print(f"headroom vs 20 tx/s:      {headroom:.3g}x")
    return EXIT_OK


def _cmd_report_suites(args: argparse.Namespace) -> int:
    rows = crypto.size_table_rows()
    table = [[sid, str(bits), str(sig), str(pk)] for sid, bits, sig, pk in rows]
    print(_format_table(
        ["suite_id", "key_bits", "signature_size", "public_key_size"], table
    ))
    if args.csv:
        path = _out_path(args.csv)
        with open(path, "w") as handle:
            handle.write("suite_id,key_bits,signature_size,public_key_size\n")
            for sid, bits, sig, pk in rows:
                handle.write(f"{sid},{bits},{sig},{pk}\n")
        print(f"csv written to {path}")
    return EXIT_OK


def bundled_scenarios() -> list[str]:
    root = resources.files("bscert").joinpath("scenarios")
    return sorted(
        entry.name.removesuffix(".toml")
        for entry in root.iterdir()
        if entry.name.endswith(".toml")
    )


def load_scenario(ref: str) -> sim.ScenarioConfig:
    """Load a scenario from a .toml/.json path or a bundled scenario name."""
    if os.path.exists(ref):
        if ref.endswith(".json"):
            with open(ref, "rb") as handle:
                try:
                    raw = json.load(handle)
                except json.JSONDecodeError as exc:
                    raise sim.ConfigError(f"config: invalid JSON: {exc}") from exc
        else:
            with open(ref, "rb") as handle:
                try:
                    raw = tomllib.load(handle)
                except tomllib.TOMLDecodeError as exc:
                    raise sim.ConfigError(f"config: invalid TOML: {exc}") from exc
        return sim.scenario_from_dict(raw)
    names = bundled_scenarios()
    if ref in names:
        data = resources.files("bscert").joinpath(f"scenarios/{ref}.toml").read_bytes()
        return sim.scenario_from_dict(tomllib.loads(data.decode()))
    raise CliError(
        f"no such scenario file or bundled scenario: {ref!r} "
        f"(bundled: {', '.join(names)})"
    )


def _summary_csv_rows(report: sim.ScenarioReport) -> list[tuple[str, object]]:
    rows: list[tuple[str, object]] = []
    for group in ("legit", "attack_ours", "attack_sota"):
        entry = report.summary[group]
        rows.append((f"{group}_received", entry["received"]))
        rows.append((f"{group}_accepted", entry["accepted"]))
        rows.append((f"{group}_acceptance_rate", entry["acceptance_rate"]))
        for factor, count in entry.get("failed_factors", {}).items():
            rows.append((f"{group}_failed_{factor}", count))
    rows.extend(sorted(report.verification.items()))
    rows.extend(sorted(report.modeled.items()))
    rows.append(("expectations_ok", report.ok))
    return rows


def _cmd_scenario_run(args: argparse.Namespace) -> int:
    config = load_scenario(args.config)
    report = sim.run_scenario(config)
    if args.out:
        path = _out_path(args.out)
        with open(path, "w") as handle:
            handle.write(report.to_json())
        print(f"report written to {path}")
    if args.summary_csv:
        path = _out_path(args.summary_csv)
        with open(path, "w") as handle:
            handle.write("metric,value\n")
            for metric, value in _summary_csv_rows(report):
                handle.write(f"{metric},{'' if value is None else value}\n")
        print(f"summary csv written to {path}")
    summary = report.summary
    legit = summary["legit"]
    print(f"legit frames: {legit['accepted']}/{legit['received']} accepted")
    for key, label in (("attack_ours", "attack frames (ours verifier)"),
                       ("attack_sota", "attack frames (sota verifier)")):
        entry = summary[key]
        if entry["received"]:
            print(f"{label}: {entry['accepted']}/{entry['received']} accepted "
                  f"{entry['failed_factors']}")
    for item in report.expectation_results:
        status = "ok" if item["ok"] else "FAIL"
        print(f"expectation {item['name']}: {status} "
              f"(expected {item['expected']}, actual {item['actual']})")
    return EXIT_OK if report.ok else EXIT_FAILURE


def _cmd_scenario_list(_args: argparse.Namespace) -> int:
    for name in bundled_scenarios():
        print(name)
    return EXIT_OK


def _cmd_bench(args: argparse.Namespace) -> int:
    try:
        result = sim.benchmark_verification(args.suite, args.iters)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    print(f"suite: {result.suite.value} ({result.iterations} iterations)")
    print(f"verifications per accepted frame: ours={result.ours_verifications_per_frame} "
          f"sota={result.sota_verifications_per_frame}")
    print(f"ours: {result.ours_mean_ms:.4f} ms  (95% CI +/- {result.ours_ci95_ms:.4f})")
    print(f"sota: {result.sota_mean_ms:.4f} ms  (95% CI +/- {result.sota_ci95_ms:.4f})")
    print(f"time ratio sota/ours: {result.time_ratio:.2f}")
    print(f"modeled energy ratio: {result.energy_ratio:.2f} (equals time ratio)")
    if args.out:
        path = _out_path(args.out)
        with open(path, "w") as handle:
            json.dump(result.to_json_dict(), handle, indent=2, sort_keys=True)
            handle.write("\n")
        print(f"json written to {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bscert",
        description="Base-station certificate toolkit and attack simulator",
    )
    parser.add_argument("--version", action="version", version=f"bscert {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    suite_names = [s.value for s in crypto.SuiteId]

    keygen = sub.add_parser("keygen", help="generate and persist a keypair")
    keygen.add_argument("--suite", required=True, choices=suite_names)
    keygen.add_argument("--out", required=True)
    keygen.add_argument("--seed", type=int, default=None,
                        help="deterministic seed (same seed, same keypair)")
    keygen.add_argument("--force", action="store_true")
    keygen.set_defaults(func=_cmd_keygen)

    ledger_cmd = sub.add_parser("ledger", help="build or verify certificate ledgers")
    ledger_sub = ledger_cmd.add_subparsers(dest="ledger_command", required=True)
    build = ledger_sub.add_parser("build", help="issue certificates for a fleet CSV")
    build.add_argument("--fleet", required=True, help="CSV with cell_id,latitude,longitude")
    build.add_argument("--core", required=True, help="core-network keypair file")
    build.add_argument("--out", required=True)
    build.add_argument("--issuer-id", default="core-network")
    build.add_argument("--validity-years", type=float, default=1.0)
    build.add_argument("--timestamp", type=int, default=1_700_000_000,
                       help="issuance time (unix seconds)")
    build.add_argument("--seed", type=int, default=None,
                       help="base seed for per-row station keys")
    build.set_defaults(func=_cmd_ledger_build)
    verify_cmd = ledger_sub.add_parser("verify", help="re-verify a ledger file")
    verify_cmd.add_argument("--ledger", required=True)
    verify_cmd.set_defaults(func=_cmd_ledger_verify)

    report = sub.add_parser("report", help="packet-budget and scalability tables")
    report_sub = report.add_subparsers(dest="report_command", required=True)
    sizes = report_sub.add_parser("sizes", help="SIB1 size per scheme and suite")
    sizes.add_argument("--base-size", type=int, default=rrc.DEFAULT_BASE_SIZE)
    sizes.add_argument("--csv")
    sizes.set_defaults(func=_cmd_report_sizes)
    scal = report_sub.add_parser("scalability", help="certificate-rate requirement")
    scal.add_argument("--x", type=float, required=True, help="base-station count")
    scal.add_argument("--y", type=float, required=True, help="average lifespan in years")
    scal.add_argument("--block-size", type=int, default=ledger.DEFAULT_BLOCK_SIZE)
    scal.set_defaults(func=_cmd_report_scalability)
    suites = report_sub.add_parser("suites", help="signature-suite size table")
    suites.add_argument("--csv")
    suites.set_defaults(func=_cmd_report_suites)

    scenario = sub.add_parser("scenario", help="run simulation scenarios")
    scenario_sub = scenario.add_subparsers(dest="scenario_command", required=True)
    run = scenario_sub.add_parser("run", help="run a scenario file or bundled name")
    run.add_argument("config", help=".toml/.json path or bundled scenario name")
    run.add_argument("--out", help="write the full JSON report here")
    run.add_argument("--summary-csv", help="write a flat metric,value summary here")
    run.set_defaults(func=_cmd_scenario_run)
    lst = scenario_sub.add_parser("list", help="list bundled scenarios")
    lst.set_defaults(func=_cmd_scenario_list)

    bench = sub.add_parser("bench", help="wall-clock verification benchmark")
    bench.add_argument("--suite", required=True, choices=suite_names)
    bench.add_argument("--iters", type=int, default=1000)
    bench.add_argument("--out", help="write the JSON result here")
    bench.set_defaults(func=_cmd_bench)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (CliError, sim.ConfigError, certificate.CertificateError,
            crypto.CryptoError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ledger.LedgerError, sim.SyncError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def console_main() -> None:  # pragma: no cover - thin wrapper
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    console_main()
