"""Command-line entry point: simulate, capacity, calibrate, codes-validate.

Configuration is a JSON file; environment variables with the QSC_ prefix
(QSC_SEED, QSC_BATCH_SIZE, QSC_THRESHOLD, QSC_EVE_FRACTION, QSC_DATASET_DIR,
QSC_INITIAL_KEY_BITS) override top-level scalar fields, and command-line
flags override both. Exit codes: 0 success, 1 error, 2 security abort.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import reference
from .codec import CodecDescriptor, CodecKind, code_bits, load_external_codes, quantize_f32
from .errors import ConfigError, QscError
from .link import CapacityConfig, CapacityMode, ChannelParams, capacity_lines
from .pipeline import (
    ReportFormat,
    TimingModel,
    calibrate_timing,
    emit_report,
    encode_dataset,
    load_dataset,
    simulate_run,
)
from .protocol import EveModel, Phase, SessionConfig, run_session

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_SECURITY_ABORT = 2

_ENV_PREFIX = "QSC_"

# Top-level scalar config fields that QSC_* variables may override.
_ENV_FIELDS = {
    "seed": int,
    "batch_size": int,
    "threshold": float,
    "eve_fraction": float,
    "dataset_dir": str,
    "initial_key_bits": int,
}


@dataclass(frozen=True)
class RunConfig:
    channel: ChannelParams
    codec: CodecDescriptor
    timing: TimingModel | None  # None means calibrate from reference rows
    batch_size: int
    dataset_dir: str
    seed: int
    threshold: float
    eve_fraction: float
    initial_key_bits: int | None


def _expect(data: Mapping, key: str, kind: type, path: str, default=None,
            required: bool = False):
    if key not in data or data[key] is None:
        if required:
            raise ConfigError(f"{path}{key}: required field is missing")
        return default
    value = data[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool):
        raise ConfigError(f"{path}{key}: expected {kind.__name__}, got {type(value).__name__}")
    return value


def _build_channel(data: Mapping) -> ChannelParams:
    if not isinstance(data, dict):
        raise ConfigError("channel: expected an object")
    known = {f.name for f in dataclasses.fields(ChannelParams)}
    overrides = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"channel.{key}: unknown field")
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(f"channel.{key}: expected a number")
        overrides[key] = value
    try:
        return ChannelParams(**overrides)
    except QscError as exc:
        raise ConfigError(f"channel: {exc}") from exc


def _build_codec(data: Mapping) -> CodecDescriptor:
    if not isinstance(data, dict):
        raise ConfigError("codec: expected an object")
    kind_name = _expect(data, "kind", str, "codec.", default="baseline-fps")
    try:
        kind = CodecKind(kind_name)
    except ValueError:
        raise ConfigError(f"codec.kind: unknown codec {kind_name!r}") from None
    n = _expect(data, "n", int, "codec.", default=30)
    source = _expect(data, "source", str, "codec.")
    try:
        return CodecDescriptor(kind=kind, n=n, source=source)
    except QscError as exc:
        raise ConfigError(f"codec: {exc}") from exc


def _build_timing(data) -> TimingModel | None:
    if data is None or data == "calibrate":
        return None
    if not isinstance(data, dict):
        raise ConfigError('timing: expected an object or "calibrate"')
    overhead = _expect(data, "per_round_overhead_ms", float, "timing.", required=True)
    rate = _expect(data, "effective_rate_bps", float, "timing.", required=True)
    encode_ms = _expect(data, "encode_ms", float, "timing.", default=0.0)
    decode_ms = _expect(data, "decode_ms", float, "timing.", default=0.0)
    try:
        return TimingModel(per_round_overhead_ms=overhead, effective_rate_bps=rate,
                           encode_ms=encode_ms, decode_ms=decode_ms)
    except QscError as exc:
        raise ConfigError(f"timing: {exc}") from exc


def load_config(path: str, env: Mapping[str, str] | None = None) -> RunConfig:
    """Parse and validate a run configuration, applying QSC_ overrides."""
    env = os.environ if env is None else env
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root: expected an object")

    for field_name, caster in _ENV_FIELDS.items():
        var = _ENV_PREFIX + field_name.upper()
        if var in env:
            try:
                data[field_name] = caster(env[var])
            except ValueError as exc:
                raise ConfigError(f"{var}: {exc}") from exc

    dataset_dir = _expect(data, "dataset_dir", str, "", required=True)
    if not os.path.isdir(dataset_dir):
        raise ConfigError(f"dataset_dir: no such directory: {dataset_dir}")
    seed = _expect(data, "seed", int, "", default=0)
    batch_size = _expect(data, "batch_size", int, "", default=3)
    if batch_size < 1:
        raise ConfigError(f"batch_size: must be positive, got {batch_size}")
    threshold = _expect(data, "threshold", float, "", default=0.12)
    if not 0.0 <= threshold <= 0.5:
        raise ConfigError(f"threshold: must be in [0, 0.5], got {threshold}")
    eve_fraction = _expect(data, "eve_fraction", float, "", default=0.0)
    if not 0.0 <= eve_fraction <= 1.0:
        raise ConfigError(f"eve_fraction: must be in [0, 1], got {eve_fraction}")
    initial_key_bits = _expect(data, "initial_key_bits", int, "")
    if initial_key_bits is not None and initial_key_bits < 0:
        raise ConfigError(f"initial_key_bits: must be nonnegative, got {initial_key_bits}")
    codec = _build_codec(data.get("codec", {}))
    if codec.kind is CodecKind.EXTERNAL_NEURAL and not os.path.exists(codec.source):
        raise ConfigError(f"codec.source: no such file: {codec.source}")
    channel = _build_channel(data.get("channel", {}))
    timing = _build_timing(data.get("timing", "calibrate"))
    return RunConfig(
        channel=channel, codec=codec, timing=timing, batch_size=batch_size,
        dataset_dir=dataset_dir, seed=seed, threshold=threshold,
        eve_fraction=eve_fraction, initial_key_bits=initial_key_bits,
    )


def _reference_timing(batch_size: int) -> TimingModel:
    result = calibrate_timing(reference.timing_rows(), reference.DATASET_SIZE, batch_size)
    return result.model


def cmd_simulate(config: RunConfig, out_path: str, fmt: ReportFormat,
                 dry_run: bool = False) -> int:
    """Full pipeline run plus one protocol session over the coded payload."""
    if dry_run:
        print("config ok; dry run, nothing written")
        return EXIT_OK
    ids, dataset = load_dataset(config.dataset_dir)
    timing = config.timing or _reference_timing(config.batch_size)
    report = simulate_run(dataset, config.codec, timing, config.channel,
                          config.batch_size, ids=ids)

    codes = encode_dataset(dataset, ids, config.codec)
    payload = np.concatenate([code_bits(quantize_f32(c)) for c in codes])
    key_bits = config.initial_key_bits
    if key_bits is None:
        key_bits = max(SessionConfig().initial_key_bits, int(payload.size))
    session_cfg = SessionConfig(
        channel=config.channel,
        eve=EveModel(intercept_fraction=config.eve_fraction),
        threshold=config.threshold,
        initial_key_bits=key_bits,
    )
    session = run_session(payload, session_cfg, config.seed)

    if fmt is ReportFormat.CSV:
        emit_report(report, out_path, fmt)
    else:
        combined = {
            "transmission": dataclasses.asdict(report),
            "session": session.to_json_dict(),
        }
        with open(out_path, "w", encoding="ascii") as fh:
            json.dump(combined, fh, indent=2)
            fh.write("\n")
    print(f"report written to {out_path}")

    if session.phase is Phase.ABORTED:
        print("session aborted: eavesdropping detected", file=sys.stderr)
        return EXIT_SECURITY_ABORT
    if session.paused:
        print("session paused: key pool exhausted before completion", file=sys.stderr)
        return EXIT_ERROR
    print(f"session {session.phase.value}; mean qber "
          f"{np.mean([f.qber_hat for f in session.frames]) if session.frames else 0.0:.4f}")
    return EXIT_OK


def cmd_capacity(config: RunConfig, mode: CapacityMode,
                 report_path: str | None = None, dry_run: bool = False) -> int:
    """Print the capacity comparison lines and optional per-run markers."""
    if dry_run:
        print("config ok; dry run")
        return EXIT_OK
    shannon, wyner = capacity_lines(config.channel, CapacityConfig(mode=mode))
    print(f"shannon {shannon / 1000:.2f} kbps")
    print(f"wyner   {wyner / 1000:.2f} kbps")
    if report_path is not None:
        with open(report_path, "r", encoding="ascii") as fh:
            data = json.load(fh)
        if "transmission" in data:
            data = data["transmission"]
        edr = float(data["edr_bps"])
        vs_wyner = "above" if edr > wyner else "below"
        vs_shannon = "above" if edr > shannon else "below"
        print(f"n={data['n']} edr {edr / 1000:.2f} kbps: "
              f"{vs_wyner} wyner, {vs_shannon} shannon")
    return EXIT_OK


def _read_timing_csv(path: str) -> list[tuple[int, float]]:
    rows: list[tuple[int, float]] = []
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != "n,total_time_ms":
        raise ConfigError(f'{path}: line 1: expected header "n,total_time_ms"')
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ConfigError(f"{path}: line {lineno}: expected 2 fields, got {len(parts)}")
        try:
            rows.append((int(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise ConfigError(f"{path}: line {lineno}: {exc}") from exc
    return rows


def cmd_calibrate(table_csv: str, dataset_size: int, batch_size: int,
                  out_path: str | None, dry_run: bool = False) -> int:
    """Fit the timing model from a measured (n, total time) table."""
    rows = _read_timing_csv(table_csv)
    if dry_run:
        print(f"config ok; {len(rows)} rows parsed, dry run")
        return EXIT_OK
    result = calibrate_timing(rows, dataset_size, batch_size)
    print(f"overhead {result.model.per_round_overhead_ms:.2f} ms/round, "
          f"rate {result.model.effective_rate_bps / 1000:.2f} kbps")
    for (n, _), residual in zip(result.rows, result.residuals_ms):
        print(f"  n={n}: residual {residual:+.2f} ms/round")
    if out_path is not None:
        payload = {
            "model": dataclasses.asdict(result.model),
            "rows": [list(r) for r in result.rows],
            "bits_per_round": list(result.bits_per_round),
            "per_round_ms": list(result.per_round_ms),
            "residuals_ms": list(result.residuals_ms),
        }
        with open(out_path, "w", encoding="ascii") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
        print(f"model written to {out_path}")
    return EXIT_OK


def cmd_codes_validate(archive_path: str, dry_run: bool = False) -> int:
    """Check an external code archive for format and normalization."""
    if dry_run:
        print("config ok; dry run")
        return EXIT_OK
    records = load_external_codes(archive_path)
    lengths = sorted({code.n for code, _ in records})
    print(f"{len(records)} records ok; code lengths {lengths}")
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qscsim",
                                     description="Semantic point-cloud transmission simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the pipeline and one protocol session")
    sim.add_argument("--config", required=True, help="JSON run configuration")
    sim.add_argument("--seed", type=int, default=None, help="override the config seed")
    sim.add_argument("--out", default="report.json", help="report output path")
    sim.add_argument("--format", choices=["json", "csv"], default="json")
    sim.add_argument("--dry-run", action="store_true")

    cap = sub.add_parser("capacity", help="print capacity comparison lines")
    cap.add_argument("--config", required=True)
    cap.add_argument("--mode", choices=["reference", "model"], default="reference")
    cap.add_argument("--report", default=None, help="mark a report's EDR against the lines")
    cap.add_argument("--dry-run", action="store_true")

    cal = sub.add_parser("calibrate", help="fit the timing model from a CSV table")
    cal.add_argument("--table", required=True, help='CSV with header "n,total_time_ms"')
    cal.add_argument("--dataset-size", type=int, required=True)
    cal.add_argument("--batch-size", type=int, required=True)
    cal.add_argument("--out", default=None, help="write the fitted model JSON here")
    cal.add_argument("--dry-run", action="store_true")

    val = sub.add_parser("codes-validate", help="validate an external code archive")
    val.add_argument("--archive", required=True)
    val.add_argument("--dry-run", action="store_true")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "simulate":
            config = load_config(args.config)
            if args.seed is not None:
                config = dataclasses.replace(config, seed=args.seed)
            return cmd_simulate(config, args.out, ReportFormat(args.format),
                                dry_run=args.dry_run)
        if args.command == "capacity":
            config = load_config(args.config)
            return cmd_capacity(config, CapacityMode(args.mode),
                                report_path=args.report, dry_run=args.dry_run)
        if args.command == "calibrate":
            return cmd_calibrate(args.table, args.dataset_size, args.batch_size,
                                 args.out, dry_run=args.dry_run)
        if args.command == "codes-validate":
            return cmd_codes_validate(args.archive, dry_run=args.dry_run)
        raise AssertionError(f"unhandled command {args.command}")
    except QscError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
