"""Command line front end: ``qsdcnet run | sweep | verify``.

Config files are JSON::

    {"d": 3, "m_bases": 4, "n_pairs": 256, "p_check": 0.25,
     "decoy_count": 26, "s_e2_count": 26, "epsilon_t": 0.05,
     "decoy_source": "fresh",
     "eve": {"kind": "intercept_resend", "legs": ["charlie_to_bob"]},
     "topology": null, "trials": 10, "seed": 1}

Trial ``t`` runs with seed ``seed + t``.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import stats
from .adversary import DishonestServer, InterceptResendMUB, NoEve, eve_report
from .channel import ChannelLeg
from .errors import CapabilityError, ConfigError, QSDCError
from .netsim import Topology, build_topology, route_session, run_network_session
from .session import (
    DECOY_CHECK,
    FINAL_CHECK,
    FIRST_CHECK,
    ByMeasurement,
    FreshDecoys,
    SessionConfig,
    SessionResult,
    run_session,
)
from .verify import FAULTS, run_verify

log = logging.getLogger("qsdcnet")

SCHEMA_VERSION = 1
CONFIG_FIELDS = {
    "d", "m_bases", "n_pairs", "p_check", "decoy_count", "s_e2_count", "epsilon_t",
    "decoy_source", "eve", "topology", "route", "trials", "seed",
}
LEG_CHECK = {
    ChannelLeg.ALICE_TO_CHARLIE: FIRST_CHECK,
    ChannelLeg.CHARLIE_TO_BOB: DECOY_CHECK,
    ChannelLeg.BOB_TO_ALICE: FINAL_CHECK,
}


@dataclass(frozen=True)
class RunConfig:
    session: SessionConfig
    trials: int
    topology: Topology | None = None
    route: tuple[str, str] | None = None

    def to_dict(self) -> dict:
        out = self.session.to_dict()
        out["trials"] = self.trials
        out["topology"] = self.topology.to_dict() if self.topology else None
        out["route"] = ({"sender": self.route[0], "receiver": self.route[1]}
                        if self.route else None)
        return out


def _field(data: dict, name: str, kind, default=None, required=False):
    if name not in data or data[name] is None:
        if required:
            raise ConfigError(f"config field '{name}' is required")
        return default
    value = data[name]
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise ConfigError(f"config field '{name}' must be an integer, got {value!r}")
    if kind is float and (isinstance(value, bool) or not isinstance(value, (int, float))):
        raise ConfigError(f"config field '{name}' must be a number, got {value!r}")
    return kind(value)


def _parse_eve(raw) -> object:
    if raw is None or raw == "none":
        return NoEve()
    if not isinstance(raw, dict):
        raise ConfigError("config field 'eve' must be an object {kind, legs}")
    kind = raw.get("kind", "none")
    if kind == "none":
        return NoEve()
    if kind == "dishonest_server":
        return DishonestServer()
    if kind == "intercept_resend":
        legs = raw.get("legs") or [ChannelLeg.CHARLIE_TO_BOB.value]
        hop = raw.get("hop")
        if not isinstance(legs, list) or (hop is not None and not isinstance(hop, str)):
            raise ConfigError("config field 'eve.legs' must be a list and 'eve.hop' a server id")
        try:
            parsed = frozenset(ChannelLeg(leg) for leg in legs)
        except ValueError:
            raise ConfigError(f"config field 'eve.legs' has an unknown leg in {legs!r}; "
                              f"use {[leg.value for leg in ChannelLeg]}") from None
        return InterceptResendMUB(parsed, hop)
    raise ConfigError(f"config field 'eve.kind' must be none, intercept_resend or "
                      f"dishonest_server, got {kind!r}")


def _parse_decoy_source(raw, decoy_count, n_pairs):
    if raw is None or raw == "fresh":
        return FreshDecoys()
    if isinstance(raw, dict) and raw.get("kind") == "by_measurement":
        n2 = raw.get("n2", decoy_count if decoy_count is not None else math.ceil(0.1 * n_pairs))
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in (raw.get("n1"), n2)):
            raise ConfigError("config field 'decoy_source' needs integer n1 and n2")
        return ByMeasurement(raw["n1"], n2, bool(raw.get("rotate", True)))
    raise ConfigError(f"config field 'decoy_source' must be 'fresh' or "
                      f"{{kind: by_measurement, n1, n2}}, got {raw!r}")


def parse_config(data: dict, seed_override: int | None = None) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - CONFIG_FIELDS
    if unknown:
        raise ConfigError(f"unknown config field(s): {', '.join(sorted(unknown))}")
    n_pairs = _field(data, "n_pairs", int, 256)
    trials = _field(data, "trials", int, 1)
    if trials < 1:
        raise ConfigError("config field 'trials' must be >= 1")
    decoy_count = _field(data, "decoy_count", int)
    decoy_source = _parse_decoy_source(data.get("decoy_source"), decoy_count, n_pairs)
    if isinstance(decoy_source, ByMeasurement) and decoy_count is None:
        decoy_count = decoy_source.n2
    seed = seed_override if seed_override is not None else _field(data, "seed", int, 0)
    try:
        session = SessionConfig(
            d=_field(data, "d", int, 2),
            M=_field(data, "m_bases", int, 2),
            N=n_pairs,
            p_check=_field(data, "p_check", float, 0.25),
            decoy_count=decoy_count,
            s_e2_count=_field(data, "s_e2_count", int),
            epsilon_t=_field(data, "epsilon_t", float, 0.05),
            decoy_source=decoy_source,
            eve=_parse_eve(data.get("eve")),
            seed=seed,
        )
    except CapabilityError as exc:
        raise ConfigError(f"config fields 'd'/'m_bases': {exc}") from None
    if seed + trials - 1 > 2 ** 64 - 1:
        raise ConfigError("config field 'seed' too large for the number of trials")
    topology = route = None
    if data.get("topology") is not None:
        topology = build_topology(data["topology"])
        r = data.get("route") or {}
        if not isinstance(r, dict) or "sender" not in r or "receiver" not in r:
            raise ConfigError("config field 'route' needs sender and receiver with a topology")
        planned = route_session(topology, r["sender"], r["receiver"])
        hop = getattr(session.eve, "hop", None)
        if hop is not None and hop not in planned.relay_server_ids:
            raise ConfigError(f"config field 'eve.hop': {hop!r} is not a relay on this route")
        route = (r["sender"], r["receiver"])
    elif data.get("route") is not None:
        raise ConfigError("config field 'route' needs a 'topology'")
    elif getattr(session.eve, "hop", None) is not None:
        raise ConfigError("config field 'eve.hop' needs a 'topology'")
    return RunConfig(session, trials, topology, route)


def load_config(path: str, seed_override: int | None = None) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return parse_config(data, seed_override)


# -- running ------------------------------------------------------------------

def attacked_check(cfg: SessionConfig) -> tuple[str, float]:
    """Which check exposes the configured attacker, and the error rate theory predicts there."""
    eve = cfg.eve
    if isinstance(eve, InterceptResendMUB):
        leg = min(eve.legs, key=list(ChannelLeg).index)
        if leg is ChannelLeg.BOB_TO_ALICE:
            return FINAL_CHECK, stats.bell_disturbance_rate(cfg.d)
        return LEG_CHECK[leg], stats.theoretical_eve_error_rate(cfg.d, cfg.M)
    if isinstance(eve, DishonestServer):
        return DECOY_CHECK, (cfg.d - 1) / cfg.d if cfg.decoy_count else 0.0
    return DECOY_CHECK, 0.0


def run_trial(run: RunConfig, trial: int) -> tuple[dict, SessionResult]:
    cfg = run.session
    seed = cfg.seed + trial
    tcfg = replace(cfg, seed=seed)
    if run.topology is not None:
        route = route_session(run.topology, *run.route)
        result = run_network_session(run.topology, route, tcfg)
    else:
        result = run_session(tcfg)
    sent = result.sent_message()
    fidelity = None
    if result.completed:
        fidelity = (sum(a == b for a, b in zip(result.decoded_message, sent)) / len(sent)
                    if sent else 1.0)
    row = {
        "trial": trial,
        "seed": seed,
        **result.summary(),
        "message_symbols": len(result.decoded_message),
        "message_fidelity": fidelity,
    }
    del row["decoded_message"]
    check, theory = attacked_check(cfg)
    est = result.checks[check]
    row["watched_check"] = {"check": check, "empirical": est.rate if est else None,
                            "theoretical": theory}
    if not isinstance(cfg.eve, NoEve):
        truth_msg = dict(zip(result.message_slots(), sent))
        rep = eve_report(result.eve_knowledge, result.key(), truth_msg,
                         np.random.default_rng([seed, 0xE7E]))
        rep["undetected"] = result.completed
        row["eve"] = rep
    return row, result


def _trial_worker(args):
    run, trial = args
    return run_trial(run, trial)[0]


def _mean(values):
    values = [v for v in values if v is not None]
    return sum(values) / len(values) if values else None


def aggregate(run: RunConfig, rows: list[dict]) -> dict:
    check, theory = attacked_check(run.session)
    errors = sum(r["checks"][check]["errors"] for r in rows if r["checks"][check])
    samples = sum(r["checks"][check]["samples"] for r in rows if r["checks"][check])
    est = stats.estimate_rate(errors, samples) if samples else None
    return {
        "trials": len(rows),
        "mean_error_rates": {c: _mean([r["checks"][c]["rate"] if r["checks"][c] else None
                                       for r in rows])
                             for c in (FIRST_CHECK, DECOY_CHECK, FINAL_CHECK)},
        "abort_fraction": sum(r["status"] != "completed" for r in rows) / len(rows),
        "message_fidelity": _mean([r["message_fidelity"] for r in rows]),
        "eve_error_rate": {
            "check": check,
            "errors": errors,
            "samples": samples,
            "empirical": est.rate if est else None,
            "ci95": list(est.ci95) if est else None,
            "theoretical": theory,
        },
    }


def cmd_run(run: RunConfig, parallel: int = 1, transcript_dir: str | None = None) -> dict:
    jobs = [(run, t) for t in range(run.trials)]
    if transcript_dir:
        Path(transcript_dir).mkdir(parents=True, exist_ok=True)
    if parallel > 1 and not transcript_dir:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            rows = list(pool.map(_trial_worker, jobs))
    else:
        rows = []
        for job in jobs:
            row, result = run_trial(*job)
            rows.append(row)
            if transcript_dir:
                path = Path(transcript_dir) / f"trial_{job[1]:04d}.ndjson"
                path.write_text(result.transcript.to_ndjson())
    return {
        "schema_version": SCHEMA_VERSION,
        "config": run.to_dict(),
        "trials": rows,
        "aggregate": aggregate(run, rows),
    }


SWEEP_KEYS = ("d", "m_bases", "decoy_count", "eve")
SWEEP_COLUMNS = ["d", "m_bases", "decoy_count", "eve", "status", "check", "errors", "samples",
                 "empirical_rate", "ci95_lo", "ci95_hi", "theoretical", "abort_fraction"]


def cmd_sweep(base: dict, sweep: dict, parallel: int = 1) -> list[dict]:
    unknown = set(sweep) - set(SWEEP_KEYS)
    if unknown:
        raise ConfigError(f"sweep may only vary {SWEEP_KEYS}, got {sorted(unknown)}")
    keys = [k for k in SWEEP_KEYS if k in sweep]
    rows = []
    for values in itertools.product(*(sweep[k] for k in keys)):
        point = dict(base, **dict(zip(keys, values)))
        row = {k: point.get(k) for k in ("d", "m_bases", "decoy_count")}
        row["eve"] = json.dumps(point.get("eve") or {"kind": "none"}, sort_keys=True)
        try:
            run = parse_config(point)
        except (ConfigError, CapabilityError) as exc:
            rows.append({**row, "status": f"unsupported: {exc}"})
            continue
        agg = cmd_run(run, parallel)["aggregate"]
        eve = agg["eve_error_rate"]
        row.update(
            decoy_count=run.session.decoy_count,
            status="ok",
            check=eve["check"],
            errors=eve["errors"],
            samples=eve["samples"],
            empirical_rate=eve["empirical"],
            ci95_lo=eve["ci95"][0] if eve["ci95"] else None,
            ci95_hi=eve["ci95"][1] if eve["ci95"] else None,
            theoretical=eve["theoretical"],
            abort_fraction=agg["abort_fraction"],
        )
        rows.append(row)
    return rows


def rows_to_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in columns})
    return buf.getvalue()


def report_to_csv(report: dict) -> str:
    flat = []
    for r in report["trials"]:
        row = {"trial": r["trial"], "seed": r["seed"], "status": r["status"],
               "aborted_at": r["aborted_at"], "message_symbols": r["message_symbols"],
               "message_fidelity": r["message_fidelity"], "capacity_bits": r["capacity_bits"]}
        for c, est in r["checks"].items():
            row[f"{c}_rate"] = est["rate"] if est else None
        row["watched_check"] = r["watched_check"]["check"]
        row["theoretical_rate"] = r["watched_check"]["theoretical"]
        flat.append(row)
    cols = ["trial", "seed", "status", "aborted_at", "first_check_rate", "decoy_check_rate",
            "final_check_rate", "watched_check", "theoretical_rate", "message_symbols",
            "message_fidelity", "capacity_bits"]
    return rows_to_csv(flat, cols)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load_sweep(spec: str | None) -> dict:
    if not spec:
        return {}
    path = Path(spec)
    text = path.read_text() if path.exists() else spec
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"sweep spec is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("sweep spec must be a JSON object of lists")
    return data


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qsdcnet", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="JSON config file")
        sp.add_argument("--out", help="write the report here instead of stdout")
        sp.add_argument("--format", choices=("json", "csv"), default="json")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--parallel", type=int, default=1, help="worker processes for trials")

    run = sub.add_parser("run", help="run seeded trials of one configuration")
    common(run)
    run.add_argument("--transcripts", help="directory for per-trial NDJSON transcripts")

    sweep = sub.add_parser("sweep", help="grid over d, m_bases, decoy_count, eve")
    common(sweep)
    sweep.add_argument("--sweep", help="JSON object (or file) mapping keys to value lists")

    ver = sub.add_parser("verify", help="run the built-in invariant suite")
    ver.add_argument("--inject-fault", choices=sorted(FAULTS), help=argparse.SUPPRESS)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.verb == "verify":
            checks = run_verify(args.inject_fault)
            for c in checks:
                print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}  ({c.detail})")
            return 0 if all(c.passed for c in checks) else 1

        if args.verb == "run":
            run = load_config(args.config, args.seed)
            report = cmd_run(run, args.parallel, args.transcripts)
            text = (json.dumps(report, indent=2, sort_keys=True) + "\n"
                    if args.format == "json" else report_to_csv(report))
            _emit(text, args.out)
            return 0

        load_config(args.config, args.seed)  # validates the base point
        base = json.loads(Path(args.config).read_text())
        if args.seed is not None:
            base["seed"] = args.seed
        rows = cmd_sweep(base, _load_sweep(args.sweep), args.parallel)
        if args.format == "json":
            text = json.dumps({"schema_version": SCHEMA_VERSION, "rows": rows},
                              indent=2, sort_keys=True) + "\n"
        else:
            text = rows_to_csv(rows, SWEEP_COLUMNS)
        _emit(text, args.out)
        return 0
    except QSDCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: cannot write {exc.filename}: {exc.strerror}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
