"""Command-line simulator: profiling, code construction, FER sweeps, regions.

Usage::

    tsapolar run <config.toml>
    tsapolar profile <config.toml>
    tsapolar region <channel.toml> [-o out.csv] [--points K]

Exit codes: 0 success, 2 configuration error, 3 every grid point infeasible.
``TSAPOLAR_WORKERS`` sets the number of worker processes; it never changes
any reported number.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .channel import GenericBC, blackwell_optimal_structure
from .coder import EncoderState, effective_law
from .oracle import typicality_oracle
from .polar import (InfeasibleRate, build_code, make_transform, map_ordered, worker_count,
                    write_profile_csv, STAGE_ORDERS)
from .prob import ConditionalPmf, JointPmf
from .regions import InputStructure, corner_points, sum_rate, tsa_line, tsa_rates, write_region_csv
from .scheme import (INTERLEAVERS, TsaSchedule, build_layout, corner_known_counts,
                     corner_pattern, profile_user, time_sharing_stream, tsa_known_counts, tsa_stream)

log = logging.getLogger("tsapolar")

EXPERIMENTS = ("tsa", "time-sharing", "corner", "region", "profile", "oracle")
CSV_COLUMNS = ["backoff_bpcu", "r1", "r2", "frames", "errors", "fer", "ci_lo", "ci_hi",
               "scheme", "n", "alpha", "L"]
EARLY_STOP_ERRORS = 200
EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 2, 3


class ConfigError(ValueError):
    pass


# -- configuration -----------------------------------------------------------------

@dataclass
class SimConfig:
    experiment: str = "tsa"
    n: int = 1024
    alpha: float = 0.5
    list_size: int = 8
    backoffs: list = field(default_factory=lambda: [0.2, 0.3, 0.4])
    frames: int = 1000
    seed: int = 0
    smoothing: float = 0.01
    interleaver: str = "identity"
    stage_order: str = "butterfly-first"
    glitch_map: int = 2
    output: str = "results.csv"
    profile_samples: int = 50000
    rx_cutoff: float = 0.1
    early_stop: bool = False
    stream_blocks: int = 8
    channel_file: str = ""
    oracle_sizes: list = field(default_factory=lambda: [4, 8, 12])
    oracle_eps: float = 0.3
    oracle_fraction: float = 0.5

    def validate(self) -> "SimConfig":
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.experiment in EXPERIMENTS, f"experiment must be one of {EXPERIMENTS}")
        need(self.n >= 2 and self.n & (self.n - 1) == 0, "n must be a power of two >= 2")
        need(0.0 <= self.alpha <= 1.0, "alpha must lie in [0, 1]")
        need(abs(self.alpha * self.n - round(self.alpha * self.n)) < 1e-9, "alpha * n must be an integer")
        need(self.list_size >= 1, "list_size must be >= 1")
        need(all(b >= 0 for b in self.backoffs), "backoffs must be nonnegative")
        need(self.frames >= 0, "frames must be >= 0")
        need(0.0 <= self.smoothing < 0.5, "smoothing must lie in [0, 0.5)")
        need(self.interleaver in INTERLEAVERS, f"interleaver must be one of {INTERLEAVERS}")
        need(self.stage_order in STAGE_ORDERS, f"stage_order must be one of {sorted(STAGE_ORDERS)}")
        need(self.glitch_map in (1, 2), "glitch_map must be 1 or 2")
        need(self.profile_samples >= 1, "profile_samples must be >= 1")
        need(0.0 <= self.rx_cutoff <= 1.0, "rx_cutoff must lie in [0, 1]")
        need(self.stream_blocks >= 1, "stream_blocks must be >= 1")
        need(all(1 <= s <= 12 for s in self.oracle_sizes), "oracle_sizes must lie in [1, 12]")
        need(self.oracle_eps > 0, "oracle_eps must be positive")
        need(0.0 <= self.oracle_fraction <= 1.0, "oracle_fraction must lie in [0, 1]")
        if self.experiment == "corner":
            need(self.alpha in (0.0, 1.0), "corner experiments need alpha 0 (order 1) or 1 (order 2)")
        if self.experiment == "time-sharing":
            corner_pattern_ok = abs(self.alpha * self.stream_blocks - round(self.alpha * self.stream_blocks)) < 1e-9
            need(corner_pattern_ok, "alpha * stream_blocks must be an integer for time-sharing")
        return self

    @property
    def n1(self) -> int:
        return int(round(self.alpha * self.n))


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(SimConfig)}


def _coerce(key, value):
    kind = _FIELD_TYPES[key]
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key} must be an integer")
        return value
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number")
        return float(value)
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{key} must be true or false")
        return value
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{key} must be a string")
        return value
    if not isinstance(value, list):
        raise ConfigError(f"{key} must be a list")
    return [int(v) if key == "oracle_sizes" else float(v) for v in value]


def config_from_dict(d: dict) -> SimConfig:
    unknown = sorted(set(d) - set(_FIELD_TYPES))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return SimConfig(**{k: _coerce(k, v) for k, v in d.items()}).validate()


def _read_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from None


def load_config(path) -> SimConfig:
    cfg = config_from_dict(_read_toml(path))
    if cfg.channel_file and not Path(cfg.channel_file).is_absolute():
        cfg.channel_file = str(Path(path).parent / cfg.channel_file)
    return cfg


def structure_from_dict(d: dict) -> InputStructure:
    """Build an input structure from a channel description.

    ``channel = "blackwell"`` (optional ``glitch_map``) selects the Blackwell
    channel with its sum-rate optimal structure.  Otherwise ``law`` (rows per
    input, columns ``y1 * y2_size + y2``), ``y1_size``, ``y2_size``, ``puv``
    and ``symbol_map`` are required.
    """
    known = {"channel", "glitch_map", "law", "y1_size", "y2_size", "puv", "symbol_map"}
    unknown = sorted(set(d) - known)
    if unknown:
        raise ConfigError(f"unknown channel keys: {', '.join(unknown)}")
    try:
        if d.get("channel", "generic") == "blackwell":
            return blackwell_optimal_structure(int(d.get("glitch_map", 2)))
        for k in ("law", "y1_size", "y2_size", "puv", "symbol_map"):
            if k not in d:
                raise ConfigError(f"channel description lacks {k!r}")
        bc = GenericBC(ConditionalPmf(np.array(d["law"], dtype=float)), d["y1_size"], d["y2_size"])
        return InputStructure(JointPmf(np.array(d["puv"], dtype=float)), np.array(d["symbol_map"]), bc)
    except ConfigError:
        raise
    except (ValueError, TypeError) as e:
        raise ConfigError(f"invalid channel description: {e}") from None


def load_structure(path) -> InputStructure:
    return structure_from_dict(_read_toml(path))


def config_structure(cfg: SimConfig) -> InputStructure:
    if cfg.channel_file:
        return load_structure(cfg.channel_file)
    return blackwell_optimal_structure(cfg.glitch_map)


# -- report ----------------------------------------------------------------------------

def wilson_interval(errors: int, frames: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson score interval; ``(0, 1)`` when there are no frames."""
    if frames <= 0:
        return 0.0, 1.0
    p = errors / frames
    den = 1.0 + z * z / frames
    centre = (p + z * z / (2 * frames)) / den
    half = z * math.sqrt(p * (1 - p) / frames + z * z / (4 * frames * frames)) / den
    lo = 0.0 if errors == 0 else max(0.0, centre - half)
    hi = 1.0 if errors == frames else min(1.0, centre + half)
    return lo, hi


@dataclass
class ReportRow:
    backoff_bpcu: float
    r1: float
    r2: float
    frames: int
    errors: int
    fer: float
    ci_lo: float
    ci_hi: float
    scheme: str
    n: int
    alpha: float
    L: int
    wall_time: float = field(default=0.0, compare=False)


@dataclass
class SimReport:
    rows: list = field(default_factory=list)
    infeasible: list = field(default_factory=list)

    def row(self, scheme: str, backoff: float):
        for r in self.rows:
            if r.scheme == scheme and abs(r.backoff_bpcu - backoff) < 1e-12:
                return r
        return None


def _fmt(v):
    return repr(float(v)) if isinstance(v, float) else str(v)


def emit_csv(report: SimReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in report.rows:
            w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])


def parse_csv(path) -> SimReport:
    casts = {"frames": int, "errors": int, "n": int, "L": int, "scheme": str}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_COLUMNS:
            raise ValueError(f"unexpected columns {reader.fieldnames}")
        rows = [ReportRow(**{c: casts.get(c, float)(rec[c]) for c in CSV_COLUMNS}) for rec in reader]
    return SimReport(rows)


# -- experiment plumbing ------------------------------------------------------------

def _derived_seed(*words) -> int:
    return int(np.random.SeedSequence([int(w) for w in words]).generate_state(1, np.uint64)[0])


SCHEME_TAGS = {"tsa": 1, "time-sharing": 2, "corner": 3}


def data_bits(n: int, rate: float, capacity: float, backoff: float) -> int:
    """``floor(n * rate * (C - b) / C)``: the rate pair scaled towards the origin."""
    if backoff >= capacity:
        return 0
    return int(math.floor(n * rate * (capacity - backoff) / capacity + 1e-9))


def _profiles(cfg: SimConfig, s: InputStructure, t, patterns):
    out = {}
    for key, (user, known) in patterns.items():
        seed = _derived_seed(cfg.seed, 0x9F, user, known)
        out[key] = profile_user(s, user, t, known, cfg.profile_samples, seed, cfg.interleaver)
    return out


def profile_patterns(cfg: SimConfig) -> dict:
    """Profile labels mapped to ``(user, known_prefix_length)``."""
    n = cfg.n
    if cfg.experiment == "tsa":
        ku, kv = tsa_known_counts(n, cfg.n1)
        return {"u": (1, ku), "v": (2, kv)}
    if cfg.experiment == "corner":
        order = 1 if cfg.alpha == 0.0 else 2
        ku, kv = corner_known_counts(n, order)
        return {f"c{order}_u": (1, ku), f"c{order}_v": (2, kv)}
    pats = {}
    for order in (1, 2):
        ku, kv = corner_known_counts(n, order)
        pats[f"c{order}_u"] = (1, ku)
        pats[f"c{order}_v"] = (2, kv)
    return pats


def _stream_job(job):
    kind, n, n1, coders, s, laws, L, nblocks, seed, alpha = job
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    shaping = np.random.SeedSequence([seed, 2]).generate_state(2, np.uint64)
    coders = [tuple(dataclasses.replace(st, shaping_seed=int(shaping[i])) for i, st in enumerate(pair))
              for pair in coders]
    if kind == "tsa":
        cu, cv = coders[0]
        msgs = (rng.integers(0, 2, (nblocks, cu.code.k)), rng.integers(0, 2, (nblocks, cv.code.k)))
        layout = build_layout(TsaSchedule(n, n1, nblocks))
        res = tsa_stream(msgs, layout, coders[0], s, laws, L, rng)
    else:
        orders = corner_pattern(nblocks, alpha)
        msgs = [(rng.integers(0, 2, coders[o - 1][0].code.k), rng.integers(0, 2, coders[o - 1][1].code.k))
                for o in orders]
        res = time_sharing_stream(msgs, n, alpha, coders, s, laws, L, rng)
    return int(res.frame_errors.sum()), res.frames


def _simulate(cfg, kind, coders, s, laws, alpha, grid_index) -> tuple[int, int]:
    """Run ``cfg.frames`` frames in streams; deterministic in the worker count."""
    nstreams = -(-cfg.frames // cfg.stream_blocks)
    tag = SCHEME_TAGS[cfg.experiment]
    jobs = []
    for j in range(nstreams):
        nb = min(cfg.stream_blocks, cfg.frames - j * cfg.stream_blocks)
        jobs.append((kind, cfg.n, cfg.n1, coders, s, laws, cfg.list_size, nb,
                     _derived_seed(cfg.seed, tag, grid_index, j), alpha))
    if kind != "tsa":
        for job in jobs:
            corner_pattern(job[7], alpha)  # raises on a non-integral split
    errors = frames = 0
    batch = max(1, 4 * worker_count())
    for start in range(0, len(jobs), batch):
        for e, f in map_ordered(_stream_job, jobs[start:start + batch]):
            errors += e
            frames += f
            if cfg.early_stop and errors >= EARLY_STOP_ERRORS:
                return errors, frames
    return errors, frames


def _grid_point(cfg, s, t, profiles, laws, capacity, b):
    """Codes for one back-off; returns ``(kind, coders, r1, r2, alpha)``."""
    n = cfg.n
    if cfg.experiment == "tsa":
        rp = tsa_rates(s, cfg.alpha)
        cu = build_code(profiles["u"], data_bits(n, rp.r1, capacity, b), cfg.rx_cutoff)
        cv = build_code(profiles["v"], data_bits(n, rp.r2, capacity, b), cfg.rx_cutoff)
        coders = [(EncoderState.for_user(s, 1, cu, t), EncoderState.for_user(s, 2, cv, t))]
        return "tsa", coders, cu.k / n, cv.k / n, cfg.alpha
    corners = corner_points(s)
    coders = []
    for order in (1, 2):
        key_u, key_v = f"c{order}_u", f"c{order}_v"
        if key_u not in profiles:
            coders.append(None)
            continue
        cp = corners[order - 1]
        cu = build_code(profiles[key_u], data_bits(n, cp.r1, capacity, b), cfg.rx_cutoff)
        cv = build_code(profiles[key_v], data_bits(n, cp.r2, capacity, b), cfg.rx_cutoff)
        coders.append((EncoderState.for_user(s, 1, cu, t), EncoderState.for_user(s, 2, cv, t)))
    alpha = cfg.alpha
    if cfg.experiment == "corner":
        # alpha 0 -> order 1 only, alpha 1 -> order 2 only
        if coders[0] is None:
            coders[0] = coders[1]
        if coders[1] is None:
            coders[1] = coders[0]
    pattern = corner_pattern(cfg.stream_blocks, alpha)
    share2 = float(np.mean(pattern == 2))
    r1 = (1 - share2) * coders[0][0].code.k / n + share2 * coders[1][0].code.k / n
    r2 = (1 - share2) * coders[0][1].code.k / n + share2 * coders[1][1].code.k / n
    return "ts", coders, r1, r2, alpha


def experiment_profiles(cfg: SimConfig) -> dict:
    """Reliability profiles of every pattern ``cfg`` needs, keyed as in :func:`profile_patterns`."""
    s = config_structure(cfg)
    return _profiles(cfg, s, make_transform(cfg.n, cfg.stage_order), profile_patterns(cfg))


def run_fer(cfg: SimConfig, profiles=None) -> SimReport:
    """FER sweep over ``cfg.backoffs``.

    ``profiles`` may carry the output of :func:`experiment_profiles` for the
    same config, to reuse them across runs that differ only in frame counts
    or back-offs.
    """
    s = config_structure(cfg)
    report = SimReport()
    if cfg.frames == 0:
        return report
    capacity = sum_rate(s)
    t = make_transform(cfg.n, cfg.stage_order)
    if profiles is None:
        profiles = _profiles(cfg, s, t, profile_patterns(cfg))
    laws = (effective_law(s, 1, cfg.smoothing), effective_law(s, 2, cfg.smoothing))
    for gi, b in enumerate(cfg.backoffs):
        t0 = time.perf_counter()
        try:
            kind, coders, r1, r2, alpha = _grid_point(cfg, s, t, profiles, laws, capacity, b)
        except InfeasibleRate as e:
            log.warning("back-off %.4g infeasible: %s", b, e)
            report.infeasible.append((b, str(e)))
            continue
        errors, frames = _simulate(cfg, kind, coders, s, laws, alpha, gi)
        lo, hi = wilson_interval(errors, frames)
        report.rows.append(ReportRow(float(b), float(r1), float(r2), frames, errors,
                                     errors / frames if frames else 0.0, lo, hi, cfg.experiment,
                                     cfg.n, float(cfg.alpha), cfg.list_size,
                                     time.perf_counter() - t0))
        log.info("%s b=%.3f r=(%.4f, %.4f) errors %d/%d", cfg.experiment, b, r1, r2, errors, frames)
    return report


def run_oracle(cfg: SimConfig) -> SimReport:
    s = config_structure(cfg)
    capacity = sum_rate(s)
    rp = tsa_rates(s, cfg.alpha)
    rates = (cfg.oracle_fraction * rp.r1, cfg.oracle_fraction * rp.r2)
    report = SimReport()
    for i, size in enumerate(cfg.oracle_sizes):
        t0 = time.perf_counter()
        res = typicality_oracle(s, size, rates, cfg.frames, cfg.oracle_eps, cfg.alpha,
                                _derived_seed(cfg.seed, 0x0A, i))
        lo, hi = wilson_interval(res.errors, res.trials)
        report.rows.append(ReportRow(float(capacity - sum(rates)), float(rates[0]), float(rates[1]),
                                     res.trials, res.errors, res.error_rate, lo, hi, "oracle",
                                     size, float(cfg.alpha), 0, time.perf_counter() - t0))
    return report


def run(cfg: SimConfig) -> SimReport:
    """Execute a configured experiment and return its report."""
    if cfg.experiment in ("tsa", "time-sharing", "corner"):
        return run_fer(cfg)
    if cfg.experiment == "oracle":
        return run_oracle(cfg)
    raise ConfigError(f"experiment {cfg.experiment!r} is not a FER run; use the matching command")


def region_rows(s: InputStructure, points: int = 11):
    alphas = np.linspace(0.0, 1.0, points) if points > 1 else np.array([0.5])
    return tsa_line(s, alphas)


def profile_outputs(cfg: SimConfig) -> dict:
    """Profile every pattern the configured experiment needs and write CSVs."""
    profiles = experiment_profiles(cfg)
    stem = Path(cfg.output)
    stem = stem.with_suffix("") if stem.suffix == ".csv" else stem
    paths = {}
    for key, prof in profiles.items():
        p = Path(f"{stem}_{key}.csv")
        write_profile_csv(p, prof)
        paths[key] = p
    return paths


# -- CLI ----------------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tsapolar", description="TSA polar coding simulator")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run the experiment described by a config file")
    p.add_argument("config")
    p = sub.add_parser("profile", help="write reliability profiles for a config")
    p.add_argument("config")
    p = sub.add_parser("region", help="corner points and TSA rate line of a channel file")
    p.add_argument("channel")
    p.add_argument("-o", "--output", help="CSV path (default: stdout)")
    p.add_argument("--points", type=int, default=11)
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "region":
            s = load_structure(args.channel)
            rows = region_rows(s, args.points)
            c1, c2 = corner_points(s)
            if args.output:
                write_region_csv(args.output, rows)
                print(f"corner1 {c1.r1:.6f} {c1.r2:.6f}")
                print(f"corner2 {c2.r1:.6f} {c2.r2:.6f}")
                print(f"sum_rate {sum_rate(s):.9f}")
            else:
                w = csv.writer(sys.stdout, lineterminator="\n")
                w.writerow(["alpha", "r1", "r2"])
                for a, rp in rows:
                    w.writerow([repr(a), repr(float(rp.r1)), repr(float(rp.r2))])
            return EXIT_OK
        cfg = load_config(args.config)
        if args.command == "profile":
            for key, p in profile_outputs(cfg).items():
                print(f"{key} {p}")
            return EXIT_OK
        if cfg.experiment == "region":
            s = config_structure(cfg)
            write_region_csv(cfg.output, region_rows(s))
            return EXIT_OK
        if cfg.experiment == "profile":
            for key, p in profile_outputs(cfg).items():
                print(f"{key} {p}")
            return EXIT_OK
        report = run(cfg)
        emit_csv(report, cfg.output)
        if cfg.frames > 0 and cfg.backoffs and not report.rows and cfg.experiment != "oracle":
            print("every grid point is infeasible", file=sys.stderr)
            return EXIT_INFEASIBLE
        return EXIT_OK
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
