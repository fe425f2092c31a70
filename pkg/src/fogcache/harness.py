"""Experiment orchestration: arrival sampling, parameter sweeps, and the
golden-trace check of the worked four-F-AP example."""

from __future__ import annotations

import csv
import difflib
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .baselines import SYNC_CLOSED_FORM, UNCODED, sync_closed_form, uncoded_load
from .delivery import run_delivery
from .model import TRACE_HEADER, Config, ConfigError, LoadReport, RequestSchedule

log = logging.getLogger(__name__)

ASYNC = "async"
UNIFORM = "uniform"
SEQUENTIAL = "sequential"
CSV_COLUMNS = [
    "scheme", "K", "N", "M", "F", "B", "delta_b", "seed",
    "load_normalized_num", "load_normalized_den", "load_normalized_float",
]
SWEEP_VARS = ("M", "delta_b")
MAX_REJECTIONS = 100_000


def sample_arrivals(K: int, B: int, rng: np.random.Generator,
                    require_nonempty: bool = True, model: str = UNIFORM) -> tuple[int, ...]:
    """Draw an arrival slot in ``1..B`` for each of ``K`` F-APs.

    ``uniform`` draws independently and uniformly, redrawing the whole vector
    until no slot is empty when ``require_nonempty`` is set.  ``sequential``
    is deterministic: contiguous blocks of F-APs per slot, so that ``K == B``
    gives one arrival per slot in index order.
    """
    if require_nonempty and K < B:
        raise ConfigError(f"cannot fill {B} slots with {K} F-APs")
    if model == SEQUENTIAL:
        return tuple((k * B) // K + 1 for k in range(K))
    if model != UNIFORM:
        raise ConfigError(f"unknown arrival model {model!r}")
    for _ in range(MAX_REJECTIONS):
        arrival = rng.integers(1, B + 1, size=K)
        if not require_nonempty or len(set(arrival.tolist())) == B:
            return tuple(int(a) for a in arrival)
    raise RuntimeError("arrival rejection sampling did not converge")


def worst_case_demands(K: int, N: int) -> tuple[int, ...]:
    if N < K:
        raise ConfigError(f"need N >= K, got N={N}, K={K}")
    return tuple(range(1, K + 1))


def replica_seed(base_seed: int, replica: int) -> int:
    state = np.random.SeedSequence([base_seed, replica]).generate_state(1, dtype=np.uint64)
    return int(state[0])


@dataclass
class ExperimentSpec:
    base: Config
    sweep_var: str
    values: Sequence
    replicas: int = 100
    arrival_model: str = UNIFORM
    require_nonempty: bool = True
    out: Path | None = None
    workers: int = 1

    def __post_init__(self):
        if self.sweep_var not in SWEEP_VARS:
            raise ConfigError(f"sweep variable must be one of {SWEEP_VARS}")
        if self.replicas < 1:
            raise ConfigError("replicas must be at least 1")
        for value in self.values:
            self.config_for(value, 0)  # validates

    def config_for(self, value, seed: int) -> Config:
        return self.base.replace(**{self.sweep_var: value, "seed": seed})


def _row(scheme: str, config: Config, seed, load: Fraction) -> dict:
    M = config.M
    return {
        "scheme": scheme, "K": config.K, "N": config.N,
        "M": int(M) if M.denominator == 1 else str(M),
        "F": config.F, "B": config.B, "delta_b": config.delta_b, "seed": seed,
        "load_normalized_num": load.numerator, "load_normalized_den": load.denominator,
        "load_normalized_float": f"{float(load):.12g}",
    }


def _run_replica(job) -> list[dict]:
    spec, value, replica = job
    seed = replica_seed(spec.base.seed, replica)
    config = spec.config_for(value, seed)
    # arrivals depend on the replica only, so every sweep value sees the same draws
    arrival = sample_arrivals(config.K, config.B, np.random.default_rng(seed),
                              spec.require_nonempty, spec.arrival_model)
    schedule = RequestSchedule(arrival, worst_case_demands(config.K, config.N))
    load = run_delivery(config, schedule).normalized
    return [
        _row(ASYNC, config, seed, load),
        _row(SYNC_CLOSED_FORM, config, seed, sync_closed_form(config.K, config.N, config.M)),
        _row(UNCODED, config, seed, uncoded_load(config.K, config.N, config.M)),
    ]


@dataclass
class SweepResult:
    spec: ExperimentSpec
    rows: list[dict] = field(default_factory=list)
    means: dict = field(default_factory=dict)

    def mean(self, scheme: str, value) -> Fraction:
        return self.means[(scheme, value)]


def sweep(spec: ExperimentSpec) -> SweepResult:
    """Run every (sweep value, replica) pair and collect per-replica rows and
    exact per-value means; write them as CSV when ``spec.out`` is set."""
    jobs = [(spec, value, r) for value in spec.values for r in range(spec.replicas)]
    if spec.workers > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            chunks = list(pool.map(_run_replica, jobs, chunksize=8))
    else:
        chunks = [_run_replica(job) for job in jobs]
    result = SweepResult(spec)
    per_value: dict = {}
    for (_, value, _), chunk in zip(jobs, chunks):
        result.rows.extend(chunk)
        per_value.setdefault(value, []).extend(chunk)
    for value in spec.values:
        config = spec.config_for(value, spec.base.seed)
        for scheme in (ASYNC, SYNC_CLOSED_FORM, UNCODED):
            loads = [Fraction(r["load_normalized_num"], r["load_normalized_den"])
                     for r in per_value[value] if r["scheme"] == scheme]
            mean = sum(loads, Fraction(0)) / len(loads)
            result.means[(scheme, value)] = mean
            result.rows.append(_row(f"{scheme}-mean", config, "", mean))
    if spec.out is not None:
        write_csv(result, spec.out)
    return result


def _fmt(value) -> str:
    value = Fraction(value)
    return str(value.numerator) if value.denominator == 1 else str(value)


def csv_text(result: SweepResult) -> str:
    spec = result.spec
    buf = io.StringIO()
    buf.write(
        f"# sweep={spec.sweep_var} values={','.join(_fmt(v) for v in spec.values)} "
        f"replicas={spec.replicas} base_seed={spec.base.seed} mode={spec.base.mode}\n"
        f"# arrivals={spec.arrival_model}-independent require_nonempty={str(spec.require_nonempty).lower()} "
        f"demands=distinct\n")
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(result.rows)
    return buf.getvalue()


def write_csv(result: SweepResult, path: Path) -> None:
    path = Path(path)
    try:
        path.write_text(csv_text(result))
    except OSError as exc:
        raise OSError(f"cannot write sweep CSV to {path}: {exc}") from exc


def gnuplot_script(csv_path: Path, sweep_var: str) -> str:
    return "\n".join([
        "set datafile separator ','",
        f"set xlabel '{sweep_var}'",
        "set ylabel 'normalized fronthaul load'",
        f"plot for [s in 'async-mean sync-closed-form-mean uncoded-mean'] '{csv_path}' "
        f"using (stringcolumn(1) eq s ? column('{sweep_var}') : 1/0):'load_normalized_float' "
        "with linespoints title s",
        "",
    ])


# -- the worked example ---------------------------------------------------

GOLDEN_FILES = {2: "slot2.tsv", 3: "slot3.tsv", 4: "slot4.tsv"}


def example1_config(mode: str = "expected", F: int = 16) -> Config:
    return Config(K=4, N=4, M=2, B=4, delta_b=2, F=F, T=4.0, mode=mode)


def example1_schedule() -> RequestSchedule:
    return RequestSchedule.from_slot_sets([[1], [2], [3], [4]], demand=[1, 2, 3, 4])


def golden_rows(slot: int) -> list[str]:
    text = resources.files("fogcache").joinpath("golden", GOLDEN_FILES[slot]).read_text()
    lines = [line for line in text.splitlines() if line.strip()]
    if lines[0] != TRACE_HEADER:
        raise ValueError(f"golden file for slot {slot} has a bad header")
    return lines[1:]


@dataclass
class VerifyResult:
    passed: bool
    first_divergence: str | None
    diff: list[str]
    report: LoadReport


def verify_example1(config: Config | None = None) -> VerifyResult:
    """Run the worked example and diff its trace against the golden tables."""
    config = config or example1_config()
    report = run_delivery(config, example1_schedule())
    diff: list[str] = []
    first = None
    for slot in range(1, config.B + 1):
        expected = golden_rows(slot) if slot in GOLDEN_FILES else []
        got = report.trace_rows([slot])
        if got == expected:
            continue
        diff.extend(difflib.unified_diff(expected, got, f"golden/slot{slot}", f"run/slot{slot}", lineterm=""))
        if first is None:
            for i in range(max(len(expected), len(got))):
                want = expected[i] if i < len(expected) else "<none>"
                have = got[i] if i < len(got) else "<none>"
                if want != have:
                    first = f"slot {slot} row {i + 1}: expected {want!r}, got {have!r}"
                    break
    return VerifyResult(first is None, first, diff, report)
