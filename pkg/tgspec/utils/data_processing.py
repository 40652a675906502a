import json
import logging
import os
import re
import uuid
from datetime import datetime

import numpy as np
import polars as pl

from tgspec.errors import DomainError, ProblemFormatError
from tgspec.ihoc import BenchmarkId, IHOCProblem, make_benchmark_problem

logger = logging.getLogger(__name__)

PROBLEM_FIELDS = ("A", "B", "C", "D", "Q", "R", "x0")
REQUIRED_FIELDS = ("A", "B", "C", "Q", "R", "x0")
DEFAULT_SCHEDULE_STEP = 10


# Function to log a run the way sessions are logged: one timestamped line with an id
def create_run_log(command):
    run_id = str(uuid.uuid4())
    timestamp = datetime.now().strftime("%Y-%m-%d %H:%M:%S")
    logger.info("[%s] New run: %s (%s)", timestamp, run_id, command)
    return run_id


def problem_to_dict(problem):
    return {name: np.asarray(getattr(problem, name)).tolist() for name in PROBLEM_FIELDS}


def problem_from_dict(data):
    if not isinstance(data, dict):
        raise ProblemFormatError("problem file must hold an object with fields A, B, C, Q, R, x0")
    missing = [name for name in REQUIRED_FIELDS if name not in data]
    if missing:
        raise ProblemFormatError(f"problem file is missing field(s): {', '.join(missing)}")
    unknown = sorted(set(data) - set(PROBLEM_FIELDS))
    if unknown:
        raise ProblemFormatError(f"problem file has unknown field(s): {', '.join(unknown)}")
    fields = {}
    for name in PROBLEM_FIELDS:
        value = data.get(name)
        if value is None:
            fields[name] = None
            continue
        try:
            fields[name] = np.array(value, dtype=float)
        except (TypeError, ValueError) as exc:
            raise ProblemFormatError(f"field {name} is not a numeric array: {exc}") from None
    return IHOCProblem(**fields)


def read_problem(path):
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ProblemFormatError(f"problem file {path} does not exist") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise ProblemFormatError(f"problem file {path} could not be read: {exc}") from None
    return problem_from_dict(data)


def write_problem(problem, path):
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(problem_to_dict(problem), f, indent=2)
        f.write("\n")
    logger.info("wrote problem file %s", path)


def load_problem(source):
    """Builtin benchmark id (dcs, f16) or a path to a problem file."""
    try:
        return make_benchmark_problem(BenchmarkId.parse(source))
    except DomainError:
        return read_problem(source)


def _parse_range(text, cast, default_step):
    # lo..hi or lo..hi/step, inclusive of hi
    match = re.fullmatch(r"\s*([^.\s/]+)\s*\.\.\s*([^/\s]+)\s*(?:/\s*(\S+))?\s*", text)
    if not match:
        return None
    lo, hi = cast(match.group(1)), cast(match.group(2))
    step = cast(match.group(3)) if match.group(3) else default_step
    if step <= 0 or hi < lo:
        raise DomainError(f"bad range {text!r}")
    return list(range(lo, hi + 1, step))


def parse_int_list(text):
    """Comma-separated integers; entries lo..hi (step 1) and lo..hi/step expand."""
    values = []
    try:
        for entry in text.split(","):
            if not entry.strip():
                continue
            expanded = _parse_range(entry, int, 1)
            values.extend(expanded if expanded is not None else [int(entry)])
    except ValueError:
        raise DomainError(f"cannot parse integer list {text!r}") from None
    if not values:
        raise DomainError("empty integer list")
    return values


def parse_float_list(text):
    try:
        values = [float(entry) for entry in text.split(",") if entry.strip()]
    except ValueError:
        raise DomainError(f"cannot parse number list {text!r}") from None
    if not values:
        raise DomainError("empty number list")
    return values


def parse_name_list(text):
    values = [entry.strip() for entry in text.split(",") if entry.strip()]
    if not values:
        raise DomainError("empty list")
    return values


def parse_schedule(text):
    """Parse an alpha schedule like "10:-0.4,20:-0.3,50..120:0" into (n, alpha) pairs.

    lo..hi expands with step 10; lo..hi/step uses the given step. The n values
    must be strictly increasing.
    """
    schedule = []
    for entry in text.split(","):
        if not entry.strip():
            continue
        if ":" not in entry:
            raise DomainError(f"schedule entry {entry!r} is not of the form n:alpha")
        n_part, alpha_part = entry.rsplit(":", 1)
        try:
            alpha = float(alpha_part)
            ns = _parse_range(n_part, int, DEFAULT_SCHEDULE_STEP)
            ns = ns if ns is not None else [int(n_part)]
        except ValueError:
            raise DomainError(f"cannot parse schedule entry {entry!r}") from None
        schedule.extend((n, alpha) for n in ns)
    if not schedule:
        raise DomainError("empty alpha schedule")
    ns = [n for n, _ in schedule]
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise DomainError("alpha schedule must have strictly increasing n")
    return schedule


def sweep_table(rows):
    columns = ["integral", "family", "alpha", "L", "n", "max_abs_error", "max_log_error"]
    schema = {
        "integral": pl.Utf8,
        "family": pl.Utf8,
        "alpha": pl.Float64,
        "L": pl.Float64,
        "n": pl.Int64,
        "max_abs_error": pl.Float64,
        "max_log_error": pl.Float64,
    }
    return pl.DataFrame([row.as_dict() for row in rows], schema=schema).select(columns)


def _ensure_parent(path):
    parent = os.path.dirname(os.fspath(path))
    if parent:
        os.makedirs(parent, exist_ok=True)


# Function to write a table as CSV with full round-trip float precision
def write_csv(df, path):
    _ensure_parent(path)
    df.write_csv(path)
    logger.info("wrote %s (%d rows)", path, df.height)


def format_number(value, digits=6):
    return f"{value:.{digits}f}"


def format_report(report, seconds, digits=6):
    gain = " ".join(format_number(v, digits) for v in np.asarray(report.K_star).ravel())
    lines = [
        f"method: {report.method.value}",
        f"n: {report.n}",
        f"alpha: {report.alpha:g}",
        f"J_n: {format_number(report.J_n, digits)}",
        f"K_star ({report.K_star.shape[0]}x{report.K_star.shape[1]}, row-major): {gain}",
        f"gain_residual: {report.gain_residual:.6e}",
        f"max_feasibility: {float(np.max(report.feasibility)):.6e}",
        f"d_constraint_max: {report.d_constraint_max:.6e}",
        f"kkt_residual: {report.kkt_residual:.6e}",
        f"wall_time_s: {format_number(seconds, digits)}",
    ]
    return "\n".join(lines) + "\n"


def write_report(text, path):
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)
    logger.info("wrote %s", path)
