"""Result rows and the flat CSV schema shared by every experiment.

One row is one estimated probability: the experiment that produced it,
the model parameters, trial and success counts, the point estimate with
its confidence interval, and the seeding metadata needed to reproduce it.
Columns ``L``, ``eps`` and ``extra`` may be empty when not applicable;
everything else is mandatory.  Files are UTF-8 with a mandatory header,
rows in the order the producer emitted them, and floats rendered by
``repr`` so output is byte-stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

COLUMNS = (
    "experiment", "d", "u", "T", "R", "L", "eps", "extra",
    "trials", "successes", "p_hat", "ci_low", "ci_high",
    "seed", "shards", "intrusion_tol",
)

HEADER = ",".join(COLUMNS)


class SchemaError(ValueError):
    """A CSV file or row violates the result schema."""


@dataclass(frozen=True)
class ResultRow:
    """One estimated probability with its provenance."""

    experiment: str
    d: int
    u: float
    T: float
    R: int
    L: int | None
    eps: float | None
    extra: str
    trials: int
    successes: int
    p_hat: float
    ci_low: float
    ci_high: float
    seed: int
    shards: int
    intrusion_tol: float

    def __post_init__(self):
        problems = _row_problems(self)
        if problems:
            raise SchemaError("; ".join(problems))


def _is_finite(x) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x)


def _row_problems(row: ResultRow) -> list:
    out = []
    if not row.experiment:
        out.append("experiment name is empty")
    for field in ("experiment", "extra"):
        text = getattr(row, field)
        if any(ch in text for ch in ",\n\r\""):
            out.append(f"{field} contains a comma, quote, or newline")
    if row.d < 1:
        out.append("d must be >= 1")
    if not _is_finite(row.u) or row.u < 0:
        out.append("u must be finite and >= 0")
    if not _is_finite(row.T) or row.T <= 0:
        out.append("T must be finite and > 0")
    if row.R < 0:
        out.append("R must be >= 0")
    if row.L is not None and row.L < 0:
        out.append("L must be >= 0 when present")
    if row.eps is not None and not (
        _is_finite(row.eps) and 0.0 <= row.eps <= 1.0
    ):
        out.append("eps must lie in [0, 1] when present")
    if row.trials < 1:
        out.append("trials must be >= 1")
    if not 0 <= row.successes <= max(row.trials, 0):
        out.append("successes must lie in [0, trials]")
    for name in ("p_hat", "ci_low", "ci_high"):
        if not _is_finite(getattr(row, name)):
            out.append(f"{name} must be finite")
    if all(
        _is_finite(getattr(row, n)) for n in ("p_hat", "ci_low", "ci_high")
    ):
        if not 0.0 <= row.ci_low <= row.p_hat <= row.ci_high <= 1.0:
            out.append("need 0 <= ci_low <= p_hat <= ci_high <= 1")
    if row.shards < 1:
        out.append("shards must be >= 1")
    if not _is_finite(row.intrusion_tol) or row.intrusion_tol <= 0:
        out.append("intrusion_tol must be finite and > 0")
    return out


def format_row(row: ResultRow) -> str:
    fields = (
        row.experiment,
        str(row.d),
        repr(float(row.u)),
        repr(float(row.T)),
        str(row.R),
        "" if row.L is None else str(row.L),
        "" if row.eps is None else repr(float(row.eps)),
        row.extra,
        str(row.trials),
        str(row.successes),
        repr(float(row.p_hat)),
        repr(float(row.ci_low)),
        repr(float(row.ci_high)),
        str(row.seed),
        str(row.shards),
        repr(float(row.intrusion_tol)),
    )
    return ",".join(fields)


def render_csv(rows) -> str:
    lines = [HEADER]
    lines.extend(format_row(r) for r in rows)
    return "\n".join(lines) + "\n"


def write_rows(path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_csv(rows))


def _parse_int(text: str, name: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise SchemaError(f"{name} is not an integer: {text!r}") from None


def _parse_float(text: str, name: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise SchemaError(f"{name} is not a number: {text!r}") from None
    if not math.isfinite(value):
        raise SchemaError(f"{name} is not finite: {text!r}")
    return value


def parse_row(line: str) -> ResultRow:
    parts = line.split(",")
    if len(parts) != len(COLUMNS):
        raise SchemaError(
            f"expected {len(COLUMNS)} fields, got {len(parts)}"
        )
    vals = dict(zip(COLUMNS, parts))
    try:
        return ResultRow(
            experiment=vals["experiment"],
            d=_parse_int(vals["d"], "d"),
            u=_parse_float(vals["u"], "u"),
            T=_parse_float(vals["T"], "T"),
            R=_parse_int(vals["R"], "R"),
            L=None if vals["L"] == "" else _parse_int(vals["L"], "L"),
            eps=None if vals["eps"] == ""
            else _parse_float(vals["eps"], "eps"),
            extra=vals["extra"],
            trials=_parse_int(vals["trials"], "trials"),
            successes=_parse_int(vals["successes"], "successes"),
            p_hat=_parse_float(vals["p_hat"], "p_hat"),
            ci_low=_parse_float(vals["ci_low"], "ci_low"),
            ci_high=_parse_float(vals["ci_high"], "ci_high"),
            seed=_parse_int(vals["seed"], "seed"),
            shards=_parse_int(vals["shards"], "shards"),
            intrusion_tol=_parse_float(vals["intrusion_tol"],
                                       "intrusion_tol"),
        )
    except SchemaError:
        raise
    except ValueError as exc:
        raise SchemaError(str(exc)) from None


def lint_text(text: str) -> list:
    """All schema problems in a CSV body; empty list means conformant."""
    problems = []
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        return ["file is empty"]
    if lines[0] != HEADER:
        problems.append(
            f"bad header: expected {HEADER!r}, got {lines[0]!r}"
        )
        return problems
    for i, line in enumerate(lines[1:], start=2):
        try:
            parse_row(line)
        except SchemaError as exc:
            problems.append(f"line {i}: {exc}")
    return problems


def lint_file(path) -> list:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except UnicodeDecodeError:
        return ["file is not valid UTF-8"]
    return lint_text(text)


def read_rows(path) -> list:
    """Parse a conformant CSV file; raises SchemaError otherwise."""
    problems = lint_file(path)
    if problems:
        raise SchemaError("; ".join(problems))
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return [parse_row(line) for line in lines[1:]]
