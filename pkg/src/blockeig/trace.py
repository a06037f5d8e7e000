"""Per-iteration convergence records and the frozen trace-file schema."""

import json
from dataclasses import asdict, dataclass

from .errors import ParseError

TRACE_SCHEMA = "blockeig-trace-v1"
TRACE_COLUMNS = ("iter", "trace_value", "rel_resid", "n_locked", "n_matvec", "wall_ms")


@dataclass
class TraceRecord:
    """State of the solver entering one outer iteration."""

    iteration: int
    trace_value: float
    rel_resid: float
    n_locked: int
    n_matvec: int
    wall_ms: float


def trace_to_csv(records):
    """Render records in the versioned CSV schema.

    Floats are written with repr so solver-derived values survive a
    round-trip bit for bit.
    """
    lines = [f"# {TRACE_SCHEMA}", ",".join(TRACE_COLUMNS)]
    for r in records:
        lines.append(
            f"{r.iteration},{float(r.trace_value)!r},{float(r.rel_resid)!r},"
            f"{r.n_locked},{r.n_matvec},{float(r.wall_ms)!r}"
        )
    return "\n".join(lines) + "\n"


def trace_to_json(records):
    return json.dumps({"schema": TRACE_SCHEMA, "records": [asdict(r) for r in records]}, indent=1)


def parse_trace_csv(path):
    """Read a trace CSV back into records; ParseError on schema mismatch."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != f"# {TRACE_SCHEMA}":
        raise ParseError(1, f"missing schema line '# {TRACE_SCHEMA}'")
    if len(lines) < 2 or lines[1] != ",".join(TRACE_COLUMNS):
        raise ParseError(2, "unexpected column header")
    records = []
    for lineno, line in enumerate(lines[2:], start=3):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != len(TRACE_COLUMNS):
            raise ParseError(lineno, f"expected {len(TRACE_COLUMNS)} fields")
        try:
            records.append(
                TraceRecord(
                    iteration=int(parts[0]),
                    trace_value=float(parts[1]),
                    rel_resid=float(parts[2]),
                    n_locked=int(parts[3]),
                    n_matvec=int(parts[4]),
                    wall_ms=float(parts[5]),
                )
            )
        except ValueError:
            raise ParseError(lineno, "malformed record") from None
    return records
