"""Episode metrics and their CSV serialization.

Metrics files start with a provenance preamble of '# key=value' lines
(config hash, seed, code version, and any hyperparameter overrides),
followed by an RFC-4180 CSV body. Floats are written with repr so a file is
a byte-deterministic function of the run, and wall-clock timings are kept
out of the body entirely (they would break byte-identical reruns); timing
belongs in the run log.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

__all__ = ["EpisodeMetrics", "write_metrics_csv", "read_metrics_csv",
           "MetricsFormatError"]


@dataclass
class EpisodeMetrics:
    """Per-episode outcome: rewards, scheduled and realized delay ratios,
    collision and arrival counters, and the win indicator."""

    episode: int
    rewards: tuple
    wait_ratio: float          # mean scheduled d / dt
    msg_delay_ratio: float     # mean realized max accepted arrival / dt
    collisions: int
    arrivals: int
    win: bool

    @property
    def reward_mean(self) -> float:
        return float(sum(self.rewards) / len(self.rewards))


class MetricsFormatError(ValueError):
    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


def _num(x: float) -> str:
    return repr(float(x))


def write_metrics_csv(path, provenance: dict[str, str],
                      rows: list[EpisodeMetrics]):
    """Write a metrics file; byte-identical for identical inputs."""
    n_agents = len(rows[0].rewards) if rows else 0
    header = (["episode", "reward_mean"]
              + [f"reward_{i}" for i in range(n_agents)]
              + ["wait_ratio", "msg_delay_ratio", "collisions", "arrivals", "win"])
    buf = io.StringIO()
    for key in sorted(provenance):
        buf.write(f"# {key}={provenance[key]}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for r in rows:
        writer.writerow(
            [r.episode, _num(r.reward_mean)]
            + [_num(x) for x in r.rewards]
            + [_num(r.wait_ratio), _num(r.msg_delay_ratio),
               r.collisions, r.arrivals, int(r.win)])
    Path(path).write_bytes(buf.getvalue().encode("utf-8"))


def read_metrics_csv(path) -> tuple[dict[str, str], list[EpisodeMetrics]]:
    """Parse a metrics file; malformed content raises with a line number."""
    provenance: dict[str, str] = {}
    rows: list[EpisodeMetrics] = []
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines:
        raise MetricsFormatError(path, 1, "empty metrics file")
    body_start = 0
    for k, line in enumerate(lines):
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            provenance[key.strip()] = value
            body_start = k + 1
        else:
            break
    body = lines[body_start:]
    if not body:
        raise MetricsFormatError(path, body_start + 1, "missing CSV header")
    header = next(csv.reader([body[0]]))
    expected_prefix = ["episode", "reward_mean"]
    if header[:2] != expected_prefix or "win" not in header:
        raise MetricsFormatError(path, body_start + 1,
                                 f"unexpected header {header!r}")
    reward_cols = [h for h in header if h.startswith("reward_") and h != "reward_mean"]
    for offset, line in enumerate(body[1:], start=2):
        if not line.strip():
            continue
        line_no = body_start + offset
        fields = next(csv.reader([line]))
        if len(fields) != len(header):
            raise MetricsFormatError(path, line_no,
                                     f"expected {len(header)} fields, got {len(fields)}")
        try:
            record = dict(zip(header, fields))
            float(record["reward_mean"])  # validate even though recomputed
            rows.append(EpisodeMetrics(
                episode=int(record["episode"]),
                rewards=tuple(float(record[c]) for c in reward_cols),
                wait_ratio=float(record["wait_ratio"]),
                msg_delay_ratio=float(record["msg_delay_ratio"]),
                collisions=int(record["collisions"]),
                arrivals=int(record["arrivals"]),
                win=bool(int(record["win"])),
            ))
        except (KeyError, ValueError) as exc:
            raise MetricsFormatError(path, line_no, f"bad field: {exc}") from exc
    return provenance, rows
