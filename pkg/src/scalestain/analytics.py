"""Viewer interaction-log analysis: per-second dominant activity and
time-per-zoom-level histograms.

Logs are JSON lines, one event per line:
    {"t": ms, "kind": "pan|zoom|param|open|decide", "level": float,
     "x": px, "y": px, "blend": b, "sensitivity": k}
Only t and kind are mandatory. An event covers the time from its timestamp
to the next event, capped at one second; each whole second is labeled by
the activity covering most of it (ties: param > zoom > pan), and seconds
without activity are dwell.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

EVENT_KINDS = ("pan", "zoom", "param", "open", "decide")
ACTIVITY_OF_KIND = {"pan": "pan", "zoom": "zoom", "param": "parameter-adjust"}
# tie priority, highest first
_PRIORITY = ("parameter-adjust", "zoom", "pan")

COVER_CAP_MS = 1000


class LogFormatError(Exception):
    pass


@dataclass
class SessionEvent:
    t: int
    kind: str
    level: float = None
    x: float = None
    y: float = None
    blend: float = None
    sensitivity: int = None

    def to_json_dict(self):
        d = {"t": self.t, "kind": self.kind}
        for k in ("level", "x", "y", "blend", "sensitivity"):
            v = getattr(self, k)
            if v is not None:
                d[k] = v
        return d


def parse_event(obj):
    if not isinstance(obj, dict):
        raise LogFormatError("event must be a JSON object")
    try:
        t = int(obj["t"])
        kind = obj["kind"]
    except (KeyError, TypeError, ValueError) as e:
        raise LogFormatError(f"bad event fields: {e}") from None
    if t < 0:
        raise LogFormatError("negative timestamp")
    if kind not in EVENT_KINDS:
        raise LogFormatError(f"unknown event kind {kind!r}")
    return SessionEvent(
        t=t,
        kind=kind,
        level=obj.get("level"),
        x=obj.get("x"),
        y=obj.get("y"),
        blend=obj.get("blend"),
        sensitivity=obj.get("sensitivity"),
    )


def parse_log(lines):
    """Parse JSON-lines into time-sorted events. Malformed lines are
    collected as (line_number, message) and parsing continues; out-of-order
    timestamps are stably re-sorted."""
    events, errors = [], []
    for i, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            events.append(parse_event(json.loads(line)))
        except (json.JSONDecodeError, LogFormatError) as e:
            errors.append((i, str(e)))
    events.sort(key=lambda e: e.t)  # stable
    return events, errors


def serialize_log(events):
    return "".join(json.dumps(e.to_json_dict()) + "\n" for e in events)


@dataclass
class ActivityTimeline:
    seconds: list  # one label per whole session second
    totals: dict = field(init=False)  # label -> percentage

    def __post_init__(self):
        n = max(len(self.seconds), 1)
        labels = ("parameter-adjust", "pan", "zoom", "dwell")
        self.totals = {
            lab: 100.0 * self.seconds.count(lab) / n for lab in labels
        }


def _session_span(events):
    if not events:
        return 0, 0
    return events[0].t, events[-1].t


def dominant_activity_per_second(events):
    """Label each whole session second by its dominant activity."""
    t0, t1 = _session_span(events)
    n_seconds = -(-(t1 - t0) // 1000) if t1 > t0 else 0
    cover = [dict.fromkeys(_PRIORITY, 0) for _ in range(n_seconds)]  # ms per label
    for ev, nxt in zip(events, events[1:] + [None]):
        act = ACTIVITY_OF_KIND.get(ev.kind)
        if act is None:
            continue
        start = ev.t - t0
        end = start + COVER_CAP_MS if nxt is None else min(nxt.t - t0, start + COVER_CAP_MS)
        end = min(end, n_seconds * 1000)
        s = start // 1000
        while s * 1000 < end:
            lo = max(start, s * 1000)
            hi = min(end, (s + 1) * 1000)
            cover[s][act] += hi - lo
            s += 1
    labels = []
    for c in cover:
        best = max(c.values())
        if best == 0:
            labels.append("dwell")
        else:
            labels.append(next(lab for lab in _PRIORITY if c[lab] == best))
    return ActivityTimeline(seconds=labels)


def zoom_time_histogram(events):
    """Seconds spent at each rounded zoom level: the gap between consecutive
    events is attributed to the level in force (last known level)."""
    hist = {}
    level = None
    for ev, nxt in zip(events, events[1:]):
        if ev.level is not None:
            level = ev.level
        # no level seen yet: borrow the next known one
        lvl = level if level is not None else nxt.level
        if lvl is None:
            continue
        dt = (nxt.t - ev.t) / 1000.0
        if dt > 0:
            key = int(round(lvl))
            hist[key] = hist.get(key, 0.0) + dt
    return hist


def analyze(events):
    """Full report for one session."""
    t0, t1 = _session_span(events)
    timeline = dominant_activity_per_second(events)
    return {
        "duration_s": (t1 - t0) / 1000.0,
        "activity_percentages": timeline.totals,
        "activity_seconds": timeline.seconds,
        "zoom_histogram": {str(k): v for k, v in sorted(zoom_time_histogram(events).items())},
    }
