"""
DroneCAST Telemetry
Wall-clock spans for run phases (compile, loop, output) and performance
counters. Never feeds result files, so traces do not affect determinism.
"""
import itertools
import json
import os
import time
from collections import Counter, deque
from contextlib import contextmanager
from dataclasses import dataclass, field
from functools import wraps
from threading import Lock
from typing import Any, Callable, Deque, Dict, Iterator, List, Optional

import numpy as np

from utils.logger import get_logger

logger = get_logger()

METRIC_WINDOW = 1000

_span_ids = itertools.count(1)


@dataclass(eq=False)
class TraceSpan:
    """One timed run phase"""
    name: str
    started: float
    attributes: Dict[str, Any] = field(default_factory=dict)
    parent_id: Optional[str] = None
    span_id: str = field(default_factory=lambda: f"span-{next(_span_ids)}")
    duration_ms: Optional[float] = None
    status: str = "running"

    def finish(self, status: str = "success"):
        self.duration_ms = (time.perf_counter() - self.started) * 1000.0
        self.status = status

    def set_attribute(self, key: str, value: Any):
        self.attributes[key] = value

    def to_dict(self) -> dict:
        return {
            "span_id": self.span_id,
            "parent_id": self.parent_id,
            "name": self.name,
            "status": self.status,
            "duration_ms": self.duration_ms,
            "attributes": dict(self.attributes),
        }


class Tracer:
    """Nested spans; the innermost open span is the parent of the next one"""

    def __init__(self, service_name: str = "DroneCAST"):
        self.service_name = service_name
        self.completed_spans: List[TraceSpan] = []
        self._open: List[TraceSpan] = []
        self.lock = Lock()

    def start_span(self, name: str, attributes: Optional[Dict] = None) -> TraceSpan:
        with self.lock:
            parent = self._open[-1].span_id if self._open else None
            span = TraceSpan(name, time.perf_counter(), dict(attributes or {}), parent)
            self._open.append(span)
        logger.debug(f"⏱ {name} started")
        return span

    def end_span(self, span: TraceSpan, status: str = "success"):
        span.finish(status)
        with self.lock:
            if span in self._open:
                self._open.remove(span)
            self.completed_spans.append(span)
        mark = "✅" if status == "success" else "❌"
        logger.debug(f"{mark} {span.name} {span.duration_ms:.1f}ms")

    @contextmanager
    def trace_span(self, name: str, attributes: Optional[Dict] = None) -> Iterator[TraceSpan]:
        """Span around a block; an escaping exception marks it as error and propagates"""
        span = self.start_span(name, attributes)
        try:
            yield span
        except Exception as e:
            span.set_attribute("error", str(e))
            self.end_span(span, "error")
            raise
        self.end_span(span)

    def get_trace_summary(self) -> Dict:
        roots = [s for s in self.completed_spans if s.parent_id is None]
        return {
            "service": self.service_name,
            "total_spans": len(self.completed_spans),
            "total_duration_ms": float(sum(s.duration_ms or 0.0 for s in roots)),
            "spans": [s.to_dict() for s in self.completed_spans],
            "performance": get_performance_monitor().get_all_stats(),
        }

    def export_trace(self, filepath: str) -> str:
        """Write the summary as JSON; parent directories are created"""
        directory = os.path.dirname(os.path.abspath(filepath))
        os.makedirs(directory, exist_ok=True)
        with open(filepath, "w", encoding="utf-8") as f:
            json.dump(self.get_trace_summary(), f, indent=2, ensure_ascii=False)
        logger.info(f"Trace exported to {filepath}")
        return filepath

    def clear(self):
        with self.lock:
            self.completed_spans.clear()
            self._open.clear()


_tracer = Tracer()


def get_tracer() -> Tracer:
    return _tracer


class PerformanceMonitor:
    """Counters (snapshots, receptions, deferrals) and bounded timing series"""

    def __init__(self, window: int = METRIC_WINDOW):
        self.window = window
        self.metrics: Dict[str, Deque[float]] = {}
        self.counters: Counter = Counter()
        self.lock = Lock()

    def record_metric(self, name: str, value: float):
        with self.lock:
            series = self.metrics.get(name)
            if series is None:
                series = self.metrics[name] = deque(maxlen=self.window)
            series.append(float(value))

    def increment_counter(self, name: str, value: int = 1):
        with self.lock:
            self.counters[name] += value

    def get_metric_stats(self, name: str) -> Dict:
        series = self.metrics.get(name)
        if not series:
            return {"count": 0}
        values = np.fromiter(series, dtype=float)
        return {
            "count": int(values.size),
            "min": float(values.min()),
            "max": float(values.max()),
            "mean": float(values.mean()),
            "p95": float(np.percentile(values, 95)),
        }

    def get_all_stats(self) -> Dict:
        return {
            "metrics": {name: self.get_metric_stats(name) for name in sorted(self.metrics)},
            "counters": dict(sorted(self.counters.items())),
        }

    def reset(self):
        with self.lock:
            self.metrics.clear()
            self.counters.clear()


_perf_monitor = PerformanceMonitor()


def get_performance_monitor() -> PerformanceMonitor:
    return _perf_monitor


def timed_operation(operation_name: str):
    """
    Record the wall time of each call under duration_ms:<operation_name>.

        @timed_operation("lab_bench_sweep")
        def lab_bench_sweep(...):
            ...
    """
    def decorator(func: Callable) -> Callable:
        @wraps(func)
        def wrapper(*args, **kwargs):
            start = time.perf_counter()
            try:
                return func(*args, **kwargs)
            finally:
                _perf_monitor.record_metric(f"duration_ms:{operation_name}", (time.perf_counter() - start) * 1000.0)
        return wrapper
    return decorator
