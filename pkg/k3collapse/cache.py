import json
import logging
import os
import threading
from typing import Optional

from k3collapse.fibration import WeierstrassFibration
from k3collapse.models import PeriodPoint
from k3collapse.periods import fiber_periods
from k3collapse.schemas import PeriodRecord

logger = logging.getLogger(__name__)


def _key(label: str, y: complex, path_id: str) -> tuple:
    return (label, repr(float(y.real)), repr(float(y.imag)), path_id)


class PeriodCache:
    """
    JSON-lines store of computed period bases, keyed by (fibration label, base point, path id).
    Workers read and add concurrently; only `flush` writes, merging with what is on disk.
    """

    def __init__(self, path: Optional[str]):
        self.path = None if path in (None, "", "off") else path
        self._lock = threading.Lock()
        self._records: dict = {}
        self._pending: dict = {}
        self.hits = 0
        self.misses = 0
        if self.path and os.path.exists(self.path):
            self._records = self._read(self.path)
            logger.info(f"[cache] Loaded {len(self._records)} period records from {self.path}")

    @property
    def enabled(self) -> bool:
        return self.path is not None

    @staticmethod
    def _read(path: str) -> dict:
        records = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    rec = PeriodRecord.model_validate_json(line)
                except ValueError:
                    logger.warning(f"[cache] Skipping malformed line {lineno} in {path}")
                    continue
                records[_key(rec.label, complex(*rec.y), rec.path_id)] = rec
        return records

    def get(self, label: str, y: complex, path_id: str = "raw") -> Optional[PeriodPoint]:
        if not self.enabled:
            return None
        key = _key(label, complex(y), path_id)
        with self._lock:
            rec = self._pending.get(key) or self._records.get(key)
            if rec is None:
                self.misses += 1
                return None
            self.hits += 1
        return PeriodPoint(complex(*rec.y), complex(*rec.pi1), complex(*rec.pi2), rec.path_id)

    def put(self, label: str, point: PeriodPoint, residuals: Optional[dict] = None) -> None:
        if not self.enabled:
            return
        rec = PeriodRecord(
            label=label,
            y=(point.y.real, point.y.imag),
            pi1=(point.pi1.real, point.pi1.imag),
            pi2=(point.pi2.real, point.pi2.imag),
            path_id=point.path_id,
            residuals=residuals or {},
        )
        with self._lock:
            self._pending[_key(label, point.y, point.path_id)] = rec

    def flush(self) -> int:
        """Merge pending records into the file (sorted, one writer). Returns records written."""
        if not self.enabled or not self._pending:
            return 0
        with self._lock:
            merged = self._read(self.path) if os.path.exists(self.path) else {}
            merged.update(self._records)
            merged.update(self._pending)
            tmp = f"{self.path}.tmp"
            os.makedirs(os.path.dirname(os.path.abspath(self.path)), exist_ok=True)
            with open(tmp, "w", encoding="utf-8") as fh:
                for key in sorted(merged):
                    fh.write(json.dumps(merged[key].model_dump(), sort_keys=True) + "\n")
            os.replace(tmp, self.path)
            written = len(self._pending)
            self._records = merged
            self._pending = {}
        logger.info(f"[cache] Wrote {written} new period records to {self.path} ({self.hits} hits, {self.misses} misses)")
        return written


def cached_fiber_periods(W: WeierstrassFibration, y: complex, cache: Optional[PeriodCache] = None) -> PeriodPoint:
    """fiber_periods through the cache; cached values are the exact floats computed earlier."""
    if cache is not None:
        hit = cache.get(W.label, y)
        if hit is not None:
            return hit
    point = fiber_periods(W, y)
    if cache is not None:
        cache.put(W.label, point)
    return point
