"""
Condition reports: per-cell statistics, estimated constants, test results and a verdict
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Union

import numpy as np
import pandas as pd
from scipy import stats

logger = logging.getLogger(__name__)

CONDITIONS = ("S", "G", "V", "R", "dense")
SIGNIFICANCE = 0.01


def _plain(value):
    """JSON-safe scalar; NaN and inf become None"""
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else None
    if isinstance(value, (np.bool_,)):
        return bool(value)
    return value


def kendall_trend(x, y) -> float:
    """Kendall tau of y against x, NaN when either side is constant or too short"""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    keep = np.isfinite(x) & np.isfinite(y)
    if keep.sum() < 2 or np.ptp(x[keep]) == 0 or np.ptp(y[keep]) == 0:
        return float("nan")
    return float(stats.kendalltau(x[keep], y[keep])[0])


@dataclass
class ConditionReport:
    """
    Outcome of one condition check over an (n, K) sweep

    ``table`` holds one row per grid cell, ``constants`` the estimated
    model constants and ``tests`` the p-values and trend statistics the
    verdict was drawn from.
    """

    condition: str
    table: pd.DataFrame
    constants: Dict[str, float] = field(default_factory=dict)
    tests: Dict[str, float] = field(default_factory=dict)
    verdict: str = "inconclusive"
    notes: List[str] = field(default_factory=list)
    metadata: Dict = field(default_factory=dict)

    def __post_init__(self):
        if self.condition not in CONDITIONS:
            raise ValueError(f"Unknown condition: {self.condition}. Choose from {CONDITIONS}")

    def to_frame(self) -> pd.DataFrame:
        frame = self.table.copy()
        frame.insert(0, "condition", self.condition)
        return frame

    def to_dict(self) -> Dict:
        return {
            "condition": self.condition,
            "verdict": self.verdict,
            "constants": {k: _plain(v) for k, v in sorted(self.constants.items())},
            "tests": {k: _plain(v) for k, v in sorted(self.tests.items())},
            "notes": list(self.notes),
            "metadata": {k: _plain(v) for k, v in sorted(self.metadata.items())},
            "cells": [{k: _plain(v) for k, v in row.items()} for row in self.table.to_dict(orient="records")],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def save(self, out_dir: Union[str, Path]) -> Dict[str, Path]:
        """Write condition_<id>.csv and condition_<id>.json into out_dir"""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / f"condition_{self.condition}.csv"
        json_path = out_dir / f"condition_{self.condition}.json"
        self.to_frame().to_csv(csv_path, index=False, float_format="%.10g")
        json_path.write_text(self.to_json())
        logger.info("Saved condition %s report to %s", self.condition, out_dir)
        return {"csv": csv_path, "json": json_path}
