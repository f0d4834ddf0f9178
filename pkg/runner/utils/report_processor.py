"""
Report processing utilities: run metadata, CSV/JSON emission and summaries
"""
import json
from pathlib import Path
from typing import Dict, Union

import networkx
import numpy as np
import pandas as pd
import scipy

import src

FLOAT_FORMAT = "%.10g"


def to_plain(value):
    """Recursively convert numpy scalars and containers to JSON types; NaN and inf become None"""
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [to_plain(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else None
    return value


class ReportProcessor:
    """Writes runner outputs and condenses per-replica rows into summaries"""

    @staticmethod
    def run_metadata(config) -> Dict:
        """Everything needed to re-run a report exactly"""
        return {
            "config_hash": config.config_hash(),
            "seed": config.seed,
            "subcommand": config.subcommand,
            "package_version": src.__version__,
            "versions": {
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "networkx": networkx.__version__,
                "pandas": pd.__version__,
            },
        }

    @staticmethod
    def write_table(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
        path = Path(path)
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
        return path

    @staticmethod
    def write_summary(doc: Dict, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.write_text(json.dumps(to_plain(doc), indent=2, sort_keys=True) + "\n")
        return path

    @staticmethod
    def summarize_time_change(summary: pd.DataFrame) -> Dict:
        """Medians over usable replicas of the slope, the ratio CV and the mid-grid gaps"""
        usable = summary[summary["status"] == "ok"]
        result = {"replicas": int(len(summary)), "usable": int(len(usable)),
                  "skipped": summary.loc[summary["status"] != "ok", "status"].value_counts().to_dict()}
        for column in ("slope", "ratio_cv", "mid_gap_commute", "mid_gap_averaged"):
            result[f"{column}_median"] = float(usable[column].median()) if len(usable) else None
        return result

    @staticmethod
    def summarize_tree_bm(frame: pd.DataFrame) -> Dict:
        """Per-step medians of the crossing gap and the worst local-time integral error"""
        if frame.empty:
            return {"replicas": 0, "by_h": []}
        by_h = []
        for fraction, group in frame.groupby("h_fraction", sort=True):
            by_h.append({
                "h_fraction": fraction,
                "gap_median": group["gap_median"].median(),
                "gap_max_median": group["gap_max"].median(),
                "integral_error_max": group["integral_error"].max(),
                "replicas": int(len(group)),
            })
        medians = [row["gap_median"] for row in by_h]
        return {
            "replicas": int(frame["replica"].nunique()),
            "by_h": by_h,
            "gap_ratio_finest_to_coarsest": medians[0] / medians[-1] if medians[-1] > 0 else None,
        }

    @staticmethod
    def count_violations(frame: pd.DataFrame) -> Dict[str, int]:
        """Violations per check; a check that always holds maps to 0"""
        if frame.empty:
            return {}
        return {str(check): int((~group["holds"].astype(bool)).sum())
                for check, group in frame.groupby("check", sort=True)}
