"""
Scaling exponents of walk ensembles: displacement and return probability against time, in log-log
"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np
import pandas as pd
import statsmodels.api as sm

from ..errors import InsufficientDataError
from .srw import WalkTrace

logger = logging.getLogger(__name__)

DEFAULT_GRID_POINTS = 20
DEFAULT_BOOTSTRAP = 200
MIN_FIT_POINTS = 3

QUANTITIES = ("intrinsic", "euclidean", "return_prob")


def default_m_grid(max_step: int, points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    """Log-spaced distinct integer times in [1, max_step]"""
    if max_step < 1:
        raise InsufficientDataError("Walks are too short for an exponent fit")
    return np.unique(np.geomspace(1, max_step, points).round().astype(np.int64))


def log_log_slope(m: np.ndarray, values: np.ndarray) -> float:
    """OLS slope of log(values) on log(m) over the positive values"""
    keep = values > 0
    if keep.sum() < MIN_FIT_POINTS:
        raise InsufficientDataError(f"Only {int(keep.sum())} positive points, need {MIN_FIT_POINTS}")
    X = sm.add_constant(np.log(m[keep].astype(float)))
    return float(sm.OLS(np.log(values[keep]), X).fit().params[1])


@dataclass(frozen=True)
class ExponentStats:
    """Ensemble means per time with bootstrap bands, and fitted slopes"""

    table: pd.DataFrame
    slopes: pd.DataFrame

    def slope(self, quantity: str) -> float:
        return float(self.slopes.loc[quantity, "slope"])

    @property
    def intrinsic_slope(self) -> float:
        return self.slope("intrinsic")

    @property
    def euclidean_slope(self) -> float:
        return self.slope("euclidean")

    @property
    def return_slope(self) -> float:
        return self.slope("return_prob")

    def to_csv(self, table_path, slopes_path) -> None:
        self.table.to_csv(table_path, index=False, float_format="%.10g")
        self.slopes.to_csv(slopes_path, index_label="quantity", float_format="%.10g")


def _observations(traces: Sequence[WalkTrace], m_grid: np.ndarray) -> Dict[str, np.ndarray]:
    """Replica-by-time matrices of each observed quantity"""
    observed = {"intrinsic": np.stack([t.intrinsic_displacement(m_grid) for t in traces])}
    if all(t.graph.locations is not None for t in traces):
        observed["euclidean"] = np.stack([t.euclidean_displacement(m_grid) for t in traces])
    observed["return_prob"] = np.stack([t.at_start(2 * m_grid).astype(float) for t in traces])
    return observed


def exponent_stats(traces: Sequence[WalkTrace], m_grid: Optional[np.ndarray] = None,
                   n_boot: int = DEFAULT_BOOTSTRAP, seed: int = 0) -> ExponentStats:
    """
    Log-log slopes of E[d_G(X_0, X_m)], E[|X_m - X_0|] and P[X_2m = X_0] against m

    Replicas are resampled with replacement for standard errors and
    percentile 95% intervals. The euclidean row appears only when every
    graph carries lattice locations.

    Args:
        traces: One walk per independently sampled graph
        m_grid: Times to evaluate; log-spaced up to half the shortest walk by default
        n_boot: Bootstrap resamples
        seed: Bootstrap seed

    Returns:
        ExponentStats

    Raises:
        InsufficientDataError: if a quantity has fewer than three positive means
    """
    if len(traces) == 0:
        raise InsufficientDataError("No walks given")
    shortest = min(t.n_steps for t in traces)
    m_grid = default_m_grid(shortest // 2) if m_grid is None else np.asarray(m_grid, dtype=np.int64)
    if np.any(m_grid < 1) or 2 * m_grid.max() > shortest:
        raise ValueError(f"Times must lie in [1, {shortest // 2}]")

    observed = _observations(traces, m_grid)
    rng = np.random.default_rng(seed)
    resamples = rng.integers(0, len(traces), size=(n_boot, len(traces)))

    table = pd.DataFrame({"m": m_grid})
    rows = []
    for name, values in observed.items():
        means = values.mean(axis=0)
        boot_means = values[resamples].mean(axis=1)
        table[f"{name}_mean"] = means
        table[f"{name}_lower"] = np.percentile(boot_means, 2.5, axis=0)
        table[f"{name}_upper"] = np.percentile(boot_means, 97.5, axis=0)

        slope = log_log_slope(m_grid, means)
        boot_slopes = []
        for sample in boot_means:
            try:
                boot_slopes.append(log_log_slope(m_grid, sample))
            except InsufficientDataError:
                continue
        boot_slopes = np.array(boot_slopes)
        rows.append({
            "quantity": name,
            "slope": slope,
            "std_error": float(boot_slopes.std(ddof=1)) if len(boot_slopes) > 1 else float("nan"),
            "slope_lower": float(np.percentile(boot_slopes, 2.5)) if len(boot_slopes) else float("nan"),
            "slope_upper": float(np.percentile(boot_slopes, 97.5)) if len(boot_slopes) else float("nan"),
            "n_points": int((means > 0).sum()),
            "n_replicas": len(traces),
        })
        logger.info("%s slope %.4f", name, slope)
    return ExponentStats(table=table, slopes=pd.DataFrame(rows).set_index("quantity"))
