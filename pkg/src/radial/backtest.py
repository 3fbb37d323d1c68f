"""Walk-forward month-end direction backtest on variable-length price months.

Pipeline: ingest a (date, close) CSV, segment by calendar month, label each
month by whether the next month-end close strictly rises, then walk forward
through the test period. For each test month the hyperparameter maximizing
accuracy on the trailing validation months is selected (training on the
window before them), and the final prediction uses the full trailing
training window. Neighborhoods use the first-element-rescaled warping
distance, so months of different lengths are comparable.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
import warnings
from dataclasses import dataclass
from importlib import resources
from typing import Callable, Sequence

import numpy as np

from . import estimators
from .core import NeighborProfile, idtw
from .errors import ConfigurationError, DomainError, ParameterError, ParseError

MonthId = tuple[int, int]


@dataclass(frozen=True)
class PriceSeries:
    dates: tuple[dt.date, ...]
    closes: np.ndarray

    def __post_init__(self):
        closes = np.asarray(self.closes, dtype=np.float64)
        if len(self.dates) != closes.shape[0] or closes.ndim != 1 or closes.shape[0] == 0:
            raise DomainError("a price series needs one close per date")
        if np.any(closes <= 0) or not np.all(np.isfinite(closes)):
            raise DomainError("closes must be positive and finite")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise DomainError("dates must be strictly increasing")
        closes = closes.copy()
        closes.setflags(write=False)
        object.__setattr__(self, "closes", closes)

    def __len__(self) -> int:
        return self.closes.shape[0]


@dataclass(frozen=True)
class MonthBlock:
    """Daily closes of one calendar month, in date order."""

    month_id: MonthId
    closes: np.ndarray

    def __post_init__(self):
        closes = np.asarray(self.closes, dtype=np.float64)
        if closes.ndim != 1 or closes.shape[0] < 1:
            raise DomainError("a month must contain at least one close")
        closes = closes.copy()
        closes.setflags(write=False)
        object.__setattr__(self, "closes", closes)

    @property
    def month_end_close(self) -> float:
        return float(self.closes[-1])

    @property
    def n_days(self) -> int:
        return self.closes.shape[0]


@dataclass(frozen=True)
class LabeledMonth:
    """A month block with its realized direction label.

    ``label`` is 1 when the next month-end close strictly exceeds this
    month's; ``next_close`` carries that successor close so returns can be
    scored without reaching past the labeled list.
    """

    block: MonthBlock
    label: int
    next_close: float

    def __post_init__(self):
        if self.label not in (0, 1):
            raise DomainError("label must be 0 or 1")
        expected = 1 if self.next_close > self.block.month_end_close else 0
        if expected != self.label:
            raise DomainError("label contradicts the stored successor close")


@dataclass(frozen=True)
class WalkForwardConfig:
    n_train: int = 192
    validation_window: int = 24
    knn_grid: tuple[int, ...] = tuple(range(1, 31))
    msknn_kmax_grid: tuple[int, ...] = (20, 30, 50, 80, 120)
    msknn_k1: int = 5
    msknn_J: int = 5
    poly_degree: int = 2

    def __post_init__(self):
        if self.n_train <= self.validation_window:
            raise ParameterError("training window must exceed the validation window")
        if not self.knn_grid or not self.msknn_kmax_grid:
            raise ParameterError("parameter grids must be nonempty")


@dataclass(frozen=True)
class BacktestLedger:
    months: tuple[MonthId, ...]
    predictions: tuple[int, ...]
    labels: tuple[int, ...]
    chosen_params: tuple[int | None, ...]
    returns: tuple[float, ...]
    cumulative: tuple[float, ...]
    method: str


METHODS = ("knn", "msknn-poly", "msknn-logi", "lrlr-w1", "lrlr-winv", "buy", "random")


# ---------------------------------------------------------------------------
# Ingestion and segmentation
# ---------------------------------------------------------------------------


def ingest_csv(path) -> PriceSeries:
    """Read (ISO-8601 date, close) rows; the header row is optional.

    Rows are sorted by date (with a warning when the input was unsorted);
    duplicate dates and nonpositive closes are rejected.
    """
    rows: list[tuple[dt.date, float]] = []
    with open(path, newline="") as fh:
        for lineno, record in enumerate(csv.reader(fh), start=1):
            if not record or (len(record) == 1 and not record[0].strip()):
                continue
            if len(record) != 2:
                raise ParseError(f"expected 2 columns, got {len(record)}", line=lineno)
            date_text, close_text = (f.strip() for f in record)
            try:
                date = dt.date.fromisoformat(date_text)
            except ValueError:
                if lineno == 1:  # header
                    continue
                raise ParseError(f"bad date {date_text!r}", line=lineno) from None
            try:
                close = float(close_text)
            except ValueError:
                raise ParseError(f"bad close {close_text!r}", line=lineno) from None
            if not math.isfinite(close) or close <= 0:
                raise ParseError(f"nonpositive close {close_text!r}", line=lineno)
            rows.append((date, close))
    if not rows:
        raise ParseError("no data rows")
    dates = [r[0] for r in rows]
    if len(set(dates)) != len(dates):
        dup = next(d for i, d in enumerate(dates) if d in dates[:i])
        raise ParseError(f"duplicate date {dup.isoformat()}")
    if any(b < a for a, b in zip(dates, dates[1:])):
        warnings.warn("input rows were not sorted by date; sorting")
        rows.sort(key=lambda r: r[0])
    return PriceSeries(tuple(r[0] for r in rows), np.array([r[1] for r in rows]))


def segment_months(series: PriceSeries) -> list[MonthBlock]:
    """One block per calendar month present, closes in date order."""
    blocks: list[MonthBlock] = []
    current: MonthId | None = None
    closes: list[float] = []
    for date, close in zip(series.dates, series.closes):
        month = (date.year, date.month)
        if month != current:
            if current is not None:
                blocks.append(MonthBlock(current, np.array(closes)))
            current, closes = month, []
        closes.append(float(close))
    blocks.append(MonthBlock(current, np.array(closes)))
    return blocks


def label_months(blocks: Sequence[MonthBlock]) -> list[LabeledMonth]:
    """Direction labels for every month with a successor (strict increase)."""
    if len(blocks) < 2:
        raise DomainError("need at least two months to label")
    out = []
    for block, successor in zip(blocks, blocks[1:]):
        nxt = successor.month_end_close
        out.append(LabeledMonth(block, 1 if nxt > block.month_end_close else 0, nxt))
    return out


def msknn_kvec(k1: int, kmax: int, J: int) -> tuple[int, ...]:
    """Arithmetic neighbor-count ladder from k1 to kmax in J steps.

    Uses the ordinary floor so the ladder actually ends at ``kmax``.
    """
    if k1 >= kmax or J < 2:
        raise ParameterError("need k1 < kmax and J >= 2")
    return tuple(k1 + math.floor((j - 1) * (kmax - k1) / (J - 1)) for j in range(1, J + 1))


# ---------------------------------------------------------------------------
# Returns and reports
# ---------------------------------------------------------------------------


def monthly_return(prediction: int, e_t: float, e_t1: float) -> float:
    """Virtual-trading return: long the move when predicting a rise, short otherwise."""
    if e_t <= 0:
        raise DomainError("month-end price must be positive")
    change = (e_t1 - e_t) / e_t
    return 1.0 + change if prediction == 1 else 1.0 - change


def cumulative_return(returns: Sequence[float]) -> list[float]:
    """Running product of monthly returns."""
    out: list[float] = []
    acc = 1.0
    for r in returns:
        acc *= r
        out.append(acc)
    return out


def accuracy_report(ledger: BacktestLedger) -> float:
    if not ledger.months:
        raise DomainError("empty ledger")
    hits = sum(p == y for p, y in zip(ledger.predictions, ledger.labels))
    return hits / len(ledger.months)


# ---------------------------------------------------------------------------
# Walk-forward engine
# ---------------------------------------------------------------------------


class _DistanceCache:
    """Memo of pairwise rescaled-warping distances keyed by month index."""

    def __init__(self):
        self._closes: dict[int, np.ndarray] = {}
        self._dist: dict[tuple[int, int], float] = {}

    def closes(self, months, i: int) -> np.ndarray:
        arr = self._closes.get(i)
        if arr is None:
            arr = months[i].block.closes
            self._closes[i] = arr
        return arr

    def distance(self, months, i: int, j: int) -> float:
        key = (i, j) if i <= j else (j, i)
        d = self._dist.get(key)
        if d is None:
            d = idtw(self.closes(months, i), self.closes(months, j))
            self._dist[key] = d
        return d


def _pool_profile(months, cache: _DistanceCache, pool: range, query_idx: int) -> NeighborProfile:
    dists = np.array([cache.distance(months, query_idx, j) for j in pool])
    labels = np.array([months[j].label for j in pool], dtype=np.int64)
    order = np.argsort(dists, kind="stable")
    return NeighborProfile(dists[order], labels[order], np.asarray(pool)[order])


def _predict(profile: NeighborProfile, method: str, param, config: WalkForwardConfig) -> int:
    if method == "knn":
        return estimators.classify(estimators.knn(profile, int(param)))
    if method in ("msknn-poly", "msknn-logi"):
        kvec = msknn_kvec(config.msknn_k1, int(param), config.msknn_J)
        if method == "msknn-poly":
            est = estimators.msknn(profile, kvec, config.poly_degree, "poly", "squared")
        else:
            est = estimators.msknn(profile, kvec, config.poly_degree, "logi", "logit_squared")
        return estimators.classify(est)
    if method in ("lrlr-w1", "lrlr-winv"):
        weight = estimators.ConstantOne() if method == "lrlr-w1" else estimators.InverseRadius()
        est = estimators.lrr(profile, weight, config.poly_degree, loss="logistic")
        return estimators.classify(est)
    raise ParameterError(f"unknown method {method!r}")


def _param_grid(method: str, config: WalkForwardConfig) -> tuple[int, ...] | None:
    if method == "knn":
        return config.knn_grid
    if method in ("msknn-poly", "msknn-logi"):
        return config.msknn_kmax_grid
    return None


def walk_forward_predict(
    labeled: Sequence[LabeledMonth],
    test_start: MonthId,
    test_end: MonthId,
    method: str,
    config: WalkForwardConfig | None = None,
    rng_seed: int = 0,
    phase_hook: Callable[[str, int], None] | None = None,
) -> BacktestLedger:
    """Walk the test months, tuning on the trailing validation window.

    For test month t, each candidate parameter predicts the validation
    months t-V..t-1 against the fixed pool t-T..t-V-1 and the accuracy
    maximizer wins (ties to the smallest candidate); the final prediction
    for t uses the chosen parameter over the full pool t-T..t-1. Methods
    without a tunable parameter skip the validation stage.

    ``phase_hook(stage, t)`` is invoked before the tune / query / predict /
    score stages of each test month, which lets tests assert that tuning
    and prediction never read months at or beyond t.
    """
    if config is None:
        config = WalkForwardConfig()
    if method not in METHODS:
        raise ParameterError(f"method must be one of {METHODS}, got {method!r}")

    ids = [m.block.month_id for m in labeled]
    try:
        start_idx = ids.index(tuple(test_start))
        end_idx = ids.index(tuple(test_end))
    except ValueError as exc:
        raise ConfigurationError(f"test month not present in the labeled history: {exc}") from None
    if start_idx > end_idx:
        raise ConfigurationError("test_start must not come after test_end")
    if start_idx < config.n_train:
        raise ConfigurationError(
            f"need {config.n_train} months of history before the first test month, "
            f"have {start_idx}"
        )

    cache = _DistanceCache()
    grid = _param_grid(method, config)
    rng = np.random.default_rng(rng_seed)
    hook = phase_hook if phase_hook is not None else (lambda stage, t: None)

    months_out: list[MonthId] = []
    predictions: list[int] = []
    labels_out: list[int] = []
    chosen_out: list[int | None] = []
    returns: list[float] = []

    for t in range(start_idx, end_idx + 1):
        chosen: int | None = None
        if grid is not None:
            hook("tune", t)
            tune_pool = range(t - config.n_train, t - config.validation_window)
            validation = range(t - config.validation_window, t)
            profiles = [_pool_profile(labeled, cache, tune_pool, s) for s in validation]
            v_labels = [labeled[s].label for s in validation]
            best_hits = -1
            for candidate in grid:
                hits = sum(
                    _predict(prof, method, candidate, config) == lab
                    for prof, lab in zip(profiles, v_labels)
                )
                if hits > best_hits:
                    best_hits, chosen = hits, candidate
            chosen_out.append(chosen)
        else:
            chosen_out.append(None)

        hook("query", t)
        cache.closes(labeled, t)

        hook("predict", t)
        if method == "buy":
            pred = 1
        elif method == "random":
            pred = int(rng.integers(0, 2))
        else:
            final_pool = range(t - config.n_train, t)
            prof = _pool_profile(labeled, cache, final_pool, t)
            pred = _predict(prof, method, chosen, config)

        hook("score", t)
        month = labeled[t]
        months_out.append(month.block.month_id)
        predictions.append(pred)
        labels_out.append(month.label)
        returns.append(monthly_return(pred, month.block.month_end_close, month.next_close))

    return BacktestLedger(
        months=tuple(months_out),
        predictions=tuple(predictions),
        labels=tuple(labels_out),
        chosen_params=tuple(chosen_out),
        returns=tuple(returns),
        cumulative=tuple(cumulative_return(returns)),
        method=method,
    )


# ---------------------------------------------------------------------------
# Synthetic fixture and CSV output
# ---------------------------------------------------------------------------


def synthetic_price_series(
    n_months: int = 420,
    seed: int = 20240809,
    start_year: int = 1990,
    start_month: int = 1,
    daily_drift: float = 2e-4,
    daily_vol: float = 9e-3,
) -> PriceSeries:
    """Deterministic geometric random walk sampled on weekdays.

    Stands in for proprietary index data so the pipeline can be exercised
    end to end; one row per weekday of each calendar month.
    """
    rng = np.random.default_rng(seed)
    dates: list[dt.date] = []
    year, month = start_year, start_month
    for _ in range(n_months):
        day = dt.date(year, month, 1)
        while day.month == month:
            if day.weekday() < 5:
                dates.append(day)
            day += dt.timedelta(days=1)
        year, month = (year + 1, 1) if month == 12 else (year, month + 1)
    log_returns = rng.normal(daily_drift, daily_vol, size=len(dates))
    closes = 100.0 * np.exp(np.cumsum(log_returns))
    return PriceSeries(tuple(dates), closes)


def write_series_csv(series: PriceSeries, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "close"])
        for date, close in zip(series.dates, series.closes):
            writer.writerow([date.isoformat(), repr(float(close))])


def bundled_fixture_path() -> str:
    """Path of the synthetic price CSV shipped with the package."""
    return str(resources.files("radial").joinpath("data/synthetic_index.csv"))


def write_ledger_csv(ledger: BacktestLedger, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["month", "prediction", "label", "chosen_param", "return", "cumulative"])
        for month, pred, label, param, ret, cum in zip(
            ledger.months,
            ledger.predictions,
            ledger.labels,
            ledger.chosen_params,
            ledger.returns,
            ledger.cumulative,
        ):
            writer.writerow(
                [
                    f"{month[0]:04d}-{month[1]:02d}",
                    pred,
                    label,
                    "" if param is None else param,
                    repr(ret),
                    repr(cum),
                ]
            )
