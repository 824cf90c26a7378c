"""Synthetic daily and weekly demand patterns from parameter tables.

Scenario files are INI-style: an optional ``[week]`` section with the unit
and noise settings, then one section per day (in order) listing the peak
hours, baseline, amplitudes, sigmas and alphas. See ``docs/formats.md``.
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional, Union

import numpy as np

from .model import DEFAULT_UNIT, DecompositionModel, PeakComponent, TimeGrid, eval_peak, sample_model
from .peaks import DemandProfile

DAYS_PER_WEEK = 7
WEEK_ORDER = ("Sunday", "Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday")
NOISE_KINDS = ("multiplicative-gaussian",)
BUNDLED_SCENARIO = "table6.scenario"


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class DayScenario:
    """Parameters of one synthetic day: baseline plus one peak per hour entry."""

    label: str
    baseline: float
    hours: tuple[float, ...]
    amplitudes: tuple[float, ...]
    widths: tuple[float, ...]
    skewnesses: tuple[float, ...]

    def __post_init__(self):
        for name in ("hours", "amplitudes", "widths", "skewnesses"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        n = len(self.hours)
        if not (len(self.amplitudes) == len(self.widths) == len(self.skewnesses) == n):
            raise ScenarioError(
                f"{self.label}: peak hours, amplitudes, sigmas and alphas must have equal length "
                f"(got {n}, {len(self.amplitudes)}, {len(self.widths)}, {len(self.skewnesses)})"
            )
        if any(a < 0 for a in self.amplitudes):
            raise ScenarioError(f"{self.label}: amplitudes must be >= 0")
        if any(w <= 0 for w in self.widths):
            raise ScenarioError(f"{self.label}: sigmas must be > 0")
        if self.baseline < 0 or not math.isfinite(self.baseline):
            raise ScenarioError(f"{self.label}: baseline must be finite and >= 0")

    @property
    def n_peaks(self) -> int:
        return len(self.hours)

    def to_model(self, unit: str = DEFAULT_UNIT) -> DecompositionModel:
        peaks = tuple(
            PeakComponent(a, mu, s, al)
            for mu, a, s, al in zip(self.hours, self.amplitudes, self.widths, self.skewnesses)
        )
        return DecompositionModel(self.baseline, peaks, unit)

    @classmethod
    def from_model(cls, model: DecompositionModel, label: str = "day") -> "DayScenario":
        return cls(
            label,
            model.baseline,
            tuple(p.location for p in model.peaks),
            tuple(p.amplitude for p in model.peaks),
            tuple(p.width for p in model.peaks),
            tuple(p.skewness for p in model.peaks),
        )


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "multiplicative-gaussian"
    scale: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ScenarioError(f"unknown noise kind {self.kind!r}; expected one of {NOISE_KINDS}")
        if not (self.scale >= 0 and math.isfinite(self.scale)):
            raise ScenarioError(f"noise scale must be finite and >= 0, got {self.scale}")


@dataclass(frozen=True)
class WeekScenario:
    days: tuple[DayScenario, ...]
    noise: Optional[NoiseSpec] = None
    unit: str = DEFAULT_UNIT

    def __post_init__(self):
        object.__setattr__(self, "days", tuple(self.days))
        if len(self.days) != DAYS_PER_WEEK:
            raise ScenarioError(f"a week needs exactly {DAYS_PER_WEEK} days, found {len(self.days)}")


@dataclass
class DaySeries:
    label: str
    t: np.ndarray
    baseline: float
    components: np.ndarray  # (n_peaks, len(t))
    total: np.ndarray


@dataclass
class WeekSeries:
    days: list[DaySeries] = field(default_factory=list)
    values: np.ndarray = field(default_factory=lambda: np.empty(0))
    unit: str = DEFAULT_UNIT


def day_series(scenario: DayScenario, grid: TimeGrid = TimeGrid(), unit: str = DEFAULT_UNIT) -> DaySeries:
    model = scenario.to_model(unit)
    t = grid.points()
    components = np.array([eval_peak(p, t) for p in model.peaks]).reshape(model.n_peaks, t.size)
    return DaySeries(scenario.label, t, model.baseline, components, sample_model(model, grid))


def generate_day(scenario: DayScenario, grid: TimeGrid = TimeGrid()) -> np.ndarray:
    """Noiseless demand of one day sampled on ``grid``."""
    return sample_model(scenario.to_model(), grid)


def day_profile(scenario: DayScenario, unit: str = DEFAULT_UNIT) -> DemandProfile:
    """The scenario's hourly 24-point profile."""
    return DemandProfile(generate_day(scenario), unit, scenario.label)


def apply_noise(values: np.ndarray, noise: Optional[NoiseSpec]) -> np.ndarray:
    """Multiplicative Gaussian noise ``y * (1 + scale * N(0, 1))`` clamped at 0."""
    if noise is None or noise.scale == 0:
        return values
    rng = np.random.default_rng(noise.seed)
    noisy = values * (1.0 + noise.scale * rng.standard_normal(values.shape))
    return np.maximum(noisy, 0.0)


def generate_week(scenario: WeekScenario, grid: TimeGrid = TimeGrid()) -> WeekSeries:
    """Concatenate independently generated days, then add noise if configured."""
    days = [day_series(d, grid, scenario.unit) for d in scenario.days]
    values = np.concatenate([d.total for d in days])
    values = apply_noise(values, scenario.noise)
    return WeekSeries(days, values, scenario.unit)


# ---------------------------------------------------------------- files

def _float_list(section, key, name) -> tuple[float, ...]:
    if key not in section:
        raise ScenarioError(f"[{name}] is missing '{key}'")
    text = section[key].strip().strip("()")
    if not text:
        return ()
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ScenarioError(f"[{name}] {key}: {section[key]!r} is not a comma-separated list of numbers") from None


def parse_scenario(text: Union[str, bytes]) -> list[DayScenario] | WeekScenario:
    """Parse a scenario file.

    Returns a :class:`WeekScenario` for files with seven day sections and a
    list of :class:`DayScenario` otherwise.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ScenarioError(f"malformed scenario file: {exc}") from None

    unit = DEFAULT_UNIT
    noise = None
    if parser.has_section("week"):
        week = parser["week"]
        unit = week.get("unit", DEFAULT_UNIT)
        try:
            scale = float(week.get("noise_scale", "0"))
            seed = int(week.get("seed", "0"))
        except ValueError as exc:
            raise ScenarioError(f"[week]: {exc}") from None
        noise = NoiseSpec(week.get("noise_kind", NOISE_KINDS[0]), scale, seed)

    days = []
    for name in parser.sections():
        if name == "week":
            continue
        section = parser[name]
        try:
            baseline = float(section.get("baseline", ""))
        except ValueError:
            raise ScenarioError(f"[{name}] baseline must be a number") from None
        days.append(
            DayScenario(
                name,
                baseline,
                _float_list(section, "peak_hours", name),
                _float_list(section, "amplitudes", name),
                _float_list(section, "sigmas", name),
                _float_list(section, "alphas", name),
            )
        )
    if not days:
        raise ScenarioError("scenario file defines no days")
    if len(days) == DAYS_PER_WEEK:
        return WeekScenario(tuple(days), noise, unit)
    return days


def _join(values) -> str:
    return ", ".join(repr(float(v)) for v in values)


def format_scenario(days, unit: str = DEFAULT_UNIT, noise: Optional[NoiseSpec] = None) -> str:
    """Write day scenarios back out at full precision."""
    if isinstance(days, WeekScenario):
        unit, noise, days = days.unit, days.noise, days.days
    out = io.StringIO()
    out.write("[week]\n")
    out.write(f"unit = {unit}\n")
    if noise is not None:
        out.write(f"noise_kind = {noise.kind}\nnoise_scale = {noise.scale!r}\nseed = {noise.seed}\n")
    for day in days:
        out.write(f"\n[{day.label}]\n")
        out.write(f"peak_hours = {_join(day.hours)}\n")
        out.write(f"baseline = {float(day.baseline)!r}\n")
        out.write(f"amplitudes = {_join(day.amplitudes)}\n")
        out.write(f"sigmas = {_join(day.widths)}\n")
        out.write(f"alphas = {_join(day.skewnesses)}\n")
    return out.getvalue()


def bundled_scenario_text(name: str = BUNDLED_SCENARIO) -> str:
    return resources.files("sgdecomp").joinpath("data", name).read_text(encoding="utf-8")


def table6_week() -> WeekScenario:
    """The bundled three-peak reference week."""
    scenario = parse_scenario(bundled_scenario_text())
    if not isinstance(scenario, WeekScenario):
        raise ScenarioError(f"bundled {BUNDLED_SCENARIO} does not hold a full week")
    return scenario


def series_csv(days: list[DaySeries], values: np.ndarray, components: bool = False) -> str:
    """CSV with one row per sample: ``day, t, total`` plus optional components."""
    width = max((d.components.shape[0] for d in days), default=0)
    out = io.StringIO()
    header = ["day", "t", "total"]
    if components:
        header += ["baseline"] + [f"peak_{i + 1}" for i in range(width)]
    out.write(",".join(header) + "\n")
    pos = 0
    for day in days:
        for i, ti in enumerate(day.t):
            row = [day.label, repr(round(float(ti), 9)), repr(float(values[pos]))]
            if components:
                row.append(repr(float(day.baseline)))
                row += [repr(float(day.components[j, i])) for j in range(day.components.shape[0])]
                row += [""] * (width - day.components.shape[0])
            out.write(",".join(row) + "\n")
            pos += 1
    return out.getvalue()
