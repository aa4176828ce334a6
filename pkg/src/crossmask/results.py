"""Evaluation result data models."""

from __future__ import annotations

import math
from typing import Any

import numpy as np
from pydantic import BaseModel, Field


class SliceMetrics(BaseModel):
    """Metrics of one reconstructed slice."""

    slice_index: int
    psnr: float
    ssim: float


class Statistic(BaseModel):
    """Mean and standard deviation over finite values, with the infinite ones counted."""

    mean: float | None
    std: float | None
    count: int
    infinite_count: int = 0

    @classmethod
    def of(cls, values: list[float]) -> Statistic:
        """Summarize values in list order; infinite entries are excluded and counted."""
        arr = np.asarray(values, dtype=np.float64)
        finite = arr[np.isfinite(arr)]
        if finite.size == 0:
            return cls(mean=None, std=None, count=0, infinite_count=int(arr.size))
        return cls(
            mean=float(finite.mean()),
            std=float(finite.std()),
            count=int(finite.size),
            infinite_count=int(arr.size - finite.size),
        )

    def format(self, digits: int = 2) -> str:
        """Render as ``mean (std)``."""
        if self.mean is None or self.std is None:
            return "inf" if self.infinite_count else "-"
        return f"{self.mean:.{digits}f} ({self.std:.{digits}f})"


class MetricReport(BaseModel):
    """Per-slice metrics of one pattern on one evaluation set."""

    pattern: str
    fold: int = 0
    factor: float | None = None
    slices: list[SliceMetrics] = Field(default_factory=list)

    @property
    def total(self) -> int:
        """Number of evaluated slices."""
        return len(self.slices)

    @property
    def psnr(self) -> Statistic:
        return Statistic.of([s.psnr for s in self.slices])

    @property
    def ssim(self) -> Statistic:
        return Statistic.of([s.ssim for s in self.slices])

    def add_slice(self, result: SliceMetrics) -> None:
        """Add a slice result."""
        self.slices.append(result)

    def summary(self) -> dict[str, Any]:
        """JSON-ready summary."""
        return {
            "pattern": self.pattern,
            "fold": self.fold,
            "factor": self.factor,
            "slices": self.total,
            "psnr": self.psnr.model_dump(),
            "ssim": self.ssim.model_dump(),
        }


class PatternSummary(BaseModel):
    """One pattern aggregated across folds: the mean of per-fold means, and their spread."""

    pattern: str
    psnr: Statistic
    ssim: Statistic
    folds: int


class RunResult(BaseModel):
    """Result of a complete experiment (all patterns, all folds)."""

    reports: list[MetricReport] = Field(default_factory=list)
    motion_reports: list[MetricReport] = Field(default_factory=list)
    seed: int = 0
    config: dict[str, Any] = Field(default_factory=dict)

    @property
    def patterns(self) -> list[str]:
        """Pattern names in first-seen order."""
        return list(dict.fromkeys(r.pattern for r in self.reports))

    def add_report(self, report: MetricReport, motion: bool = False) -> None:
        """Add a pattern report."""
        (self.motion_reports if motion else self.reports).append(report)

    def aggregate(self, motion: bool = False) -> list[PatternSummary]:
        """Aggregate every pattern over folds."""
        source = self.motion_reports if motion else self.reports
        summaries = []
        for name in dict.fromkeys(r.pattern for r in source):
            reports = [r for r in source if r.pattern == name]
            psnr_means = [r.psnr.mean if r.psnr.mean is not None else math.inf for r in reports]
            ssim_means = [r.ssim.mean if r.ssim.mean is not None else math.nan for r in reports]
            summaries.append(
                PatternSummary(
                    pattern=name,
                    psnr=Statistic.of(psnr_means),
                    ssim=Statistic.of(ssim_means),
                    folds=len(reports),
                )
            )
        return summaries

    def motion_drop(self) -> dict[str, float]:
        """Mean PSNR lost per pattern when the reference slices are moved."""
        still = {s.pattern: s.psnr.mean for s in self.aggregate()}
        moved = {s.pattern: s.psnr.mean for s in self.aggregate(motion=True)}
        drops = {}
        for name, value in moved.items():
            base = still.get(name)
            if base is not None and value is not None:
                drops[name] = base - value
        return drops
