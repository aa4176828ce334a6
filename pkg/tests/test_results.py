"""Tests for result models."""

import math

import pytest

from crossmask.results import MetricReport, RunResult, SliceMetrics, Statistic


def report(pattern: str, psnrs: list[float], fold: int = 0) -> MetricReport:
    return MetricReport(
        pattern=pattern,
        fold=fold,
        slices=[SliceMetrics(slice_index=i, psnr=v, ssim=0.9) for i, v in enumerate(psnrs)],
    )


class TestStatistic:
    """Tests for Statistic."""

    def test_of_values(self) -> None:
        """Mean and population standard deviation."""
        stat = Statistic.of([1.0, 2.0, 3.0])
        assert stat.mean == pytest.approx(2.0)
        assert stat.std == pytest.approx(math.sqrt(2 / 3))
        assert stat.count == 3
        assert stat.infinite_count == 0

    def test_infinite_excluded(self) -> None:
        """Infinite values are counted, not averaged."""
        stat = Statistic.of([30.0, math.inf, 32.0])
        assert stat.mean == pytest.approx(31.0)
        assert stat.count == 2
        assert stat.infinite_count == 1

    def test_all_infinite(self) -> None:
        """Only infinite values give no mean."""
        stat = Statistic.of([math.inf, math.inf])
        assert stat.mean is None
        assert stat.format() == "inf"
        assert Statistic.of([]).format() == "-"

    def test_format(self) -> None:
        """mean (std) with the requested digits."""
        assert Statistic.of([1.0, 3.0]).format() == "2.00 (1.00)"
        assert Statistic.of([1.0, 3.0]).format(digits=1) == "2.0 (1.0)"


class TestMetricReport:
    """Tests for MetricReport."""

    def test_add_and_summary(self) -> None:
        """Slices accumulate and summarize."""
        rep = MetricReport(pattern="center", factor=0.25)
        rep.add_slice(SliceMetrics(slice_index=0, psnr=30.0, ssim=0.8))
        rep.add_slice(SliceMetrics(slice_index=1, psnr=math.inf, ssim=1.0))
        assert rep.total == 2
        assert math.isinf(rep.slices[1].psnr)
        summary = rep.summary()
        assert summary["pattern"] == "center"
        assert summary["slices"] == 2
        assert summary["psnr"]["mean"] == 30.0
        assert summary["psnr"]["infinite_count"] == 1
        assert summary["ssim"]["mean"] == pytest.approx(0.9)


class TestRunResult:
    """Tests for RunResult aggregation."""

    def test_aggregate_over_folds(self) -> None:
        """Fold means are averaged; the spread is over fold means."""
        result = RunResult()
        result.add_report(report("learned", [30.0, 32.0], fold=0))
        result.add_report(report("learned", [34.0, 36.0], fold=1))
        result.add_report(report("center", [28.0], fold=0))
        assert result.patterns == ["learned", "center"]

        summaries = {s.pattern: s for s in result.aggregate()}
        assert summaries["learned"].folds == 2
        assert summaries["learned"].psnr.mean == pytest.approx(33.0)
        assert summaries["learned"].psnr.std == pytest.approx(2.0)
        assert summaries["center"].folds == 1

    def test_motion_drop(self) -> None:
        """Drop is still minus moved mean PSNR, for patterns present in both."""
        result = RunResult()
        result.add_report(report("learned", [33.0, 35.0]))
        result.add_report(report("center", [30.0]))
        result.add_report(report("learned", [31.0, 31.0]), motion=True)
        drops = result.motion_drop()
        assert drops == {"learned": pytest.approx(3.0)}
        assert len(result.motion_reports) == 1

    def test_perfect_fold(self) -> None:
        """A fold with only infinite PSNR counts as infinite in the aggregate."""
        result = RunResult()
        result.add_report(report("full", [math.inf, math.inf]))
        summary = result.aggregate()[0]
        assert summary.psnr.mean is None
        assert summary.psnr.infinite_count == 1
