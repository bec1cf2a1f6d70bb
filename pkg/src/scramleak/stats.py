"""Randomness test battery for idle-period output streams.

Four classical tests: monobit frequency, runs, chi-square over
non-overlapping bytes, and lag-1 serial correlation. Each reduces to a
statistic compared against a tabulated critical value at the requested
significance; a statistic at or below the threshold passes.

Critical values (two-sided standard normal quantiles and chi-square upper
quantiles at 255 degrees of freedom) are standard-table constants.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np

MIN_BITS = 1000

Z_CRITICAL = {
    0.05: 1.959963984540054,
    0.01: 2.5758293035489004,
    0.001: 3.2905267314919255,
}
CHI2_CRITICAL_DF255 = {
    0.05: 293.2478350807012,
    0.01: 310.45738821990585,
    0.001: 330.51974363400586,
}


@dataclass(frozen=True)
class TestReport:
    test_name: str
    statistic: float
    threshold: float
    passed: bool
    n_bits: int

    def to_dict(self) -> dict:
        return {
            "test_name": self.test_name,
            "statistic": float(self.statistic),
            "threshold": float(self.threshold),
            "passed": bool(self.passed),
            "n_bits": int(self.n_bits),
        }


def _z_threshold(significance: float) -> float:
    if significance not in Z_CRITICAL:
        raise ValueError(
            f"unsupported significance {significance}; tabulated: {sorted(Z_CRITICAL)}"
        )
    return Z_CRITICAL[significance]


def _check_bits(bits) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.uint8) & 1
    if bits.size < MIN_BITS:
        raise ValueError(f"need at least {MIN_BITS} bits, got {bits.size}")
    return bits


def monobit_test(bits, significance: float = 0.01) -> TestReport:
    """|#ones - #zeros| / sqrt(n), approximately standard normal."""
    bits = _check_bits(bits)
    n = bits.size
    stat = abs(2 * int(bits.sum()) - n) / sqrt(n)
    thr = _z_threshold(significance)
    return TestReport("monobit", stat, thr, stat <= thr, n)


def runs_test(bits, significance: float = 0.01) -> TestReport:
    """Deviation of the run count from its expectation under independence."""
    bits = _check_bits(bits)
    n = bits.size
    pi = float(bits.mean())
    runs = int(np.count_nonzero(np.diff(bits))) + 1
    denom = 2.0 * sqrt(2.0 * n) * pi * (1.0 - pi)
    stat = float("inf") if denom == 0.0 else abs(runs - 2.0 * n * pi * (1.0 - pi)) / denom
    thr = _z_threshold(significance)
    return TestReport("runs", stat, thr, stat <= thr, n)


def byte_chi_square_test(bits, significance: float = 0.01) -> TestReport:
    """Chi-square goodness of fit over non-overlapping bytes (255 dof)."""
    bits = _check_bits(bits)
    n_bytes = bits.size // 8
    counts = np.bincount(np.packbits(bits[: n_bytes * 8]), minlength=256)
    expected = n_bytes / 256.0
    stat = float(((counts - expected) ** 2 / expected).sum())
    if significance not in CHI2_CRITICAL_DF255:
        raise ValueError(
            f"unsupported significance {significance}; tabulated: "
            f"{sorted(CHI2_CRITICAL_DF255)}"
        )
    thr = CHI2_CRITICAL_DF255[significance]
    return TestReport("byte_chi_square", stat, thr, stat <= thr, bits.size)


def serial_correlation_test(bits, significance: float = 0.01) -> TestReport:
    """Lag-1 autocorrelation scaled by sqrt(n-1), approximately standard normal."""
    bits = _check_bits(bits)
    x = bits.astype(np.float64)
    a, b = x[:-1], x[1:]
    sa, sb = a.std(), b.std()
    if sa == 0.0 or sb == 0.0:
        stat = float("inf")
    else:
        r = float(((a - a.mean()) * (b - b.mean())).mean() / (sa * sb))
        stat = abs(r) * sqrt(bits.size - 1)
    thr = _z_threshold(significance)
    return TestReport("serial_correlation", stat, thr, stat <= thr, bits.size)


def randomness_battery(bits, significance: float = 0.01) -> list[TestReport]:
    """Run all four tests; raises ValueError below MIN_BITS bits."""
    bits = _check_bits(bits)
    return [
        monobit_test(bits, significance),
        runs_test(bits, significance),
        byte_chi_square_test(bits, significance),
        serial_correlation_test(bits, significance),
    ]


def format_battery(reports: list[TestReport]) -> str:
    lines = [f"{'test':<20} {'statistic':>12} {'threshold':>12} {'result':>8} {'bits':>9}"]
    for r in reports:
        lines.append(
            f"{r.test_name:<20} {r.statistic:>12.4f} {r.threshold:>12.4f} "
            f"{'pass' if r.passed else 'FAIL':>8} {r.n_bits:>9}"
        )
    return "\n".join(lines)
