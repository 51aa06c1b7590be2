"""Describe a daily count series: Rice's-rule histogram and a shifted gamma fit."""
import numpy as np
from scipy.integrate import trapezoid

from delaycast.data import synth_daily
from delaycast.diagnostics import fit_gamma3, histogram, rice_bins

series = synth_daily(1671, weekly_amplitude=30, seasonal_amplitude=40, weather_effect=2,
                     noise_sd=25, seed=4)
y = series.targets
print(f"{len(y)} days, min {y.min():.0f}, max {y.max():.0f}, mean {y.mean():.1f}")

n_bins = rice_bins(len(y))
g = fit_gamma3(y)
print(f"Rice's rule: {n_bins} bins")
print(f"gamma fit: shape={g.shape:.2f} scale={g.scale:.2f} location={g.location:.2f}")

# observed counts next to the fitted density integrated over each bin
print(f"\n{'bin':>17s} {'count':>6s} {'fitted':>7s}")
for lo, hi, count in histogram(y, n_bins):
    xs = np.linspace(lo, hi, 21)
    expected = len(y) * trapezoid(g.pdf(xs), xs)
    bar = "#" * int(round(60 * count / len(y) * n_bins / 8))
    print(f"[{lo:6.1f}, {hi:6.1f}) {count:6d} {expected:7.1f} {bar}")
