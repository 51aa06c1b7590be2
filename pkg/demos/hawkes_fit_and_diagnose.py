"""Fit an exponential Hawkes process to simulated delay events and check the fit.

Events are simulated from known parameters, refitted by maximum likelihood,
and the fit is checked with time-rescaling and a daily-count forecast.
"""

from delaycast.diagnostics import cumulative_calibration, ks_exp1, time_rescale
from delaycast.hawkes import HawkesParams, fit_mle
from delaycast.simulate import forecast_days, forecast_next_event, score_daily_rmse, simulate

truth = HawkesParams(mu=0.438, alpha=1.884, beta=2.087)
print(f"true params     mu={truth.mu:.3f} alpha={truth.alpha:.3f} beta={truth.beta:.3f}")
print(f"  branching ratio {truth.branching_ratio:.3f}, half-life {truth.half_life:.3f} h")

# about 180 days of events
events = simulate(truth, None, 0.0, 24 * 180, seed=1)
print(f"simulated {len(events)} events over {events.horizon:.0f} h")

fit = fit_mle(events, n_restarts=5, seed=0)
p = fit.params
print(f"fitted params   mu={p.mu:.3f} alpha={p.alpha:.3f} beta={p.beta:.3f} "
      f"(loglik {fit.log_likelihood:.1f}, {fit.n_restarts_used} restarts)")
print(f"  branching ratio {p.branching_ratio:.3f}, half-life {p.half_life:.3f} h")

# Under the right model the compensator increments are Exp(1).
u = time_rescale(p, events)
ks = ks_exp1(u)
print(f"time rescaling: mean u={u.u.mean():.3f}, KS D={ks.d_statistic:.4f}, p={ks.p_value:.3f}")

cal = cumulative_calibration(p, events, n_grid=6)
print("\n     t(h)   observed   expected")
for t, n_obs, n_exp in cal:
    print(f"{t:9.0f} {n_obs:10.0f} {n_exp:10.1f}")

days = forecast_days(p, events)
observed = events.daily_counts()[:len(days)]
print(f"\ndaily counts: mean {observed.mean():.1f}, RMSE of integrated intensity "
      f"{score_daily_rmse(days, observed):.2f} events/day")

# waiting time to the next event right after the last observed one
nxt = forecast_next_event(p, events, events.times[-1], n_samples=2000, seed=3)
print(f"next event after the last one: mean wait {nxt.mean:.3f} h, "
      f"80% interval [{nxt.quantiles[0.1]:.3f}, {nxt.quantiles[0.9]:.3f}] h")
print(f"baseline-only mean wait would be {1 / p.mu:.3f} h")
