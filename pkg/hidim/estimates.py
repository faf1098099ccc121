"""
Monte Carlo error-probability estimates with Wilson confidence intervals
"""
import math
from dataclasses import dataclass

from scipy import stats

from .utils import wilson_interval

CONFIDENCE = 0.95
CI_Z = float(stats.norm.ppf(0.5 + CONFIDENCE / 2.0))


@dataclass(frozen=True)
class ErrorEstimate:
    p_hat: float
    ci_low: float
    ci_high: float
    trials: int
    resample_events: int = 0
    errors: int = 0
    untrainable: int = 0
    valid: bool = True
    replicates: int = 0
    errors_sq: int = 0

    @classmethod
    def from_counts(cls, errors, trials, resample_events=0, untrainable=0, valid=True, replicates=0, errors_sq=0):
        """
        Pooled estimate of `errors` wrong predictions out of `trials`. `replicates` counts the
        training sets behind them and `errors_sq` sums their squared per-replicate error counts.
        """
        low, high = wilson_interval(errors, trials, CONFIDENCE)
        p_hat = errors / trials if trials else 0.5
        return cls(p_hat=p_hat, ci_low=min(low, p_hat), ci_high=max(high, p_hat), trials=trials,
                   resample_events=resample_events, errors=errors, untrainable=untrainable, valid=valid,
                   replicates=replicates, errors_sq=errors_sq)

    @property
    def sigma(self):
        """Binomial standard error sqrt(p (1 - p) / trials)"""
        if not self.trials:
            return 0.5
        return math.sqrt(self.p_hat * (1.0 - self.p_hat) / self.trials)

    @property
    def replicate_sigma(self):
        """
        Standard error from the spread of per-replicate error rates, which also carries the
        variance between training sets. Falls back to sigma below two replicates.
        """
        count = self.replicates
        if count < 2:
            return self.sigma
        per_replicate = self.trials / count
        spread = max(count * self.errors_sq - self.errors ** 2, 0) / (count * (count - 1))
        return math.sqrt(spread / count) / per_replicate

    @property
    def half_width(self):
        return 0.5 * (self.ci_high - self.ci_low)

    def within(self, value, k=3.0):
        """True when value lies within k binomial standard errors of p_hat"""
        return abs(self.p_hat - value) <= k * self.sigma
