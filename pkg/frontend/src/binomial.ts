/**
 * Exact one-sided binomial tests, computed by summing probability-mass terms
 * in log space (no normal approximation). Matches the evaluation backend's
 * exact-CDF implementation to well below the significance resolution used
 * anywhere in the UI.
 */

function logAddExp(a: number, b: number): number {
  if (a === -Infinity) return b;
  if (b === -Infinity) return a;
  const hi = Math.max(a, b);
  return hi + Math.log1p(Math.exp(Math.min(a, b) - hi));
}

/** log of P[X = 0 .. k] accumulated via the pmf ratio recurrence. */
function logCdf(k: number, trials: number, tau: number): number {
  if (k < 0) return -Infinity;
  if (k >= trials) return 0;
  if (tau <= 0) return 0; // all mass at zero successes
  if (tau >= 1) return -Infinity; // all mass at `trials`, k < trials
  const logRatio = Math.log(tau) - Math.log1p(-tau);
  let logTerm = trials * Math.log1p(-tau); // P[X = 0]
  let logSum = logTerm;
  for (let i = 1; i <= k; i++) {
    logTerm += Math.log((trials - i + 1) / i) + logRatio;
    logSum = logAddExp(logSum, logTerm);
  }
  return Math.min(logSum, 0);
}

/** P[X <= successes] for X ~ Binomial(trials, tau). */
export function cdfBelow(successes: number, trials: number, tau: number): number {
  return Math.exp(logCdf(Math.floor(successes), trials, tau));
}

/** P[X >= successes]: the mirrored test via the complementary distribution. */
export function sfAbove(successes: number, trials: number, tau: number): number {
  // P[X >= s | p=tau] equals P[Y <= n - s | p=1-tau]
  return Math.exp(logCdf(trials - Math.ceil(successes), trials, 1 - tau));
}

export interface TestResult {
  significant: boolean;
  pValue: number;
}

export function testBelow(
  successes: number,
  trials: number,
  tau: number,
  alpha: number,
): TestResult {
  const pValue = cdfBelow(successes, trials, tau);
  return { significant: pValue < alpha, pValue };
}

export function testAbove(
  successes: number,
  trials: number,
  tau: number,
  alpha: number,
): TestResult {
  const pValue = sfAbove(successes, trials, tau);
  return { significant: pValue < alpha, pValue };
}
