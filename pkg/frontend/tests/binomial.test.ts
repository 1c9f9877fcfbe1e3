import { describe, expect, it } from "vitest";

import { cdfBelow, sfAbove, testBelow } from "../src/binomial.js";

/** Plain direct-sum reference over Pascal-triangle coefficients (small n). */
function referenceCdf(k: number, n: number, p: number): number {
  let coeff = 1;
  let total = 0;
  for (let i = 0; i <= k; i++) {
    if (i > 0) coeff = (coeff * (n - i + 1)) / i;
    total += coeff * p ** i * (1 - p) ** (n - i);
  }
  return total;
}

describe("one-sided exact binomial test", () => {
  it("matches the evaluation backend on frozen reference values", () => {
    // values computed independently with an exact-CDF implementation
    expect(cdfBelow(5, 20, 0.5)).toBeCloseTo(0.020694732666015625, 13);
    expect(cdfBelow(3, 17, 0.3)).toBeCloseTo(0.2019070087871471, 13);
    expect(cdfBelow(40, 200, 0.25)).toBeCloseTo(0.05784982913671242, 12);
    expect(cdfBelow(0, 1, 0.5)).toBeCloseTo(0.5, 15);
    expect(cdfBelow(7, 30, 0.14)).toBeCloseTo(0.9503316738105223, 12);
    expect(sfAbove(15, 20, 0.5)).toBeCloseTo(0.020694732666015625, 13);
    expect(sfAbove(170, 200, 0.8)).toBeCloseTo(0.043021556375661255, 12);
    expect(sfAbove(2, 10, 0.05)).toBeCloseTo(0.08613835589931637, 13);
  });

  it("agrees with a direct-summation reference for small inputs", () => {
    for (let n = 1; n <= 40; n++) {
      for (const tau of [0.1, 0.3, 0.5, 0.7, 0.9]) {
        for (let s = 0; s <= n; s++) {
          expect(Math.abs(cdfBelow(s, n, tau) - referenceCdf(s, n, tau))).toBeLessThan(1e-11);
        }
      }
    }
  });

  it("handles the boundary thresholds", () => {
    expect(cdfBelow(0, 50, 0)).toBe(1);
    expect(cdfBelow(49, 50, 1)).toBe(0);
    expect(cdfBelow(50, 50, 1)).toBe(1);
    expect(sfAbove(0, 10, 0.4)).toBe(1);
  });

  it("flags the canonical significant case", () => {
    const { significant, pValue } = testBelow(5, 20, 0.5, 0.05);
    expect(significant).toBe(true);
    expect(pValue).toBeCloseTo(0.0207, 4);
  });

  it("never leaves the unit interval", () => {
    for (const [s, n, tau] of [
      [0, 1, 0.99],
      [500, 5000, 0.9],
      [4999, 5000, 0.1],
      [1, 3000, 0.5],
    ] as const) {
      const below = cdfBelow(s, n, tau);
      const above = sfAbove(s, n, tau);
      expect(below).toBeGreaterThanOrEqual(0);
      expect(below).toBeLessThanOrEqual(1);
      expect(above).toBeGreaterThanOrEqual(0);
      expect(above).toBeLessThanOrEqual(1);
    }
  });
});
