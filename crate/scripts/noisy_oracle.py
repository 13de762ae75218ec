#!/usr/bin/env python3
"""Monte Carlo oracle for the noisy-human robustness threshold.

Simulates the 1x1 game at the default learner parameters (L0 = 0, delta = 1,
alpha = 1, K = 10) with a noisy best-responding human: every trial's reduced
human action is the exact best response plus N(0, sigma^2) noise, clipped to
[-1, 1]. Sessions start from the 8 points of the radius-0.65 circle, cycling
(session i uses point i mod 8), 100 sessions per batch.

The statistic is the median over a batch of the total L1 error
|h_hat[10]| + |m_hat[10]|. The printed threshold is the 99.9th percentile of
that median across independent batches, rounded up to 3 significant figures.
The Rust acceptance suite asserts against this constant.

Independent of the Rust implementation: closed-form scalar arithmetic, numpy RNG.
"""
import math

import numpy as np

SIGMA = 0.05
SESSIONS = 100
ITERATIONS = 10
RADIUS = 0.65
BATCHES = 20000
DELTA = 1.0
ALPHA = 1.0


def best_response(gain, h_hat, m_hat):
    return (gain * gain * h_hat - gain * m_hat) / (1.0 + gain * gain)


def run_batch(rng):
    angles = np.arange(SESSIONS) % 8 * (math.pi / 4.0)
    h_hat = RADIUS * np.cos(angles)
    m_hat = RADIUS * np.sin(angles)
    for _ in range(ITERATIONS):
        # unperturbed trial, gain L0 = 0
        h1 = np.clip(best_response(0.0, h_hat, m_hat) + SIGMA * rng.standard_normal(SESSIONS), -1, 1)
        # perturbed trial, gain L0 + delta
        h2 = np.clip(best_response(DELTA, h_hat, m_hat) + SIGMA * rng.standard_normal(SESSIONS), -1, 1)
        m2 = DELTA * (h2 - h_hat) + m_hat
        h_hat, m_hat = h1, m_hat + ALPHA * (m2 - m_hat)
    return np.median(np.abs(h_hat) + np.abs(m_hat))


def round_up(x, digits=3):
    scale = 10 ** (digits - 1 - math.floor(math.log10(x)))
    return math.ceil(x * scale) / scale


def main():
    rng = np.random.default_rng(20240601)
    medians = np.array([run_batch(rng) for _ in range(BATCHES)])
    q999 = np.quantile(medians, 0.999)
    print(f"batches={BATCHES} mean_median={medians.mean():.6f} "
          f"p50={np.quantile(medians, 0.5):.6f} p99.9={q999:.6f}")
    print(f"threshold={round_up(q999)}")


if __name__ == "__main__":
    main()
