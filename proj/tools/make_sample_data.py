#!/usr/bin/env python3
"""Regenerates data/sample_prices.csv and data/sample_factors.csv.

Daily closes for ten equities and three factor indices on a business-day
calendar, simulated from a seeded three-factor model so the files are
reproducible byte for byte.
"""
import argparse
import pathlib

import numpy as np
import pandas as pd

ASSETS = ["AAPL", "AMZN", "BAC", "CVX", "JNJ", "JPM", "KO", "MSFT", "PG", "XOM"]
FACTORS = ["MKT", "SMB", "HML"]


def simulate(rows: int, seed: int):
    rng = np.random.default_rng(seed)
    factor_mean = np.array([0.0004, 0.0001, 0.0])
    factor_vol = np.array([0.011, 0.005, 0.005])
    f = factor_mean + factor_vol * rng.standard_normal((rows, len(FACTORS)))
    loadings = np.column_stack([
        rng.uniform(0.7, 1.3, len(ASSETS)),
        rng.uniform(-0.5, 0.5, len(ASSETS)),
        rng.uniform(-0.6, 0.6, len(ASSETS)),
    ])
    alpha = rng.uniform(-0.0001, 0.0003, len(ASSETS))
    idio = rng.uniform(0.008, 0.016, len(ASSETS))
    r = alpha + f @ loadings.T + idio * rng.standard_normal((rows, len(ASSETS)))
    return r, f


def to_prices(returns: np.ndarray, start: np.ndarray) -> np.ndarray:
    return start * np.vstack([np.ones(returns.shape[1]), np.cumprod(1.0 + returns, axis=0)])


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rows", type=int, default=1000, help="number of daily returns")
    parser.add_argument("--seed", type=int, default=20240607)
    parser.add_argument("--out", type=pathlib.Path, default=pathlib.Path(__file__).resolve().parents[1] / "data")
    args = parser.parse_args()

    r, f = simulate(args.rows, args.seed)
    dates = pd.bdate_range("2019-01-02", periods=args.rows + 1).strftime("%Y-%m-%d")
    rng = np.random.default_rng(args.seed + 1)
    prices = pd.DataFrame(to_prices(r, rng.uniform(20, 300, len(ASSETS))), index=dates, columns=ASSETS)
    factors = pd.DataFrame(to_prices(f, np.full(len(FACTORS), 100.0)), index=dates, columns=FACTORS)
    args.out.mkdir(parents=True, exist_ok=True)
    prices.to_csv(args.out / "sample_prices.csv", index_label="date", float_format="%.6f")
    factors.to_csv(args.out / "sample_factors.csv", index_label="date", float_format="%.6f")


if __name__ == "__main__":
    main()
