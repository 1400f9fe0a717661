"""Detected rate against pump power with 1% noise, fitted by the saturation law."""

import argparse
from pathlib import Path

import numpy as np

from photonstream.emitter import SaturationParams, saturation_rate
from photonstream.fitting import DataSeries, fit_saturation
from photonstream.timetag_io import fit_report_fields, write_csv, write_report


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--r0", type=float, default=3.8, help="MHz")
    ap.add_argument("--p0", type=float, default=197.0, help="nW")
    ap.add_argument("--noise", type=float, default=0.01, help="relative")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="out/saturation")
    args = ap.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    P = np.geomspace(5, 5 * args.p0, 14)
    truth = saturation_rate(P, SaturationParams(args.r0, args.p0))
    sigma = args.noise * truth
    y = truth + rng.normal(0, sigma)
    fit = fit_saturation(DataSeries(P, y, sigma))
    write_report(fit_report_fields(fit), out / "fit_report.txt")
    write_csv(out / "saturation.csv", ["power", "rate", "sigma", "model"], zip(P, y, sigma, fit.predict(P)))
    print(f"R0 = {fit['R0']:.4f} +/- {fit.error('R0'):.4f} MHz, P0 = {fit['P0']:.2f} +/- {fit.error('P0'):.2f}")


if __name__ == "__main__":
    main()
