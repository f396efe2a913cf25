"""Builds the bundled data set under data/ from public upstream sources.

Inputs (pass the unpacked locations on the command line):
  --fair     unpacked fair-1.6.4 wheel (Apache-2.0). Supplies the RCMIP v5.1.0
             SSP emission and concentration tables and the CMIP6 solar and
             volcanic forcing series.
  --vega     unpacked vega-datasets 2.8.0 npm package (BSD-3-Clause). Supplies
             NASA GISTEMP annual global temperature anomalies (global-temp.csv)
             and NOAA Mauna Loa monthly CO2 (co2-concentration.csv).

    pip download fair==1.6.4 --no-deps
    npm pack vega-datasets@2.8.0
    python scripts/prepare_data.py --fair <dir> --vega <dir>/package

Scenario emissions are harmonised to a shared history: every scenario uses the
SSP2-4.5 series up to and including BRANCH_YEAR, and afterwards its own series
plus an additive offset that closes the branch-year gap and fades linearly to
zero over FADE_YEARS.
"""

import argparse
import json
import os

import numpy as np
import pandas as pd

FIRST_YEAR = 1765
LAST_YEAR = 2100
BRANCH_YEAR = 2020
FADE_YEARS = 20

SCENARIOS = {
    "SSP1-RCP1.9": "ssp119",
    "SSP1-RCP2.6": "ssp126",
    "SSP2-RCP4.5": "ssp245",
    "SSP3-RCP7.0": "ssp370",
    "SSP5-RCP8.5": "ssp585",
}

MW_S, MW_SO2, MW_N, MW_NO2 = 32.065, 64.066, 14.007, 46.006

# (column, RCMIP variable, unit written to the bundle, factor from RCMIP unit)
GASES = [
    ("co2_fossil", "Emissions|CO2|MAGICC Fossil and Industrial", "GtCO2/yr", 1e-3),
    ("co2_land", "Emissions|CO2|MAGICC AFOLU", "GtCO2/yr", 1e-3),
    ("ch4", "Emissions|CH4", "MtCH4/yr", 1.0),
    ("n2o", "Emissions|N2O", "MtN2O/yr", 1e-3),
    ("sox", "Emissions|Sulfur", "MtS/yr", MW_S / MW_SO2),
    ("co", "Emissions|CO", "MtCO/yr", 1.0),
    ("nmvoc", "Emissions|VOC", "MtNMVOC/yr", 1.0),
    ("nox", "Emissions|NOx", "MtN/yr", MW_N / MW_NO2),
    ("bc", "Emissions|BC", "MtBC/yr", 1.0),
    ("oc", "Emissions|OC", "MtOC/yr", 1.0),
    ("nh3", "Emissions|NH3", "MtNH3/yr", 1.0),
]
HALOGENS = [
    ("cf4", "F-Gases|PFC|CF4"), ("c2f6", "F-Gases|PFC|C2F6"), ("c6f14", "F-Gases|PFC|C6F14"),
    ("hfc23", "F-Gases|HFC|HFC23"), ("hfc32", "F-Gases|HFC|HFC32"),
    ("hfc43_10", "F-Gases|HFC|HFC4310mee"), ("hfc125", "F-Gases|HFC|HFC125"),
    ("hfc134a", "F-Gases|HFC|HFC134a"), ("hfc143a", "F-Gases|HFC|HFC143a"),
    ("hfc227ea", "F-Gases|HFC|HFC227ea"), ("hfc245fa", "F-Gases|HFC|HFC245fa"),
    ("sf6", "F-Gases|SF6"), ("cfc11", "Montreal Gases|CFC|CFC11"),
    ("cfc12", "Montreal Gases|CFC|CFC12"), ("cfc113", "Montreal Gases|CFC|CFC113"),
    ("cfc114", "Montreal Gases|CFC|CFC114"), ("cfc115", "Montreal Gases|CFC|CFC115"),
    ("carb_tet", "Montreal Gases|CCl4"), ("mcf", "Montreal Gases|CH3CCl3"),
    ("hcfc22", "Montreal Gases|HCFC22"), ("hcfc141b", "Montreal Gases|HCFC141b"),
    ("hcfc142b", "Montreal Gases|HCFC142b"), ("halon1211", "Montreal Gases|Halon1211"),
    ("halon1202", "Montreal Gases|Halon1202"), ("halon1301", "Montreal Gases|Halon1301"),
    ("halon2402", "Montreal Gases|Halon2402"), ("ch3br", "Montreal Gases|CH3Br"),
    ("ch3cl", "Montreal Gases|CH3Cl"),
]
for name, var in HALOGENS:
    GASES.append((name, "Emissions|" + var, "kt/yr", 1.0))

YEARS = list(range(FIRST_YEAR, LAST_YEAR + 1))


def series(table, scenario, variable, factor):
    row = table[(table.Scenario == scenario) & (table.Variable == variable)]
    if len(row) != 1:
        raise SystemExit(f"{scenario}: expected one row for {variable}, got {len(row)}")
    values = row.loc[:, str(FIRST_YEAR):str(LAST_YEAR)].astype(float)
    values = values.interpolate(axis=1).to_numpy().squeeze()
    # a few Montreal-gas rows are blank in the scenario years
    values = np.nan_to_num(values, nan=0.0)
    return values * factor


def harmonise(own, history):
    out = own.copy()
    b = BRANCH_YEAR - FIRST_YEAR
    out[: b + 1] = history[: b + 1]
    gap = history[b] - own[b]
    for i in range(b + 1, len(YEARS)):
        w = max(0.0, 1.0 - (YEARS[i] - BRANCH_YEAR) / FADE_YEARS)
        out[i] = own[i] + gap * w
    return out


def fmt(x):
    return "%.10g" % float(x)


def write_scenarios(fair_dir, out_dir):
    table = pd.read_csv(os.path.join(
        fair_dir, "fair/SSPs/data/rcmip-emissions-annual-means-5-1-0-ssp-only.csv"))
    history = {g: series(table, "ssp245", v, f) for g, v, _, f in GASES}
    os.makedirs(out_dir, exist_ok=True)
    for label, code in SCENARIOS.items():
        cols = {g: harmonise(series(table, code, v, f), history[g]) for g, v, _, f in GASES}
        path = os.path.join(out_dir, f"{label}.csv")
        with open(path, "w") as fh:
            fh.write("year," + ",".join(g for g, *_ in GASES) + "\n")
            for i, y in enumerate(YEARS):
                fh.write(str(y) + "," + ",".join(fmt(cols[g][i]) for g, *_ in GASES) + "\n")
        meta = {
            "id": label,
            "units": {g: u for g, _, u, _ in GASES},
            "exogenous_forcing": "../forcing/natural.csv",
            "source": f"RCMIP v5.1.0 {code}, harmonised to SSP2-4.5 history through {BRANCH_YEAR}",
        }
        with open(os.path.join(out_dir, f"{label}.meta.json"), "w") as fh:
            json.dump(meta, fh, indent=2)
            fh.write("\n")


def write_forcing(fair_dir, out_dir):
    solar = np.loadtxt(os.path.join(fair_dir, "fair/ancil/cmip6_solar.csv"), skiprows=7, delimiter=",")
    volc = np.loadtxt(os.path.join(fair_dir, "fair/ancil/cmip6_volcanic.csv"), skiprows=9, delimiter=",")
    s = dict(zip(solar[:, 0].astype(int), solar[:, 1]))
    v = dict(zip(volc[:, 0].astype(int), volc[:, 1]))
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "natural.csv"), "w") as fh:
        fh.write("year,solar,volcanic\n")
        for y in YEARS:
            fh.write(f"{y},{fmt(s[y])},{fmt(v[y])}\n")


def write_observations(fair_dir, vega_dir, out_dir):
    temp = pd.read_csv(os.path.join(vega_dir, "data/global-temp.csv"))
    temp = temp[(temp.year >= 1880) & (temp.year <= BRANCH_YEAR)]
    ml = pd.read_csv(os.path.join(vega_dir, "data/co2-concentration.csv"), parse_dates=["Date"])
    ml["year"] = ml.Date.dt.year
    counts = ml.groupby("year").CO2.count()
    annual = ml.groupby("year").CO2.mean()[counts == 12]
    conc = pd.read_csv(os.path.join(
        fair_dir, "fair/SSPs/data/rcmip-concentrations-annual-means-5-1-0-ssp-only.csv"))
    hist = conc[(conc.Scenario == "ssp245") & (conc.Variable == "Atmospheric Concentrations|CO2")]
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "historical.csv"), "w") as fh:
        fh.write("year,temperature,co2_ppm\n")
        for y, t in zip(temp.year, temp.temp):
            c = annual.get(y)
            if c is None:
                c = float(hist[str(y)].iloc[0])
            fh.write(f"{y},{t:.2f},{c:.3f}\n")
    meta = {
        "temperature_reference_period": [1951, 1980],
        "temperature_noise_sd": 0.1,
        "co2_noise_sd": 1.0,
        "sources": {
            "temperature": "NASA GISTEMP v4 global annual mean (via vega-datasets global-temp.csv)",
            "co2_ppm": "NOAA Mauna Loa annual means from 1959; CMIP6 historical (RCMIP v5.1.0) before",
        },
    }
    with open(os.path.join(out_dir, "historical.meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--fair", required=True)
    ap.add_argument("--vega", required=True)
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data"))
    args = ap.parse_args()
    write_scenarios(args.fair, os.path.join(args.out, "scenarios"))
    write_forcing(args.fair, os.path.join(args.out, "forcing"))
    write_observations(args.fair, args.vega, os.path.join(args.out, "observations"))


if __name__ == "__main__":
    main()
