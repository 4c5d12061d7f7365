"""Writes the bundled 5-region synthetic fixture to data/fixture5/."""

import datetime as dt
import pathlib

import numpy as np

OUT = pathlib.Path(__file__).resolve().parent.parent / "data" / "fixture5"
START = dt.date(2020, 2, 15)
DAYS = 140
NU, OMEGA, TESTED = 3.0, 9.0, 0.35


def main():
    rng = np.random.default_rng(20200215)
    ids = ["GM01", "GM02", "GM03", "GM04", "GM05"]
    parents = ["PV1", "PV1", "PV1", "PV2", "PV2"]
    pop = np.array([180000, 95000, 60000, 140000, 45000], dtype=float)

    base = rng.uniform(200, 3000, size=(5, 5)) * np.outer(pop, pop) / pop.mean() ** 2
    np.fill_diagonal(base, 0.0)
    base = np.round(base)

    def change(day):
        if day < 25:
            return 0.0
        return -0.45 + 0.002 * max(0, day - 60)

    seir = np.zeros((5, 6))
    seir[:, 0] = pop
    seed = np.array([30.0, 5.0, 0.0, 12.0, 0.0])
    seir[:, 0] -= seed
    seir[:, 1] = seed
    cases = np.zeros((DAYS, 5), dtype=int)
    for day in range(DAYS):
        lockdown = day >= 25
        b_loc = 0.16 if lockdown else 0.42
        b_mob = 0.05
        m = base * (1.0 + change(day))
        S, E, IT, IU, RT, RU = seir.T
        u = IU / pop
        press = S / pop * ((m + m.T) @ u)
        lam = b_loc * S * (IT + IU) / pop + b_mob * press
        new_e = np.minimum(S, lam)
        out_e = E / NU
        out_it, out_iu = IT / OMEGA, IU / OMEGA
        seir[:, 0] = S - new_e
        seir[:, 1] = E + new_e - out_e
        seir[:, 2] = IT + TESTED * out_e - out_it
        seir[:, 3] = IU + (1 - TESTED) * out_e - out_iu
        seir[:, 4] = RT + out_it
        seir[:, 5] = RU + out_iu
        cases[day] = rng.negative_binomial(20, 20 / (20 + TESTED * out_e))

    OUT.mkdir(parents=True, exist_ok=True)
    with open(OUT / "regions.csv", "w") as f:
        f.write("region_id,name,population,parent_id\n")
        f.write("PV1,Province One,%d,\n" % pop[:3].sum())
        f.write("PV2,Province Two,%d,\n" % pop[3:].sum())
        for i in range(5):
            f.write("%s,Municipality %d,%d,%s\n" % (ids[i], i + 1, pop[i], parents[i]))
    with open(OUT / "mobility.csv", "w") as f:
        f.write("origin,destination,volume\n")
        for i in range(5):
            for j in range(5):
                if i != j:
                    f.write("%s,%s,%d\n" % (ids[i], ids[j], base[i, j]))
    dates = [START + dt.timedelta(days=d) for d in range(DAYS)]
    with open(OUT / "cases.csv", "w") as f:
        f.write("date,region_id,new_cases\n")
        for d, day in enumerate(dates):
            for i in range(5):
                f.write("%s,%s,%d\n" % (day.isoformat(), ids[i], cases[d, i]))
    with open(OUT / "reductions.csv", "w") as f:
        f.write("date,region_id,workplace_change\n")
        for d, day in enumerate(dates):
            c = change(d)
            f.write("%s,NATIONAL,%.4f\n" % (day.isoformat(), c))
            f.write("%s,PV2,%.4f\n" % (day.isoformat(), c * 0.9))
            if d % 3 == 0:
                f.write("%s,GM01,%.4f\n" % (day.isoformat(), c * 1.1))
    q = 1.0 - 1.0 / OMEGA
    w = [q ** s for s in range(14)] + [OMEGA * q ** 14]
    with open(OUT / "prevalence.csv", "w") as f:
        f.write("date,total_infectious\n")
        for d, day in enumerate(dates):
            it = sum(w[s] * cases[d - s].sum() for s in range(15) if d - s >= 0)
            f.write("%s,%.1f\n" % (day.isoformat(), max(it / TESTED, 1.0)))


if __name__ == "__main__":
    main()
