"""Random cohort with the VACS feature list. Test rows are drawn from a
wider distribution so that a fraction of them falls outside the training hull."""
import csv
import random

rng = random.Random(11)
HEADER = ["patient", "age", "race", "gender", "cd4_count", "albumin", "alt", "ast", "creatinine", "hemoglobin",
          "platelet_count", "wbc_count", "bmi", "days_between_visits", "years_on_haart", "fib4", "egfr",
          "viral_load_log10", "hepatitis_c", "outcome"]


def patient(pid, widen):
    g = lambda mu, sd, lo=0.0: round(max(lo, rng.gauss(mu, sd * widen)), 2)
    race = rng.choices(["Black", "White", "Hispanic", "Other", "NA"], [45, 35, 12, 6, 2])[0]
    return [pid, int(min(100, max(18, rng.gauss(50, 9 * widen)))), race, rng.choices(["Male", "Female"], [95, 5])[0],
            g(450, 200), g(4.0, 0.5), g(35, 20), g(35, 18), g(1.0, 0.3), g(13.5, 1.6), g(220, 60), g(5.5, 1.8),
            g(25, 4), int(g(90, 40)), g(6, 4), g(1.5, 0.8), g(85, 20), g(2.0, 1.0),
            rng.choices(["Yes", "No"], [30, 70])[0], rng.randint(0, 1)]


train = [patient(1 + i, 1.0) for i in range(400)]
test = [patient(10001 + i, 1.4) for i in range(64)]
# Midpoints of two training rows with the same categorical profile are inside.
while len(test) < 80:
    a, b = rng.sample(train, 2)
    if (a[2], a[3], a[18]) != (b[2], b[3], b[18]):
        continue
    mid = [10001 + len(test)]
    for i in range(1, len(HEADER)):
        mid.append(a[i] if isinstance(a[i], str) or i == 19 else round((a[i] + b[i]) / 2, 6))
    test.append(mid)

for name, rows in (("train.csv", train), ("test.csv", test)):
    with open(name, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(HEADER)
        w.writerows(rows)
