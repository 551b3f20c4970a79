#!/usr/bin/env python3
# Summarises a simulate trace: conservation drift and the entropy balance H(t) - H(0) + int D.
import csv, sys

path = sys.argv[1] if len(sys.argv) > 1 else "demo_out/trace.csv"
rows = [r for r in csv.reader(l for l in open(path) if not l.startswith("#"))]
head, data = rows[0], [[float(x) for x in r] for r in rows[1:]]
col = {h: i for i, h in enumerate(head)}
t = [r[col["t"]] for r in data]
H = [r[col["entropy"]] for r in data]
D = [r[col["dissipation"]] for r in data]
E = [r[col["energy"]] for r in data]
acc = 0.0
print(f"{'t':>8} {'H':>10} {'int D':>10} {'H-H0+intD':>11}")
for i in range(len(t)):
    if i:
        acc += 0.5 * (D[i] + D[i - 1]) * (t[i] - t[i - 1])
    print(f"{t[i]:8.3f} {H[i]:10.4f} {acc:10.4f} {H[i] - H[0] + acc:11.4f}")
print(f"energy drift {max(abs(e - E[0]) for e in E):.3g}")
