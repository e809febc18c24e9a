import time

import numpy as np

from alphasqg.fields import holder_seminorm_estimate, make_initial_data

data = make_initial_data(4, 4, 0.5, 0.1)
b = data.bubbles[0]
rs = b.support_radius
G = 400
h = 2 * rs / G
gx = b.center[0] - rs + (np.arange(G) + 0.5) * h
gy = b.center[1] - rs + (np.arange(G) + 0.5) * h
xx, yy = np.meshgrid(gx, gy, indexing="ij")
vals = data.value_many(np.stack([xx.ravel(), yy.ravel()], axis=1)).reshape(G, G)

t0 = time.time()
alpha = 0.5
offs = set()
for di in range(-16, 17):
    for dj in range(0, 17):
        if (di, dj) != (0, 0) and not (dj == 0 and di < 0):
            offs.add((di, dj))
for rad in list(range(17, 120, 3)) + list(range(120, 400, 8)):
    for ang in np.linspace(0.0, np.pi, 48):
        di = int(round(rad * np.cos(ang)))
        dj = int(round(rad * np.sin(ang)))
        if (di, dj) != (0, 0) and not (dj == 0 and di < 0):
            offs.add((di, dj))
print("n offsets:", len(offs))

best = 0.0
for di, dj in offs:
    i0, i1 = max(0, -di), G - max(0, di)
    j0, j1 = max(0, -dj), G - max(0, dj)
    if i0 >= i1 or j0 >= j1:
        continue
    diff = np.abs(vals[i0:i1, j0:j1] - vals[i0 + di : i1 + di, j0 + dj : j1 + dj])
    sep = h * float(np.hypot(di, dj))
    q = float(diff.max()) / sep**alpha
    best = max(best, q)
print("oracle:", best, "time:", time.time() - t0)

est = holder_seminorm_estimate(data, alpha, pair_budget=2048, seed=0)
print("estimate:", est.value, "ratio:", est.value / best)
