"""Measure genuine/impostor distance distributions on a synthetic dataset.

Used to pick the intra/inter-class Hamming bounds asserted in the tests.

    python scripts/calibrate_distances.py --identities 20 --per-id 10 --seed 2024
"""
import argparse
import itertools

import numpy as np

from irisbench.obfuscation.pipeline import prepare
from irisbench.recognition import enroll, extract_templates, hamming
from irisbench.synthgen import generate_dataset


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--identities", type=int, default=20)
    ap.add_argument("--per-id", type=int, default=10)
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()

    ds = generate_dataset(args.identities, args.per_id, args.seed)
    temps = []
    for s in ds.samples:
        p = prepare(s)
        temps.append((s.identity_id, s.split, extract_templates(s.image, p.annulus, p.glints)))

    gen, imp = [], []
    for (ia, _, ta), (ib, _, tb) in itertools.combinations(temps, 2):
        d = hamming(ta.code, tb.code)
        (gen if ia == ib else imp).append(d)
    gen, imp = np.array(gen), np.array(imp)
    print(f"genuine  HD: n={len(gen)} mean={gen.mean():.3f} sd={gen.std():.3f} "
          f"p99={np.percentile(gen, 99):.3f} max={gen.max():.3f}")
    print(f"impostor HD: n={len(imp)} mean={imp.mean():.3f} sd={imp.std():.3f} "
          f"p1={np.percentile(imp, 1):.3f} min={imp.min():.3f}")

    gallery = enroll([(i, t) for i, sp, t in temps if sp == "enroll"])
    print(f"tau_c1={gallery.tau_c1:.4f} tau_c2={gallery.tau_c2:.4f}")
    ok1 = ok2 = n = 0
    for i, sp, t in temps:
        if sp != "probe":
            continue
        n += 1
        d1 = gallery.c1_distances(t.code)
        d2 = gallery.c2_distances(t.style)
        b1 = min(d1, key=d1.get)
        b2 = min(d2, key=d2.get)
        ok1 += b1 == i and d1[b1] < gallery.tau_c1
        ok2 += b2 == i and d2[b2] < gallery.tau_c2
    print(f"probe accuracy c1={ok1 / n:.3f} c2={ok2 / n:.3f} (n={n})")


if __name__ == "__main__":
    main()
