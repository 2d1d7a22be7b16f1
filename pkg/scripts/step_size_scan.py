"""Style-transfer step size scan: c2 accuracy and FAR at a few iteration counts.

Used to pick the default step size.

    python3 scripts/step_size_scan.py --steps 0.05 0.01 0.005 0.002
"""
import argparse
from pathlib import Path

from irisbench import bench
from irisbench.synthgen import load_dataset

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--dataset", type=Path, default=ROOT / "data" / "synth")
    ap.add_argument("--steps", type=float, nargs="+", default=[0.05, 0.01, 0.005, 0.002])
    ap.add_argument("--iterations", type=int, nargs="+", default=[1, 10, 200])
    args = ap.parse_args()

    ds = load_dataset(args.dataset)
    print("step,iterations,acc_c2,far_c2")
    for step in args.steps:
        cfg = bench.BenchConfig(dataset=args.dataset, methods=("style_transfer",),
                                style_iterations=tuple(args.iterations), step_size=step)
        report = bench.run(cfg, dataset=ds)
        for r in report.rows:
            if r.method == "style_transfer":
                print(f"{step},{r.param},{r.acc_c2:.3f},{r.far_c2:.3f}")


if __name__ == "__main__":
    main()
