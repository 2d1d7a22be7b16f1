"""Regenerate the default dataset if needed and run the full sweep.

    python3 scripts/run_default_sweep.py            # configs/default.cfg
    python3 scripts/run_default_sweep.py --force    # regenerate data/synth first
"""
import argparse
import logging
from pathlib import Path

from irisbench import bench
from irisbench.synthgen import generate_dataset, write_dataset

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", type=Path, default=ROOT / "configs" / "default.cfg")
    ap.add_argument("--force", action="store_true", help="regenerate the dataset")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    cfg = bench.load_config(args.config)
    if args.force or not (Path(cfg.dataset) / "manifest.tsv").is_file():
        write_dataset(generate_dataset(20, 10, master_seed=2024), cfg.dataset)
    report = bench.run(cfg, progress=logging.info)
    for path in bench.emit(report, cfg.out):
        print(path)
    print(bench.report_csv(report))


if __name__ == "__main__":
    main()
