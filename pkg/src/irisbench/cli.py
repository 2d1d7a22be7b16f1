"""Command line entry point: synth-gen, obfuscate, bench, report."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import InvalidParameter, SegmentationFailure


def _synth_gen(args):
    from .synthgen import generate_dataset, manifest_hash, write_dataset

    ds = generate_dataset(args.identities, args.per_id, args.seed)
    write_dataset(ds, args.out)
    print(f"wrote {len(ds.samples)} samples to {args.out} (manifest sha256 {manifest_hash(ds)})")


def _method(args, sample, donor):
    from .obfuscation import pipeline as p

    m = args.method
    if m == "blur":
        return p.Blur(args.sigma if args.sigma is not None else 3.0)
    if m == "noise":
        return p.Noise(args.sigma if args.sigma is not None else 0.1, args.seed + sample.sample_id)
    if m == "downsample":
        return p.Downsample(args.scale if args.scale is not None else 2.0)
    if m == "rubber_sheet":
        return p.RubberSheet(donor)
    if m == "style_transfer":
        return p.StyleTransfer(donor, args.iterations)
    return p.NoObfuscation()


def _obfuscate(args):
    import numpy as np

    from .imagecore import save_image, save_labels
    from .obfuscation.pipeline import obfuscate
    from .synthgen import load_dataset

    ds = load_dataset(args.inp)
    out = Path(args.out)
    (out / "img").mkdir(parents=True, exist_ok=True)
    (out / "mask").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    ids = sorted({s.identity_id for s in ds.samples})
    n_fail = 0
    for s in ds.samples:
        donor = None
        if args.method in ("rubber_sheet", "style_transfer"):
            if args.donor_id is not None:
                if args.donor_id not in ids:
                    raise InvalidParameter(f"donor identity {args.donor_id} not in dataset")
                donor_id = args.donor_id
            else:
                donor_id = int(rng.choice([i for i in ids if i != s.identity_id]))
            pool = [d for d in ds.samples if d.identity_id == donor_id and d.split == "probe"] or \
                   [d for d in ds.samples if d.identity_id == donor_id]
            donor = pool[int(rng.integers(len(pool)))]
        try:
            img = obfuscate(s, _method(args, s, donor))
        except SegmentationFailure as exc:
            logging.warning("sample %d skipped: %s", s.sample_id, exc)
            n_fail += 1
            continue
        name = f"{s.sample_id:05d}.png"
        save_image(img, out / "img" / name)
        save_labels(s.mask, out / "mask" / name)
    print(f"obfuscated {len(ds.samples) - n_fail} images into {out} ({n_fail} failed)")


def _bench(args):
    from .bench import emit, load_config, run

    cfg = load_config(args.config)
    if args.out is not None:
        cfg.out = Path(args.out)
    report = run(cfg, progress=(lambda msg: print(msg, file=sys.stderr)) if args.verbose else None)
    for path in emit(report, cfg.out):
        print(path)


def _report(args):
    from .bench import report_markdown, rows_from_csv

    d = Path(args.inp)
    text = (d / "report.csv").read_text()
    if args.format == "csv":
        sys.stdout.write(text)
        return
    rt = d / "runtime.csv"
    rows = rows_from_csv(text, rt.read_text() if rt.exists() else None)
    sys.stdout.write(report_markdown(rows))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="irisbench", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("synth-gen", help="render a synthetic eye dataset")
    g.add_argument("--identities", type=int, default=20)
    g.add_argument("--per-id", type=int, default=10)
    g.add_argument("--seed", type=int, default=2024)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_synth_gen)

    o = sub.add_parser("obfuscate", help="obfuscate every image of a dataset")
    o.add_argument("--method", required=True,
                   choices=["none", "blur", "noise", "downsample", "rubber_sheet", "style_transfer"])
    o.add_argument("--sigma", type=float)
    o.add_argument("--scale", type=float)
    o.add_argument("--iterations", type=int, default=200)
    o.add_argument("--donor-id", type=int)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--in", dest="inp", required=True)
    o.add_argument("--out", required=True)
    o.set_defaults(func=_obfuscate)

    b = sub.add_parser("bench", help="run the benchmark sweep")
    b.add_argument("--config", required=True)
    b.add_argument("--out")
    b.set_defaults(func=_bench)

    r = sub.add_parser("report", help="render a finished sweep")
    r.add_argument("--in", dest="inp", required=True)
    r.add_argument("--format", choices=["md", "csv"], default="md")
    r.set_defaults(func=_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (OSError, InvalidParameter) as exc:
        print(f"irisbench: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
