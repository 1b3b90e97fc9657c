"""keyslt command line.

    keyslt synth --out data/
    keyslt preprocess --config run.cfg
    keyslt train --config run.cfg
    keyslt translate --model run/model.json --archive run/features.bin --split test -o run/hyp.tsv
    keyslt evaluate --hyp run/hyp.tsv -o run/metrics.csv
    keyslt inspect-dist --T 100 --l_p 17

Exit codes: 1 usage, 2 input error, 3 internal invariant violation.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .config import load_config
from .corpus import SynthConfig, load_manifest, synth_generate
from .errors import InvariantViolation, KeysltError
from .pipeline import (
    Translator,
    evaluate_translations,
    preprocess,
    read_translations,
    run_train,
    write_translations,
)
from .selection import kurtosis, median_reorder, mixture_distribution

log = logging.getLogger("keyslt")

EXIT_USAGE, EXIT_INPUT, EXIT_INVARIANT = 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _overrides(pairs):
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise KeysltError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _config(args):
    return load_config(args.config, _overrides(args.set))


def cmd_synth(args):
    cfg = SynthConfig(
        vocab_size=args.vocab_size, min_len=args.min_len, max_len=args.max_len, videos=args.videos,
        frames_per_token=args.frames_per_token, noise_sigma=args.noise_sigma, seed=args.seed,
    )
    rows = synth_generate(cfg, args.out)
    print(f"wrote {len(rows)} videos and {Path(args.out) / 'manifest.tsv'}")


def cmd_preprocess(args):
    cfg = _config(args)
    res = preprocess(cfg)
    L, N, D = res.features.shape
    print(f"archive {res.path} shape ({L}, {N}, {D}) sha256 {res.checksum}")
    print(f"augmented {res.header['augmented']} sampled {res.header['sampled']}")


def cmd_train(args):
    cfg = _config(args)
    res = run_train(cfg)
    final = float(res.history[-1]["loss"]) if res.history else float("nan")
    print(f"checkpoint {res.checkpoint} epochs {len(res.history)} final_loss {final!r}")


def cmd_translate(args):
    tr = Translator(args.model)
    if args.input:
        path = Path(args.input)
        if path.suffix == ".tsv":
            items = tr.translate_manifest(load_manifest(path), args.split)
        else:
            items = [tr.translate_file(path, args.layout)]
    else:
        items = tr.translate_archive(args.archive, args.split)
    if args.output:
        write_translations(args.output, items)
        print(f"wrote {len(items)} translations to {args.output}")
    else:
        for t in items:
            print(f"{t.video_id}\t{' '.join(t.hypothesis)}")


def cmd_evaluate(args):
    report = evaluate_translations(read_translations(args.hyp), smooth=args.smooth)
    text = report.to_csv()
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    sys.stdout.write(text if not args.output else
                     f"bleu4 {report.bleu4:.4f} rouge_l {report.rouge_l:.4f} meteor_exact {report.meteor_exact:.4f}\n")


def cmd_inspect_dist(args):
    probs = mixture_distribution(args.T, args.l_p)
    if not args.raw:
        probs = median_reorder(probs)
    lines = ["k,prob"] + [f"{k},{float(p)!r}" for k, p in enumerate(probs)]
    text = "\n".join(lines) + "\n"
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if args.T >= 2:
        print(f"kurtosis={kurtosis(probs)!r}", file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="keyslt", description="Keypoint sign language translation toolkit")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="generate a synthetic keypoint corpus")
    s.add_argument("--out", required=True)
    s.add_argument("--vocab-size", type=int, default=20)
    s.add_argument("--videos", type=int, default=200)
    s.add_argument("--min-len", type=int, default=2)
    s.add_argument("--max-len", type=int, default=5)
    s.add_argument("--frames-per-token", type=int, default=6)
    s.add_argument("--noise-sigma", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_synth)

    for name, func, helptext in (
        ("preprocess", cmd_preprocess, "normalize, fix length to N and write the feature archive"),
        ("train", cmd_train, "train a model on the feature archive"),
    ):
        c = sub.add_parser(name, help=helptext)
        c.add_argument("--config", help="key=value or JSON config file")
        c.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
        c.set_defaults(func=func)

    t = sub.add_parser("translate", help="decode keypoint videos with a trained model")
    t.add_argument("--model", required=True)
    src = t.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="keypoint .jsonl file or manifest .tsv")
    src.add_argument("--archive", help="preprocessed feature archive")
    t.add_argument("--split", default=None, help="restrict to a manifest/archive split")
    t.add_argument("--layout", default=None)
    t.add_argument("-o", "--output")
    t.set_defaults(func=cmd_translate)

    e = sub.add_parser("evaluate", help="score a translations TSV")
    e.add_argument("--hyp", required=True)
    e.add_argument("--smooth", type=float, default=0.0, help="added to zero BLEU n-gram matches")
    e.add_argument("-o", "--output")
    e.set_defaults(func=cmd_evaluate)

    d = sub.add_parser("inspect-dist", help="print a frame-selection distribution as CSV")
    d.add_argument("--T", type=int, required=True)
    d.add_argument("--l_p", "--lp", type=int, default=17)
    d.add_argument("--raw", action="store_true", help="skip the median reordering")
    d.add_argument("-o", "--output")
    d.set_defaults(func=cmd_inspect_dist)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (KeysltError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"keyslt: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InvariantViolation as exc:
        print(f"keyslt: internal error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    return 0


if __name__ == "__main__":
    sys.exit(main())
