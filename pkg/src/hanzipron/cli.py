"""Command-line entry point: ``hanzipron <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import pipeline
from .channel import EMConfig
from .embed import EmbedConfig
from .synth import SynthConfig
from .vecmap import MapConfig


def _add_seed(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hanzipron",
                                 description="Unsupervised pronunciation of Chinese characters.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pinyinize", help="convert characters to pinyin by longest dictionary match")
    p.add_argument("--dict", required=True)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--strip-tones", action="store_true")
    _add_seed(p)

    p = sub.add_parser("count", help="count n-grams of a corpus")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--domain", choices=["character", "syllable", "word"], default="character")
    p.add_argument("--pad-start", action="store_true", help="prefix each line with <s> markers")
    _add_seed(p)

    p = sub.add_parser("train-lm", help="estimate an n-gram model from a counts file")
    p.add_argument("--counts", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--smoothing", default="none", help="'none' or 'add-DELTA'")
    p.add_argument("--vocab", type=int, default=None, help="vocabulary size for smoothing")
    _add_seed(p)

    p = sub.add_parser("em-train", help="learn the syllable-to-character channel with EM")
    p.add_argument("--char-corpus", required=True)
    p.add_argument("--pinyin-corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--m", type=int, default=100_000)
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--mode", choices=["flat", "factored", "pair"], default="flat")
    p.add_argument("--hints", default=None)
    p.add_argument("--decomposition", default=None, help="component table for factored mode")
    p.add_argument("--prune", type=int, default=5, help="pair-mode minimum n-gram count")
    p.add_argument("--workers", type=int, default=1, help="processes running restarts")
    _add_seed(p)

    p = sub.add_parser("decode", help="Viterbi-decode a character text")
    p.add_argument("--channel", required=True)
    p.add_argument("--lm", required=True)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--exponent", type=float, default=3.0)
    _add_seed(p)

    p = sub.add_parser("embed", help="train skip-gram vectors")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--domain", choices=["character", "syllable", "word"], default="word")
    p.add_argument("--dim", type=int, default=300)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--negative", type=int, default=5)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--min-count", type=int, default=5)
    p.add_argument("--workers", type=int, default=1, help="threads; >1 gives up determinism")
    _add_seed(p)

    p = sub.add_parser("vecmap", help="align two vector spaces and pronounce written words")
    p.add_argument("--src-vec", required=True)
    p.add_argument("--tgt-vec", required=True)
    p.add_argument("--constraints", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--csls-k", type=int, default=10)
    p.add_argument("--default-syllable", default=None)
    _add_seed(p)

    p = sub.add_parser("project", help="pronounce a word-segmented text with a mapping table")
    p.add_argument("--table", required=True)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--constraints", default=None)
    p.add_argument("--default-syllable", default="de")
    _add_seed(p)

    p = sub.add_parser("distill", help="extract characters on which EM and vectors agree")
    p.add_argument("--channel", required=True)
    p.add_argument("--lm", required=True)
    p.add_argument("--char-corpus", required=True)
    p.add_argument("--table", required=True)
    p.add_argument("--char-words", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--vote-chars", type=int, default=100_000)
    p.add_argument("--exponent", type=float, default=3.0)
    _add_seed(p)

    p = sub.add_parser("eval", help="score a hypothesis against a reference")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--mode", choices=["all", "tone", "notone", "partial"], default="all")
    p.add_argument("--test", default=None, help="test characters, for the error breakdown")
    _add_seed(p)

    p = sub.add_parser("synth", help="generate a synthetic cipher corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None, help="JSON file of synth options")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    _add_seed(p)

    p = sub.add_parser("run", help="run a configured pipeline with checkpointing")
    p.add_argument("config")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--seed", type=int, default=None, help="override the config's seed")
    return ap


def _pairs(items) -> dict[str, str]:
    out = {}
    for it in items:
        k, sep, v = it.partition("=")
        if not sep:
            raise SystemExit(f"--set expects KEY=VALUE, got {it!r}")
        out[k.strip()] = v.strip()
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    cmd = args.command
    if cmd == "pinyinize":
        cov = pipeline.pinyinize_file(args.dict, args.inp, args.out, args.strip_tones)
        print(f"coverage\t{cov:.6f}")
    elif cmd == "count":
        pipeline.count_file(args.inp, args.out, args.n, args.domain, args.pad_start)
    elif cmd == "train-lm":
        pipeline.train_lm_file(args.counts, args.out, args.smoothing, args.vocab)
    elif cmd == "em-train":
        cfg = EMConfig(N=args.n, M=args.m, iterations=args.iters, restarts=args.restarts,
                       seed=args.seed, mode=args.mode, prune=args.prune, workers=args.workers)
        rec = pipeline.em_train_files(args.char_corpus, args.pinyin_corpus, args.out, cfg,
                                      hints=args.hints, decomposition=args.decomposition)
        for i, f in enumerate(rec["finals"]):
            mark = "*" if i == rec["selected"] else ""
            print(f"restart\t{i}\t{float(f)!r}\t{mark}")
    elif cmd == "decode":
        pipeline.decode_file(args.channel, args.lm, args.inp, args.out, args.exponent)
    elif cmd == "embed":
        cfg = EmbedConfig(dim=args.dim, window=args.window, negative=args.negative,
                          epochs=args.epochs, min_count=args.min_count, seed=args.seed,
                          deterministic=args.workers == 1, workers=args.workers)
        pipeline.embed_file(args.inp, args.out, cfg, args.domain)
    elif cmd == "vecmap":
        info = pipeline.vecmap_files(args.src_vec, args.tgt_vec, args.out,
                                     MapConfig(csls_k=args.csls_k, seed=args.seed),
                                     args.constraints, args.default_syllable)
        print(json.dumps(info))
    elif cmd == "project":
        pipeline.project_file(args.table, args.inp, args.out, args.default_syllable,
                              args.constraints)
    elif cmd == "distill":
        rep = pipeline.distill_files(args.channel, args.lm, args.char_corpus, args.table,
                                     args.char_words, args.out, args.vote_chars, args.exponent)
        print(json.dumps(rep))
    elif cmd == "eval":
        sys.stdout.write(pipeline.eval_files(args.hyp, args.ref, args.mode, args.test))
    elif cmd == "synth":
        opts = {}
        if args.config:
            with open(args.config, encoding="utf-8") as f:
                opts.update(json.load(f))
        opts.update(_pairs(args.set))
        opts["seed"] = args.seed
        for k, v in pipeline.synth_dir(args.out, SynthConfig.from_dict(opts)).items():
            print(f"{k}\t{v}")
    elif cmd == "run":
        over = _pairs(args.set)
        if args.seed is not None:
            over["seed"] = str(args.seed)
        m = pipeline.run(args.config, over)
        print(f"executed\t{' '.join(m.executed) or '-'}")
        for name, rec in m.stages.items():
            if name.startswith("eval-"):
                print(f"{name}\t{json.dumps(rec.info)}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
