"""File-level stages and the checkpointed end-to-end runner.

Every stage reads and writes the package's plain-text formats, so the
command-line tool and :func:`run` share one implementation.  A run is
described by a flat ``key = value`` config file; each stage's outputs are
fingerprinted together with its inputs and parameters, and a rerun skips
every stage whose fingerprint is unchanged.

Relative paths in a config resolve against its ``workdir``, which itself
resolves against ``$HANZIPRON_SCRATCH`` when that is set (else the
config file's directory).
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from collections import Counter
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .channel import (EMConfig, LikelihoodTrace, em_train, hints_from_pairs, read_channel,
                      select_best_restart, write_channel, component_index)
from .combine import ConfidentPairs, distill_agreements, em_votes, read_hints, vector_votes
from .decoder import DecodeConfig, Decoder
from .embed import EmbedConfig, read_vectors, train_embeddings
from .evaluation import MODES, evaluate
from .lm import NgramLM, Smoothing, train_lm
from .phonology import parse_syllable, read_decomposition, strip_tone
from .pinyinizer import pinyinize, read_dictionary
from .symbols import (SymbolTable, TokenStream, count_ngrams, read_counts, read_lines,
                      tokenize_line, write_counts)
from .synth import SynthConfig, gen_cipher_corpus
from .vecmap import MapConfig, map_words, project_to_characters, read_pron_table, self_learn_map

__all__ = [
    "SCRATCH_ENV",
    "RunManifest",
    "select_best_restart",
    "load_config",
    "run",
    "pinyinize_file",
    "count_file",
    "train_lm_file",
    "em_train_files",
    "decode_file",
    "embed_file",
    "vecmap_files",
    "project_file",
    "distill_files",
    "eval_files",
    "synth_dir",
]

log = logging.getLogger(__name__)

SCRATCH_ENV = "HANZIPRON_SCRATCH"


# ---------------------------------------------------------------------------
# stages on files


def _lines(path) -> list[str]:
    return [l for l in read_lines(path)]


def _write_lines(path, lines) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for line in lines:
            f.write(line + "\n")


def _read_stream(path, domain: str, table: SymbolTable) -> TokenStream:
    segs = [table.encode(tokenize_line(l, domain), add=True) for l in read_lines(path)]
    return TokenStream(domain, tuple(segs))


def pinyinize_file(dict_path, in_path, out_path, strip_tones: bool = False) -> float:
    """Convert a character text to syllables; returns dictionary coverage."""
    res = pinyinize(read_lines(in_path), read_dictionary(dict_path))
    Path(out_path).write_text(res.to_text(strip_tones), encoding="utf-8")
    if res.coverage < 1:
        log.warning("%d of %d characters had no dictionary match and were dropped",
                    res.total - res.matched, res.total)
    return res.coverage


def count_file(in_path, out_path, n: int, domain: str, pad_start: bool = False) -> None:
    table = SymbolTable()
    counts = count_ngrams(_read_stream(in_path, domain, table), n, pad_start)
    write_counts(out_path, counts, table)


def train_lm_file(counts_path, out_path, smoothing: str = "none", vocab: int | None = None) -> None:
    counts, table = read_counts(counts_path)
    lm = train_lm(counts, Smoothing.parse(smoothing), V=vocab or len(table))
    lm.write(out_path, table)


def _hint_pairs(path) -> ConfidentPairs:
    return read_hints(path) if path else ConfidentPairs()


def em_train_files(char_corpus, pinyin_corpus, out_path, cfg: EMConfig, hints=None,
                   decomposition=None) -> dict:
    """Train a channel from a character text and a (toneless) syllable text.

    Writes the channel table to ``out_path`` and the per-restart traces
    next to it as JSON; returns that JSON record.
    """
    ct, st = SymbolTable(), SymbolTable()
    cs = _read_stream(char_corpus, "character", ct)
    ss = TokenStream("syllable", tuple(
        st.encode([strip_tone(t) for t in tokenize_line(l, "syllable")], add=True)
        for l in read_lines(pinyin_corpus)))
    prior = train_lm(count_ngrams(ss, cfg.order))
    pairs = _hint_pairs(hints)
    unknown = [(c, p) for c, p in pairs if c not in ct or p not in st]
    if unknown:
        raise ValueError(f"hints refer to unknown symbols: {unknown[:5]}")
    cfg = replace(cfg, hints=tuple(hints_from_pairs(pairs, ct, st)))
    comps = None
    if cfg.mode == "factored":
        if decomposition is None:
            raise ValueError("factored mode needs a decomposition table")
        comps = component_index(ct, read_decomposition(decomposition))
    res = em_train(count_ngrams(cs, cfg.order), prior, cfg, chars=ct, syllables=st, comps=comps)
    write_channel(out_path, res.channel.matrix(), st, ct, mode=cfg.mode,
                  lambdas=",".join(map(str, cfg.lambdas)), iterations=cfg.iterations,
                  final_loglik=repr(float(res.trace.final)))
    record = {
        "finals": [t.final for t in res.runs],
        "selected": res.best,
        "traces": [t.values for t in res.runs],
        "monotone": [t.is_monotone() for t in res.runs],
    }
    Path(str(out_path) + ".trace.json").write_text(json.dumps(record), encoding="utf-8")
    return record


def _decoder(channel_path, lm_path, exponent: float) -> tuple[Decoder, SymbolTable, SymbolTable]:
    lm, st = NgramLM.read(lm_path)
    table, st2, ct, _ = read_channel(channel_path, syllables=st)
    if len(st2) != lm.V:
        raise ValueError("channel uses syllables the language model does not know")
    return Decoder(lm, table, DecodeConfig(exponent=exponent, lm_order=lm.n)), st, ct


def decode_file(channel_path, lm_path, in_path, out_path, exponent: float = 3.0) -> int:
    """Viterbi-decode a character text; returns the number of unsupported characters."""
    dec, st, ct = _decoder(channel_path, lm_path, exponent)
    out = []
    for line in read_lines(in_path):
        toks = tokenize_line(line, "character")
        path, _ = dec.viterbi([ct.get(c, -1) for c in toks])
        out.append(" ".join(st.lookup(int(p)) for p in path))
    _write_lines(out_path, out)
    if dec.flagged:
        log.warning("%d character types had no channel support", len(dec.flagged))
    return len(dec.flagged)


def embed_file(in_path, out_path, cfg: EmbedConfig, domain: str = "word") -> None:
    lines = [tokenize_line(l, domain) for l in read_lines(in_path)]
    train_embeddings(lines, cfg).write(out_path)


def vecmap_files(src_vec, tgt_vec, out_path, cfg: MapConfig, constraints=None,
                 default_syllable: str | None = None) -> dict:
    """Map written-word vectors onto spoken-word vectors and write the pronunciation table."""
    X, Y = read_vectors(src_vec), read_vectors(tgt_vec)
    W = self_learn_map(X, Y, cfg)
    pairs = _hint_pairs(constraints)
    table = map_words(X, Y, W, constraints=pairs.pairs, default_syllable=default_syllable,
                      k=cfg.csls_k)
    table.write(out_path)
    np.save(str(out_path) + ".W.npy", W.W)
    return {"converged": W.converged, "objective": W.objective,
            "orthogonality": W.orthogonality_error(), "fallback_words": len(table.fallback)}


def project_file(table_path, words_path, out_path, default_syllable: str = "de",
                 constraints=None) -> None:
    """Pronounce a word-segmented text with a mapping table, one syllable per character."""
    table = read_pron_table(table_path)
    segmented = [l.split() for l in read_lines(words_path)]
    pairs = _hint_pairs(constraints)
    out = project_to_characters(table, segmented, default_syllable, pairs.pairs)
    _write_lines(out_path, (" ".join(l) for l in out))


def distill_files(channel_path, lm_path, char_corpus, table_path, char_words, out_path,
                  vote_chars: int = 100_000, exponent: float = 3.0,
                  default_syllable: str = "de") -> dict:
    """Write the characters on which EM and the vector table agree as a hints file."""
    dec, st, ct = _decoder(channel_path, lm_path, exponent)
    lines = ["".join(tokenize_line(l, "character")) for l in read_lines(char_corpus)]
    votes_em = em_votes(dec, lines, ct, st, vote_chars)
    segmented = [l.split() for l in read_lines(char_words)]
    votes_vec = vector_votes(read_pron_table(table_path), segmented, default_syllable)
    pairs, rep = distill_agreements(votes_em, votes_vec, Counter("".join(lines)))
    pairs.write(out_path)
    return asdict(rep)


def _flat_syllables(path) -> list[list[str]]:
    return [l.split() for l in read_lines(path)]


def eval_files(hyp_path, ref_path, mode: str = "all", test_path=None) -> str:
    """TSV report of ``hyp`` against the tone-marked reference."""
    hyp, ref = _flat_syllables(hyp_path), _flat_syllables(ref_path)
    if len(hyp) != len(ref):
        raise ValueError(f"hypothesis has {len(hyp)} lines, reference {len(ref)}")
    for i, (h, r) in enumerate(zip(hyp, ref)):
        if len(h) != len(r):
            raise ValueError(f"line {i + 1}: {len(h)} hypothesis syllables, {len(r)} reference")
    chars = None
    if test_path is not None:
        chars = [c for l in read_lines(test_path) for c in tokenize_line(l, "character")]
    flat_h = [parse_syllable(s) for l in hyp for s in l]
    flat_r = [parse_syllable(s) for l in ref for s in l]
    rep = evaluate(flat_h, flat_r, chars)
    text = rep.to_tsv()
    if mode != "all":
        if mode not in MODES:
            raise ValueError(f"mode must be 'all' or one of {MODES}")
        keep = ("mode", mode, "error")
        text = "".join(l + "\n" for l in text.splitlines() if l.startswith(keep))
    return text


def synth_dir(outdir, cfg: SynthConfig) -> dict[str, str]:
    """Generate a synthetic corpus set into ``outdir``; returns the written paths."""
    sc = gen_cipher_corpus(cfg)
    return {k: str(v) for k, v in sc.write(outdir).items()}


# ---------------------------------------------------------------------------
# configuration


def _coerce(value: str, like):
    if isinstance(like, bool):
        return value.lower() in ("1", "true", "yes", "on")
    if isinstance(like, tuple):
        return tuple(float(x) for x in value.split(","))
    return type(like)(value)


def _sub_config(cls, conf: dict, prefix: str, **extra):
    kwargs = dict(extra)
    for f in fields(cls):
        key = f"{prefix}.{f.name}"
        if key in conf:
            default = getattr(cls(), f.name) if f.name not in kwargs else kwargs[f.name]
            kwargs[f.name] = _coerce(conf[key], default)
    return cls(**kwargs)


def load_config(path) -> dict[str, str]:
    """Read ``key = value`` lines; ``#`` starts a comment."""
    conf = {}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{n}: expected key = value")
        k, v = line.split("=", 1)
        conf[k.strip()] = v.strip()
    return conf


@dataclass
class StageRecord:
    key: str
    inputs: dict[str, str]
    outputs: dict[str, str]
    status: str
    seconds: float = 0.0
    info: dict = field(default_factory=dict)


@dataclass
class RunManifest:
    config: dict[str, str]
    seeds: dict[str, int] = field(default_factory=dict)
    stages: dict[str, StageRecord] = field(default_factory=dict)
    restart_finals: list[float] = field(default_factory=list)
    selected_restart: int | None = None
    executed: list[str] = field(default_factory=list)

    def write(self, path) -> None:
        data = asdict(self)
        Path(path).write_text(json.dumps(data, indent=2, sort_keys=True), encoding="utf-8")

    @classmethod
    def read(cls, path) -> "RunManifest":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        stages = {k: StageRecord(**v) for k, v in data.pop("stages").items()}
        return cls(stages=stages, **data)


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


class _Runner:
    def __init__(self, manifest: RunManifest, previous: RunManifest | None, path: Path):
        self.m = manifest
        self.prev = previous
        self.path = path

    def stage(self, name: str, inputs: dict[str, Path], params: dict, outputs: dict[str, Path],
              fn: Callable[[], dict | None]) -> dict:
        in_digests = {k: _digest(p) for k, p in inputs.items()}
        key = hashlib.sha256(json.dumps([name, in_digests, params], sort_keys=True,
                                        default=str).encode()).hexdigest()
        old = self.prev.stages.get(name) if self.prev else None
        if (old is not None and old.status == "done" and old.key == key
                and all(p.exists() and old.outputs.get(k) == _digest(p)
                        for k, p in outputs.items())):
            self.m.stages[name] = old
            log.info("stage %s unchanged, skipped", name)
            return old.info
        t = time.perf_counter()
        self.m.stages[name] = StageRecord(key, in_digests, {}, "running")
        try:
            info = fn() or {}
        except Exception:
            self.m.stages[name].status = "failed"
            self.m.write(self.path)
            raise
        rec = StageRecord(key, in_digests, {k: _digest(p) for k, p in outputs.items()}, "done",
                          time.perf_counter() - t, json.loads(json.dumps(info, default=str)))
        self.m.stages[name] = rec
        self.m.executed.append(name)
        self.m.write(self.path)
        return rec.info


def _workdir(conf: dict, config_path: Path | None) -> Path:
    wd = Path(conf.get("workdir", "work"))
    if not wd.is_absolute():
        base = os.environ.get(SCRATCH_ENV) or (config_path.parent if config_path else Path.cwd())
        wd = Path(base) / wd
    wd.mkdir(parents=True, exist_ok=True)
    return wd


def run(config, overrides: dict[str, str] | None = None) -> RunManifest:
    """Execute every stage the config enables and return the manifest.

    ``config`` is a path to a ``key = value`` file or a dict.  Recognised
    keys: ``workdir``, ``seed``, ``synth`` (generate inputs) with
    ``synth.*`` options, or input paths ``char_corpus``, ``pinyin_corpus``
    (or ``spoken_text`` plus ``dict`` to pinyinize), ``test``, ``ref``,
    ``char_words``, ``spoken_words``, ``test_words``; method options
    ``em.*``, ``embed.*``, ``map.*``, ``decode.exponent``, ``lm.delta``;
    and the switches ``vector`` and ``combine``.
    """
    config_path = None
    if isinstance(config, (str, os.PathLike)):
        config_path = Path(config)
        conf = load_config(config_path)
    else:
        conf = dict(config)
    conf.update(overrides or {})
    wd = _workdir(conf, config_path)
    seed = int(conf.get("seed", 0))
    mpath = wd / "manifest.json"
    previous = RunManifest.read(mpath) if mpath.exists() else None
    manifest = RunManifest(dict(conf), {"seed": seed})
    r = _Runner(manifest, previous, mpath)

    def given(key):
        p = Path(conf[key])
        return p if p.is_absolute() else wd / p

    files: dict[str, Path] = {}
    if _coerce(conf.get("synth", "0"), False):
        scfg = _sub_config(SynthConfig, conf, "synth", seed=seed)
        names = {"chars": "chars.txt", "syllables": "syllables.txt", "test": "test.chars.txt",
                 "ref": "test.ref.txt", "gold": "gold.tsv", "dict": "dict.tsv"}
        if scfg.lm == "words":
            names.update(char_words="chars.words.txt", syllable_words="syllables.words.txt",
                         test_words="test.words.txt")
        outs = {k: wd / v for k, v in names.items()}
        r.stage("synth", {}, asdict(scfg), outs, lambda: synth_dir(wd, scfg) and None)
        files.update(char_corpus=outs["chars"], pinyin_corpus=outs["syllables"],
                     test=outs["test"], ref=outs["ref"])
        if scfg.lm == "words":
            files.update(char_words=outs["char_words"], spoken_words=outs["syllable_words"],
                         test_words=outs["test_words"])
    for key in ("char_corpus", "pinyin_corpus", "test", "ref", "char_words", "spoken_words",
                "test_words"):
        if key in conf:
            files[key] = given(key)
    if "pinyin_corpus" not in files and "spoken_text" in conf:
        out = wd / "syllables.txt"
        src, dct = given("spoken_text"), given("dict")
        r.stage("pinyinize", {"text": src, "dict": dct}, {}, {"out": out},
                lambda: {"coverage": pinyinize_file(dct, src, out, strip_tones=True)})
        files["pinyin_corpus"] = out
    for need in ("char_corpus", "pinyin_corpus"):
        if need not in files:
            raise ValueError(f"config provides no {need}")

    em_cfg = _sub_config(EMConfig, conf, "em", seed=seed)
    delta = conf.get("lm.delta", "0.1")
    exponent = float(conf.get("decode.exponent", "3"))

    # counts and language models
    syl_bi = wd / "syllables.2.counts"
    r.stage("count", {"pinyin": files["pinyin_corpus"]}, {}, {"bigrams": syl_bi},
            lambda: count_file(files["pinyin_corpus"], syl_bi, 2, "syllable", pad_start=True))
    dec_lm = wd / "decode.lm"
    r.stage("lm", {"counts": syl_bi}, {"delta": delta}, {"lm": dec_lm},
            lambda: train_lm_file(syl_bi, dec_lm, f"add-{delta}"))

    # EM
    em_params = {k: v for k, v in asdict(em_cfg).items() if k != "workers"}
    channel = wd / "channel.tsv"
    em_inputs = {"chars": files["char_corpus"], "pinyin": files["pinyin_corpus"]}
    info = r.stage("em", em_inputs, em_params, {"channel": channel},
                   lambda: em_train_files(files["char_corpus"], files["pinyin_corpus"],
                                          channel, em_cfg))
    manifest.restart_finals = info.get("finals", [])
    manifest.selected_restart = info.get("selected")
    if manifest.restart_finals:
        manifest.seeds["em_restarts"] = em_cfg.restarts

    use_vector = _coerce(conf.get("vector", "1" if "char_words" in files else "0"), False)
    combine = use_vector and _coerce(conf.get("combine", "1"), False)
    hyps: dict[str, Path] = {}
    final_channel = channel
    if use_vector:
        for need in ("char_words", "spoken_words"):
            if need not in files:
                raise ValueError(f"vector method needs {need}")
        ecfg = _sub_config(EmbedConfig, conf, "embed", seed=seed)
        mcfg = _sub_config(MapConfig, conf, "map", seed=seed)
        xvec, yvec = wd / "chars.vec", wd / "syllables.vec"
        r.stage("embed", {"chars": files["char_words"], "spoken": files["spoken_words"]},
                asdict(ecfg), {"src": xvec, "tgt": yvec},
                lambda: (embed_file(files["char_words"], xvec, ecfg),
                         embed_file(files["spoken_words"], yvec, ecfg)) and None)
        default = Counter(t for l in read_lines(files["pinyin_corpus"])
                          for t in l.split()).most_common(1)[0][0]
        table = wd / "table.tsv"
        r.stage("vecmap", {"src": xvec, "tgt": yvec}, asdict(mcfg), {"table": table},
                lambda: vecmap_files(xvec, yvec, table, mcfg, default_syllable=default))
        final_table, constraints = table, None
        if combine:
            hints = wd / "hints.tsv"
            r.stage("distill", {"channel": channel, "lm": dec_lm, "chars": files["char_corpus"],
                                "table": table, "words": files["char_words"]},
                    {"exponent": exponent, "default": default}, {"hints": hints},
                    lambda: distill_files(channel, dec_lm, files["char_corpus"], table,
                                          files["char_words"], hints, exponent=exponent,
                                          default_syllable=default))
            if hints.stat().st_size:
                channel2, table2 = wd / "channel.hinted.tsv", wd / "table.constrained.tsv"
                r.stage("rerun", {**em_inputs, "hints": hints, "src": xvec, "tgt": yvec},
                        {"em": em_params, "map": asdict(mcfg)},
                        {"channel": channel2, "table": table2},
                        lambda: {"em": em_train_files(files["char_corpus"],
                                                      files["pinyin_corpus"], channel2, em_cfg,
                                                      hints=hints)["finals"],
                                 "map": vecmap_files(xvec, yvec, table2, mcfg, constraints=hints,
                                                     default_syllable=default)})
                final_channel, final_table, constraints = channel2, table2, hints
            else:
                log.warning("the methods agree on no character; no rerun")
        if "test_words" in files:
            vec_hyp = wd / "vector.hyp"
            ins = {"table": final_table, "words": files["test_words"]}
            if constraints is not None:
                ins["hints"] = constraints
            r.stage("project", ins, {"default": default}, {"hyp": vec_hyp},
                    lambda: project_file(final_table, files["test_words"], vec_hyp, default,
                                         constraints))
            hyps["vector"] = vec_hyp

    if "test" in files:
        em_hyp = wd / "em.hyp"
        r.stage("decode", {"channel": final_channel, "lm": dec_lm, "test": files["test"]},
                {"exponent": exponent}, {"hyp": em_hyp},
                lambda: {"unsupported": decode_file(final_channel, dec_lm, files["test"],
                                                    em_hyp, exponent)})
        hyps["em"] = em_hyp
    if "ref" in files:
        for name, hyp in hyps.items():
            rep = wd / f"{name}.eval.tsv"

            def score(hyp=hyp, rep=rep):
                text = eval_files(hyp, files["ref"], "all", files.get("test"))
                rep.write_text(text, encoding="utf-8")
                rows = [l.split("\t") for l in text.splitlines()[1:4]]
                return {row[0]: float(row[3]) for row in rows}

            r.stage(f"eval-{name}", {"hyp": hyp, "ref": files["ref"]}, {}, {"report": rep}, score)
    manifest.write(mpath)
    return manifest
