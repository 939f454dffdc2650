"""End-to-end training recipes with JSON run manifests.

Every recipe ends by training a source->target model and scoring it on the
test set.  What differs is the training data:

  bitext               D
  upsample             D repeated to the size an augvic run would train on (larger preset)
  bt_mono              D + back-translated target-side monolingual text
  augvic_pbt           D + back-translated vicinal samples of D's targets
  augvic_gbt           same, back-translated by a dual-encoder model guided by each sample's origin source
  augvic_plus_bt_mono  D + both synthetic sets

D is upsampled so that |D_up| = ratio * |synthetic| (never below |D|).
Intermediate stages can be cached on disk, keyed by their inputs' hashes.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import shutil
import time
from collections import Counter
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable

import numpy as np

from .corpus import BitextCorpus, MonoCorpus, Sentence, load_mono, load_parallel, upsample, write_lines, write_parallel
from .eval import BleuReport, bleu
from .seq2seq import (
    GuidedBTModel,
    Seq2SeqModel,
    TrainingRecipe,
    beam_search,
    load_model,
    preset,
    save_model,
    train_guided_bt,
    train_seq2seq,
)
from .subword import BpeModel, apply_bpe, detokenize, learn_bpe
from .synthlang import SynthSpec, generate_mono, generate_pair_corpus
from .vicinal import AugmentStats, DiversityPolicy, VicinalLm, augment_corpus, read_augmented, train_vicinal_lm, write_augmented
from .vocab import WordVocab

log = logging.getLogger(__name__)

KINDS = ("bitext", "upsample", "bt_mono", "augvic_pbt", "augvic_gbt", "augvic_plus_bt_mono")
_NEEDS_MONO = ("bt_mono", "augvic_plus_bt_mono")
_NEEDS_LM = ("upsample", "augvic_pbt", "augvic_gbt", "augvic_plus_bt_mono")
_DATA_KEYS = ("train_src", "train_tgt", "dev_src", "dev_tgt", "test_src", "test_tgt",
              "mono", "lm_mono_tgt", "lm_mono_src")
MANIFEST = "manifest.json"


class StageError(RuntimeError):
    """A stage failed; the partial manifest has been written."""


def _strict(cls, d: dict, what: str):
    unknown = set(d) - {f.name for f in fields(cls)}
    if unknown:
        raise ValueError(f"unknown {what} keys: {sorted(unknown)}")


@dataclass(frozen=True)
class SynthData:
    """Generate the corpora instead of reading them from disk."""

    spec: SynthSpec = field(default_factory=SynthSpec)
    mono_domain: str = "relevant"
    mono_size: int = 10000
    lm_mono_size: int = 20000
    mono_seed: int = 0

    def to_dict(self) -> dict:
        return {**asdict(self), "spec": self.spec.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "SynthData":
        _strict(cls, d, "synth")
        d = dict(d)
        d["spec"] = SynthSpec.from_dict(d.get("spec", {}))
        return cls(**d)


@dataclass(frozen=True)
class RecipeSpec:
    kind: str
    seed: int = 0
    data: dict = field(default_factory=dict)  # paths, see _DATA_KEYS
    synth: SynthData | None = None
    policy: DiversityPolicy = field(default_factory=DiversityPolicy)
    arch: str = "desk"
    upsample_arch: str = "desk-large"
    bpe_size: int = 600
    ratio: float = 1.0
    lam: float = 0.7
    beam: int = 5
    bt_beam: int = 1
    length_penalty: float = 1.0
    mt: TrainingRecipe = field(default_factory=lambda: TrainingRecipe(batch_tokens=512))
    mlm: TrainingRecipe = field(default_factory=lambda: TrainingRecipe(max_epochs=8, batch_tokens=2048))
    pair_budget: int | None = 400000  # caps epochs at ceil(pair_budget / training pairs)
    lm_seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown recipe kind {self.kind!r}; expected one of {KINDS}")
        if not self.ratio > 0:
            raise ValueError("ratio must be > 0")
        unknown = set(self.data) - set(_DATA_KEYS)
        if unknown:
            raise ValueError(f"unknown data keys: {sorted(unknown)}")
        if self.synth is None:
            missing = [k for k in _DATA_KEYS[:6] if k not in self.data]
            if self.kind in _NEEDS_MONO and "mono" not in self.data:
                missing.append("mono")
            if self.kind in _NEEDS_LM and "lm_mono_tgt" not in self.data:
                missing.append("lm_mono_tgt")
            if self.kind == "augvic_gbt" and "lm_mono_src" not in self.data:
                missing.append("lm_mono_src")
            if missing:
                raise ValueError(f"recipe kind {self.kind} needs data paths {missing}")
        if self.pair_budget is not None and self.pair_budget < 1:
            raise ValueError("pair_budget must be >= 1")
        for name in (self.arch, self.upsample_arch):
            preset(name)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["synth"] = self.synth.to_dict() if self.synth else None
        d["policy"] = self.policy.to_dict()
        d["mt"] = self.mt.to_dict()
        d["mlm"] = self.mlm.to_dict()
        d["data"] = dict(self.data)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RecipeSpec":
        _strict(cls, d, "recipe")
        d = dict(d)
        if d.get("synth") is not None:
            d["synth"] = SynthData.from_dict(d["synth"])
        if "policy" in d:
            d["policy"] = DiversityPolicy.from_dict(d["policy"])
        for key in ("mt", "mlm"):
            if key in d:
                d[key] = TrainingRecipe.from_dict(d[key])
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path) -> "RecipeSpec":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def replace(self, **kw) -> "RecipeSpec":
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(kw)
        return RecipeSpec(**d)


def stage_seed(seed: int, name: str) -> int:
    return int(hashlib.sha256(f"{seed}:{name}".encode()).hexdigest()[:8], 16)


def file_hash(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _key_hash(key: dict) -> str:
    return hashlib.sha256(json.dumps(key, sort_keys=True).encode()).hexdigest()[:20]


class _Run:
    def __init__(self, spec: RecipeSpec, out_dir: str | Path, cache_dir: str | Path | None, threads: int):
        self.spec = spec
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.cache = Path(cache_dir) if cache_dir else None
        self.threads = threads
        self._memo: dict = {}
        self.manifest: dict = {"recipe": spec.to_dict(), "status": "running", "corpora": {}, "stages": [],
                               "metrics": {}, "counters": Counter(), "accounting": {}}

    # -- bookkeeping

    def path(self, name: str) -> Path:
        return self.out / name

    def write_manifest(self) -> Path:
        m = dict(self.manifest)
        m["counters"] = dict(sorted(self.manifest["counters"].items()))
        p = self.path(MANIFEST)
        p.write_text(json.dumps(m, indent=2, sort_keys=True), encoding="utf-8")
        return p

    def stage(self, name: str, kind: str, files: list[str], key: dict | None,
              produce: Callable[[], dict | None]) -> dict:
        """Run ``produce`` (which writes ``files`` into the run directory) or restore it from the cache."""
        t0 = time.perf_counter()
        cdir = None
        cached = False
        if self.cache is not None and key is not None:
            cdir = self.cache / f"{name}-{_key_hash({'stage': name, **key})}"
            if (cdir / "DONE").exists():
                for f in files:
                    shutil.copyfile(cdir / f, self.path(f))
                info = json.loads((cdir / "info.json").read_text(encoding="utf-8"))
                spent = cdir / "seconds"
                compute = float(spent.read_text()) if spent.exists() else None
                cached = True
        if not cached:
            info = produce() or {}
            compute = round(time.perf_counter() - t0, 3)
            if cdir is not None:
                tmp = cdir.with_name(cdir.name + ".tmp")
                shutil.rmtree(tmp, ignore_errors=True)
                tmp.mkdir(parents=True)
                for f in files:
                    shutil.copyfile(self.path(f), tmp / f)
                (tmp / "info.json").write_text(json.dumps(info, sort_keys=True), encoding="utf-8")
                (tmp / "seconds").write_text(str(compute), encoding="utf-8")
                (tmp / "DONE").touch()
                shutil.rmtree(cdir, ignore_errors=True)
                tmp.rename(cdir)
        self.manifest["stages"].append({
            "name": name, "kind": kind, "cached": cached, "seconds": round(time.perf_counter() - t0, 3),
            "compute_seconds": compute,
            "artifacts": {f: file_hash(self.path(f)) for f in files}, "info": info,
        })
        log.info("stage %s done (%s)", name, "cached" if cached else "computed")
        return info

    def artifact(self, name: str) -> str:
        for st in self.manifest["stages"]:
            if name in st["artifacts"]:
                return st["artifacts"][name]
        raise KeyError(name)

    def epochs_for(self, n_pairs: int) -> TrainingRecipe:
        mt = self.spec.mt
        if self.spec.pair_budget is None:
            return mt
        return mt.replace(max_epochs=max(1, min(mt.max_epochs, math.ceil(self.spec.pair_budget / n_pairs))))

    # -- stages

    def load_data(self) -> None:
        spec = self.spec
        d = self.path("data")
        d.mkdir(exist_ok=True)
        if spec.synth is not None:
            self._write_synth(d)
            paths = {k: d / f"{k}.txt" for k in _DATA_KEYS if (d / f"{k}.txt").exists()}
        else:
            paths = {k: Path(v) for k, v in spec.data.items()}
        self.train = load_parallel(paths["train_src"], paths["train_tgt"])
        self.dev = load_parallel(paths["dev_src"], paths["dev_tgt"])
        self.test = load_parallel(paths["test_src"], paths["test_tgt"])
        self.mono = load_mono(paths["mono"]) if "mono" in paths else None
        self.lm_paths = {k: paths[k] for k in ("lm_mono_tgt", "lm_mono_src") if k in paths}
        for k, p in paths.items():
            self.manifest["corpora"][k] = {"path": str(p), "sha256": file_hash(p)}
        c = self.manifest["counters"]
        c["dropped_malformed"] += sum(x.dropped_malformed for x in (self.train, self.dev, self.test))
        self.manifest["accounting"]["bitext"] = len(self.train)

    def _write_synth(self, d: Path) -> None:
        syn = self.spec.synth
        train, dev, test = generate_pair_corpus(syn.spec)
        for name, corpus in (("train", train), ("dev", dev), ("test", test)):
            write_parallel(corpus, d / f"{name}_src.txt", d / f"{name}_tgt.txt")
        kind = self.spec.kind
        if kind in _NEEDS_MONO:
            mono = generate_mono(syn.spec, syn.mono_domain, syn.mono_size, syn.mono_seed, exclude=(dev, test))
            write_lines(d / "mono.txt", mono.sentences)
        if kind in _NEEDS_LM:
            lm = generate_mono(syn.spec, "relevant", syn.lm_mono_size, 1001, exclude=(dev, test))
            write_lines(d / "lm_mono_tgt.txt", lm.sentences)
        if kind == "augvic_gbt":
            lm = generate_mono(syn.spec, "relevant", syn.lm_mono_size, 1002, exclude=(dev, test), side="source")
            write_lines(d / "lm_mono_src.txt", lm.sentences)

    def learn_subwords(self) -> None:
        def produce():
            bpe = learn_bpe(self.train.sources + self.train.targets, self.spec.bpe_size)
            bpe.save(self.path("bpe.codes"))
            return {"symbols": len(bpe), "merges": len(bpe.merges)}

        self.stage("bpe", "data", ["bpe.codes"], None, produce)
        self.bpe = BpeModel.load(self.path("bpe.codes"))

    def encode(self, sentences) -> list[list[int]]:
        return [apply_bpe(self.bpe, s) for s in sentences]

    def encode_pairs(self, corpus: BitextCorpus, reverse: bool = False) -> list[tuple[list[int], list[int]]]:
        src, tgt = self.encode(corpus.sources), self.encode(corpus.targets)
        return list(zip(tgt, src)) if reverse else list(zip(src, tgt))

    def vicinal_lm(self, side: str) -> VicinalLm:
        if ("lm", side) not in self._memo:
            self._memo[("lm", side)] = self._vicinal_lm(side)
        return self._memo[("lm", side)]

    def _vicinal_lm(self, side: str) -> VicinalLm:
        key_name = f"lm_mono_{side}"
        out = f"lm_{side}"
        recipe = self.spec.mlm.replace(seed=stage_seed(self.spec.lm_seed, out))
        arch = preset(self.spec.arch)

        def produce():
            lm, res = train_vicinal_lm(load_mono(self.lm_paths[key_name]), arch, recipe)
            save_model(lm.model, self.path(f"{out}.ckpt"))
            lm.vocab.save(self.path(f"{out}.vocab.json"))
            return {"best_epoch": res.best_epoch, "dev_loss": res.best_dev_loss, "vocab": len(lm.vocab)}

        key = {"corpus": self.manifest["corpora"][key_name]["sha256"], "arch": arch.to_dict(),
               "recipe": recipe.to_dict()}
        self.stage(out, "train", [f"{out}.ckpt", f"{out}.vocab.json"], key, produce)
        return VicinalLm(load_model(self.path(f"{out}.ckpt")), WordVocab.load(self.path(f"{out}.vocab.json")))

    def augment(self, sentences, side: str, policy: DiversityPolicy, name: str, input_hash: str) -> MonoCorpus:
        lm = self.vicinal_lm(side)
        seed = stage_seed(self.spec.seed, name)
        files = [f"{name}.txt", f"{name}.origin"]

        def produce():
            stats = AugmentStats()
            corpus = augment_corpus(sentences, policy, lm, seed, threads=self.threads, stats=stats)
            write_augmented(corpus, self.path(files[0]), self.path(files[1]))
            return stats.to_dict()

        key = {"lm": self.artifact(f"lm_{side}.ckpt"), "input": input_hash, "policy": policy.to_dict(),
               "seed": seed}
        info = self.stage(name, "augment", files, key, produce)
        for k in ("ineligible", "duplicates", "no_maskable"):
            self.manifest["counters"][f"{name}_{k}"] += info[k]
        return read_augmented(self.path(files[0]), self.path(files[1]))

    def train_mt(self, name: str, pairs, dev_pairs, arch_name: str, key_extra: dict | None) -> Seq2SeqModel:
        arch = preset(arch_name)
        recipe = self.epochs_for(len(pairs)).replace(seed=stage_seed(self.spec.seed, name))
        direction = tuple(reversed(self.train.langs)) if name == "reverse" else self.train.langs

        def produce():
            model = Seq2SeqModel(arch, len(self.bpe), seed=recipe.seed, direction=direction)
            res = train_seq2seq(model, pairs, dev_pairs, recipe)
            save_model(model, self.path(f"{name}.ckpt"))
            return {"best_epoch": res.best_epoch, "dev_loss": res.best_dev_loss, "epochs": len(res.history),
                    "steps": res.steps, "pairs": len(pairs), "train_seconds": round(res.seconds, 3)}

        key = None
        if key_extra is not None:
            key = {"arch": arch.to_dict(), "recipe": recipe.to_dict(), "bpe": self.artifact("bpe.codes"),
                   "dev": self.manifest["corpora"]["dev_src"]["sha256"],
                   "dev_tgt": self.manifest["corpora"]["dev_tgt"]["sha256"], **key_extra}
        self.stage(name, "train", [f"{name}.ckpt"], key, produce)
        return load_model(self.path(f"{name}.ckpt"))

    def translate(self, model, inputs, beam: int) -> list[Sentence]:
        hyps = beam_search(model, inputs, beam=beam, length_penalty=self.spec.length_penalty)
        return [detokenize(self.bpe, h.tokens) for h in hyps]

    def reverse_model(self) -> Seq2SeqModel:
        if "reverse" not in self._memo:
            self._memo["reverse"] = self._reverse_model()
        return self._memo["reverse"]

    def _reverse_model(self) -> Seq2SeqModel:
        key = {"train": self.manifest["corpora"]["train_src"]["sha256"] + self.manifest["corpora"]["train_tgt"]["sha256"]}
        return self.train_mt("reverse", self.encode_pairs(self.train, True), self.encode_pairs(self.dev, True),
                             self.spec.arch, key)

    def back_translate(self, targets: MonoCorpus, name: str, input_hash: str) -> list[tuple[Sentence, Sentence]]:
        model = self.reverse_model()
        files = [f"{name}.src"]

        def produce():
            out = self.translate(model, self.encode(targets.sentences), self.spec.bt_beam)
            write_lines(self.path(files[0]), out)
            return {"sentences": len(out), "empty": sum(1 for s in out if not s.tokens)}

        key = {"model": self.artifact("reverse.ckpt"), "input": input_hash, "beam": self.spec.bt_beam,
               "lp": self.spec.length_penalty}
        info = self.stage(name, "decode", files, key, produce)
        self.manifest["counters"][f"{name}_empty"] += info["empty"]
        sources = load_mono_lines(self.path(files[0]))
        return list(zip(sources, targets.sentences))

    def guided_back_translate(self, vicinal: MonoCorpus, vic_hash: str) -> list[tuple[Sentence, Sentence]]:
        spec = self.spec
        src_policy = spec.policy.replace(n_prime=1)
        src_hash = self.manifest["corpora"]["train_src"]["sha256"]
        guides_train = self.augment(self.train.sources, "src", src_policy, "guide_train", src_hash)
        guides_dev = self.augment(self.dev.sources, "src", src_policy, "guide_dev",
                                  self.manifest["corpora"]["dev_src"]["sha256"])

        def triplets(corpus: BitextCorpus, guides: MonoCorpus, counter: str):
            x_tilde = list(corpus.sources)
            have = [False] * len(corpus)
            for s, o in zip(guides.sentences, guides.origin_index):
                x_tilde[o] = s
                have[o] = True
            self.manifest["counters"][counter] += have.count(False)
            y, xt, x = self.encode(corpus.targets), self.encode(x_tilde), self.encode(corpus.sources)
            return list(zip(y, xt, x))

        train_trip = triplets(self.train, guides_train, "guide_fallback_train")
        dev_trip = triplets(self.dev, guides_dev, "guide_fallback_dev")
        arch = preset(spec.arch)
        recipe = self.epochs_for(len(train_trip)).replace(seed=stage_seed(spec.seed, "guided"))

        def produce_model():
            model = GuidedBTModel(arch, len(self.bpe), lam=spec.lam, seed=recipe.seed,
                                  direction=tuple(reversed(self.train.langs)))
            res = train_guided_bt(model, train_trip, dev_trip, recipe)
            save_model(model, self.path("guided.ckpt"))
            return {"best_epoch": res.best_epoch, "dev_loss": res.best_dev_loss, "epochs": len(res.history),
                    "triplets": len(train_trip)}

        key = {"arch": arch.to_dict(), "recipe": recipe.to_dict(), "lam": spec.lam,
               "bpe": self.artifact("bpe.codes"), "guides": self.artifact("guide_train.txt"),
               "guides_dev": self.artifact("guide_dev.txt"), "train": src_hash}
        self.stage("guided", "train", ["guided.ckpt"], key, produce_model)
        model = load_model(self.path("guided.ckpt"))

        guides = [self.train.sources[o] for o in vicinal.origin_index]
        if Counter(g.raw for g in guides) != Counter(self.train.sources[o].raw for o in vicinal.origin_index):
            raise StageError("guide multiset differs from the origin sources")
        self.manifest["accounting"]["guides_match_origins"] = True

        def produce_bt():
            inputs = list(zip(self.encode(vicinal.sentences), self.encode(guides)))
            out = self.translate(model, inputs, spec.bt_beam)
            write_lines(self.path("vicinal_bt.src"), out)
            return {"sentences": len(out), "empty": sum(1 for s in out if not s.tokens)}

        info = self.stage("vicinal_bt", "decode", ["vicinal_bt.src"],
                          {"model": self.artifact("guided.ckpt"), "input": vic_hash, "beam": spec.bt_beam,
                           "lp": spec.length_penalty}, produce_bt)
        self.manifest["counters"]["vicinal_bt_empty"] += info["empty"]
        return list(zip(load_mono_lines(self.path("vicinal_bt.src")), vicinal.sentences))

    def vicinal_targets(self) -> tuple[MonoCorpus, str]:
        vic = self.augment(self.train.targets, "tgt", self.spec.policy, "vicinal",
                           self.manifest["corpora"]["train_tgt"]["sha256"])
        return vic, self.artifact("vicinal.txt")

    def final(self, synthetic: list[tuple[Sentence, Sentence]], arch_name: str, target_size: int | None = None) -> None:
        n = len(self.train)
        if target_size is None:
            target_size = max(n, round(self.spec.ratio * len(synthetic)))
        up = upsample(self.train, target_size, stage_seed(self.spec.seed, "upsample"))
        final_pairs = list(up.pairs) + synthetic
        acc = self.manifest["accounting"]
        acc.update({"upsampled": len(up), "upsample_factor": len(up) / n, "synthetic": len(synthetic),
                    "final": len(final_pairs)})
        if acc["final"] != round(n * acc["upsample_factor"]) + acc["synthetic"]:
            raise StageError("data accounting mismatch")
        write_parallel(BitextCorpus.from_pairs(final_pairs), self.path("final_train.src"), self.path("final_train.tgt"))
        src = self.encode(s for s, _ in final_pairs)
        tgt = self.encode(t for _, t in final_pairs)
        train_hash = file_hash(self.path("final_train.src")) + file_hash(self.path("final_train.tgt"))
        model = self.train_mt("final", list(zip(src, tgt)), self.encode_pairs(self.dev), arch_name,
                              {"train": train_hash})

        def produce():
            hyps = self.translate(model, self.encode(self.test.sources), self.spec.beam)
            write_lines(self.path("test.hyp"), hyps)

        key = {"model": self.artifact("final.ckpt"), "input": self.manifest["corpora"]["test_src"]["sha256"],
               "beam": self.spec.beam, "length_penalty": self.spec.length_penalty}
        self.stage("decode_test", "decode", ["test.hyp"], key, produce)
        hyps = load_mono_lines(self.path("test.hyp"))
        report = bleu(hyps, self.test.targets, "tokenized")
        self.manifest["metrics"]["test"] = report.to_dict()
        self.manifest["metrics"]["bleu"] = report.score


def load_mono_lines(path: Path) -> list[Sentence]:
    """Line-aligned read (no dedup, blanks kept) for decoder outputs."""
    text = path.read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return [Sentence.from_text(line) for line in lines]


# ---------------------------------------------------------------- recipes


def _execute(spec: RecipeSpec, out_dir, cache_dir, threads, body: Callable[[_Run], None]) -> dict:
    run = _Run(spec, out_dir, cache_dir, threads)
    t0 = time.perf_counter()
    try:
        run.load_data()
        run.learn_subwords()
        body(run)
    except Exception as exc:
        run.manifest["status"] = "failed"
        run.manifest["error"] = f"{type(exc).__name__}: {exc}"
        run.manifest["seconds"] = round(time.perf_counter() - t0, 3)
        run.write_manifest()
        raise
    run.manifest["status"] = "complete"
    run.manifest["seconds"] = round(time.perf_counter() - t0, 3)
    run.write_manifest()
    return json.loads(run.path(MANIFEST).read_text(encoding="utf-8"))


def run_baselines(spec: RecipeSpec, out_dir, cache_dir=None, threads: int = 1) -> dict:
    if spec.kind not in ("bitext", "upsample"):
        raise ValueError(f"run_baselines handles bitext/upsample, not {spec.kind}")

    def body(run: _Run):
        if spec.kind == "bitext":
            run.final([], spec.arch)
        else:
            vic, _ = run.vicinal_targets()
            augvic_size = max(len(run.train), round(spec.ratio * len(vic))) + len(vic)
            run.manifest["accounting"]["augvic_equivalent"] = augvic_size
            run.final([], spec.upsample_arch, target_size=augvic_size)

    return _execute(spec, out_dir, cache_dir, threads, body)


def _bt_mono_pairs(run: _Run):
    if run.mono is None or len(run.mono) == 0:
        return []
    return run.back_translate(run.mono, "mono_bt", run.manifest["corpora"]["mono"]["sha256"])


def run_bt_mono(spec: RecipeSpec, out_dir, cache_dir=None, threads: int = 1) -> dict:
    if spec.kind != "bt_mono":
        raise ValueError(f"run_bt_mono handles bt_mono, not {spec.kind}")
    return _execute(spec, out_dir, cache_dir, threads, lambda run: run.final(_bt_mono_pairs(run), spec.arch))


def _augvic_pairs(run: _Run):
    vic, vic_hash = run.vicinal_targets()
    if run.spec.kind == "augvic_gbt":
        pairs = run.guided_back_translate(vic, vic_hash)
    else:
        pairs = run.back_translate(vic, "vicinal_bt", vic_hash)
    if len(pairs) != len(vic):
        raise StageError("every vicinal sample must yield exactly one synthetic pair")
    return pairs


def run_augvic(spec: RecipeSpec, out_dir, cache_dir=None, threads: int = 1) -> dict:
    if spec.kind not in ("augvic_pbt", "augvic_gbt"):
        raise ValueError(f"run_augvic handles augvic_pbt/augvic_gbt, not {spec.kind}")
    return _execute(spec, out_dir, cache_dir, threads, lambda run: run.final(_augvic_pairs(run), spec.arch))


def run_combined(spec: RecipeSpec, out_dir, cache_dir=None, threads: int = 1) -> dict:
    if spec.kind != "augvic_plus_bt_mono":
        raise ValueError(f"run_combined handles augvic_plus_bt_mono, not {spec.kind}")

    def body(run: _Run):
        vic = _augvic_pairs(run)
        mono = _bt_mono_pairs(run)
        run.manifest["accounting"].update({"vicinal_synthetic": len(vic), "mono_synthetic": len(mono)})
        run.final(vic + mono, spec.arch)

    return _execute(spec, out_dir, cache_dir, threads, body)


_RUNNERS = {"bitext": run_baselines, "upsample": run_baselines, "bt_mono": run_bt_mono,
            "augvic_pbt": run_augvic, "augvic_gbt": run_augvic, "augvic_plus_bt_mono": run_combined}


def run_recipe(spec: RecipeSpec, out_dir, cache_dir=None, threads: int = 1) -> dict:
    return _RUNNERS[spec.kind](spec, out_dir, cache_dir, threads)


def load_manifest(path: str | Path) -> dict:
    p = Path(path)
    return json.loads((p / MANIFEST if p.is_dir() else p).read_text(encoding="utf-8"))


def rerun(manifest_path: str | Path, out_dir, cache_dir=None, threads: int = 1) -> dict:
    """Rebuild a run from the recipe recorded in its manifest."""
    return run_recipe(RecipeSpec.from_dict(load_manifest(manifest_path)["recipe"]), out_dir, cache_dir, threads)


def verify_manifest(run_dir: str | Path) -> list[str]:
    """Names of artifacts that are missing or whose hash differs; empty when the run is intact."""
    run_dir = Path(run_dir)
    m = load_manifest(run_dir)
    bad = []
    for st in m["stages"]:
        for name, digest in st["artifacts"].items():
            p = run_dir / name
            if not p.exists() or file_hash(p) != digest:
                bad.append(name)
    for name, rec in m["corpora"].items():
        p = Path(rec["path"])
        if not p.exists() or file_hash(p) != rec["sha256"]:
            bad.append(name)
    return bad


def training_stages(manifest: dict) -> list[str]:
    return [st["name"] for st in manifest["stages"] if st["kind"] == "train"]


def report_of(manifest: dict) -> BleuReport:
    return BleuReport.from_dict(manifest["metrics"]["test"])
