"""Command-line entry point: ``vicinal-mt <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 runtime error.  Every subcommand that
writes files writes them under ``--out`` only.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from threadpoolctl import threadpool_limits

log = logging.getLogger("vicinal_mt")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _default_threads() -> int:
    env = os.environ.get("VICINAL_MT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"VICINAL_MT_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _read_json(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise UsageError(f"{path}: expected a JSON object")
    return data


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- subcommands


def cmd_synth(args) -> None:
    from .synthlang import SynthSpec, write_synthetic

    d = _read_json(args.config) if args.config else {}
    spec = SynthSpec.from_dict({**d, "seed": args.seed})
    sizes = {}
    for item in args.mono:
        domain, _, size = item.partition(":")
        if domain not in ("relevant", "distant") or not size.isdigit():
            raise UsageError(f"--mono expects relevant:N or distant:N, got {item!r}")
        sizes[domain] = int(size)
    record = write_synthetic(spec, _out(args), sizes)
    log.info("wrote %s", sorted(record["files"]))


def cmd_bpe(args) -> None:
    from .corpus import Sentence, write_lines
    from .subword import BpeModel, apply_bpe, learn_bpe

    out = _out(args)
    if args.bpe_command == "learn":
        texts = [s for path in args.input for s in _lines(path)]
        model = learn_bpe(texts, args.vocab_size)
        model.save(out / "bpe.codes")
        log.info("learned %d merges, %d symbols", len(model.merges), len(model))
    else:
        model = BpeModel.load(args.codes)
        sents = _lines(args.input)
        write_lines(out / (Path(args.input).name + ".bpe"),
                    (Sentence.from_tokens(model.symbols[i] for i in apply_bpe(model, s)) for s in sents))


def _lines(path):
    from .pipeline import load_mono_lines

    return load_mono_lines(Path(path))


def cmd_train_mlm(args) -> None:
    from .corpus import load_mono
    from .seq2seq import TrainingRecipe, preset
    from .vicinal import train_vicinal_lm

    recipe = TrainingRecipe.from_dict(_read_json(args.recipe)) if args.recipe else TrainingRecipe(max_epochs=8)
    recipe = recipe.replace(seed=args.seed)
    lm, res = train_vicinal_lm(load_mono(args.mono), preset(args.arch), recipe, args.min_count, args.mask_prob)
    out = _out(args)
    lm.save(out)
    _write_json(out / "train_mlm.json", {"best_epoch": res.best_epoch, "dev_loss": res.best_dev_loss,
                                         "history": res.history, "recipe": recipe.to_dict()})


def cmd_augment(args) -> None:
    from .vicinal import AugmentStats, DiversityPolicy, VicinalLm, augment_corpus, write_augmented

    policy = DiversityPolicy.from_dict(_read_json(args.policy)) if args.policy else DiversityPolicy()
    lm = VicinalLm.load(args.lm)
    stats = AugmentStats()
    corpus = augment_corpus(_lines(args.input), policy, lm, args.seed, threads=args.threads, stats=stats)
    out = _out(args)
    name = Path(args.input).name
    write_augmented(corpus, out / f"{name}.vicinal", out / f"{name}.vicinal.origin")
    _write_json(out / "augment.json", {"policy": policy.to_dict(), "seed": args.seed, "stats": stats.to_dict()})


def cmd_train(args) -> None:
    from .corpus import load_parallel
    from .seq2seq import Seq2SeqModel, TrainingRecipe, preset, save_model, train_seq2seq
    from .subword import BpeModel, apply_bpe

    bpe = BpeModel.load(args.codes)
    recipe = TrainingRecipe.from_dict(_read_json(args.recipe)) if args.recipe else TrainingRecipe(batch_tokens=512)
    recipe = recipe.replace(seed=args.seed)

    def enc(src, tgt):
        c = load_parallel(src, tgt)
        return [(apply_bpe(bpe, s), apply_bpe(bpe, t)) for s, t in c.pairs], c.langs

    train, langs = enc(args.train_src, args.train_tgt)
    dev, _ = enc(args.dev_src, args.dev_tgt)
    model = Seq2SeqModel(preset(args.arch), len(bpe), seed=args.seed, direction=langs)
    res = train_seq2seq(model, train, dev, recipe)
    out = _out(args)
    save_model(model, out / "model.ckpt")
    _write_json(out / "train.json", {"best_epoch": res.best_epoch, "dev_loss": res.best_dev_loss,
                                     "history": res.history, "recipe": recipe.to_dict(), "arch": args.arch})


def cmd_decode(args) -> None:
    from .corpus import write_lines
    from .seq2seq import GuidedBTModel, beam_search, load_model
    from .subword import BpeModel, apply_bpe, detokenize

    bpe = BpeModel.load(args.codes)
    model = load_model(args.model)
    inputs = [apply_bpe(bpe, s) for s in _lines(args.input)]
    if isinstance(model, GuidedBTModel):
        if not args.guide:
            raise UsageError("a guided model needs --guide")
        guides = [apply_bpe(bpe, s) for s in _lines(args.guide)]
        if len(guides) != len(inputs):
            raise ValueError(f"{len(inputs)} inputs but {len(guides)} guides")
        inputs = list(zip(inputs, guides))
    elif args.guide:
        raise UsageError("--guide only applies to guided models")
    hyps = beam_search(model, inputs, beam=args.beam, length_penalty=args.length_penalty)
    write_lines(_out(args) / (Path(args.input).name + ".hyp"), (detokenize(bpe, h.tokens) for h in hyps))


def cmd_score(args) -> None:
    from .eval import bleu

    report = bleu(_lines(args.hyp), _lines(args.ref), args.mode)
    print(json.dumps(report.to_dict(), sort_keys=True))
    if args.out:
        _write_json(_out(args) / "bleu.json", report.to_dict())


def cmd_run(args) -> None:
    from .pipeline import RecipeSpec, run_recipe

    try:
        spec = RecipeSpec.from_dict(_read_json(args.recipe))
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{args.recipe}: {exc}") from None
    if args.seed is not None:
        spec = spec.replace(seed=args.seed)
    manifest = run_recipe(spec, _out(args), cache_dir=args.cache, threads=args.threads)
    print(f"{spec.kind} seed={spec.seed} BLEU {manifest['metrics']['bleu']:.2f}")


def cmd_report(args) -> None:
    from .eval import compare, dumps, format_table
    from .pipeline import load_manifest, report_of

    reports = {}
    for item in args.manifests:
        name, sep, path = item.partition("=")
        if not sep:
            name, path = Path(item).name, item
        reports[name] = report_of(load_manifest(path))
    table = compare(reports, args.baseline or next(iter(reports)))
    print(format_table(table) if args.format == "text" else dumps(table))
    if args.out:
        _write_json(_out(args) / "report.json", table)


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = _Parser(prog="vicinal-mt", formatter_class=fmt,
                description="Vicinal-sample augmentation and back-translation for low-resource MT.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_text, out_required=True, seed_default=0):
        sp = sub.add_parser(name, help=help_text, description=help_text, formatter_class=fmt)
        sp.set_defaults(func=func)
        sp.add_argument("--out", required=out_required, default=None, help="output directory")
        sp.add_argument("--seed", type=int, default=seed_default, help="seed for all randomness")
        sp.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $VICINAL_MT_THREADS or all cores)")
        return sp

    sp = add("synth", cmd_synth, "generate a synthetic language pair")
    sp.add_argument("--config", default=None, help="JSON file with SynthSpec fields")
    sp.add_argument("--mono", action="append", default=[], metavar="DOMAIN:N",
                    help="also write N target-language sentences from DOMAIN (relevant|distant)")

    sp = add("bpe", cmd_bpe, "learn or apply joint BPE")
    bsub = sp.add_subparsers(dest="bpe_command", required=True, parser_class=_Parser)
    lp = bsub.add_parser("learn", help="learn merges", formatter_class=fmt)
    lp.add_argument("--input", nargs="+", required=True, help="text files, one sentence per line")
    lp.add_argument("--vocab-size", type=int, required=True, help="target symbol count incl. specials")
    ap = bsub.add_parser("apply", help="segment a file", formatter_class=fmt)
    ap.add_argument("--codes", required=True, help="BPE model file")
    ap.add_argument("--input", required=True, help="text file to segment")

    sp = add("train-mlm", cmd_train_mlm, "train the word-level masked LM used for vicinal samples")
    sp.add_argument("--mono", required=True, help="monolingual text file")
    sp.add_argument("--arch", default="desk", help="architecture preset")
    sp.add_argument("--recipe", default=None, help="JSON TrainingRecipe")
    sp.add_argument("--min-count", type=int, default=1, help="vocabulary frequency cutoff")
    sp.add_argument("--mask-prob", type=float, default=0.15, help="fraction of tokens selected for masking")

    sp = add("augment", cmd_augment, "generate vicinal samples of a text file")
    sp.add_argument("--input", required=True, help="text file, one sentence per line")
    sp.add_argument("--lm", required=True, help="directory written by train-mlm")
    sp.add_argument("--policy", default=None, help="JSON DiversityPolicy")

    sp = add("train", cmd_train, "train a translation model")
    for name in ("train-src", "train-tgt", "dev-src", "dev-tgt"):
        sp.add_argument(f"--{name}", required=True, help=f"{name.replace('-', ' ')} file")
    sp.add_argument("--codes", required=True, help="BPE model file")
    sp.add_argument("--arch", default="desk", help="architecture preset")
    sp.add_argument("--recipe", default=None, help="JSON TrainingRecipe")

    sp = add("decode", cmd_decode, "translate a file with beam search")
    sp.add_argument("--model", required=True, help="model checkpoint")
    sp.add_argument("--codes", required=True, help="BPE model file")
    sp.add_argument("--input", required=True, help="text file to translate")
    sp.add_argument("--guide", default=None, help="guide sentences, line-aligned (guided models only)")
    sp.add_argument("--beam", type=int, default=5, help="beam size")
    sp.add_argument("--length-penalty", type=float, default=1.0, help="length normalisation exponent")

    sp = add("score", cmd_score, "corpus BLEU of a hypothesis file", out_required=False)
    sp.add_argument("--hyp", required=True, help="hypotheses, one per line")
    sp.add_argument("--ref", required=True, help="references, one per line")
    sp.add_argument("--mode", choices=("tokenized", "detokenized"), default="tokenized", help="scoring mode")

    sp = add("run", cmd_run, "run a full recipe from a JSON file", seed_default=None)
    sp.add_argument("recipe", help="JSON RecipeSpec")
    sp.add_argument("--cache", default=None, help="stage cache directory shared between runs")

    sp = add("report", cmd_report, "compare the test BLEU of finished runs", out_required=False)
    sp.add_argument("manifests", nargs="+", help="run directories or manifest files, optionally NAME=PATH")
    sp.add_argument("--baseline", default=None, help="name of the baseline row (default: first)")
    sp.add_argument("--format", choices=("text", "json"), default="text", help="output format")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.threads is None:
            args.threads = _default_threads()
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE

    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        with threadpool_limits(args.threads):
            args.func(args)
    except UsageError as exc:
        print(f"vicinal-mt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        log.debug("failure", exc_info=True)
        print(f"vicinal-mt: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
