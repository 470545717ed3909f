"""Command-line entry point: ``artdirector <group> <command> ...``.

Results go to stdout as JSON, diagnostics to stderr. Exit status is 0 on
success, 1 on a usage or input error, 2 on a domain error.
"""
from __future__ import annotations

import argparse
import contextlib
import copy
import json
import os
import sys
from importlib import resources
from pathlib import Path

from .errors import ArtDirectorError

DEFAULT_CONFIG_PATH = "ladi.json"

DEFAULT_CONFIG = {
    "model": {"kind": "ngram", "corpus_path": None, "order": 3, "alpha": 0.001},
    "seed": 0,
    "store_path": None,
    "palette_path": None,
    "defaults": {
        "beam_width": 8,
        "gamma": 1.5,
        "n_particles": 16,
        "ess_threshold": 0.5,
        "overlap_threshold": 0.5,
        "max_tokens": 24,
    },
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _data_path(name: str) -> str:
    return str(resources.files("artdirector.data").joinpath(name))


def load_config(path: str | None) -> dict:
    """Merge the JSON file at ``path`` over the built-in defaults.

    An explicit path must exist; the implicit ``./ladi.json`` is optional.
    """
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    explicit = path is not None
    path = path or DEFAULT_CONFIG_PATH
    if os.path.exists(path):
        with open(path, encoding="utf-8") as fh:
            user = json.load(fh)
        if not isinstance(user, dict):
            raise UsageError(f"config {path}: expected a JSON object")
        unknown = set(user) - set(cfg)
        if unknown:
            raise UsageError(f"config {path}: unknown keys {sorted(unknown)}")
        for key, value in user.items():
            if isinstance(cfg[key], dict):
                cfg[key].update(value)
            else:
                cfg[key] = value
        base = Path(path).parent
        for section, key in (("model", "corpus_path"), (None, "store_path"), (None, "palette_path")):
            holder = cfg[section] if section else cfg
            if holder.get(key) and not os.path.isabs(holder[key]):
                holder[key] = str(base / holder[key])
    elif explicit:
        raise UsageError(f"--config: no such file {path}")
    _validate_config(cfg)
    return cfg


def _validate_config(cfg: dict) -> None:
    model, d = cfg["model"], cfg["defaults"]
    if model["kind"] not in ("ngram", "remote"):
        raise UsageError(f"config: model.kind must be ngram or remote, got {model['kind']!r}")
    if model["kind"] == "remote" and not model.get("endpoint_url"):
        raise UsageError("config: model.endpoint_url is required for a remote model")
    for holder, key in ((model, "corpus_path"), (cfg, "store_path"), (cfg, "palette_path")):
        if holder.get(key) and not os.path.exists(holder[key]):
            raise UsageError(f"config: {key} {holder[key]} does not exist")
    if int(model["order"]) < 1 or float(model["alpha"]) <= 0:
        raise UsageError("config: model.order must be >= 1 and model.alpha > 0")
    if int(d["beam_width"]) < 1 or int(d["n_particles"]) < 1 or int(d["max_tokens"]) < 1:
        raise UsageError("config: beam_width, n_particles and max_tokens must be >= 1")
    if not 0 < float(d["ess_threshold"]) <= 1:
        raise UsageError("config: ess_threshold must lie in (0, 1]")
    if not 0 <= float(d["overlap_threshold"]) <= 1:
        raise UsageError("config: overlap_threshold must lie in [0, 1]")
    if float(d["gamma"]) < 0:
        raise UsageError("config: gamma must be >= 0")


def build_provider(cfg: dict):
    model = cfg["model"]
    if model["kind"] == "remote":
        from .provider import RemoteProvider
        return RemoteProvider(model["endpoint_url"])
    from .provider import train_ngram
    path = model.get("corpus_path") or _data_path("corpus.txt")
    with open(path, encoding="utf-8") as fh:
        corpus = fh.read()
    return train_ngram(corpus, order=int(model["order"]), alpha=float(model["alpha"]))


def _palettes(cfg: dict):
    from .constraints import load_palettes
    return load_palettes(cfg.get("palette_path"))


def _read_json(path: str):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _read_lines_or_json(path: str) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        return [line.strip() for line in text.splitlines() if line.strip()]
    if not isinstance(data, list) or not all(isinstance(s, str) for s in data):
        raise UsageError(f"{path}: expected a JSON list of strings")
    return data


# grammar ------------------------------------------------------------------

def cmd_grammar_check(args, cfg):
    from .grammar import load_grammar
    g = load_grammar(args.file)
    return {
        "start": g.start,
        "nonterminals": len(g.nonterminals),
        "terminals": len(g.terminals),
        "productions": len(g.productions),
    }


def cmd_grammar_enumerate(args, cfg):
    from .grammar import enumerate_language, load_grammar
    return sorted(enumerate_language(load_grammar(args.file), args.max))


# gen ----------------------------------------------------------------------

def _seed(args, cfg) -> int:
    return int(cfg["seed"] if args.seed is None else args.seed)


def _max_tokens(args, cfg) -> int:
    return int(cfg["defaults"]["max_tokens"] if args.max_tokens is None else args.max_tokens)


def cmd_gen_grammar(args, cfg):
    from .grammar import grammar_sample, load_grammar
    from .sampling import SamplingParams
    provider = build_provider(cfg)
    g = load_grammar(args.file)
    ctx = provider.tokenize(args.prompt) if args.prompt else ()
    params = SamplingParams(args.temperature, _seed(args, cfg), _max_tokens(args, cfg))
    return {"text": grammar_sample(provider, g, params, context=ctx)}


def cmd_gen_beam(args, cfg):
    from .beam import beam_search, seasonal_series
    from .constraints import ConstraintSpec
    provider = build_provider(cfg)
    spec = _read_json(args.constraints)
    if isinstance(spec, list):
        spec = {"constraints": spec}
    width = int(cfg["defaults"]["beam_width"] if args.width is None else args.width)
    max_tokens = _max_tokens(args, cfg)
    table = _palettes(cfg)
    ctx = provider.tokenize(spec["prompt"]) if spec.get("prompt") else ()
    if "series" in spec:
        series = spec["series"]
        anchor = ConstraintSpec.subject_anchor(series["anchor"])
        hyps = seasonal_series(provider, anchor, series["palettes"], width=width,
                               palette_table=table, max_tokens=max_tokens, context=ctx)
    else:
        constraints = [ConstraintSpec.from_json(c, table) for c in spec["constraints"]]
        hyps = beam_search(provider, constraints, width=width, max_tokens=max_tokens,
                           seed=_seed(args, cfg), context=ctx)
        hyps = hyps[: args.top]
    return [{"text": h.text, "score": round(h.score, 9)} for h in hyps]


def cmd_gen_smc(args, cfg):
    from .smc import SteeringProgram, smc_run
    provider = build_provider(cfg)
    raw = _read_json(args.program)
    d = cfg["defaults"]
    raw.setdefault("n_particles", d["n_particles"])
    raw.setdefault("ess_threshold", d["ess_threshold"])
    raw.setdefault("max_tokens", d["max_tokens"])
    raw.setdefault("seed", cfg["seed"])
    on_budget = raw.pop("on_budget", "error")
    program = SteeringProgram.from_json(raw)
    result = smc_run(program, provider, seed=args.seed, threads=args.threads,
                     on_budget=on_budget)
    return {
        "samples": [{"text": t, "weight": round(w, 9)} for t, w in result.samples],
        "resamples": result.resamples,
        "unfinished": result.unfinished,
    }


def cmd_gen_guided(args, cfg):
    from .guidance import (
        GuidanceConfig,
        NegativeDemoStore,
        blacklist_for_words,
        build_negative_context,
        select_negative_demos,
        guided_decode,
    )
    from .sampling import SamplingParams
    provider = build_provider(cfg)
    gamma = float(cfg["defaults"]["gamma"] if args.gamma is None else args.gamma)
    negative = ()
    if args.negative:
        demos = select_negative_demos(args.prompt, NegativeDemoStore.load(args.negative), args.k)
        negative = tuple(build_negative_context(demos, provider.vocab))
    banned = tuple(args.ban or ())
    config = GuidanceConfig(gamma=gamma, negative_context=negative,
                            blacklist=blacklist_for_words(provider.vocab, banned),
                            banned_words=banned)
    params = SamplingParams(args.temperature, _seed(args, cfg), _max_tokens(args, cfg))
    return {"text": guided_decode(provider, args.prompt, config, params)}


def cmd_gen_direct(args, cfg):
    from .director import DirectOptions, direct
    from .grammar import load_grammar
    from .guidance import NegativeDemoStore
    from .retrieval import PromptStore
    provider = build_provider(cfg)
    store = PromptStore.load(_store_path(cfg))
    options = DirectOptions(
        grammar=load_grammar(args.grammar) if args.grammar else None,
        gamma=float(cfg["defaults"]["gamma"] if args.gamma is None else args.gamma),
        negative_demos=NegativeDemoStore.load(args.negative) if args.negative else None,
        blacklist_words=tuple(args.ban or ()),
        seed=_seed(args, cfg),
        max_tokens=_max_tokens(args, cfg),
        temperature=args.temperature,
    )
    return {"text": direct(provider, store, args.request, options)}


# prompt -------------------------------------------------------------------

def cmd_prompt_build(args, cfg):
    from .director import PromptSpec, apply_emphasis, build_prompt
    raw = _read_json(args.spec)
    emphasis = raw.pop("emphasis", None)
    prompt = build_prompt(PromptSpec.from_json(raw))
    if emphasis:
        prompt = apply_emphasis(prompt, [(e["phrase"], e["weight"]) for e in emphasis])
    return prompt


def cmd_prompt_travel(args, cfg):
    from .director import keyframe_schedule
    stages = _read_lines_or_json(args.stages)
    try:
        frames = [int(x) for x in args.frames.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"--frames: expected comma-separated integers, got {args.frames!r}")
    threshold = float(cfg["defaults"]["overlap_threshold"]
                      if args.threshold is None else args.threshold)
    return keyframe_schedule(args.anchor, stages, frames, overlap_threshold=threshold).to_json()


# store --------------------------------------------------------------------

def _store_path(cfg) -> str:
    return cfg.get("store_path") or _data_path("prompts.jsonl")


def cmd_store_add(args, cfg):
    from .retrieval import PromptExample, PromptStore
    path = args.store or cfg.get("store_path")
    if not path:
        raise UsageError("store add needs --store or store_path in the config")
    store = PromptStore.load(path) if os.path.exists(path) else PromptStore(path=path)
    with open(args.file, encoding="utf-8") as fh:
        rows = [json.loads(line) for line in fh if line.strip()]
    added = [PromptExample(r["id"], r["text"], tuple(r.get("tags", ())),
                           float(r.get("quality", 1.0))) for r in rows]
    store = store.add_many(added)
    return {"added": [e.id for e in added], "size": len(store)}


def cmd_store_query(args, cfg):
    from .retrieval import PromptStore, knn
    path = args.store or _store_path(cfg)
    query = args.query
    if os.path.isfile(query):
        with open(query, encoding="utf-8") as fh:
            query = fh.read().strip()
    return [{"id": e.id, "text": e.text} for e in knn(PromptStore.load(path), query, args.k)]


# parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = _Parser(prog="artdirector", formatter_class=fmt,
                description="Prompt generation toolkit for text-to-image models.")
    p.add_argument("--config", type=str, default=None,
                   help=f"JSON config file (default: ./{DEFAULT_CONFIG_PATH} when present)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for SMC steps")
    groups = p.add_subparsers(dest="group", required=True, parser_class=_Parser)

    def sub(parent, name, func, help_):
        sp = parent.add_parser(name, help=help_, formatter_class=fmt)
        sp.set_defaults(func=func)
        return sp

    def sampling_flags(sp):
        sp.add_argument("--seed", type=int, default=None, help="RNG seed (default: config seed)")
        sp.add_argument("--max-tokens", type=int, default=None,
                        help="token budget (default: config defaults.max_tokens)")
        sp.add_argument("--temperature", type=float, default=1.0, help="sampling temperature")

    g = groups.add_parser("grammar", help="inspect grammar files").add_subparsers(
        dest="cmd", required=True, parser_class=_Parser)
    sp = sub(g, "check", cmd_grammar_check, "parse and validate a grammar file")
    sp.add_argument("file", type=str, help="grammar file")
    sp = sub(g, "enumerate", cmd_grammar_enumerate, "list the language up to N terminals")
    sp.add_argument("file", type=str, help="grammar file")
    sp.add_argument("--max", type=int, required=True, help="maximum number of terminals")

    gen = groups.add_parser("gen", help="generate text").add_subparsers(
        dest="cmd", required=True, parser_class=_Parser)
    sp = sub(gen, "grammar", cmd_gen_grammar, "sample a string of the grammar's language")
    sp.add_argument("file", type=str, help="grammar file")
    sp.add_argument("--prompt", type=str, default="", help="conditioning text")
    sampling_flags(sp)

    sp = sub(gen, "beam", cmd_gen_beam, "constrained beam search")
    sp.add_argument("--constraints", type=str, required=True,
                    help="JSON file with constraints (or a series)")
    sp.add_argument("--width", type=int, default=None,
                    help="beam width (default: config defaults.beam_width)")
    sp.add_argument("--top", type=int, default=5, help="number of hypotheses to print")
    sp.add_argument("--seed", type=int, default=None, help="RNG seed (default: config seed)")
    sp.add_argument("--max-tokens", type=int, default=None,
                    help="token budget (default: config defaults.max_tokens)")

    sp = sub(gen, "smc", cmd_gen_smc, "SMC steering with forbidden words")
    sp.add_argument("program", type=str, help="steering program JSON")
    sp.add_argument("--seed", type=int, default=None, help="override the program seed")

    sp = sub(gen, "guided", cmd_gen_guided, "decoding with negative guidance")
    sp.add_argument("--prompt", type=str, required=True, help="conditioning text")
    sp.add_argument("--gamma", type=float, default=None,
                    help="guidance scale (default: config defaults.gamma)")
    sp.add_argument("--negative", type=str, default=None, help="negative demos JSONL")
    sp.add_argument("--k", type=int, default=3, help="negative demos to retrieve")
    sp.add_argument("--ban", action="append", metavar="WORD", help="word kept out of the text")
    sampling_flags(sp)

    sp = sub(gen, "direct", cmd_gen_direct, "retrieval plus decoding in one step")
    sp.add_argument("request", type=str, help="what the image should show")
    sp.add_argument("--grammar", type=str, default=None, help="grammar file to constrain output")
    sp.add_argument("--gamma", type=float, default=None,
                    help="guidance scale (default: config defaults.gamma)")
    sp.add_argument("--negative", type=str, default=None, help="negative demos JSONL")
    sp.add_argument("--ban", action="append", metavar="WORD", help="word kept out of the text")
    sampling_flags(sp)

    pr = groups.add_parser("prompt", help="build prompts").add_subparsers(
        dest="cmd", required=True, parser_class=_Parser)
    sp = sub(pr, "build", cmd_prompt_build, "assemble a checklist prompt")
    sp.add_argument("spec", type=str, help="prompt spec JSON")
    sp = sub(pr, "travel", cmd_prompt_travel, "keyframe schedule for prompt travel")
    sp.add_argument("--anchor", type=str, required=True, help="subject kept in every frame")
    sp.add_argument("--stages", type=str, required=True,
                    help="JSON list or text file of stage descriptions")
    sp.add_argument("--frames", type=str, required=True, help="comma-separated frame indices")
    sp.add_argument("--threshold", type=float, default=None,
                    help="minimum adjacent overlap (default: config defaults.overlap_threshold)")

    st = groups.add_parser("store", help="prompt example store").add_subparsers(
        dest="cmd", required=True, parser_class=_Parser)
    sp = sub(st, "add", cmd_store_add, "add examples from a JSONL file")
    sp.add_argument("file", type=str, help="JSONL of {id, text, tags, quality}")
    sp.add_argument("--store", type=str, default=None, help="store file (default: config)")
    sp = sub(st, "query", cmd_store_query, "nearest stored examples")
    sp.add_argument("query", type=str, help="query text, or a file holding it")
    sp.add_argument("--k", type=int, default=5, help="number of neighbours")
    sp.add_argument("--store", type=str, default=None, help="store file (default: config)")
    return p


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(stderr):
            args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.threads < 1:
        print("artdirector: error: --threads must be >= 1", file=stderr)
        return 1
    try:
        cfg = load_config(args.config)
        result = args.func(args, cfg)
    except ArtDirectorError as exc:
        print(f"{type(exc).__name__}: {exc}", file=stderr)
        return 2
    except UsageError as exc:
        print(f"artdirector: error: {exc}", file=stderr)
        return 1
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"artdirector: error: {exc}", file=stderr)
        return 1
    json.dump(result, stdout, ensure_ascii=True)
    stdout.write("\n")
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
