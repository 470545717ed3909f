"""Time advance + valid_mask on both Earley kernels.

    python3 benchmarks/bench_mask.py [--repeat 5]
"""
import argparse
import time
from importlib import resources

from artdirector.grammar import advance, grammar_sample, compile_grammar, init_state, load_grammar, valid_mask
from artdirector.grammar._backend import available
from artdirector.provider import train_ngram
from artdirector.sampling import SamplingParams



def run(kernel, grammar, vocab, text, repeat):
    compiled = compile_grammar(grammar, kernel=kernel)
    pieces = [bytes([b]) for b in text.encode()]
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        state = init_state(compiled)
        for piece in pieces:
            valid_mask(state, vocab)
            state = advance(state, piece)
        best = min(best, time.perf_counter() - start)
    return best, len(pieces)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    data = resources.files("artdirector.data")
    grammar = load_grammar(data / "grammars" / "prompt.g")
    model = train_ngram(data.joinpath("corpus.txt").read_text())
    vocab = model.vocab
    text = grammar_sample(model, grammar, SamplingParams(seed=1, max_tokens=200))
    print(f"input: {text!r}")
    results = {k: run(k, grammar, vocab, text, args.repeat) for k in available()}
    for name, (secs, steps) in results.items():
        print(f"{name:>7}: {secs * 1e3:8.1f} ms for {steps} mask+advance steps "
              f"({secs / steps * 1e6:7.1f} us/step, |V|={len(vocab)})")
    if {"cython", "python"} <= results.keys():
        print(f"speedup: {results['python'][0] / results['cython'][0]:.1f}x")


if __name__ == "__main__":
    main()
