"""Time the hot kernels with numba enabled and with the pure-numpy fallback.

Each mode runs in its own interpreter because the backend is chosen at
import time from HYPGLOVE_DISABLE_NUMBA. JIT compilation is excluded by a
warm-up call on a tiny input.

    python3 benchmarks/bench_kernels.py [--corpus-bytes 1000000] [--repeat 3]
"""

import argparse
import json
import os
import subprocess
import sys
import tempfile
import time

WORKER = r"""
import json, sys, time
import numpy as np
from hypglove import _jit, analogy, corpus, hyperbolicity, trainer
from hypglove.hfunc import HFunction

path, repeat = sys.argv[1], int(sys.argv[2])
vocab = corpus.build_vocab(path)

def best(fn):
    fn_small()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)

def fn_small():
    small = corpus.count_cooccurrences(["a b c a b"], corpus.build_vocab(["a b c"]), window=2)
    trainer.train(small, trainer.TrainConfig(p=2, k=2, epochs=1))
    analogy.nearest_words(np.zeros((1, 2, 2)), np.zeros((3, 2, 2)) + 0.1)

m = corpus.count_cooccurrences(path, vocab, window=10)
cfg = trainer.TrainConfig(p=10, k=2, epochs=1, seed=0)
table = trainer.train(m, cfg).table
queries = table.target[:256]
metric = hyperbolicity.CoocMetric(m, HFunction("cosh_pow", 2))
out = {
    "numba": _jit.HAS_NUMBA,
    "cooccur": best(lambda: corpus.count_cooccurrences(path, vocab, window=10)),
    "train_epoch": best(lambda: trainer.train(m, cfg)),
    "nearest_256": best(lambda: analogy.nearest_words(queries, table.target)),
    "delta_20k": best(lambda: hyperbolicity.estimate_delta(metric, 20_000, 20_000)),
    "vocab": len(vocab),
    "nnz": m.nnz,
}
print(json.dumps(out))
"""


def run(mode_disabled, path, repeat):
    env = dict(os.environ, HYPGLOVE_DISABLE_NUMBA="1" if mode_disabled else "0")
    res = subprocess.run([sys.executable, "-c", WORKER, path, str(repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--corpus-bytes", type=int, default=1_000_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    from hypglove import synthetic

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "corpus.txt")
        synthetic.topic_corpus(path, args.corpus_bytes, vocab_size=1000, seed=0)
        t0 = time.perf_counter()
        fast = run(False, path, args.repeat)
        slow = run(True, path, args.repeat)
    print(f"corpus {args.corpus_bytes} bytes, V={fast['vocab']}, nnz={fast['nnz']}, "
          f"wall {time.perf_counter() - t0:.1f}s")
    print(f"{'kernel':<14}{'numba s':>12}{'numpy s':>12}{'speedup':>10}")
    for key in ("cooccur", "train_epoch", "nearest_256", "delta_20k"):
        print(f"{key:<14}{fast[key]:>12.4f}{slow[key]:>12.4f}{slow[key] / fast[key]:>10.1f}")
    if not fast["numba"]:
        print("numba is not installed; both columns used the numpy fallback")


if __name__ == "__main__":
    main()
