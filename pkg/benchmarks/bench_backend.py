"""Time the gmpy2 backend against the pure-Python fallback.

The backend is fixed at import, so each one is measured in a child process
started with HESEARCH_BACKEND set accordingly.

    python benchmarks/bench_backend.py --bits 2048 --reps 20
"""

import argparse
import json
import os
import random
import statistics
import subprocess
import sys
import time


def _time(fn, reps):
    fn()  # warm up
    samples = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return 1000 * statistics.median(samples)


def child(bits, reps):
    from hesearch import _backend as B
    from hesearch import paillier as P
    from hesearch.harness import pinned_keypair

    pk, sk = pinned_keypair(bits)
    rng = random.Random(0)
    m = rng.randrange(int(pk.n))
    base, exp = B.mpz(rng.randrange(int(pk.n_sq))), B.mpz(rng.randrange(int(pk.n)))
    c = P.encrypt(pk, m, rng)
    out = {
        "backend": B.name,
        "powmod (|e| = |n|, mod n^2)": _time(lambda: B.powmod(base, exp, pk.n_sq), reps),
        "encrypt (public key)": _time(lambda: P.encrypt(pk, m, rng), reps),
        "encrypt (secret-key CRT)": _time(lambda: P.encrypt(pk, m, rng, sk=sk), reps),
        "decrypt (CRT)": _time(lambda: P.decrypt(pk, sk, c), reps),
        "decrypt (textbook)": _time(lambda: P.decrypt_textbook(pk, sk, c), reps),
    }
    print(json.dumps(out))


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--bits", type=int, default=2048)
    ap.add_argument("--reps", type=int, default=20)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.child:
        return child(args.bits, args.reps)

    results = []
    for backend in ("gmpy2", "python"):
        env = dict(os.environ, HESEARCH_BACKEND=backend)
        cmd = [sys.executable, __file__, "--child", "--bits", str(args.bits), "--reps", str(args.reps)]
        proc = subprocess.run(cmd, env=env, capture_output=True, text=True)
        if proc.returncode:
            print(f"{backend}: unavailable ({proc.stderr.strip().splitlines()[-1]})")
            continue
        results.append(json.loads(proc.stdout))

    ops = [k for k in results[0] if k != "backend"]
    names = [r["backend"] for r in results]
    print(f"median ms per call at {args.bits}-bit keys, {args.reps} reps")
    print(f"{'operation':<30}" + "".join(f"{n:>12}" for n in names) + ("     speedup" if len(results) == 2 else ""))
    for op in ops:
        row = f"{op:<30}" + "".join(f"{r[op]:>12.3f}" for r in results)
        if len(results) == 2:
            row += f"{results[1][op] / results[0][op]:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
