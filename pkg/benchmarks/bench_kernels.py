"""Time the compiled kernels against the numpy fallback on the same workload.

    python3 benchmarks/bench_kernels.py --samples 10000 --explain 200

Every stage is run once per backend; outputs are compared bitwise, so a
speedup is only reported for results that agree exactly.
"""

import argparse
import time

import numpy as np

from edgehealth import _backend, explain, gbdt
from edgehealth.data import generate_synthetic, train_test_split
from edgehealth.explain import BackgroundSet, LeafPaths, _coalition_values, explain_dataset


def _use(mod):
    gbdt.kernels = mod
    explain.kernels = mod


def _timed(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def run(samples, n_explain, brute, repeat):
    tr, te = train_test_split(generate_synthetic(samples, 0.3, 1), 0.2, 0)
    bg = BackgroundSet.from_dataset(tr, 256, 0)
    masks = np.arange(1 << tr.n_features, dtype=np.uint64)
    results = {}
    for name, mod in sorted(_backend.available_backends().items()):
        _use(mod)
        t_train, model = _timed(lambda: gbdt.train(tr), repeat)
        t_pred, margins = _timed(lambda: gbdt.predict_margins(model, te), repeat)
        t_expl, expl = _timed(lambda: explain_dataset(model, te, bg, range(n_explain)), repeat)
        t_brute, table = _timed(
            lambda: np.stack([_coalition_values(model, te.X[i], bg, masks) for i in range(brute)]), repeat)
        fast = np.stack([LeafPaths(model, bg).values(te.X[i], masks) for i in range(brute)])
        results[name] = {
            "train": (t_train, model.to_json()),
            "predict": (t_pred, margins.tobytes()),
            f"explain x{n_explain}": (t_expl, np.array([e.phi for e in expl]).tobytes()),
            f"brute coalitions x{brute}": (t_brute, table.tobytes()),
        }
        # the two coalition algorithms sum in different orders, so only closeness is expected
        results[name]["max |brute - fast|"] = float(np.abs(table - fast).max())
    _use(_backend.kernels)
    return results


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=10000)
    ap.add_argument("--explain", type=int, default=200, help="test samples to explain")
    ap.add_argument("--brute", type=int, default=3, help="samples for brute-force coalition tables")
    ap.add_argument("--repeat", type=int, default=1)
    args = ap.parse_args(argv)

    results = run(args.samples, args.explain, args.brute, args.repeat)
    names = sorted(results, key=lambda n: n != "python")  # fallback first
    stages = [k for k in results[names[0]] if not k.startswith("max")]
    print(f"{'stage':<26}" + "".join(f"{n:>10}" for n in names) + "   speedup  identical")
    for stage in stages:
        times = [results[n][stage][0] for n in names]
        same = len({results[n][stage][1] for n in names}) == 1
        speed = f"{times[0] / times[-1]:8.1f}x"  # fallback time over compiled time if len(names) > 1 else "       -"
        print(f"{stage:<26}" + "".join(f"{t:9.3f}s" for t in times) + f"  {speed}  {same}")
    for n in names:
        print(f"{n}: brute vs leaf-path coalition tables differ by at most {results[n]['max |brute - fast|']:.2e}")


if __name__ == "__main__":
    main()
