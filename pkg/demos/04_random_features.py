"""Random Fourier features: selection and weighting in a finite-dimensional RKHS.

The MMD is always measured in the exact kernel's norm.
"""

from fwbq.cli import ExperimentConfig, run_rff

cfg = ExperimentConfig("rff", ("FWLSBQ",), n_max=50, pool_size=2000, rff_features=(50, 500, 2000))
rows = run_rff(cfg)

table = {}
for r in rows:
    table.setdefault(r.method, {})[r.n] = r.mmd2

ns = sorted(table["FWLSBQ"])
print("method            " + "".join(f"{n:>10d}" for n in ns))
for method in sorted(table, key=lambda m: (len(m), m)):
    print(f"{method:17s} " + "".join(f"{table[method][n]:10.2e}" for n in ns))

# Few features give a rank-deficient kernel: the weights stop improving the
# exact-norm error once n approaches D.
