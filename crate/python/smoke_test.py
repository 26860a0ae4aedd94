#!/usr/bin/env python3
"""Smoke test for the sdd_dp extension module.

Builds the cdylib if needed, stages it under an importable name, and runs a
handful of end-to-end checks: the AR(1) benchmark radius, the two-state
closed form, a growth solve, and the job search accept set.

Usage: python3 python/smoke_test.py [--release]
"""

import argparse
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def build_and_import(release: bool):
    profile = "release" if release else "debug"
    cmd = ["cargo", "build", "-p", "sdd-dp-py"]
    if release:
        cmd.append("--release")
    subprocess.run(cmd, cwd=ROOT, check=True)

    lib = ROOT / "target" / profile / "libsdd_dp_py.so"
    if not lib.exists():  # macOS fallback
        lib = ROOT / "target" / profile / "libsdd_dp_py.dylib"
    if not lib.exists():
        sys.exit(f"extension library not found under target/{profile}")

    stage = pathlib.Path(tempfile.mkdtemp(prefix="sdd_dp_"))
    shutil.copy2(lib, stage / "sdd_dp.so")
    sys.path.insert(0, str(stage))
    import sdd_dp

    return sdd_dp


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--release", action="store_true", help="build optimized")
    args = parser.parse_args()
    m = build_and_import(args.release)

    # AR(1) benchmark: Rouwenhorst N=50, mu=0.985, rho=0.99, sigma_beta=0.01
    chain = m.rouwenhorst(0.985, 0.99, 50, sigma_beta=0.01)
    assert len(chain) == 50
    pi, unique = chain.stationary_distribution()
    assert unique
    mean = sum(p * s for p, s in zip(pi, chain.states))
    assert abs(mean - 0.985) < 1e-9, mean

    op = m.DiscountOperator(chain, chain.states)
    report = op.spectral_radius(tol=1e-8, n_max=1 << 22)
    assert abs(report.radius - 0.995) <= 0.002, report.radius
    assert report.certifies_contraction()
    print(f"benchmark radius: {report.radius:.6f} "
          f"(bounds [{report.lower:.6f}, {report.upper:.6f}])")

    # two-state closed form: r = max(beta_lo, p * beta_hi)
    two = m.MarkovChain([0.9, 1.05], [[1.0, 0.0], [0.1, 0.9]])
    rep2 = m.DiscountOperator(two, [0.9, 1.05]).spectral_radius(1e-10, 1 << 24)
    assert abs(rep2.radius - 0.945) < 1e-8, rep2.radius
    assert rep2.contraction_index is not None
    print(f"two-state radius: {rep2.radius:.12f}, "
          f"contraction index {rep2.contraction_index}")

    # resolvent of a constant discount is the geometric sum
    const = m.MarkovChain([0.0, 1.0], [[0.5, 0.5], [0.5, 0.5]])
    k = m.DiscountOperator(const, [0.9, 0.9]).resolvent_sum()
    assert all(abs(v - 10.0) < 1e-8 for v in k), k

    # growth solve reproduces the log/Cobb-Douglas closed form loosely
    single = m.MarkovChain([1.0], [[1.0]])
    sol = m.solve_growth(single, [0.95], m.grid(0.05, 0.5, 200), alpha=0.36)
    assert sol.bellman_residual < 1e-9
    assert sol.certificate.certifies_contraction()
    import math
    ab = 0.36 * 0.95
    closed = (math.log(1 - ab) + ab / (1 - ab) * math.log(ab)) / (1 - 0.95) \
        + 0.36 / (1 - ab) * math.log(0.2)
    k_grid = m.grid(0.05, 0.5, 200)
    idx = min(range(200), key=lambda i: abs(k_grid[i] - 0.2))
    assert abs(sol.value[idx][0] - closed) < 5e-3
    print(f"growth value at k=0.2: {sol.value[idx][0]:.6f} (closed form {closed:.6f})")

    # job search: flat wages and zero compensation accept everywhere
    iid = m.MarkovChain([0.0, 1.0], [[0.5, 0.5], [0.5, 0.5]])
    value, accept, k, _ = m.solve_search(iid, [1.0, 1.2], 0.0, [0.9, 0.9])
    assert accept == [True, True]
    assert all(abs(v - w * ki) < 1e-8 for v, w, ki in zip(value, [1.0, 1.2], k))
    print(f"search values: {value}")

    # homogeneous reduction and its certificate
    profile, savings, cert = m.solve_homogeneous(single, 0.5, [1.0], [0.5],
                                                 savings_points=2001)
    assert cert.certifies_contraction()
    assert 0.0 < savings[0] < 1.0
    print(f"homogeneous profile: {profile[0]:.8f}, savings rate {savings[0]:.4f}")

    print("smoke test passed")


if __name__ == "__main__":
    main()
