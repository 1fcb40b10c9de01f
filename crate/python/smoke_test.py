#!/usr/bin/env python3
"""Smoke test for the speg_py extension module.

Build the module first:

    cargo build --release -p speg-python

then run this script from anywhere inside the repository:

    python3 python/smoke_test.py
"""

import importlib.util
import pathlib
import sys


def load_module():
    root = pathlib.Path(__file__).resolve().parents[1]
    candidates = [
        root / "target" / profile / name
        for profile in ("release", "debug")
        for name in ("libspeg_py.so", "speg_py.so", "libspeg_py.dylib")
    ]
    for path in candidates:
        if path.exists():
            spec = importlib.util.spec_from_file_location("speg_py", path)
            module = importlib.util.module_from_spec(spec)
            spec.loader.exec_module(module)
            return module
    sys.exit(
        "speg_py library not found; run `cargo build --release -p speg-python` first"
    )


def close(a, b, tol):
    return abs(a - b) <= tol


def main():
    speg = load_module()

    config = speg.acc_config()
    ladder, penalty = config.build()
    print(f"built {ladder!r}, horizon {ladder.horizon}")
    assert ladder.horizon == 8
    assert penalty.theta == 2.0
    assert close(penalty.phi(1.0), 1.01, 1e-12)
    assert penalty.depth_weight(0) == 1024.0

    # The 0-step set is the raw state constraint box.
    state_set = ladder.step_set(0)
    assert state_set.contains_point([15.0, 0.0])
    assert not state_set.contains_point([9.0, 0.0])

    # Protected state: nominal zero input passes through.
    sol = speg.govern(ladder, penalty, [15.0, 0.0], [0.0])
    print(f"govern(15, 0): {sol!r}")
    assert sol.k_star == ladder.horizon + 1
    assert close(sol.u[0], 0.0, 1e-8)

    # Extension state: hardest brake, depth 5.
    sol = speg.govern(ladder, penalty, [15.0, -4.0], [0.0])
    print(f"govern(15, -4): {sol!r}")
    assert sol.k_star == 5
    assert close(sol.u[0], -2.0, 1e-6)

    # The series reference agrees on both depths.
    depth, _, _ = speg.solve_series(ladder, penalty, [15.0, 0.0], [0.0])
    assert depth == ladder.horizon + 1
    depth, _, _ = speg.solve_series(ladder, penalty, [15.0, -4.0], [0.0])
    assert depth == 5

    # Hard-braking scenario: depth counts down, gap violated at t = 7 with
    # the closed-form value.
    trace = speg.simulate(ladder, penalty, [15.0, -4.0], [0.0], "constant:-1", 8)
    assert trace.k_stars()[:7] == [5, 4, 3, 2, 1, 0, -1]
    assert all(close(u[0], -2.0, 1e-6) for u in trace.inputs()[:7])
    gap_at_7 = trace.states()[7][0]
    assert close(gap_at_7, 9.53125, 1e-9), gap_at_7
    assert trace.in_state_set()[6] and not trace.in_state_set()[7]
    print(f"scenario trace: k* {trace.k_stars()}, gap(7) = {gap_at_7}")

    # Ladder JSON round trip preserves behavior.
    reloaded = speg.SafeSetLadder.from_json(ladder.to_json())
    sol2 = speg.govern(reloaded, penalty, [15.0, -4.0], [0.0])
    assert sol2.k_star == 5

    # Polytope JSON round trip is exact.
    poly = speg.Polytope.from_rows(2, [[1.0, 0.0, 1.0], [-1.0, 0.5, 2.0]])
    assert poly.to_json() == speg.Polytope.from_json(poly.to_json()).to_json()

    print("OK")


if __name__ == "__main__":
    main()
