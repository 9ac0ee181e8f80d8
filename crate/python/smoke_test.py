"""Smoke test for the fraccalc extension module."""

import math
import sys
import tempfile
from pathlib import Path

import fraccalc


def check(name, cond, detail=""):
    print(f"[{'ok' if cond else 'FAIL'}] {name} {detail}".rstrip())
    return bool(cond)


def main():
    results = []

    grid = fraccalc.Grid(1, 128, 10.0)
    xs = [node[0] for node in grid.nodes()]
    g = fraccalc.Field(grid, [math.exp(-x * x) for x in xs])
    results.append(check("grid", len(grid) == 128 and abs(grid.spacing - 20.0 / 128) < 1e-15))

    sym = fraccalc.Symbol.fractional(0.5, 1.0)
    results.append(check("symbol", abs(sym(4.0) - 5.0**0.25) < 1e-15 and sym.beta == 0.5, repr(sym)))

    calc = fraccalc.Calculus(sym, 9.0, grid)
    u = calc.apply_ts(g)
    back = calc.apply_a(u)
    err = max(abs(a - b) for a, b in zip(back.values(), g.values()))
    results.append(check("inverse pair", err < 1e-10, f"{err:.1e}"))

    defect = abs(calc.h_norm(u, 2.0) - g.lp_norm(2.0)) / g.lp_norm(2.0)
    results.append(check("norm identity", defect < 1e-10, f"{defect:.1e}"))

    report = fraccalc.check_class(sym, 9.0, 1)
    results.append(check("class check", report["verdict"] is True, f"g2_ratio {report['g2_ratio']:.3f}"))

    lin = fraccalc.solve_linear(calc, g)
    results.append(check("linear solve", lin.converged and lin.iterations == 1))

    bump = [math.exp(1.0 - 1.0 / (1.0 - (x / 5.0) ** 2)) if abs(x) < 5.0 else 0.0 for x in xs]
    rho = fraccalc.Field(grid, [0.01 * b for b in bump])
    ac = fraccalc.solve_allen_cahn(rho, seed=4)
    consts = ac.constants()
    results.append(
        check(
            "allen-cahn",
            ac.converged and ac.certified and ac.u.radial_defect() == 0.0,
            f"residual {ac.final_residual:.1e}, rho_eps {consts['rho_eps']:.4f}",
        )
    )

    try:
        fraccalc.Calculus(sym, 1.0, grid).kernel()
        raised = False
    except fraccalc.FraccalcError:
        raised = True
    results.append(check("kernel precondition", raised))

    with tempfile.TemporaryDirectory() as tmp:
        code = fraccalc.run_cli(["presets", "--out", str(Path(tmp) / "out")])
    results.append(check("cli", code == 0, f"exit {code}"))

    return 0 if all(results) else 1


if __name__ == "__main__":
    sys.exit(main())
