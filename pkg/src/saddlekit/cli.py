"""Command-line front end: kernels -> geometry -> solves -> verification.

Subcommands: kernel-check, layer, eigen, saddle, evolve, verify, torsion.
Every run is driven by a config file and a seed and emits a plain-text
report plus CSV artifacts into the output directory; identical (config,
seed, version) reproduce identical outputs.  Exit codes: 0 all checks pass,
1 a property check failed, 2 usage or configuration error, 3 numerical
failure inside a solver.
"""

from __future__ import annotations

import argparse
import os
import sys


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="saddlekit", description=__doc__)
    parser.add_argument("command", choices=["kernel-check", "layer", "eigen",
                                            "saddle", "evolve", "verify", "torsion"])
    parser.add_argument("--config", required=True, help="run configuration file")
    parser.add_argument("--out", default=None, help="output directory override")
    parser.add_argument("--seed", type=int, default=None, help="seed override")
    parser.add_argument("--threads", type=int, default=None,
                        help="bound on BLAS/solver worker threads")
    parser.add_argument("--only", default=None,
                        help="verify: run a single family (weak-mp, narrow-mp, "
                             "abp, linearized-mp, stability, torsion-growth)")
    parser.add_argument("--dump-kbar", default=None,
                        help="kernel-check: dump averaged-kernel samples to CSV")
    args = parser.parse_args(argv)

    # bound worker threads before the numerical stack spins up
    threads = args.threads
    if threads is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(threads)

    from .config import RunConfig, ConfigError

    try:
        cfg = RunConfig.from_file(args.config)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    if args.out is not None:
        cfg.out = args.out
    if args.seed is not None:
        cfg.seed = args.seed
    if threads is not None:
        cfg.threads = threads
    os.makedirs(cfg.out, exist_ok=True)

    from .config import ConfigError as _CE
    try:
        handler = _HANDLERS[args.command]
        return handler(cfg, args)
    except _CE as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    except ArithmeticError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _report(cfg, title):
    from .reporting import Report
    return Report(title=title, config_hash=cfg.config_hash, seed=cfg.seed)


def cmd_kernel_check(cfg, args) -> int:
    import numpy as np
    from .kernels import check_ellipticity, check_sqrt_convexity, reduce_to_1d, frac_constant
    rep = _report(cfg, "kernel admissibility")
    K = cfg.kernel()
    ell = check_ellipticity(K)
    rep.check("ellipticity envelope", ell.passed,
              f"ratios in [{ell.ratio_min:.6g}, {ell.ratio_max:.6g}] vs "
              f"[{K.lam}, {K.Lam}] over {ell.samples} samples",
              tolerance="two-sided bounds at every sample")
    conv = check_sqrt_convexity(K)
    rep.check("sqrt-variable convexity", conv,
              "second divided differences strictly positive" if conv
              else "second divided difference nonpositive somewhere",
              tolerance="1e-12 relative strictness")
    k1 = reduce_to_1d(K)
    env = (np.array([k1(t) * t ** (1 + 2 * K.order) for t in
                     np.logspace(-3, 3, 61)]) / frac_constant(1, K.order))
    rep.check("reduced kernel ellipticity", bool(env.min() >= K.lam * (1 - 1e-6)
                                                 and env.max() <= K.Lam * (1 + 1e-6)),
              f"1-D envelope [{env.min():.6g}, {env.max():.6g}]",
              tolerance="inherited (lambda, Lambda)")
    if args.dump_kbar:
        from .radial_geometry import AveragedKernelCache
        cache = AveragedKernelCache(K, m=cfg.m)
        rng = np.random.default_rng(cfg.seed)
        with open(args.dump_kbar, "w") as f:
            f.write("s,t,sigma,tau,kbar\n")
            for _ in range(200):
                s, t = sorted(rng.uniform(0.1, 5.0, 2))[::-1]
                sig, tau = sorted(rng.uniform(0.1, 5.0, 2))[::-1]
                if abs(s - sig) + abs(t - tau) < 1e-6:
                    continue
                v = cache.averaged_vec(s, t, np.array([sig]), np.array([tau]))[0]
                f.write(f"{s:.17g},{t:.17g},{sig:.17g},{tau:.17g},{v:.17g}\n")
        rep.info(f"averaged-kernel samples written to {args.dump_kbar}")
    rep.write(os.path.join(cfg.out, "kernel_check.txt"))
    print(rep.render())
    return 0 if rep.passed else 1


def cmd_layer(cfg, args) -> int:
    from .kernels import reduce_to_1d
    from .layer1d import (solve_layer, check_layer_decay, check_second_derivative,
                          validate_nonlinearity)
    rep = _report(cfg, "transition layer")
    K = cfg.kernel()
    nl = cfg.nonlinearity()
    flags = validate_nonlinearity(nl)
    rep.check("nonlinearity admissibility", flags.all_passed, str(flags.worst),
              tolerance="odd/zero defects 1e-12, strict concavity on (0,1)")
    if not flags.all_passed:
        rep.write(os.path.join(cfg.out, "layer_report.txt"))
        print(rep.render())
        return 1
    k1 = reduce_to_1d(K)
    layer = solve_layer(k1, nl, L=cfg.layer_L, h=cfg.layer_h)
    rep.info(f"flow steps {layer.flow_steps}, newton steps {layer.newton_steps}, "
             f"residual {layer.residual_sup:.3e}")
    rep.check("interior residual", layer.residual_sup < 1e-8,
              f"sup residual {layer.residual_sup:.3e}", tolerance="1e-8")
    dec = check_layer_decay(layer)
    rep.check("algebraic decay exponents", dec.passed,
              f"|u-1| ~ x^{dec.gap_exponent:.3f} (law {dec.expected_gap}), "
              f"|u'| ~ x^{dec.slope_exponent:.3f} (law {dec.expected_slope})",
              tolerance="+-0.2")
    conc = check_second_derivative(layer)
    rep.check("second-derivative signs", conc.passed,
              f"max interior u'' = {conc.worst_interior:.3e}; "
              f"end magnitude {conc.end_magnitude:.3e} < {conc.end_bound:.3e}",
              tolerance="strictly negative on (h, L-1); decaying at ends")
    layer.to_csv(os.path.join(cfg.out, "layer.csv"),
                 meta={"config": cfg.config_hash, "seed": cfg.seed})
    rep.write(os.path.join(cfg.out, "layer_report.txt"))
    print(rep.render())
    return 0 if rep.passed else 1


def _build_operator(cfg):
    from .radial_geometry import AveragedKernelCache
    from .operators import TriangularGrid, OddOperator2D
    K = cfg.kernel()
    cache = AveragedKernelCache(K, m=cfg.m)
    grid = TriangularGrid(h=cfg.h2d, s_max=cfg.s_max, m=cfg.m)
    return K, cache, grid, OddOperator2D(cache, grid)


def cmd_eigen(cfg, args) -> int:
    import numpy as np
    from .eigen import first_odd_eigenpair, scaling_study
    rep = _report(cfg, "first odd eigenpair")
    K, cache, grid, op = _build_operator(cfg)
    table = scaling_study(op, cfg.eigen_radii)
    for R, lam, prod in table.rows():
        rep.info(f"R={R}: lambda_1={lam:.6f}, product lambda_1 R^(2 gamma)={prod:.4f}")
    rep.check("products bounded", table.bounded,
              f"max/min = {max(table.products) / min(table.products):.3f}",
              tolerance="< 3")
    rep.check("eigenvalue decreasing in R",
              bool(np.all(np.diff(table.eigenvalues) < 0)),
              f"slope of log lambda_1 vs log R = {table.slope:.3f}")
    pair = first_odd_eigenpair(op, cfg.eigen_radii[-1])
    rep.check("eigenfunction positive in the open region",
              bool(np.all(pair.in_ball_values > 0)),
              f"min value {pair.in_ball_values.min():.3e}")
    rep.check("eigen residual", pair.residual < 1e-6 * pair.eigenvalue,
              f"|A phi - lambda B phi| = {pair.residual:.2e}",
              tolerance="1e-6 lambda")
    path = os.path.join(cfg.out, "eigenpair.csv")
    pair.eigenfunction.to_csv(path, meta={"R": pair.radius,
                                          "lambda1": pair.eigenvalue,
                                          "product": pair.eigenvalue * pair.radius ** (2 * K.order)})
    rep.write(os.path.join(cfg.out, "eigen_report.txt"))
    print(rep.render())
    return 0 if rep.passed else 1


def cmd_saddle(cfg, args) -> int:
    import numpy as np
    from .kernels import reduce_to_1d
    from .layer1d import solve_layer
    from .saddle import saddle_solve
    rep = _report(cfg, "saddle solution")
    K, cache, grid, op = _build_operator(cfg)
    nl = cfg.nonlinearity()
    k1 = reduce_to_1d(K)
    layer = solve_layer(k1, nl, L=cfg.layer_L, h=cfg.layer_h)
    sol = saddle_solve(op, nl, cfg.radii, layer)
    for line in sol.construction_log:
        rep.info(line)
    rep.check("interior residual", sol.residual_sup < 1e-6,
              f"sup |L u - f(u)| = {sol.residual_sup:.3e} on "
              f"{sol.residual_nodes} interior nodes", tolerance="1e-6")
    inner = grid.ball_mask(sol.final_radius) & ~grid.boundary_layer_mask()
    in_range = bool(np.all(sol.u.values[inner] > 0) and np.all(sol.u.values[inner] < 1))
    rep.check("range 0 < u < 1 at interior nodes", in_range,
              f"u in [{sol.u.values[inner].min():.3e}, {sol.u.values[inner].max():.6f}]")
    cols = list(zip(*[(r["value"], r["gradient"], r["second"]) for r in sol.error_table]))
    dec = all(all(a > b for a, b in zip(col[:-1], col[1:])) for col in cols)
    for row in sol.error_table:
        rep.info(f"annulus beyond R={row['R']}: |u-U|={row['value']:.5f}, "
                 f"grad {row['gradient']:.5f}, second {row['second']:.5f} "
                 f"({row['nodes']} nodes)")
    rep.check("asymptotic errors strictly decreasing", dec,
              "columns of the annulus table", tolerance="strict decrease")
    sol.u.to_csv(os.path.join(cfg.out, "u.csv"),
                 meta={"config": cfg.config_hash, "seed": cfg.seed,
                       "gamma": K.order})
    with open(os.path.join(cfg.out, "asymptotic_table.csv"), "w") as f:
        f.write("R,value,gradient,second,nodes\n")
        for row in sol.error_table:
            f.write(f"{row['R']},{row['value']:.17g},{row['gradient']:.17g},"
                    f"{row['second']:.17g},{row['nodes']}\n")
    rep.write(os.path.join(cfg.out, "report.txt"))
    print(rep.render())
    return 0 if rep.passed else 1


def cmd_evolve(cfg, args) -> int:
    import numpy as np
    from .kernels import reduce_to_1d
    from .operators import Operator1D
    from .parabolic import (EvolutionOperator1D, evolve, ode_barrier,
                            discrete_barrier, barrier_comparison)
    rep = _report(cfg, "parabolic evolution")
    K = cfg.kernel()
    nl = cfg.nonlinearity()
    k1 = reduce_to_1d(K)
    b = nl.shift_constant(1.5)

    # constant data follows the free dynamics
    op_tiny = Operator1D(k1, L=10.0, h=5.0)
    eop = EvolutionOperator1D(op_tiny, exterior="extend")
    dt_c = 1e-4
    st = evolve(eop, nl, np.full(op_tiny.n, 0.5), T=5.0, dt=dt_c, b=b,
                record_every=1000)
    oracle = ode_barrier(nl, 0.5, 5.0)
    err = abs(float(st.values[0]) - oracle(5.0))
    rep.check("constant data follows the free dynamics", err < 1e-6,
              f"|v(T) - xi(T)| = {err:.2e} at dt={dt_c}", tolerance="1e-6")
    st.history_csv(os.path.join(cfg.out, "evolve_constant.csv"))

    # positive bump with barrier-riding exterior: squeezed upward toward 1
    m0 = 0.2
    dt = 0.01
    T = 12.0
    dbar = discrete_barrier(nl, m0, T, dt, b=b)
    op1 = Operator1D(k1, L=20.0, h=0.1)
    eop1 = EvolutionOperator1D(op1, exterior=lambda t: float(dbar(t)))
    v0 = m0 + 0.6 * np.exp(-op1.x ** 2)
    st1 = evolve(eop1, nl, v0, T=T, dt=dt, b=b)
    cmp1 = barrier_comparison(st1, dbar, lower=True)
    rep.check("lower ODE barrier respected", cmp1.passed,
              f"worst margin {cmp1.worst_margin:.2e} over {cmp1.checked_times} times",
              tolerance="1e-8")
    core = np.abs(op1.x) <= 10.0
    rep.check("bump drawn to 1 on the core",
              bool(st1.values[core].min() > 0.99),
              f"core min {st1.values[core].min():.6f} at T={T}")
    st1.history_csv(os.path.join(cfg.out, "evolve_bump.csv"))

    # zero data is stationary
    st0 = evolve(EvolutionOperator1D(op1, exterior=0.0), nl,
                 np.zeros(op1.n), T=2.0, dt=dt, b=b)
    rep.check("zero data stays zero", float(np.max(np.abs(st0.values))) == 0.0,
              f"max |v| = {np.max(np.abs(st0.values)):.1e}")
    rep.write(os.path.join(cfg.out, "evolve_report.txt"))
    print(rep.render())
    return 0 if rep.passed else 1


def cmd_torsion(cfg, args) -> int:
    import numpy as np
    from scipy.special import gamma as G
    from .operators import solve_torsion
    from .verify import no_bounded_torsion_check
    rep = _report(cfg, "ball torsion problem")
    K = cfg.kernel()
    # torsion benchmark runs in the 1-D radial reduction of the kernel order
    from .kernels import frac_kernel
    K1 = frac_kernel(1, K.order) if cfg.kernel_kind == "fractional" else cfg.kernel()
    growth = no_bounded_torsion_check(K1, cfg.torsion_radii, n_cells=cfg.torsion_cells)
    rep.info("M_R table: " + ", ".join(f"R={R}: {M:.4f}"
                                       for R, M in zip(growth.radii, growth.sups)))
    rep.check("M_R strictly increasing", growth.monotone, "supremum growth")
    tol = 0.1 if cfg.kernel_kind == "fractional" else 0.3
    rep.check("growth exponent", abs(growth.slope - growth.expected) <= tol,
              f"fitted slope {growth.slope:.4f} vs 2 gamma = {growth.expected}",
              tolerance=f"+-{tol}")
    if cfg.kernel_kind == "fractional":
        n1, g = 1, K.order
        sol = solve_torsion(K1, cfg.torsion_radii[-1], n_cells=cfg.torsion_cells)
        pref = G(n1 / 2) / (4 ** g * G(n1 / 2 + g) * G(1 + g))
        exact = pref * np.maximum(sol.R ** 2 - sol.r ** 2, 0.0) ** g
        mask = sol.interior_mask()
        rel = np.max(np.abs(sol.phi - exact)[mask] / exact[mask])
        rep.check("closed-form profile", rel < 1e-2,
                  f"sup relative error {rel:.2e} on interior nodes "
                  f"(margin 0.1 R)", tolerance="1e-2")
        psi = sol.psi()
        rep.check("barrier profile nonnegative", bool(np.all(psi >= -1e-12)),
                  f"min psi = {psi.min():.2e}")
    rep.write(os.path.join(cfg.out, "torsion_report.txt"))
    print(rep.render())
    return 0 if rep.passed else 1


def cmd_verify(cfg, args) -> int:
    import numpy as np
    from .kernels import reduce_to_1d
    from .operators import Operator1D, TriangularGrid, OddOperator2D
    from .radial_geometry import AveragedKernelCache, kernel_difference_scan
    from .verify import (weak_mp_scenarios, narrow_mp_scenarios,
                         narrow_threshold_scan, narrow_band_mechanism,
                         abp_ensemble, abp_strip_scaling, linearized_mp_check,
                         stability_form, pointwise_stability_identity,
                         no_bounded_torsion_check, verdict_counts,
                         scenarios_to_csv)
    only = args.only
    rep = _report(cfg, "maximum principle verification")
    K = cfg.kernel()
    nl = cfg.nonlinearity()
    all_scen = []

    fine_grid_needed = only in (None, "weak-mp", "narrow-mp")
    if fine_grid_needed:
        cache_f = AveragedKernelCache(K, m=cfg.m)
        grid_f = TriangularGrid(h=0.025, s_max=2.0, m=cfg.m)
        op_f = OddOperator2D(cache_f, grid_f)

    if only in (None, "weak-mp"):
        scen = weak_mp_scenarios(op_f, count=100, seed=cfg.seed)
        c = verdict_counts(scen)
        all_scen += scen
        rep.check("weak MP ensemble", c["fail"] == 0,
                  f"{c['pass']} pass / {c['fail']} fail / {c['vacuous']} vacuous",
                  tolerance="conclusion at 1e-6 after hypotheses at 1e-8")
        ks = kernel_difference_scan(cache_f, n_pairs=10000, seed=cfg.seed)
        rep.check("averaged-kernel difference positive", ks[0] > 0,
                  f"min over {ks[2]} random pairs = {ks[0]:.3e}")

    if only in (None, "narrow-mp"):
        scen = narrow_mp_scenarios(op_f, eps=0.05, c_norm=1.0, count=100,
                                   seed=cfg.seed + 1)
        c = verdict_counts(scen)
        all_scen += scen
        mech = narrow_band_mechanism(op_f, 0.05, 1.0)
        rep.check("narrow-band MP ensemble (eps=0.05, |c|=1)", c["fail"] == 0,
                  f"{c['pass']} pass / {c['fail']} fail / {c['vacuous']} vacuous; "
                  f"zero-order floor {mech.min_zero_order_doubled:.2f} vs "
                  f"negative part {mech.c_norm}")
        table, thresholds, monotone = narrow_threshold_scan(
            op_f, c_norms=(1.0, 8.0, 64.0), widths=(0.05, 0.1, 0.2, 0.4, 0.8),
            count=6, seed=cfg.seed + 2)
        rep.info("empirical width thresholds: "
                 + ", ".join(f"|c|={c0}: eps={e}" for c0, e in thresholds.items()))
        rep.check("threshold shrinks with growing negative part", monotone,
                  "monotone trend of the scan")

    if only in (None, "abp"):
        k1 = reduce_to_1d(K)
        op1 = Operator1D(k1, L=10.0, h=0.0125)
        fit = abp_ensemble(op1, count=50, seed=cfg.seed + 3)
        ver = abp_ensemble(op1, count=100, seed=cfg.seed + 4,
                           fit_constant=fit.constant)
        c = verdict_counts(ver.scenarios)
        all_scen += ver.scenarios
        rep.check("ABP ensemble against frozen constant", c["fail"] == 0,
                  f"C = {fit.constant:.4f}; verification worst ratio "
                  f"{ver.worst_ratio:.4f}", tolerance="no instance above 1.1 C")
        slope = abp_strip_scaling(op1)
        rep.check("strip-width scaling", abs(slope - 2 * K.order) <= 0.3,
                  f"fitted exponent {slope:.3f} vs 2 gamma = {2 * K.order}",
                  tolerance="+-0.3")

    if only in (None, "linearized-mp", "stability"):
        from .layer1d import solve_layer
        from .saddle import saddle_solve, supersolution, monotone_iteration
        K2, cache2, grid2, op2 = _build_operator(cfg)
        layer = solve_layer(reduce_to_1d(K2), nl, L=cfg.layer_L, h=cfg.layer_h)
        sol = saddle_solve(op2, nl, cfg.radii, layer)
        if only in (None, "linearized-mp"):
            from .saddle import uniqueness_probe
            uq = uniqueness_probe(op2, nl, cfg.radii[len(cfg.radii) // 2], layer,
                                  seed=cfg.seed)
            minus_u = sol.u.copy(values=-sol.u.values)
            region = grid2.ball_mask(cfg.radii[-2] if len(cfg.radii) > 1 else cfg.radii[-1])
            extras = [("minus-u", minus_u, region, np.zeros(grid2.n_nodes))]
            scen = linearized_mp_check(op2, sol.u, nl, count=100,
                                       seed=cfg.seed + 5, extra_candidates=extras)
            c = verdict_counts(scen)
            all_scen += scen
            rep.check("linearized MP ensemble", c["fail"] == 0,
                      f"{c['pass']} pass / {c['fail']} fail / {c['vacuous']} vacuous")
            rep.check("construction paths agree", uq.passed,
                      f"ascending vs descending {uq.ascending_vs_descending:.2e}, "
                      f"perturbed {uq.perturbed_vs_ascending:.2e}, "
                      f"mirror defect {uq.mirror_defect:.2e}", tolerance="1e-5")
        if only in (None, "stability"):
            qs = stability_form(op2, sol.u, nl, R=cfg.radii[-2] if len(cfg.radii) > 1
                                else cfg.radii[-1], count=50, seed=cfg.seed + 6)
            rep.check("stability form nonnegative on bumps",
                      bool(np.min(qs) >= -1e-8),
                      f"min Q = {np.min(qs):.3e} over {len(qs)} bumps",
                      tolerance="-1e-8")
            rep.check("pointwise stability inequality",
                      pointwise_stability_identity(cfg.seed),
                      "random positive/test value pairs")

    if only in (None, "torsion-growth"):
        from .kernels import frac_kernel
        K1 = frac_kernel(1, K.order)
        growth = no_bounded_torsion_check(K1, cfg.torsion_radii,
                                          n_cells=cfg.torsion_cells)
        rep.check("torsion growth", growth.passed(0.1),
                  f"slope {growth.slope:.4f} vs {growth.expected}, "
                  f"monotone={growth.monotone}", tolerance="+-0.1")

    if all_scen:
        scenarios_to_csv(all_scen, os.path.join(cfg.out, "verdicts.csv"))
    rep.write(os.path.join(cfg.out, "verify_report.txt"))
    print(rep.render())
    return 0 if rep.passed else 1


_HANDLERS = {
    "kernel-check": cmd_kernel_check,
    "layer": cmd_layer,
    "eigen": cmd_eigen,
    "saddle": cmd_saddle,
    "evolve": cmd_evolve,
    "verify": cmd_verify,
    "torsion": cmd_torsion,
}


if __name__ == "__main__":
    sys.exit(main())
