"""``diffusls`` command line: synth, verify, simulate, kernels.

Exit codes: 0 everything passed, 1 a verification failed, 2 usage or config
error. Output files are written only after all computation has finished.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import implementation as impl_mod
from . import kernels as kern
from . import ratfun, simulator, synthesis
from ._parallel import map_modes
from .config import Config, ConfigError, dumps, load_config, parse_json_text
from .plant import ModeParams, PlantParams

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _plant(cfg: Config) -> PlantParams:
    return PlantParams(cfg.alpha, cfg.gamma)


def _write_all(out_dir: str, files: dict) -> None:
    for rel, content in files.items():
        path = os.path.join(out_dir, rel)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(content)


def _check(name, worst, tol, worst_kappa=None, detail=None) -> dict:
    ok = bool(worst is not None and np.isfinite(worst) and worst <= tol)
    rec = {"name": name, "passed": ok, "worst": None if worst is None else float(worst), "tolerance": tol}
    if worst_kappa is not None:
        rec["worst_kappa"] = int(worst_kappa)
    if detail:
        rec["detail"] = detail
    return rec


class _Worst:
    def __init__(self):
        self.value, self.kappa, self.detail = -math.inf, None, None

    def add(self, value, kappa, detail=None):
        if not value <= self.value:  # also catches nan
            self.value, self.kappa, self.detail = value, kappa, detail


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------

def cmd_synth(cfg: Config, args) -> int:
    plant = _plant(cfg)
    omega = cfg.omega()
    results = synthesis.synthesize(plant, cfg.kmax, cfg.method, omega)
    tol = cfg.tolerances
    problems = []
    for r in results:
        k = r.mode.kappa
        if not r.affine_residual <= tol["identity"]:
            problems.append(f"kappa={k}: affine residual {r.affine_residual:.3e}")
        if not r.f_hat > 0:
            problems.append(f"kappa={k}: F not positive")
        for nm, tf in (("phi_psi", r.phi_psi), ("phi_u", r.phi_u)):
            if not (tf.is_strictly_proper and tf.is_stable()):
                problems.append(f"kappa={k}: {nm} not stable strictly proper")
        if not abs(r.h2_cost_mode - r.f_hat) <= tol["cross_pipeline"] * max(1.0, r.f_hat):
            problems.append(f"kappa={k}: cost identity off by {abs(r.h2_cost_mode - r.f_hat):.3e}")
    cost = synthesis.total_h2_cost(results)
    files = {
        "synthesis.json": dumps([r.to_dict() for r in results]),
        "effective_config.json": dumps(cfg.to_dict()),
    }
    _write_all(cfg.output_dir, files)
    print(f"total H2 cost (|kappa| <= {cost.kmax}): {cost.total!r}")
    print(f"tail bound (|kappa| > {cost.kmax}): {cost.tail_bound!r}")
    for p in problems:
        print(f"FAIL {p}", file=sys.stderr)
    return EXIT_FAIL if problems else EXIT_OK


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def _perturbed(result: synthesis.SynthesisResult, factor: float) -> synthesis.SynthesisResult:
    from dataclasses import replace

    phi_u = result.phi_u * factor
    return replace(result, phi_u=phi_u, k_hat=phi_u / result.phi_psi,
                   affine_residual=synthesis.affine_residual(result.mode, result.phi_psi, phi_u))


def _verify_mode(mode: ModeParams, cfg: Config, omega, factor: float) -> dict:
    out = {}
    proj = synthesis.solve_mode_projection(mode, omega)
    closed = synthesis.solve_mode_closed_form(mode, omega)
    if factor != 1.0:
        proj = _perturbed(proj, factor)
    out["pipeline_equivalence"] = max(
        ratfun.coeff_distance(proj.phi_psi, closed.phi_psi),
        ratfun.coeff_distance(proj.phi_u, closed.phi_u),
    )
    try:
        out["gain_equivalence"] = synthesis.gain_equivalence_check(proj)
    except synthesis.NonConstantGain:
        out["gain_equivalence"] = math.inf
    out["are_residual"] = synthesis.are_residual(mode, proj.f_hat) / mode.gamma ** 2
    out["affine_residual"] = proj.affine_residual
    out["inner_check"] = synthesis.inner_check(synthesis.inner_outer(mode), omega)
    out["cost_identity"] = abs(proj.h2_cost_mode - proj.f_hat) / proj.f_hat
    out["hinf_phi_psi_excess"] = ratfun.hinf_norm_on_axis(proj.phi_psi, omega) - 1.0 / mode.gamma
    try:
        impl = impl_mod.build_implementation(proj)
        out["static_gain_recovery"] = abs(impl.gain_block.limit_at_infinity() + proj.f_hat)
        solved = impl_mod.loop_solve(impl)
        out["closed_loop_oracle"] = impl_mod.matrix_distance(impl_mod.eq28_matrix(impl), solved)
        rep = impl_mod.internal_stability_report(solved, cfg.stability_margin, omega)
        out["internal_stability"] = 0.0 if rep.stable else math.inf
        out["max_pole_real_part"] = rep.max_real_part
    except (impl_mod.IllPosedLoop, impl_mod.InvalidG) as e:
        out["closed_loop_oracle"] = math.inf
        out["internal_stability"] = math.inf
        out["static_gain_recovery"] = math.inf
        out["error"] = str(e)
    return out


def cmd_verify(cfg: Config, args) -> int:
    plant = _plant(cfg)
    omega = cfg.omega()
    factor = float(args.perturb_phi_u)
    modes = [ModeParams(plant, k) for k in range(cfg.kmax + 1)]
    per_mode = map_modes(lambda m: _verify_mode(m, cfg, omega, factor), modes)
    tol = cfg.tolerances
    limits = {
        "pipeline_equivalence": tol["cross_pipeline"],
        "gain_equivalence": tol["cross_pipeline"],
        "are_residual": 1e-12,
        "affine_residual": tol["identity"],
        "inner_check": tol["identity"],
        "cost_identity": tol["cross_pipeline"],
        "hinf_phi_psi_excess": 1e-12,
        "static_gain_recovery": tol["cross_pipeline"],
        "closed_loop_oracle": tol["cross_pipeline"],
        "internal_stability": 0.0,
    }
    checks = []
    for name, lim in limits.items():
        w = _Worst()
        for m, rec in zip(modes, per_mode):
            w.add(rec[name], m.kappa, rec.get("error"))
        checks.append(_check(name, w.value, lim, w.kappa, w.detail))
    report = {
        "alpha": cfg.alpha,
        "gamma": cfg.gamma,
        "kmax": cfg.kmax,
        "perturb_phi_u": factor,
        "all_passed": all(c["passed"] for c in checks),
        "checks": checks,
    }
    _write_all(cfg.output_dir, {"verify.json": dumps(report), "effective_config.json": dumps(cfg.to_dict())})
    for c in checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: worst={c['worst']!r} tol={c['tolerance']!r}")
    return EXIT_OK if report["all_passed"] else EXIT_FAIL


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _signal_from_spec(spec, dt):
    if spec is None:
        return None
    kind = spec.get("type")
    if kind == "zero":
        return simulator.zero()
    if kind == "step":
        return simulator.step(float(spec.get("amplitude", 1.0)), float(spec.get("t_on", 0.0)))
    if kind == "pulse":
        return simulator.pulse(float(spec["height"]), float(spec.get("t_on", 0.0)), float(spec["width"]))
    if kind == "impulse":
        return simulator.impulse(dt)
    if kind == "sinusoid":
        return simulator.sinusoid(float(spec.get("amplitude", 1.0)), float(spec["omega"]), float(spec.get("phase", 0.0)))
    raise UsageError(f"unknown signal type {kind!r}")


def _load_scenario(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = parse_json_text(fh.read(), str(path))
    except OSError as e:
        raise UsageError(f"cannot read scenario {path}: {e}") from None
    if not isinstance(data, dict) or set(data) - {"psi0", "n", "w"}:
        raise UsageError("scenario must be an object with optional keys psi0, n, w")
    return data


def _simulate_mode(mode: ModeParams, cfg: Config, scenario):
    res = synthesis.solve_mode(mode, cfg.method)
    impl = impl_mod.build_implementation(res)
    A, *_ = simulator.interconnection(impl)
    eig = np.linalg.eigvals(A)
    dt = simulator.default_dt(eig) if cfg.dt is None else cfg.dt
    t_final = cfg.effective_t_final
    k_static = res.k_hat.limit_at_infinity()
    rec = {"kappa": mode.kappa, "dt": dt, "f_hat": res.f_hat}
    try:
        if scenario is None:
            dyn = simulator.simulate_implementation(impl, 1.0, None, None, t_final, dt)
            stat = simulator.simulate_static(mode, k_static, 1.0, None, t_final, dt)
            rec["static_dynamic_deviation"] = float(np.max(np.abs(stat.psi - dyn.psi)))
            rec["integrator_tolerance"] = dyn.integrator_tolerance
            rec["cost_quadrature"] = simulator.mode_cost_quadrature(dyn)
        else:
            n = _signal_from_spec(scenario.get("n"), dt)
            w = _signal_from_spec(scenario.get("w"), dt)
            psi0 = float(scenario.get("psi0", 0.0))
            dyn = simulator.simulate_implementation(impl, psi0, n, w, t_final, dt)
            mat = impl_mod.closed_loop_matrix(impl)
            amp = {c: (float(scenario[c].get("amplitude", 0.0)) if scenario.get(c, {}).get("type") == "step" else 0.0)
                   for c in ("n", "w")}
            for row, sig in (("psi", dyn.psi), ("u", dyn.u), ("v", dyn.v)):
                pred = sum(amp[c] * float(np.real(mat[row, c](0.0))) for c in ("n", "w"))
                rec[f"{row}_final"] = float(sig[-1])
                rec[f"{row}_dc_prediction"] = pred
            rec["max_abs_v"] = float(np.max(np.abs(dyn.v)))
        return rec, dyn
    except simulator.StepSizeTooLarge as e:
        rec["error"] = str(e)
        return rec, None


def cmd_simulate(cfg: Config, args) -> int:
    plant = _plant(cfg)
    scenario = _load_scenario(args.scenario) if args.scenario else None
    kmax = min(cfg.kmax, cfg.sim_kmax)
    modes = [ModeParams(plant, k) for k in range(kmax + 1)]
    outcomes = map_modes(lambda m: _simulate_mode(m, cfg, scenario), modes)
    files = {}
    errors = [rec for rec, tr in outcomes if tr is None]
    for rec, tr in outcomes:
        if tr is not None:
            files[f"traces/trace_k{rec['kappa']:03d}.csv"] = tr.to_csv()
    summary = {"kmax": kmax, "t_final": cfg.effective_t_final, "modes": [rec for rec, _ in outcomes],
               "errors": [{"kappa": r["kappa"], "error": r["error"]} for r in errors]}
    failed = bool(errors)
    if scenario is None and not errors:
        quad = sum((1.0 if r["kappa"] == 0 else 2.0) * r["cost_quadrature"] for r, _ in outcomes)
        are = sum((1.0 if r["kappa"] == 0 else 2.0) * r["f_hat"] for r, _ in outcomes)
        rel = abs(quad - are) / are
        worst_dev = max(r["static_dynamic_deviation"] / (10.0 * r["integrator_tolerance"])
                        if r["integrator_tolerance"] > 0 else (0.0 if r["static_dynamic_deviation"] == 0 else math.inf)
                        for r, _ in outcomes)
        summary.update({
            "cost_quadrature": quad,
            "cost_are_sum": are,
            "cost_relative_error": rel,
            "cost_passed": rel <= cfg.tolerances["quadrature"],
            "static_dynamic_worst_ratio": worst_dev,
            "static_dynamic_passed": worst_dev <= 1.0,
        })
        failed = failed or not (summary["cost_passed"] and summary["static_dynamic_passed"])
        print(f"cost quadrature {quad!r} vs sum F {are!r} (relative error {rel:.3e})")
    for r in errors:
        print(f"FAIL kappa={r['kappa']}: {r['error']}", file=sys.stderr)
    files["simulate_summary.json"] = dumps(summary)
    files["effective_config.json"] = dumps(cfg.to_dict())
    _write_all(cfg.output_dir, files)
    return EXIT_FAIL if failed else EXIT_OK


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

def cmd_kernels(cfg: Config, args) -> int:
    if args.radius is not None:
        try:
            kern._check_radius(args.radius)
        except kern.InvalidRadius as e:
            raise UsageError(str(e)) from None
    plant = _plant(cfg)
    fam = kern.block_families(plant, cfg.method)
    t = np.linspace(0.0, cfg.effective_kernel_t_final, cfg.kernel_t_points)
    k = kern.lqr_gain_kernel(plant, cfg.kmax, cfg.grid_n)
    h_u = kern.static_part(fam["gain_block"], cfg.kmax, cfg.grid_n, label="h_phi_u")
    loop_static = kern.static_part(fam["loop_block"], cfg.kmax, cfg.grid_n, label="loop_block_static")
    f_psi = kern.dynamic_kernel(fam["loop_block"], t, cfg.kmax, cfg.grid_n, label="f_phi_psi")
    f_u = kern.dynamic_kernel(kern.strictly_proper_family(fam["gain_block"]), t, cfg.kmax, cfg.grid_n, label="f_phi_u")
    cl_psi = kern.dynamic_kernel(fam["phi_psi"], t, cfg.kmax, cfg.grid_n, label="closed_loop_phi_psi")
    dynamic = {"f_phi_psi": f_psi, "f_phi_u": f_u, "closed_loop_phi_psi": cl_psi}

    checks = [
        _check("static_part_equals_lqr_kernel", float(np.max(np.abs(h_u.values - k.values))), k.tail_bound + 1e-8),
        _check("evenness", max(kern.evenness_defect(x) for x in [k, h_u, *dynamic.values()]), 1e-9),
        _check("parseval", kern.parseval_gap(k), 1e-6),
        _check("loop_block_static_zero", float(np.max(np.abs(loop_static.values))) + abs(loop_static.dirac_coeff), 0.0),
        _check("mean_value", abs(k.mean() - k.coeffs[0]), 1e-12),
    ]
    meta = {
        "kernels": {x.label: x.metadata() for x in [k, h_u, *dynamic.values()]},
        "checks": checks,
        "all_passed": all(c["passed"] for c in checks),
    }
    files = {"kernels/k.csv": k.to_csv(), "kernels/h_phi_u.csv": h_u.to_csv()}
    for name, x in dynamic.items():
        files[f"kernels/{name}.csv"] = x.to_csv()

    if args.radius is not None:
        src = dynamic[args.truncation_kernel]
        err = kern.truncation_error(src, args.radius)
        norms = src.slice_norms()
        lines = ["t,truncation_error,slice_norm"]
        eps_fn = None
        if args.eps0 is not None:
            eps_fn = lambda ti: args.eps0 * (1.0 + args.eps_rate * ti)  # noqa: E731
            lines[0] += ",epsilon,margin"
        for i, ti in enumerate(src.t.tolist()):
            row = f"{ti!r},{float(err[i])!r},{float(norms[i])!r}"
            if eps_fn is not None:
                e = eps_fn(ti)
                row += f",{e!r},{e - float(err[i])!r}"
            lines.append(row)
        files["kernels/truncation_error.csv"] = "\n".join(lines) + "\n"
        trunc = {"radius": args.radius, "kernel": args.truncation_kernel, "max_error": float(np.max(err))}
        if eps_fn is not None:
            rep = kern.constraint_membership(src, args.radius, eps_fn)
            trunc.update({"eps0": args.eps0, "eps_rate": args.eps_rate, **rep.to_dict()})
            print(f"membership (r={args.radius!r}): {rep.member} worst margin {rep.worst_margin!r} at t={rep.worst_t!r}")
        meta["truncation"] = trunc
    files["kernels/kernels_meta.json"] = dumps(meta)
    files["effective_config.json"] = dumps(cfg.to_dict())
    _write_all(cfg.output_dir, files)
    for c in checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: worst={c['worst']!r} tol={c['tolerance']!r}")
    return EXIT_OK if meta["all_passed"] else EXIT_FAIL


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--alpha", type=float)
    common.add_argument("--gamma", type=float)
    common.add_argument("--kmax", type=int)
    common.add_argument("--grid-n", dest="grid_n", type=int)
    common.add_argument("--t-final", dest="t_final", type=float)
    common.add_argument("--dt", type=float)
    common.add_argument("--method", choices=["projection", "closed_form"])
    common.add_argument("--sim-kmax", dest="sim_kmax", type=int)
    common.add_argument("--output-dir", dest="output_dir")

    p = argparse.ArgumentParser(prog="diffusls", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common], help="solve every mode, write synthesis.json")
    v = sub.add_parser("verify", parents=[common], help="run all cross-checks, write verify.json")
    v.add_argument("--perturb-phi-u", dest="perturb_phi_u", type=float, default=1.0,
                   help="scale phi_u before checking (test hook)")
    s = sub.add_parser("simulate", parents=[common], help="per-mode time-domain runs")
    s.add_argument("--scenario", help="JSON disturbance scenario")
    k = sub.add_parser("kernels", parents=[common], help="export physical-space kernels")
    k.add_argument("--radius", type=float, help="truncation radius r in (0, pi]")
    k.add_argument("--eps0", type=float, help="epsilon(t) = eps0 (1 + eps_rate t)")
    k.add_argument("--eps-rate", dest="eps_rate", type=float, default=0.0)
    k.add_argument("--truncation-kernel", dest="truncation_kernel", default="f_phi_psi",
                   choices=["f_phi_psi", "f_phi_u", "closed_loop_phi_psi"])
    return p


_OVERRIDES = ("alpha", "gamma", "kmax", "grid_n", "t_final", "dt", "method", "sim_kmax", "output_dir")
_COMMANDS = {"synth": cmd_synth, "verify": cmd_verify, "simulate": cmd_simulate, "kernels": cmd_kernels}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    try:
        cfg = load_config(args.config, {k: getattr(args, k) for k in _OVERRIDES})
        return _COMMANDS[args.command](cfg, args)
    except (ConfigError, UsageError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
