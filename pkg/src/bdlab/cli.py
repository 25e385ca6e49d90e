"""Batch command-line front end: JSON configs in, JSON/CSV reports out.

Every run emits a self-contained report (schema "bdlab/1") embedding its full
config, including seeds; `--replay report.json` re-executes that config and
must reproduce the stored results bit for bit.  Exit codes: 0 all asserted
properties hold, 1 a property was falsified (named in the report), 2 usage or
scale errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import instances
from .dichotomy import conflict_bound, greedy_escape, rosenthal_select
from .errors import BdlabError, ScaleError
from .factorization import (
    GROTHENDIECK_UPPER,
    build_l1_factorization,
    dor_projection_bound,
    james_improve,
    pi2_groth,
    pi2_lower,
    pi2_upper_sym,
)
from .lattice import min_approx_lattice_bound, verify_lattice_bound
from .measure import AtomSpace, L1Fun, restrict_norm
from .operators import ENUMERATION_CAP, FiniteOperator, identity_operator, operator_norm
from .parallel import worker_count
from .rademacher import (
    binom_checks,
    build_rademacher_operator,
    check_diagonal_lattice,
    diag_gap,
    max_admissible_sx,
    perturbation_gap,
    subset_sign_coefficient,
    truncated_sign_norm,
)
from .randops import (
    SymmetricRandomMatrixSpec,
    build_symmetric_matrix,
    case_split_test,
    hj_check,
    khintchine_square_check,
    levy_check,
    tail_quantity,
    truncation_split,
    ColumnFunction,
)

SCHEMA = "bdlab/1"


class PropertyLog:
    """Collects named property checks; any failure drives the exit code."""

    def __init__(self):
        self.failed: list[str] = []
        self.checked: list[str] = []

    def expect(self, name: str, ok: bool):
        self.checked.append(name)
        if not ok:
            self.failed.append(name)
        return ok


def _operator_from_config(cfg: dict) -> FiniteOperator:
    if "identity" in cfg:
        return identity_operator(int(cfg["identity"]))
    return FiniteOperator.from_json(json.dumps(cfg["op"]))


def _run_dichotomy(cfg: dict, log: PropertyLog) -> dict:
    T = _operator_from_config(cfg)
    eps, n = float(cfg["eps"]), int(cfg["n"])
    res = greedy_escape(T, eps, n)
    out: dict = {
        "outcome": res.outcome,
        "planned_steps": res.trace.planned_steps,
        "gains": list(res.trace.gains),
    }
    if res.outcome == "lattice_bound":
        out["C"] = res.cert.C
        out["worst_excess"] = res.cert.worst_excess
        log.expect("lattice_bound_verifies", not res.cert.failed)
    else:
        fam = res.family
        out["delta"] = fam.delta
        out["restricted_masses"] = [
            restrict_norm(T.range, f, E) for f, E in fam.members
        ]
        log.expect(
            "family_mass_at_least_delta",
            all(m >= fam.delta - 1e-9 for m in out["restricted_masses"]),
        )
        cert = min_approx_lattice_bound(T, eps / 4)
        conf = conflict_bound(T.range, fam, cert.g, eps / 4)
        out["conflict"] = {
            "C_at_quarter_eps": cert.C,
            "lower_bound": conf.lower_bound,
            "closed_form": conf.closed_form,
        }
        log.expect("conflict_excess_precondition", conf.excess_ok)
        log.expect(
            "genuine_dichotomy_chain",
            cert.C >= conf.lower_bound - 1e-6
            and conf.lower_bound >= n * eps / 4 - 1e-6,
        )
    return out


def _run_select(cfg: dict, log: PropertyLog) -> dict:
    delta, k, n = float(cfg["delta"]), int(cfg["k"]), int(cfg["n"])
    seed = int(cfg.get("seed", 0))
    space, fs, Es = instances.spread_family(n, delta, seed)
    sel = rosenthal_select(space, fs, Es, delta, k, seed=seed)
    log.expect("row_sums_at_most_half_delta", bool(np.all(sel.row_sums <= delta / 2 + 1e-12)))
    log.expect("lower_constant_at_least_half_delta", sel.cert.lower >= delta / 2 - 1e-6)
    return {
        "indices": list(sel.indices),
        "rounds": sel.rounds,
        "alpha": sel.cert.lower,
        "beta": sel.cert.upper,
    }


def _run_factorize(cfg: dict, log: PropertyLog) -> dict:
    k, r = int(cfg["k"]), int(cfg["r"])
    delta = float(cfg.get("delta", 1.0))
    lam = float(cfg.get("lam", 1.3))
    seed = int(cfg.get("seed", 0))
    theta = float(cfg.get("theta", 0.05))
    T, ys = instances.james_pipeline_instance(k, r, theta, seed)
    jr = james_improve(T, ys, k, r, delta)
    cert = build_l1_factorization(T, jr.blocks, lam)
    bound = (2 * lam / delta) * dor_projection_bound(lam)
    log.expect("residual_small", cert.residual <= 1e-6)
    log.expect("product_within_paper_bound", cert.product <= bound + 1e-6)
    return {
        "level": jr.level,
        "alpha": cert.alpha,
        "beta": cert.beta,
        "norm_A": cert.norm_A,
        "norm_B": cert.norm_B,
        "product": cert.product,
        "paper_bound": bound,
        "projection_norm": cert.projection_norm,
    }


def _run_latticebound(cfg: dict, log: PropertyLog) -> dict:
    T = _operator_from_config(cfg)
    eps = float(cfg["eps"])
    if "g" in cfg:
        g = L1Fun(np.asarray(cfg["g"], dtype=float))
        check = verify_lattice_bound(T, g, eps)
        log.expect("bound_within_eps", check.worst_excess <= eps + 1e-9)
        return {
            "mode": "verify",
            "worst_excess": check.worst_excess,
            "exact": check.exact,
            "witness": {
                "coords": list(check.witness.coords),
                "signs": list(check.witness.signs),
            },
        }
    cert = min_approx_lattice_bound(T, eps)
    log.expect("certificate_not_failed", not cert.failed)
    return {
        "mode": "minimize",
        "C": cert.C,
        "worst_excess": cert.worst_excess,
        "g": cert.g.values.tolist(),
    }


def _run_pi2(cfg: dict, log: PropertyLog) -> dict:
    T = _operator_from_config(cfg)
    seed = int(cfg.get("seed", 0))
    mode = "exact" if T.domain.extreme_count() <= ENUMERATION_CAP else "search"
    groth = pi2_groth(T, mode=mode, seed=seed)
    lower = pi2_lower(T, seed=seed)
    out = {
        "lower": lower,
        "grothendieck_upper": groth.value,
        "grothendieck_constant": GROTHENDIECK_UPPER,
        "norm_mode": mode,
    }
    uppers = [groth.value]
    if T.symmetric_entries and T.range.kind == "probability":
        out["symmetric_upper"] = pi2_upper_sym(T)
        uppers.append(out["symmetric_upper"])
    if not groth.lower_bound_based:
        log.expect("sandwich", lower <= min(uppers) + 1e-6)
    return out


def _run_random(cfg: dict, log: PropertyLog) -> dict:
    spec = SymmetricRandomMatrixSpec.from_json(json.dumps(cfg["spec"]))
    C, eps, n = float(cfg["C"]), float(cfg["eps"]), int(cfg["n"])
    T = build_symmetric_matrix(spec)
    out: dict = {"m": spec.m, "atoms": T.n_atoms}
    exact_ok = spec.backend == "exact"
    if exact_ok and T.domain.extreme_count() <= 2**20:
        nrm_exact = operator_norm(T, mode="exact")
        nrm_sym = operator_norm(T, mode="symmetric")
        out["norm_exact"] = nrm_exact
        out["norm_symmetric"] = nrm_sym
        log.expect("symmetric_mode_matches_exact", abs(nrm_exact - nrm_sym) <= 1e-9)
    split = case_split_test(T, eps, C, n)
    out["case_verdict"] = split.verdict
    out["case_exhaustive"] = split.exhaustive
    out["case_residual"] = split.residual
    S1, S2 = truncation_split(T, C, n)
    out["pi2_S2_symmetric_upper"] = pi2_upper_sym(S2)
    out["pi2_S1_grothendieck"] = pi2_groth(S1, mode="symmetric").value
    if exact_ok and spec.m <= 3:
        leftover_norm = operator_norm(
            FiniteOperator(T.domain, T.range, T.columns - S1.columns - S2.columns,
                           symmetric_entries=True),
            mode="symmetric",
        )
        # Brute force: max tail over column functions disjoint from the first n.
        best = 0.0
        m = spec.m
        for idx in range(m**m):
            digits = []
            rem = idx
            for _ in range(m):
                digits.append(rem % m)
                rem //= m
            if all(d >= n for d in digits):
                best = max(best, tail_quantity(T, ColumnFunction(tuple(digits)), C))
        out["truncation_residual_norm"] = leftover_norm
        out["truncation_bruteforce_max_tail"] = best
        log.expect("truncation_residual_matches", abs(leftover_norm - best) <= 1e-9)
    return out


def _run_counterexample(cfg: dict, log: PropertyLog) -> dict:
    if cfg.get("action") == "sweep":
        rows = []
        for m in range(8, int(cfg.get("mmax", 16)) + 1, 2):
            for k0 in [int(v) for v in cfg.get("k0s", [2, 3, 4])]:
                tx = truncated_sign_norm(m, k0)
                cap = 2.0 * 0.80786 * float(cfg["C"]) / math.sqrt(k0)
                sx = max_admissible_sx(m, float(cfg["C"]), k0)
                rows.append(
                    {"m": m, "k0": k0, "tx_norm": tx.norm, "cap": cap, "gap": tx.norm - sx}
                )
        return {"sweep": rows}

    m, k0 = int(cfg["m"]), int(cfg["k0"])
    C, eps = float(cfg["C"]), float(cfg["eps"])
    R = build_rademacher_operator(m)
    out: dict = {"m": m, "k0": k0}
    out["operator_norm"] = R.exact_norm()
    log.expect("operator_norm_at_most_1", out["operator_norm"] <= 1 + 1e-12)
    diag = check_diagonal_lattice(m, min(eps, 1.0), samples=50, seed=int(cfg.get("seed", 0)))
    out["diagonal_scan_max"] = diag.max_restricted
    log.expect("diagonal_lattice_scan", diag.passed)
    if m % 2 == 0:
        agree = all(
            subset_sign_coefficient(m, k, "formula")
            == subset_sign_coefficient(m, k, "bruteforce", j=j)
            for k in range(max(1, k0), m - max(1, k0) + 1)
            for j in (1, m)
        )
        log.expect("coefficient_identity", agree)
        bc = binom_checks(m_max=min(m, 40), k_max=1000)
        log.expect("coefficient_inequality", bc.d_inequality_holds)
        tx = truncated_sign_norm(m, k0)
        out["tx_norm"] = tx.norm
        out["tx_threshold"] = tx.threshold
        out["tx_passes"] = tx.passes
        try:
            pg = perturbation_gap(m, C, eps, k0)
            out["gap"] = pg.gap
            out["max_sx"] = pg.max_sx
            out["analytic_cap"] = pg.analytic_cap
            log.expect("perturbation_verdict", pg.verdict)
        except BdlabError as exc:
            out["gap_error"] = str(exc)
        dg = diag_gap(m, C)
        out["diag_gap"] = dg.gap
        log.expect("diag_gap_bound", dg.holds)
    return out


def _run_inequalities(cfg: dict, log: PropertyLog) -> dict:
    which = cfg.get("which", "all")
    m = int(cfg.get("m", 12))
    trials = int(cfg.get("trials", 200))
    seed = int(cfg.get("seed", 0))
    rng = np.random.default_rng(seed)
    out: dict = {}
    if which in ("khintchine", "all"):
        ok = True
        worst = math.inf
        for mm in range(1, m + 1):
            for _ in range(max(1, trials // m)):
                a = rng.standard_normal(mm)
                chk = khintchine_square_check(a)
                ok &= chk.holds
                if chk.lower > 0:
                    worst = min(worst, chk.expectation / chk.lower)
        pair = khintchine_square_check(np.array([1.0, 1.0]))
        ok &= abs(pair.expectation - 1.0) <= 1e-12 and abs(pair.lower - 1.0) <= 1e-12
        out["khintchine"] = {"violations": 0 if ok else 1, "tightest_ratio": worst}
        log.expect("khintchine_bounds", ok)
    if which in ("levy", "all"):
        ok = True
        for t in range(trials):
            nv = int(rng.integers(1, 6))
            vals = rng.uniform(0.2, 2.0, size=nv)
            space, fs = _product_instance(vals)
            C = float(rng.uniform(0.1, vals.sum()))
            chk = levy_check(space, fs, C)
            ok &= chk.holds
        out["levy"] = {"violations": 0 if ok else 1, "trials": trials}
        log.expect("levy_inequality", ok)
    if which in ("hj", "all"):
        ratios = []
        for t in range(min(trials, 50)):
            nv = int(rng.integers(1, 5))
            vals = rng.uniform(0.2, 2.0, size=nv)
            space, fs = _product_instance(vals)
            chk = hj_check(space, fs, p=2, q=1)
            ratios.append(chk.ratio)
        out["hj"] = {
            "ratio_min": float(min(ratios)),
            "ratio_max": float(max(ratios)),
        }
    return out


def _product_instance(vals: np.ndarray):
    """Independent +-v_i coordinates realized on an exact product space."""
    nv = vals.size
    n_atoms = 2**nv
    idx = np.arange(n_atoms)
    space = AtomSpace(np.full(n_atoms, 1.0 / n_atoms), "probability")
    fs = [L1Fun(vals[i] * (2.0 * ((idx >> i) & 1) - 1.0)) for i in range(nv)]
    return space, fs


_HANDLERS = {
    "dichotomy": _run_dichotomy,
    "select": _run_select,
    "factorize": _run_factorize,
    "latticebound": _run_latticebound,
    "pi2": _run_pi2,
    "random": _run_random,
    "counterexample": _run_counterexample,
    "inequalities": _run_inequalities,
}


def run(config: dict) -> tuple[int, dict]:
    """Execute one experiment config; returns (exit_code, report)."""
    command = config.get("command")
    log = PropertyLog()
    if command not in _HANDLERS:
        return 2, {
            "schema": SCHEMA,
            "config": config,
            "error": f"unknown command {command!r}",
        }
    try:
        results = _HANDLERS[command](config, log)
    except ScaleError as exc:
        return 2, {"schema": SCHEMA, "config": config, "error": str(exc)}
    except BdlabError as exc:
        return 2, {"schema": SCHEMA, "config": config, "error": str(exc)}
    report = {
        "schema": SCHEMA,
        "config": config,
        "threads": worker_count(),
        "results": results,
        "checked_properties": log.checked,
        "failed_properties": log.failed,
        "pass": not log.failed,
    }
    return (0 if not log.failed else 1), report


def _write_report(report: dict, out: str | None) -> None:
    text = json.dumps(report, indent=2, sort_keys=True)
    if out:
        if out.endswith(".csv") and "sweep" in report.get("results", {}):
            rows = report["results"]["sweep"]
            header = ",".join(rows[0].keys())
            lines = [header] + [",".join(repr(v) for v in r.values()) for r in rows]
            with open(out, "w") as fh:
                fh.write("\n".join(lines) + "\n")
        else:
            with open(out, "w") as fh:
                fh.write(text + "\n")
    else:
        print(text)


def _load_json_file(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bdlab", description=__doc__)
    p.add_argument("--replay", metavar="REPORT", help="re-run a stored report's config")
    p.add_argument("--out", help="write the report to this path")
    sub = p.add_subparsers(dest="command")

    def add_op_args(sp):
        sp.add_argument("--op", help="operator JSON file")
        sp.add_argument("--identity", type=int, help="use the identity on l1^N")

    sp = sub.add_parser("dichotomy")
    add_op_args(sp)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("select")
    sp.add_argument("--delta", type=float, required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("factorize")
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--r", type=int, required=True)
    sp.add_argument("--delta", type=float, default=1.0)
    sp.add_argument("--lam", type=float, default=1.3)
    sp.add_argument("--theta", type=float, default=0.05)
    sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("latticebound")
    add_op_args(sp)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--g", help="JSON file with the bound values to verify")

    sp = sub.add_parser("pi2")
    add_op_args(sp)
    sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("random")
    sp.add_argument("--spec", help="random-matrix spec JSON file")
    sp.add_argument("--m", type=int)
    sp.add_argument("--support", help="comma list v:p,v:p of signed support points")
    sp.add_argument("--C", type=float, required=True)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("counterexample")
    sp.add_argument("action", choices=["verify", "sweep"])
    sp.add_argument("--m", type=int)
    sp.add_argument("--k0", type=int)
    sp.add_argument("--C", type=float, default=1.0)
    sp.add_argument("--eps", type=float, default=0.05)
    sp.add_argument("--mmax", type=int, default=16)
    sp.add_argument("--k0s", default="2,3,4")
    sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("inequalities")
    sp.add_argument("--khintchine", action="store_true")
    sp.add_argument("--levy", action="store_true")
    sp.add_argument("--hj", action="store_true")
    sp.add_argument("--m", type=int, default=12)
    sp.add_argument("--trials", type=int, default=200)
    sp.add_argument("--seed", type=int, default=0)
    return p


def _config_from_args(args: argparse.Namespace) -> dict:
    cfg: dict = {"command": args.command}
    if args.command in ("dichotomy", "latticebound", "pi2"):
        if getattr(args, "identity", None):
            cfg["identity"] = args.identity
        elif getattr(args, "op", None):
            cfg["op"] = _load_json_file(args.op)
        else:
            raise SystemExit("need --op FILE or --identity N")
    if args.command == "dichotomy":
        cfg.update(eps=args.eps, n=args.n, seed=args.seed)
    elif args.command == "select":
        cfg.update(delta=args.delta, k=args.k, n=args.n, seed=args.seed)
    elif args.command == "factorize":
        cfg.update(
            k=args.k, r=args.r, delta=args.delta, lam=args.lam,
            theta=args.theta, seed=args.seed,
        )
    elif args.command == "latticebound":
        cfg["eps"] = args.eps
        if args.g:
            cfg["g"] = _load_json_file(args.g)["values"]
    elif args.command == "pi2":
        cfg["seed"] = args.seed
    elif args.command == "random":
        if args.spec:
            cfg["spec"] = _load_json_file(args.spec)
        else:
            if not args.m or not args.support:
                raise SystemExit("need --spec FILE or --m and --support")
            support = []
            for part in args.support.split(","):
                v, pr = part.split(":")
                support.append([float(v), float(pr)])
            cfg["spec"] = {"m": args.m, "support": support, "backend": {"kind": "exact"}}
        cfg.update(C=args.C, eps=args.eps, n=args.n, seed=args.seed)
    elif args.command == "counterexample":
        cfg["action"] = args.action
        if args.action == "verify":
            if args.m is None or args.k0 is None:
                raise SystemExit("verify needs --m and --k0")
            cfg.update(m=args.m, k0=args.k0, C=args.C, eps=args.eps, seed=args.seed)
        else:
            cfg.update(
                mmax=args.mmax,
                k0s=[int(v) for v in args.k0s.split(",")],
                C=args.C,
                eps=args.eps,
            )
    elif args.command == "inequalities":
        picked = [
            name
            for name, flag in (
                ("khintchine", args.khintchine),
                ("levy", args.levy),
                ("hj", args.hj),
            )
            if flag
        ]
        cfg["which"] = picked[0] if len(picked) == 1 else "all"
        cfg.update(m=args.m, trials=args.trials, seed=args.seed)
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.replay:
        stored = _load_json_file(args.replay)
        code, report = run(stored["config"])
        identical = json.dumps(report.get("results"), sort_keys=True) == json.dumps(
            stored.get("results"), sort_keys=True
        )
        report["replay_identical"] = identical
        _write_report(report, args.out)
        if not identical:
            return 1
        return code
    if not args.command:
        build_parser().print_help()
        return 2
    try:
        cfg = _config_from_args(args)
    except SystemExit as exc:
        print(exc, file=sys.stderr)
        return 2
    code, report = run(cfg)
    _write_report(report, args.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
