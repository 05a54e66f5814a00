"""Batch experiment harness.

Subcommands cover dimension queries, ground states, Hartree convergence
sweeps, de Finetti and ordering checks, classical Diaconis-Freedman and
Gibbs runs, Fock localization, the free-energy expansion sweep, and the
Berezin-Lieb inequalities.  Every subcommand validates its configuration
before computing, runs its invariant checks, writes a results file plus a
JSON manifest (the only place a timestamp appears), and prints a one-line
summary.

Exit codes: 0 success, 1 usage/configuration error, 2 verification failure.
All randomness is derived from one seed through fixed per-module substream
ids, so identical (config, seed) runs produce byte-identical result files.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import definetti_c, definetti_q, gibbs, hartree, locfock, manybody, symfock

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VERIFICATION = 2

# substream ids for counter-splitting one run seed across modules
STREAM_DEFINETTI = 11
STREAM_GIBBS = 12
STREAM_BL = 13
STREAM_PROJECTOR = 14


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def emit_csv(rows: list[dict], schema: list[str], path: str) -> None:
    """RFC-4180 CSV: CRLF line endings, header row, 17 significant digits."""
    for i, row in enumerate(rows):
        missing = [c for c in schema if c not in row]
        if missing:
            raise ValueError(f"row {i} is missing columns {missing}")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(schema)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in schema])


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"Object of type {o.__class__.__name__} is not JSON serializable")


def emit_json(obj, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def write_manifest(path: str, args: argparse.Namespace, extra: dict | None = None) -> None:
    manifest = {
        "command": args.command,
        "config": {
            k: v for k, v in sorted(vars(args).items()) if k not in ("command", "func")
        },
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    if extra:
        manifest.update(extra)
    emit_json(manifest, path + ".manifest.json")


def worker_count() -> int:
    raw = os.environ.get("BDFL_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def parallel_map(fn, items):
    """Ordered map over sweep points; pool size capped by BDFL_THREADS."""
    n = worker_count()
    if n == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def load_model(path: str) -> manybody.ModelSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            return manybody.ModelSpec.from_json(fh.read())
    except OSError as exc:
        raise _UsageError(f"cannot read model file {path!r}: {exc}")
    except (ValueError, KeyError, TypeError) as exc:
        raise _UsageError(f"invalid model file {path!r}: {exc}")


def load_classical_model(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        m = int(obj["m"])
        V = np.asarray(obj["V"], dtype=float)
        w = np.asarray(obj["w"], dtype=float)
        if V.shape != (m,) or w.shape != (m, m):
            raise ValueError("V must have length m and w must be m x m")
        if np.abs(w - w.T).max() > 1e-12:
            raise ValueError("w must be symmetric")
        return V, w
    except OSError as exc:
        raise _UsageError(f"cannot read classical model file {path!r}: {exc}")
    except (ValueError, KeyError, TypeError) as exc:
        raise _UsageError(f"invalid classical model file {path!r}: {exc}")


def _parse_n_list(text: str) -> list[int]:
    try:
        out = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise _UsageError(f"bad N list {text!r}; expected comma-separated integers")
    if not out or out != sorted(out):
        raise _UsageError("N list must be ascending and nonempty")
    return out


def _state_for(model, N, kind, T):
    H = manybody.assemble_hamiltonian(model, N)
    if kind == "ground":
        gs = manybody.ground_state(H)
        return symfock.pure_state_operator(gs.vector, model.d, N)
    if kind == "gibbs":
        if T is None or T <= 0:
            raise _UsageError("--state gibbs requires --T > 0")
        rho, _ = manybody.gibbs_state(H, T)
        return rho
    raise _UsageError(f"unknown state kind {kind!r}")


# ---------------------------------------------------------------- subcommands


def cmd_dims(args) -> int:
    dim = symfock.sym_dimension(args.d, args.n)
    if args.out:
        emit_json({"d": args.d, "N": args.n, "dim": dim}, args.out)
        write_manifest(args.out, args)
    print(dim)
    return EXIT_OK


def cmd_groundstate(args) -> int:
    model = load_model(args.model)
    H = manybody.assemble_hamiltonian(model, args.N)
    gs = manybody.ground_state(H)
    ok = gs.residual <= 1e-8 * max(1.0, abs(gs.energy))
    out = args.out or "groundstate.json"
    emit_json(
        {
            "N": args.N,
            "d": model.d,
            "energy": gs.energy,
            "energy_per_particle": gs.energy / args.N,
            "degeneracy": gs.degeneracy,
            "residual": gs.residual,
            "pass": ok,
        },
        out,
    )
    write_manifest(out, args)
    print(
        f"groundstate: N={args.N} E={gs.energy:.12g} E/N={gs.energy / args.N:.12g} "
        f"degeneracy={gs.degeneracy} -> {out}"
    )
    return EXIT_OK if ok else EXIT_VERIFICATION


def cmd_hartree(args) -> int:
    model = load_model(args.model)
    N_list = _parse_n_list(args.N_list)
    result = hartree.minimize_hartree(model, restarts=args.restarts, seed=args.seed)
    rows = hartree.convergence_report(model, N_list, seed=args.seed, hartree=result)
    violations = []
    for row in rows:
        row_ok = (
            row["gap"] >= -1e-10
            and row["lower_bound"] <= row["energy_per_particle"] + 1e-10
        )
        row["pass"] = row_ok
        if not row_ok:
            violations.append(f"N={row['N']}: gap or certified bound violated")
    eper = [row["energy_per_particle"] for row in rows]
    if any(b < a - 1e-10 for a, b in zip(eper, eper[1:])):
        violations.append("E(N)/N not non-decreasing along the sweep")
    out = args.out or "hartree.csv"
    emit_csv(rows, ["N", "energy_per_particle", "e_H", "gap", "lower_bound", "pass"], out)
    summary_path = out + ".summary.json"
    emit_json(
        {
            "e_H": result.e_H,
            "u_H": {"re": result.u_H.real.tolist(), "im": result.u_H.imag.tolist()},
            "grad_norm": result.grad_norm,
            "restarts_agree": result.restarts_agree,
            "violations": violations,
        },
        summary_path,
    )
    write_manifest(out, args)
    print(
        f"hartree: e_H={result.e_H:.12g} grad={result.grad_norm:.2e} "
        f"sweep N={N_list[0]}..{N_list[-1]} violations={len(violations)} -> {out}"
    )
    return EXIT_OK if not violations else EXIT_VERIFICATION


def cmd_definetti_check(args) -> int:
    model = load_model(args.model)
    state = _state_for(model, args.N, args.state, args.T)
    report = definetti_q.verify_definetti_bound(state, args.n)
    payload = {
        "N": report.N,
        "d": report.d,
        "n": report.n,
        "distance": report.distance,
        "bound": report.bound,
        "pass": report.passes,
        "bound_sharper": report.bound_sharper,
        "sharper_holds": report.sharper_holds,
    }
    if args.mc_samples > 0:
        sampler = definetti_q.SphereSampler(model.d, args.seed, stream=STREAM_DEFINETTI)
        est, stderr = definetti_q.ckmr_reduced_mc(state, args.n, args.mc_samples, sampler)
        marginals = [symfock.partial_trace(state, l) for l in range(args.n + 1)]
        closed = definetti_q.chiribella_reduced(marginals, args.N, model.d, args.n)
        dev = np.abs(est.matrix - closed.matrix)
        payload["samples"] = args.mc_samples
        payload["stderr"] = float(np.linalg.norm(stderr))
        payload["mc_within_3sigma"] = bool(np.all(dev <= 3.0 * stderr + 1e-12))
    out = args.out or "definetti_check.json"
    emit_json(payload, out)
    write_manifest(out, args)
    print(
        f"definetti-check: N={args.N} n={args.n} distance={report.distance:.6g} "
        f"bound={report.bound:.6g} pass={report.passes} -> {out}"
    )
    ok = report.passes and payload.get("mc_within_3sigma", True)
    return EXIT_OK if ok else EXIT_VERIFICATION


def cmd_wick_check(args) -> int:
    rng = np.random.default_rng(args.seed)
    rows = []
    worst = 0.0
    for N in range(0, args.N + 1):
        for n in range(0, args.n + 1):
            v = rng.normal(size=args.d) + 1j * rng.normal(size=args.d)
            v /= np.linalg.norm(v)
            err = definetti_q.wick_antiwick_identity_error(args.d, N, n, v)
            worst = max(worst, err)
            rows.append({"N": N, "n": n, "max_error": err, "pass": err <= 1e-10})
    out = args.out or "wick_check.csv"
    emit_csv(rows, ["N", "n", "max_error", "pass"], out)
    write_manifest(out, args)
    ok = all(r["pass"] for r in rows)
    print(f"wick-check: d={args.d} sectors<=N={args.N} n<={args.n} max_error={worst:.3e} -> {out}")
    return EXIT_OK if ok else EXIT_VERIFICATION


def cmd_df_classical(args) -> int:
    V, w = load_classical_model(args.model)
    state, F_N = definetti_c.classical_gibbs(V, w, args.N, args.T)
    rows = []
    ok = True
    for n in (1, 2):
        if n > args.n:
            continue
        rep = definetti_c.verify_df_bound(state, n)
        ok = ok and rep.passes
        rows.append(
            {
                "N": rep.N,
                "n": rep.n,
                "tv": rep.tv,
                "bound_general": rep.bound_general,
                "bound_finite": rep.bound_finite,
                "empirical_ratio": rep.empirical_ratio,
                "pass": rep.passes,
            }
        )
    out = args.out or "df_classical.csv"
    emit_csv(
        rows,
        ["N", "n", "tv", "bound_general", "bound_finite", "empirical_ratio", "pass"],
        out,
    )
    write_manifest(out, args, {"F_N": F_N})
    print(f"df-classical: N={args.N} checks={len(rows)} all_pass={ok} -> {out}")
    return EXIT_OK if ok else EXIT_VERIFICATION


def cmd_classical_gibbs(args) -> int:
    V, w = load_classical_model(args.model)
    N_list = _parse_n_list(args.N_list)
    F_MF, rho = definetti_c.mf_free_energy(V, w, args.T, seed=args.seed)

    def one(N):
        state, F_N = definetti_c.classical_gibbs(V, w, N, args.T)
        tv1 = float(np.abs(definetti_c.marginal(state, 1) - rho).sum())
        tv2 = float(np.abs(definetti_c.marginal(state, 2) - np.outer(rho, rho)).sum())
        norm_ok = abs(sum(state.weights.values()) - 1.0) <= 1e-12
        return {
            "N": N,
            "F_N": F_N,
            "F_N_per_particle": F_N / N,
            "F_MF": F_MF,
            "tv1": tv1,
            "tv2": tv2,
            "pass": norm_ok,
        }

    rows = parallel_map(one, N_list)
    out = args.out or "classical_gibbs.csv"
    emit_csv(rows, ["N", "F_N", "F_N_per_particle", "F_MF", "tv1", "tv2", "pass"], out)
    write_manifest(out, args, {"rho_MF": rho.tolist()})
    ok = all(r["pass"] for r in rows)
    print(
        f"classical-gibbs: F_MF={F_MF:.12g} sweep N={N_list[0]}..{N_list[-1]} -> {out}"
    )
    return EXIT_OK if ok else EXIT_VERIFICATION


def cmd_localize(args) -> int:
    model = load_model(args.model)
    state = _state_for(model, args.N, args.state, args.T)
    d = model.d
    if args.random_projector:
        rng = np.random.default_rng(args.seed)
        X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        Q, _ = np.linalg.qr(X)
        P = Q[:, : args.rank] @ Q[:, : args.rank].conj().T
    else:
        P = np.zeros((d, d), dtype=complex)
        for i in range(args.rank):
            P[i, i] = 1.0
    G = locfock.localize(state, P)
    gap = locfock.duality_gap(state, P)
    reduced_err = 0.0
    for n in range(1, min(2, args.N) + 1):
        lhs = locfock.fock_reduced_matrix(G, n)
        Pn = symfock.sector_power(P, n)
        gam = symfock.partial_trace(state, n)
        reduced_err = max(
            reduced_err, float(np.abs(lhs.matrix - Pn @ gam.matrix @ Pn.conj().T).max())
        )
    ok = gap <= 1e-10 and reduced_err <= 1e-10 and abs(G.total_trace() - 1) <= 1e-10
    out = args.out or "localize.json"
    emit_json(
        {
            "N": args.N,
            "rank": args.rank,
            "sector_traces": {str(k): tr for k, tr in enumerate(G.sector_traces())},
            "duality_gap": gap,
            "reduced_identity_error": reduced_err,
            "pass": ok,
        },
        out,
    )
    write_manifest(out, args)
    print(
        f"localize: N={args.N} rank={args.rank} duality_gap={gap:.2e} "
        f"reduced_err={reduced_err:.2e} -> {out}"
    )
    return EXIT_OK if ok else EXIT_VERIFICATION


def cmd_gibbs_appendixB(args) -> int:
    model = load_model(args.model)
    N_list = _parse_n_list(args.N_list) if args.N_list else None
    if N_list is None:
        N_list = [n for n in (25, 50, 100, 200) if n <= args.nmax]
        if not N_list:
            raise _UsageError("--nmax too small; no sweep points")
    fcl = gibbs.classical_free_energy(model, args.t, method="quadrature2d")
    rows = gibbs.appendixB_experiment(model, args.t, N_list, fcl=fcl)
    if args.samples > 0:
        sampler = definetti_q.SphereSampler(model.d, args.seed, stream=STREAM_GIBBS)
        dist_rows = gibbs.gibbs_marginal_convergence(
            model, args.t, N_list, 1, args.samples, sampler
        )
        for row, drow in zip(rows, dist_rows):
            row["dist1"] = drow["distance"]
            row["dist1_3sigma"] = drow["mc_3sigma"]
    schema = ["N", "T", "F_N", "log_dim", "F_cl", "delta", "delta_over_N"]
    if args.samples > 0:
        schema += ["dist1", "dist1_3sigma"]
    ratios = [abs(r["delta_over_N"]) for r in rows]
    ok = all(np.isfinite(list(r.values())[2]) for r in rows)
    decreasing = ratios[-1] <= ratios[0] + 1e-12 if len(ratios) > 1 else True
    for r in rows:
        r["pass"] = ok and decreasing
    out = args.out or "gibbs_appendixB.csv"
    emit_csv(rows, schema + ["pass"], out)
    write_manifest(out, args, {"quadrature_gridsize": fcl.gridsize})
    print(
        f"gibbs-appendixB: t={args.t} F_cl={fcl.value:.10g} sweep {N_list} "
        f"delta/N {ratios[0]:.3g} -> {ratios[-1]:.3g} -> {out}"
    )
    return EXIT_OK if ok and decreasing else EXIT_VERIFICATION


def cmd_bl_check(args) -> int:
    model = load_model(args.model)
    H = manybody.assemble_hamiltonian(model, args.N)
    rho, _ = manybody.gibbs_state(H, args.t * args.N)
    sampler = definetti_q.SphereSampler(model.d, args.seed, stream=STREAM_BL)
    report = gibbs.berezin_lieb_check(rho, sampler, args.samples)
    payload = {
        "N": args.N,
        "entropy_exact": report.entropy_exact,
        "symbol_lower_bound": report.symbol_lower_bound,
        "stderr": report.stderr,
        "first_ok": report.first_ok,
    }
    ok = report.first_ok
    if model.d == 2 and args.second:
        weight_fn = gibbs.classical_gibbs_density(model, args.t)
        samp2 = sampler.split(STREAM_BL + 1)
        norm = float(np.mean(weight_fn(samp2.sample(args.samples))))
        density = lambda U: weight_fn(U) / norm
        state2 = gibbs.coherent_mixture_state(density, args.N)
        rep2 = gibbs.berezin_lieb_check(
            state2, sampler.split(STREAM_BL + 2), args.samples, upper_symbol=density
        )
        payload["second"] = {
            "entropy_exact": rep2.entropy_exact,
            "symbol_upper_bound": rep2.second_bound,
            "stderr": rep2.second_stderr,
            "second_ok": rep2.second_ok,
        }
        ok = ok and bool(rep2.second_ok)
    out = args.out or "bl_check.json"
    emit_json(payload, out)
    write_manifest(out, args)
    print(
        f"bl-check: N={args.N} entropy={report.entropy_exact:.6g} "
        f"bound={report.symbol_lower_bound:.6g} first_ok={report.first_ok} -> {out}"
    )
    return EXIT_OK if ok else EXIT_VERIFICATION


# ---------------------------------------------------------------- plumbing


def build_parser() -> _Parser:
    parser = _Parser(prog="bosonlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, model=True, seed=True):
        if model:
            p.add_argument("--model", required=True, help="model JSON file")
        if seed:
            p.add_argument("--seed", type=int, default=42)
        p.add_argument("--out", default=None, help="output file path")

    p = sub.add_parser("dims", help="bosonic sector dimension")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--n", type=int, required=True, help="particle number N")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_dims)

    p = sub.add_parser("groundstate", help="exact sector ground state")
    common(p, seed=False)
    p.add_argument("--N", type=int, required=True)
    p.set_defaults(func=cmd_groundstate)

    p = sub.add_parser("hartree", help="Hartree minimization and N-sweep")
    common(p)
    p.add_argument("--N-list", dest="N_list", default="10,20,40,80")
    p.add_argument("--restarts", type=int, default=8)
    p.set_defaults(func=cmd_hartree)

    p = sub.add_parser("definetti-check", help="trace-norm de Finetti bound")
    common(p)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--state", choices=["ground", "gibbs"], default="ground")
    p.add_argument("--T", type=float, default=None)
    p.add_argument("--mc-samples", dest="mc_samples", type=int, default=0)
    p.set_defaults(func=cmd_definetti_check)

    p = sub.add_parser("wick-check", help="normal/anti-normal ordering identity")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--N", type=int, default=4)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_wick_check)

    p = sub.add_parser("df-classical", help="Diaconis-Freedman bound on a Gibbs state")
    common(p)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--T", type=float, default=1.0)
    p.set_defaults(func=cmd_df_classical)

    p = sub.add_parser("classical-gibbs", help="finite-state free-energy sweep")
    common(p)
    p.add_argument("--N-list", dest="N_list", default="25,50,100,200")
    p.add_argument("--T", type=float, default=1.0)
    p.set_defaults(func=cmd_classical_gibbs)

    p = sub.add_parser("localize", help="Fock localization of a sector state")
    common(p)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--rank", type=int, default=1)
    p.add_argument("--random-projector", action="store_true")
    p.add_argument("--state", choices=["ground", "gibbs"], default="ground")
    p.add_argument("--T", type=float, default=None)
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("gibbs-appendixB", help="free-energy expansion at T = tN")
    common(p)
    p.add_argument("--t", type=float, default=0.5)
    p.add_argument("--nmax", type=int, default=200)
    p.add_argument("--N-list", dest="N_list", default=None)
    p.add_argument("--samples", type=int, default=0, help="also estimate marginal distances")
    p.set_defaults(func=cmd_gibbs_appendixB)

    p = sub.add_parser("bl-check", help="Berezin-Lieb inequalities on a Gibbs state")
    common(p)
    p.add_argument("--N", type=int, default=10)
    p.add_argument("--t", type=float, default=0.5)
    p.add_argument("--samples", type=int, default=20000)
    p.add_argument("--second", action="store_true", help="also check the upper-symbol direction")
    p.set_defaults(func=cmd_bl_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "rank", None) is not None and args.rank < 0:
            raise _UsageError("--rank must be nonnegative")
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
