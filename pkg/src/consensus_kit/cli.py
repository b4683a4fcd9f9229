"""Command-line front end: spectrum, certify, simulate, design-observer.

Exit codes: 0 certified/succeeded, 2 not certified or design failed,
1 input or internal error.  Reports go to stdout as canonical JSON;
trajectories go to the --out path as CSV.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

import consensus_kit
from consensus_kit.certificates import (
    ObserverDesignError,
    SystemSpec,
    check_observer,
    check_theorem1,
    check_theorem2,
    check_theorem2_simplified,
    check_theorem3,
    design_observer_gain,
    find_common_P,
)
from consensus_kit.coupling import validate_coupling
from consensus_kit.formats import (
    canonical_json,
    complex_to_obj,
    matrix_to_obj,
    parse_coupling_text,
    parse_matrix_obj,
    sha256_hex,
    trajectory_csv,
)
from consensus_kit.simulate import (
    SimConfig,
    consensus_reached,
    decay_rate_estimate,
    disagreement,
    simulate_full,
)
from consensus_kit.spectral import analyze_spectrum, connectivity_hint

DEFAULT_SEED = 1729

_CRITERION_TAGS = {
    "t1": "theorem1",
    "t2": "theorem2",
    "t2s": "theorem2-simplified",
    "c1": "corollary1",
    "c2": "corollary2",
    "t3": "theorem3",
}


class _Parser(argparse.ArgumentParser):
    # usage errors are input errors: exit 1, never argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(self._exit_with(message))

    def _exit_with(self, message):
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        return 1


def _resolve_seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    env = os.environ.get("CONSENSUS_KIT_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ValueError(f"CONSENSUS_KIT_SEED must be an integer, got {env!r}") from exc
    return DEFAULT_SEED


def _read_file(path: str) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def _base_report(seed: int, *input_blobs: bytes) -> dict:
    return {
        "input_digest": sha256_hex(*input_blobs),
        "seed": seed,
        "tool_version": consensus_kit.__version__,
    }


def _spectrum_obj(cs) -> dict:
    return {
        "connectivity_hint": connectivity_hint(cs),
        "correspondence_error": cs.correspondence_error,
        "correspondence_ok": cs.correspondence_ok,
        "full": [complex_to_obj(complex(z)) for z in cs.full],
        "lambda2": complex_to_obj(cs.lambda2),
        "reduced": [complex_to_obj(complex(z)) for z in cs.reduced],
    }


def _certificate_obj(cert) -> dict:
    obj = {
        "criterion": cert.criterion,
        "margin": cert.margin,
        "notes": cert.notes,
        "per_mode": [
            {"lambda": complex_to_obj(lam), "value": val} for lam, val in cert.per_mode
        ],
        "verdict": cert.verdict,
    }
    if cert.witnesses:
        obj["witnesses"] = {k: matrix_to_obj(v) for k, v in cert.witnesses.items()}
    return obj


def _load_system(path: str):
    import json

    blob = _read_file(path)
    try:
        obj = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"system file is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ValueError("system file must be a JSON object")
    for key in ("A", "c", "L"):
        if key not in obj:
            raise ValueError(f"system file is missing the {key!r} field")
    a = parse_matrix_obj(obj["A"], "A")
    if np.iscomplexobj(a):
        raise ValueError("A must be real")
    l_entries = parse_matrix_obj(obj["L"], "L")
    if np.iscomplexobj(l_entries):
        raise ValueError("L must be real")
    coupling = validate_coupling(l_entries)
    c = obj["c"]
    if not isinstance(c, (int, float)) or isinstance(c, bool):
        raise ValueError("c must be a number")
    f = cmat = None
    if "Gamma" in obj:
        gamma = parse_matrix_obj(obj["Gamma"], "Gamma")
        if np.iscomplexobj(gamma):
            raise ValueError("Gamma must be real")
    elif "F" in obj and "C" in obj:
        f = parse_matrix_obj(obj["F"], "F")
        cmat = parse_matrix_obj(obj["C"], "C")
        if np.iscomplexobj(f) or np.iscomplexobj(cmat):
            raise ValueError("F and C must be real")
        if f.ndim != 2 or cmat.ndim != 2 or f.shape[1] != cmat.shape[0]:
            raise ValueError(f"F {f.shape} and C {cmat.shape} do not compose")
        gamma = f @ cmat
    else:
        raise ValueError("system file needs either Gamma or both F and C")
    return SystemSpec(A=a, Gamma=gamma, c=float(c), L=coupling), f, cmat, blob


def cmd_spectrum(args) -> int:
    blob = _read_file(args.matrix)
    coupling = parse_coupling_text(blob.decode("utf-8"))
    report = _base_report(_resolve_seed(args), blob)
    report["spectrum"] = _spectrum_obj(analyze_spectrum(coupling))
    sys.stdout.write(canonical_json(report))
    return 0


def cmd_certify(args) -> int:
    s, f, cmat, blob = _load_system(args.system)
    if args.c is not None:
        s = SystemSpec(A=s.A, Gamma=s.Gamma, c=args.c, L=s.L)
    tag = _CRITERION_TAGS[args.criterion]
    blobs = [blob]

    p = None
    if args.p is not None:
        pblob = _read_file(args.p)
        blobs.append(pblob)
        p = parse_matrix_obj(__import__("json").loads(pblob.decode("utf-8")), "P")
        if np.iscomplexobj(p):
            raise ValueError("P must be real")

    notes_extra = None
    if tag == "theorem1":
        cert = check_theorem1(s, args.margin)
    elif tag == "theorem2":
        if p is None and args.auto_p:
            p = find_common_P(s, args.epsilon)
            if p is None:
                report = _base_report(_resolve_seed(args), *blobs)
                report["certificates"] = []
                report["error_notes"] = "no common quadratic form found by the heuristic search"
                sys.stdout.write(canonical_json(report))
                return 2
            notes_extra = "P found by the built-in heuristic search"
        if p is None:
            raise ValueError("criterion t2 needs --p FILE or --auto-p")
        cert = check_theorem2(s, p, args.epsilon)
    elif tag == "theorem2-simplified":
        if p is None and args.auto_p:
            p = find_common_P(s, args.epsilon)
            if p is None:
                report = _base_report(_resolve_seed(args), *blobs)
                report["certificates"] = []
                report["error_notes"] = "no common quadratic form found by the heuristic search"
                sys.stdout.write(canonical_json(report))
                return 2
            notes_extra = "P found by the built-in heuristic search"
        if p is None:
            raise ValueError("criterion t2s needs --p FILE or --auto-p")
        cert = check_theorem2_simplified(s, p, args.epsilon)
    elif tag in ("corollary1", "corollary2"):
        if f is None or cmat is None:
            raise ValueError(f"criterion {args.criterion} needs a system file with F and C")
        if tag == "corollary1":
            cert = check_observer(s.A, f, cmat, s.c, s.L, margin=args.margin)
        else:
            if p is None:
                raise ValueError("criterion c2 needs --p FILE")
            cert = check_observer(s.A, f, cmat, s.c, s.L, P=p, epsilon=args.epsilon)
    else:  # theorem3
        if p is None:
            p = np.eye(s.n)
            notes_extra = "P defaulted to the identity"
        cert = check_theorem3(s.A, s.Gamma, p, s.L, s.c)

    report = _base_report(_resolve_seed(args), *blobs)
    report["spectrum"] = _spectrum_obj(analyze_spectrum(s.L))
    cert_obj = _certificate_obj(cert)
    if notes_extra:
        cert_obj["notes"] = cert_obj["notes"] + "; " + notes_extra
    report["certificates"] = [cert_obj]
    sys.stdout.write(canonical_json(report))
    return 0 if cert.verdict else 2


def cmd_simulate(args) -> int:
    s, _, _, blob = _load_system(args.system)
    seed = _resolve_seed(args)
    blobs = [blob]
    if args.x0 is not None:
        xblob = _read_file(args.x0)
        blobs.append(xblob)
        x0 = parse_matrix_obj(__import__("json").loads(xblob.decode("utf-8")), "x0")
        if np.iscomplexobj(x0):
            raise ValueError("x0 must be real")
        if x0.shape != (s.m, s.n):
            raise ValueError(f"x0 must be {s.m} x {s.n}, got {x0.shape}")
    else:
        rng = np.random.default_rng(seed)
        x0 = rng.uniform(-1.0, 1.0, size=(s.m, s.n))
    cfg = SimConfig(dt=args.dt, t_end=args.t_end, stride=args.stride)
    traj = simulate_full(s, x0, cfg)
    d = disagreement(traj)
    reached, t_reached = consensus_reached(traj, args.tol)
    try:
        rate = decay_rate_estimate(d, window=0.5)
    except ValueError:
        rate = None
    report = _base_report(seed, *blobs)
    report["simulation"] = {
        "consensus_reached": reached,
        "consensus_time": t_reached,
        "decay_rate": rate,
        "diverged": traj.diverged,
        "final_disagreement": float(d.values[-1]),
        "initial_disagreement": float(d.values[0]),
        "recorded_steps": int(len(traj.times)),
        "trajectory_path": args.out,
    }
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(trajectory_csv(traj.times, traj.states))
    sys.stdout.write(canonical_json(report))
    return 0


def cmd_design_observer(args) -> int:
    a_blob = _read_file(args.a)
    c_blob = _read_file(args.c_file)
    l_blob = _read_file(args.l)
    import json

    a = parse_matrix_obj(json.loads(a_blob.decode("utf-8")), "A")
    cmat = parse_matrix_obj(json.loads(c_blob.decode("utf-8")), "C")
    if np.iscomplexobj(a) or np.iscomplexobj(cmat):
        raise ValueError("A and C must be real")
    coupling = parse_coupling_text(l_blob.decode("utf-8"))
    cs = analyze_spectrum(coupling)
    report = _base_report(_resolve_seed(args), a_blob, c_blob, l_blob)
    report["spectrum"] = _spectrum_obj(cs)
    try:
        p, f, c_min = design_observer_gain(a, cmat, args.epsilon, lambda2=cs.lambda2)
    except ObserverDesignError as exc:
        report["design"] = {"succeeded": False, "notes": str(exc)}
        sys.stdout.write(canonical_json(report))
        return 2
    c_run = 1.1 * c_min if c_min is not None and np.isfinite(c_min) else None
    design = {
        "F": matrix_to_obj(f),
        "P": matrix_to_obj(p),
        "c_min": c_min if c_min is None or np.isfinite(c_min) else None,
        "epsilon": args.epsilon,
        "succeeded": True,
    }
    certs = []
    if c_run is not None:
        cert = check_observer(a, f, cmat, c_run, coupling, margin=0.0)
        design["c_checked"] = c_run
        certs.append(_certificate_obj(cert))
    report["design"] = design
    report["certificates"] = certs
    sys.stdout.write(canonical_json(report))
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="consensus-kit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_seed(p):
        p.add_argument("--seed", type=int, default=None,
                       help="RNG seed (flag beats CONSENSUS_KIT_SEED, default fixed)")

    p_spec = sub.add_parser("spectrum", help="full/reduced spectra of a coupling matrix")
    p_spec.add_argument("matrix", help="coupling matrix JSON or m=<count> edge list")
    add_seed(p_spec)
    p_spec.set_defaults(func=cmd_spectrum)

    p_cert = sub.add_parser("certify", help="run a consensus certificate")
    p_cert.add_argument("system", help="system JSON file (A, Gamma or F/C, c, L)")
    p_cert.add_argument("--criterion", required=True, choices=sorted(_CRITERION_TAGS))
    p_cert.add_argument("--p", default=None, help="witness matrix P (JSON matrix file)")
    p_cert.add_argument("--auto-p", action="store_true", help="search for P when none is given (t2/t2s)")
    p_cert.add_argument("--epsilon", type=float, default=1e-6)
    p_cert.add_argument("--margin", type=float, default=0.0)
    p_cert.add_argument("--c", type=float, default=None, help="override the coupling strength")
    add_seed(p_cert)
    p_cert.set_defaults(func=cmd_certify)

    p_sim = sub.add_parser("simulate", help="integrate the coupled system")
    p_sim.add_argument("system", help="system JSON file")
    p_sim.add_argument("--x0", default=None, help="initial states (JSON matrix, m rows x n cols)")
    p_sim.add_argument("--dt", type=float, default=1e-3)
    p_sim.add_argument("--t-end", type=float, default=10.0)
    p_sim.add_argument("--tol", type=float, default=1e-6)
    p_sim.add_argument("--stride", type=int, default=1)
    p_sim.add_argument("--out", default="trajectory.csv", help="trajectory CSV path")
    add_seed(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_des = sub.add_parser("design-observer", help="design an output-injection gain")
    p_des.add_argument("a", help="state matrix A (JSON matrix file)")
    p_des.add_argument("c_file", metavar="c", help="output map C (JSON matrix file)")
    p_des.add_argument("l", help="coupling matrix JSON or edge list")
    p_des.add_argument("--epsilon", type=float, default=0.5)
    add_seed(p_des)
    p_des.set_defaults(func=cmd_design_observer)

    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return int(code) if isinstance(code, int) else 0
    try:
        return args.func(args)
    except ObserverDesignError as exc:
        print(f"consensus-kit: design failed: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # input or internal error
        print(f"consensus-kit: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
