"""Command-line front end: configs, file formats, and report generation.

Pipelines are bound together from the library modules: `simulate` writes
datasets, `synthesize` solves one stabilization program, `sparsify` runs
the reweighting loop, `exhaustive` brute-forces minimal patterns,
`verify` re-checks a saved certificate, and `reproduce-paper` runs the
bundled benchmark against the acceptance criteria.

File formats are deliberately plain: matrices as comma-separated rows
printed at 17 significant digits with no header, everything structured
as JSON. Exit codes: 0 success/feasible, 2 infeasible or data not
informative, 3 non-convergence or exhausted search, 4 config or I/O
error, 5 solver failure. A completed verification with a FAIL verdict
exits 1.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .acceptance import run_all
from .blockmat import Partition, bcard, structure_of
from .coneprog import SolverSettings
from .datamodel import (
    ConsistencySet,
    DegenerateConsistencySetError,
    TrajectoryData,
    build_N,
    noise_model_from_energy_bound,
)
from .simulate import (
    NoiseRealization,
    SystemModel,
    paper_fixture,
    random_network_system,
    rollout,
    sample_noise_within,
)
from .sparsify import NotInformativeError, SparsifyOptions, run
from .synth import (
    Infeasible,
    SolverFailureError,
    StabCertificate,
    exhaustive_min_bcard,
    synthesize_blockdiag,
    synthesize_centralized,
    synthesize_row_structured,
)
from .verify import spectral_radius, verify_gain

EXIT_OK = 0
EXIT_VERDICT_FAIL = 1
EXIT_INFEASIBLE = 2
EXIT_NO_CONVERGENCE = 3
EXIT_CONFIG = 4
EXIT_SOLVER = 5


class ConfigError(Exception):
    """Invalid, missing, or unreadable configuration or input files."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a command needs, merged from defaults, file, and flags."""

    out_dir: str = "."
    x_csv: Optional[str] = None
    u_csv: Optional[str] = None
    w_csv: Optional[str] = None
    system_json: Optional[str] = None
    q_csv: Optional[str] = None
    q_scale: Optional[float] = None
    part_p: Optional[tuple] = None
    part_q: Optional[tuple] = None
    mode: str = "centralized"
    sigma: Optional[tuple] = None
    sigma_rows: Optional[tuple] = None
    solver: str = "CLARABEL"
    fallback: Optional[str] = "SCS"
    verbose_solver: bool = False
    seed: int = 0
    samples: int = 100
    max_iter: int = 100
    conv_tol: float = 1e-6
    zero_tol: float = 1e-9
    weight_mode: str = "hard"
    epsilon: float = 1e-6
    search: str = "blockdiag"
    budget: Optional[int] = None
    force: bool = False
    fixture: Optional[str] = None
    T: Optional[int] = None
    agents: Optional[int] = None
    n_i: Optional[tuple] = None
    m_i: Optional[tuple] = None
    coupling_density: float = 0.5
    spectral_scale: float = 1.0
    certificate: Optional[str] = None

    def hash(self) -> str:
        canon = json.dumps(asdict(self), sort_keys=True, default=list)
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


_FIELD_NAMES = {f.name for f in fields(ExperimentConfig)}


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    """Merge defaults < config file < explicit flags."""
    cfg = ExperimentConfig()
    path = getattr(args, "config", None)
    if path:
        try:
            loaded = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
        unknown = set(loaded) - _FIELD_NAMES
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        loaded = {
            k: tuple(v) if isinstance(v, list) else v for k, v in loaded.items()
        }
        cfg = replace(cfg, **loaded)
    overrides = {
        k: v
        for k, v in vars(args).items()
        if k in _FIELD_NAMES and v is not None
    }
    return replace(cfg, **overrides)


def save_matrix(path, M) -> None:
    np.savetxt(path, np.atleast_2d(np.asarray(M, dtype=float)),
               delimiter=",", fmt="%.17g")


def load_matrix(path) -> np.ndarray:
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read matrix {path}: {exc}") from exc


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def save_system(path, sysm: SystemModel) -> None:
    _write_json(Path(path), {
        "A": sysm.A_s.tolist(),
        "B": sysm.B.tolist(),
        "n_i": list(sysm.n_i),
        "m_i": list(sysm.m_i),
    })


def load_system(path):
    """Return (A or None, B, n_i, m_i) from a system description file."""
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read system {path}: {exc}") from exc
    try:
        B = np.asarray(obj["B"], dtype=float)
        n_i = tuple(int(v) for v in obj["n_i"])
        m_i = tuple(int(v) for v in obj["m_i"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"system {path} is missing or malforms B/n_i/m_i") from exc
    A = None
    if obj.get("A") is not None:
        A = np.asarray(obj["A"], dtype=float)
    return A, B, n_i, m_i


def save_certificate(path, cert: StabCertificate) -> None:
    _write_json(Path(path), {
        "P": cert.P.tolist(),
        "L": cert.L.tolist(),
        "alpha": cert.alpha,
        "beta": cert.beta,
        "residual_min_eig": cert.residual_min_eig,
    })


def load_certificate(path) -> StabCertificate:
    try:
        obj = json.loads(Path(path).read_text())
        return StabCertificate(
            P=np.asarray(obj["P"], dtype=float),
            L=np.asarray(obj["L"], dtype=float),
            alpha=float(obj["alpha"]),
            beta=float(obj["beta"]),
            residual_min_eig=float(obj["residual_min_eig"]),
        )
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"cannot read certificate {path}: {exc}") from exc


def write_step_svg(path: Path, ys, title: str, ylabel: str) -> None:
    """Minimal static step chart, one polyline over integer iterations."""
    W, H = 640, 400
    ml, mr, mt, mb = 62, 18, 34, 46
    ys = [float(v) for v in ys]
    T = max(1, len(ys) - 1)
    ymax = max(ys + [1.0])
    ymin = 0.0
    span = ymax - ymin or 1.0

    def sx(t):
        return ml + (W - ml - mr) * t / T

    def sy(v):
        return H - mb - (H - mt - mb) * (v - ymin) / span

    pts = []
    for t, v in enumerate(ys):
        if t > 0:
            pts.append(f"{sx(t):.1f},{sy(ys[t-1]):.1f}")
        pts.append(f"{sx(t):.1f},{sy(v):.1f}")
    xticks = sorted({0, T // 4, T // 2, 3 * T // 4, T})
    ystep = max(1, int(np.ceil(span / 6)))
    yticks = list(np.arange(0, ymax + ystep / 2, ystep))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W/2:.0f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{ml}" y1="{H-mb}" x2="{W-mr}" y2="{H-mb}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{H-mb}" stroke="black"/>',
    ]
    for t in xticks:
        x = sx(t)
        parts.append(f'<line x1="{x:.1f}" y1="{H-mb}" x2="{x:.1f}" y2="{H-mb+4}" stroke="black"/>')
        parts.append(f'<text x="{x:.1f}" y="{H-mb+18}" text-anchor="middle">{t}</text>')
    for v in yticks:
        y = sy(v)
        parts.append(f'<line x1="{ml-4}" y1="{y:.1f}" x2="{ml}" y2="{y:.1f}" stroke="black"/>')
        parts.append(f'<text x="{ml-8}" y="{y+4:.1f}" text-anchor="end">{v:g}</text>')
    parts.append(f'<text x="{W/2:.0f}" y="{H-10}" text-anchor="middle">iteration</text>')
    parts.append(
        f'<text x="16" y="{(H-mb+mt)/2:.0f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {(H-mb+mt)/2:.0f})">{ylabel}</text>'
    )
    parts.append(f'<polyline points="{" ".join(pts)}" fill="none" stroke="#1965b0" stroke-width="2"/>')
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n")


def _require(value, flag: str):
    if value is None:
        raise ConfigError(f"missing required option: {flag}")
    return value


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _noise_Q(cfg: ExperimentConfig, n: int) -> np.ndarray:
    if cfg.q_csv is not None:
        Q = load_matrix(cfg.q_csv)
        if Q.shape != (n, n):
            raise ConfigError(f"Q from {cfg.q_csv} has shape {Q.shape}, expected ({n}, {n})")
        return Q
    if cfg.q_scale is not None:
        if cfg.q_scale < 0:
            raise ConfigError("q_scale must be nonnegative")
        return float(cfg.q_scale) * np.eye(n)
    raise ConfigError("noise model required: give --q Q.csv or --q-scale")


@dataclass
class LoadedProblem:
    data: TrajectoryData
    B: np.ndarray
    A_true: Optional[np.ndarray]
    cset: ConsistencySet
    part: Optional[Partition]


def _load_problem(cfg: ExperimentConfig, need_partition: bool = False) -> LoadedProblem:
    X = load_matrix(_require(cfg.x_csv, "--x"))
    U = load_matrix(_require(cfg.u_csv, "--u"))
    A_true, B, n_i, m_i = load_system(_require(cfg.system_json, "--system"))
    try:
        data = TrajectoryData(X, U)
        model = noise_model_from_energy_bound(_noise_Q(cfg, data.n), data.T)
        cset = build_N(data, B, model)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    p = cfg.part_p if cfg.part_p is not None else m_i
    q = cfg.part_q if cfg.part_q is not None else n_i
    part = None
    if p is not None and q is not None:
        try:
            part = Partition(tuple(int(v) for v in p), tuple(int(v) for v in q))
            part.check_shape(np.zeros((data.m, data.n)))
        except ValueError as exc:
            raise ConfigError(f"partition does not match data: {exc}") from exc
    if need_partition and part is None:
        raise ConfigError("a gain partition is required: give --part-p and --part-q")
    return LoadedProblem(data, B, A_true, cset, part)


def _solver_settings(cfg: ExperimentConfig) -> SolverSettings:
    fallback = cfg.fallback
    if isinstance(fallback, str) and fallback.lower() in ("", "none"):
        fallback = None
    return SolverSettings(solver=cfg.solver, fallback=fallback,
                          verbose=cfg.verbose_solver)


def _verification_section(cert, cset, B, A_true, cfg: ExperimentConfig):
    report = verify_gain(cert, cset, B, A_true=A_true,
                         n_samples=cfg.samples, rng_seed=cfg.seed)
    return report, report.as_dict()


def cmd_simulate(cfg: ExperimentConfig) -> int:
    t0 = time.perf_counter()
    out = _out_dir(cfg)
    if cfg.fixture is not None:
        if cfg.fixture != "paper":
            raise ConfigError(f"unknown fixture {cfg.fixture!r} (available: paper)")
        sysm, data, noise, Q = paper_fixture()
    else:
        r = _require(cfg.agents, "--agents")
        n_i = tuple(int(v) for v in _require(cfg.n_i, "--n-i"))
        m_i = tuple(int(v) for v in _require(cfg.m_i, "--m-i"))
        T = int(_require(cfg.T, "--T"))
        if T <= 0:
            raise ConfigError("window length T must be positive")
        try:
            base = random_network_system(r, n_i, m_i, cfg.coupling_density,
                                         rng_seed=cfg.seed)
            sysm = SystemModel(cfg.spectral_scale * base.A_s, base.B, n_i, m_i)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        Q = _noise_Q(cfg, sysm.n) if (cfg.q_csv or cfg.q_scale is not None) \
            else 0.05 * np.eye(sysm.n)
        noise = sample_noise_within(Q, T, rng_seed=cfg.seed + 1)
        rng = np.random.default_rng(cfg.seed)
        x0 = rng.standard_normal(sysm.n)
        U = rng.standard_normal((sysm.m, T))
        data = rollout(sysm, x0, U, noise.W)
    save_matrix(out / "X.csv", data.X)
    save_matrix(out / "U.csv", data.U)
    save_matrix(out / "W.csv", noise.W)
    save_matrix(out / "Q.csv", Q)
    save_system(out / "system.json", sysm)
    _write_json(out / "report.json", {
        "command": "simulate",
        "config_hash": cfg.hash(),
        "fixture": cfg.fixture,
        "seed": cfg.seed,
        "shapes": {"n": sysm.n, "m": sysm.m, "T": data.T},
        "outputs": ["X.csv", "U.csv", "W.csv", "Q.csv", "system.json"],
        "timings": {"total": time.perf_counter() - t0},
    })
    return EXIT_OK


def cmd_synthesize(cfg: ExperimentConfig) -> int:
    t0 = time.perf_counter()
    out = _out_dir(cfg)
    prob = _load_problem(cfg, need_partition=cfg.mode != "centralized")
    settings = _solver_settings(cfg)
    t1 = time.perf_counter()
    if cfg.mode == "centralized":
        outcome = synthesize_centralized(prob.cset, prob.B, settings)
    elif cfg.mode == "rows":
        if prob.part.l != 1:
            raise ConfigError(
                "rows mode treats the state as one block: pass --part-q n"
            )
        rows = _require(cfg.sigma_rows, "--sigma-rows")
        if len(rows) != prob.part.k:
            raise ConfigError(f"sigma_rows needs {prob.part.k} entries, got {len(rows)}")
        outcome = synthesize_row_structured(
            prob.cset, prob.B, prob.part, [bool(int(v)) for v in rows], settings
        )
    elif cfg.mode == "blockdiag":
        sig = np.asarray(_require(cfg.sigma, "--sigma"), dtype=float)
        if sig.shape != (prob.part.k, prob.part.l):
            raise ConfigError(
                f"sigma shape {sig.shape} does not match partition "
                f"({prob.part.k}, {prob.part.l})"
            )
        outcome = synthesize_blockdiag(
            prob.cset, prob.B, prob.part, sig.astype(bool), settings
        )
    else:
        raise ConfigError(f"unknown mode {cfg.mode!r} "
                          "(available: centralized, rows, blockdiag)")
    solve_time = time.perf_counter() - t1
    report = {
        "command": "synthesize",
        "config_hash": cfg.hash(),
        "mode": cfg.mode,
        "timings": {"solve": solve_time},
    }
    if isinstance(outcome, Infeasible):
        report["outcome"] = "infeasible"
        report["message"] = outcome.message
        report["timings"]["total"] = time.perf_counter() - t0
        _write_json(out / "report.json", report)
        print(f"infeasible: {outcome.message}")
        return EXIT_INFEASIBLE
    cert = outcome
    t2 = time.perf_counter()
    vreport, vdict = _verification_section(cert, prob.cset, prob.B, prob.A_true, cfg)
    save_certificate(out / "certificate.json", cert)
    save_matrix(out / "K.csv", cert.K)
    report.update({
        "outcome": "feasible",
        "certificate": {
            "alpha": cert.alpha,
            "beta": cert.beta,
            "residual_min_eig": cert.residual_min_eig,
            "path": "certificate.json",
        },
        "gain": "K.csv",
        "bcard": bcard(cert.K, prob.part, cfg.zero_tol) if prob.part else None,
        "verification": vdict,
    })
    if prob.A_true is not None:
        report["closed_loop_spectral_radius"] = spectral_radius(
            prob.A_true + prob.B @ cert.K
        )
    report["timings"]["verify"] = time.perf_counter() - t2
    report["timings"]["total"] = time.perf_counter() - t0
    _write_json(out / "report.json", report)
    print(f"feasible: residual min-eig {cert.residual_min_eig:.3e}, "
          f"verification {'PASS' if vreport.passed else 'FAIL'}")
    return EXIT_OK


def cmd_sparsify(cfg: ExperimentConfig) -> int:
    t0 = time.perf_counter()
    out = _out_dir(cfg)
    prob = _load_problem(cfg, need_partition=True)
    opts = SparsifyOptions(
        max_iter=cfg.max_iter,
        conv_tol=cfg.conv_tol,
        zero_tol=cfg.zero_tol,
        weight_mode=cfg.weight_mode,
        epsilon=cfg.epsilon,
        verify_samples=cfg.samples,
        verify_seed=cfg.seed,
        settings=_solver_settings(cfg),
    )
    trace = run(prob.cset, prob.B, prob.part, opts)
    records = trace.iteration_records()
    _write_json(out / "trace.json", {
        "config_hash": cfg.hash(),
        "weight_mode": cfg.weight_mode,
        "epsilon": cfg.epsilon,
        "zero_tol": cfg.zero_tol,
        "conv_tol": cfg.conv_tol,
        "max_iter": cfg.max_iter,
        "converged": trace.converged,
        "reason": trace.reason,
        "polished": trace.polished,
        "iterations": records,
        "verification": trace.verification.as_dict() if trace.verification else None,
    })
    with (out / "iterations.csv").open("w") as fh:
        fh.write("t,bcard,f_value,residual_min_eig,solve_status\n")
        for rec in records:
            f_val = "nan" if rec["f_value"] is None else f"{rec['f_value']:.17g}"
            fh.write(f"{rec['t']},{rec['bcard']},{f_val},"
                     f"{rec['residual_min_eig']:.17g},{rec['solve_status']}\n")
    write_step_svg(out / "bcard.svg", [rec["bcard"] for rec in records],
                   "nonzero gain blocks per iteration", "bcard")
    report = {
        "command": "sparsify",
        "config_hash": cfg.hash(),
        "weight_mode": cfg.weight_mode,
        "epsilon": cfg.epsilon if cfg.weight_mode == "epsilon" else None,
        "converged": trace.converged,
        "reason": trace.reason,
        "iterations": len(trace.states) - 1,
        "trace": "trace.json",
        "plot": "bcard.svg",
        "verification": trace.verification.as_dict() if trace.verification else None,
    }
    if trace.final_certificate is not None:
        cert = trace.final_certificate
        save_certificate(out / "certificate.json", cert)
        save_matrix(out / "K.csv", cert.K)
        report["certificate"] = {
            "alpha": cert.alpha,
            "beta": cert.beta,
            "residual_min_eig": cert.residual_min_eig,
            "polished": trace.polished,
            "path": "certificate.json",
        }
        report["gain"] = "K.csv"
        report["bcard"] = bcard(cert.K, prob.part, cfg.zero_tol)
        report["pattern"] = trace.final_state.pattern_bitmap(prob.part, cfg.zero_tol)
        if prob.A_true is not None:
            report["closed_loop_spectral_radius"] = spectral_radius(
                prob.A_true + prob.B @ cert.K
            )
    report["timings"] = {"total": time.perf_counter() - t0}
    _write_json(out / "report.json", report)
    verdict = trace.verification.passed if trace.verification else None
    print(f"converged={trace.converged} ({trace.reason}), "
          f"bcard {report.get('bcard')}, verification "
          f"{'PASS' if verdict else 'FAIL' if verdict is not None else 'n/a'}")
    if trace.converged:
        return EXIT_OK
    return EXIT_SOLVER if trace.reason == "solver failure" else EXIT_NO_CONVERGENCE


def cmd_exhaustive(cfg: ExperimentConfig) -> int:
    t0 = time.perf_counter()
    out = _out_dir(cfg)
    prob = _load_problem(cfg, need_partition=True)
    if cfg.search not in ("rows", "blockdiag"):
        raise ConfigError(f"unknown search {cfg.search!r} (available: rows, blockdiag)")
    try:
        result = exhaustive_min_bcard(
            prob.cset, prob.B, prob.part, mode=cfg.search,
            budget=cfg.budget, force=cfg.force, settings=_solver_settings(cfg),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    report = {
        "command": "exhaustive",
        "config_hash": cfg.hash(),
        "search": cfg.search,
        "outcome": result.outcome,
        "patterns_enumerated": result.n_enumerated,
        "solver_failures": result.solver_failures,
        "timings": {"total": time.perf_counter() - t0},
    }
    if result.outcome == "found":
        cert = result.certificate
        vreport, vdict = _verification_section(cert, prob.cset, prob.B,
                                               prob.A_true, cfg)
        save_certificate(out / "certificate.json", cert)
        save_matrix(out / "K.csv", cert.K)
        report["minimal_bcard"] = result.sigma.ones_count()
        report["pattern"] = [[int(v) for v in row] for row in result.sigma.sigma]
        report["certificate"] = {
            "alpha": cert.alpha,
            "beta": cert.beta,
            "residual_min_eig": cert.residual_min_eig,
            "path": "certificate.json",
        }
        report["verification"] = vdict
        _write_json(out / "report.json", report)
        print(f"minimal bcard {result.sigma.ones_count()} after "
              f"{result.n_enumerated} patterns, verification "
              f"{'PASS' if vreport.passed else 'FAIL'}")
        return EXIT_OK
    _write_json(out / "report.json", report)
    print(f"{result.outcome} after {result.n_enumerated} patterns")
    return EXIT_INFEASIBLE if result.outcome == "all_infeasible" else EXIT_NO_CONVERGENCE


def cmd_verify(cfg: ExperimentConfig) -> int:
    t0 = time.perf_counter()
    out = _out_dir(cfg)
    prob = _load_problem(cfg)
    cert = load_certificate(_require(cfg.certificate, "--certificate"))
    report, vdict = _verification_section(cert, prob.cset, prob.B, prob.A_true, cfg)
    _write_json(out / "verification.json", vdict)
    _write_json(out / "report.json", {
        "command": "verify",
        "config_hash": cfg.hash(),
        "certificate": cfg.certificate,
        "verification": vdict,
        "timings": {"total": time.perf_counter() - t0},
    })
    print(f"verification {'PASS' if report.passed else 'FAIL'}: "
          f"residual min-eig {report.residual_min_eig:.3e}, "
          f"{report.samples_failed}/{report.n_samples} samples failed")
    return EXIT_OK if report.passed else EXIT_VERDICT_FAIL


def cmd_reproduce_paper(args: argparse.Namespace) -> int:
    results = run_all(corrupt_fixture=bool(getattr(args, "corrupt_fixture", False)))
    all_passed = all(r.passed for r in results)
    if getattr(args, "json", False):
        print(json.dumps({
            "criteria": [
                {"number": r.number, "name": r.name,
                 "passed": r.passed, "details": r.details}
                for r in results
            ],
            "all_passed": all_passed,
        }, indent=2))
    else:
        width = max(len(r.name) for r in results)
        for r in results:
            mark = "PASS" if r.passed else "FAIL"
            print(f"  [{mark}] {r.number}. {r.name:<{width}}  {r.details}")
        print(f"{sum(r.passed for r in results)}/{len(results)} criteria passed")
    if getattr(args, "out_dir", None):
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "report.json", {
            "command": "reproduce-paper",
            "all_passed": all_passed,
            "criteria": [
                {"number": r.number, "name": r.name,
                 "passed": r.passed, "details": r.details}
                for r in results
            ],
        })
    return EXIT_OK if all_passed else EXIT_VERDICT_FAIL


def _int_tuple(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}") from exc


def _sigma_arg(text: str) -> tuple:
    try:
        rows = json.loads(text)
        return tuple(tuple(int(v) for v in row) for row in rows)
    except (json.JSONDecodeError, TypeError, ValueError) as exc:
        raise argparse.ArgumentTypeError(
            f"expected a JSON list of 0/1 rows, e.g. [[1,0],[0,1]]: {text!r}"
        ) from exc


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="JSON file with ExperimentConfig fields")
    sp.add_argument("--out-dir", dest="out_dir", help="output directory (default .)")
    sp.add_argument("--seed", type=int, help="random seed")


def _add_data(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--x", dest="x_csv", help="state trajectory CSV, n x (T+1)")
    sp.add_argument("--u", dest="u_csv", help="input CSV, m x T")
    sp.add_argument("--w", dest="w_csv", help="noise CSV, n x T (informational)")
    sp.add_argument("--system", dest="system_json", help="system description JSON")
    sp.add_argument("--q", dest="q_csv", help="noise energy bound Q as CSV")
    sp.add_argument("--q-scale", dest="q_scale", type=float,
                    help="use Q = q_scale * I")
    sp.add_argument("--part-p", dest="part_p", type=_int_tuple,
                    help="gain row block sizes, comma-separated")
    sp.add_argument("--part-q", dest="part_q", type=_int_tuple,
                    help="gain column block sizes, comma-separated")


def _add_solver(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--solver", help="conic backend (default CLARABEL)")
    sp.add_argument("--fallback", help="fallback backend, or 'none'")
    sp.add_argument("--verbose-solver", dest="verbose_solver",
                    action="store_true", default=None)
    sp.add_argument("--samples", type=int, help="verification sample count")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparsegain",
        description="Data-driven synthesis of block-sparse stabilizing gains.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="generate or export a dataset")
    _add_common(sp)
    sp.add_argument("--fixture", help="named bundled dataset (paper)")
    sp.add_argument("--agents", type=int, help="number of agents r")
    sp.add_argument("--n-i", dest="n_i", type=_int_tuple, help="state sizes per agent")
    sp.add_argument("--m-i", dest="m_i", type=_int_tuple, help="input sizes per agent")
    sp.add_argument("--T", dest="T", type=int, help="trajectory window length")
    sp.add_argument("--coupling-density", dest="coupling_density", type=float,
                    help="probability an off-diagonal block is nonzero")
    sp.add_argument("--spectral-scale", dest="spectral_scale", type=float,
                    help="multiplier applied to the generated A")
    sp.add_argument("--q", dest="q_csv", help="noise energy bound Q as CSV")
    sp.add_argument("--q-scale", dest="q_scale", type=float, help="use Q = q_scale * I")
    sp.set_defaults(handler=cmd_simulate)

    sp = sub.add_parser("synthesize", help="solve one stabilization program")
    _add_common(sp)
    _add_data(sp)
    _add_solver(sp)
    sp.add_argument("--mode", choices=["centralized", "rows", "blockdiag"])
    sp.add_argument("--sigma", type=_sigma_arg,
                    help="block pattern as JSON rows (blockdiag mode)")
    sp.add_argument("--sigma-rows", dest="sigma_rows", type=_int_tuple,
                    help="row pattern as comma-separated 0/1 (rows mode)")
    sp.add_argument("--zero-tol", dest="zero_tol", type=float)
    sp.set_defaults(handler=cmd_synthesize)

    sp = sub.add_parser("sparsify", help="run the reweighting loop")
    _add_common(sp)
    _add_data(sp)
    _add_solver(sp)
    sp.add_argument("--max-iter", dest="max_iter", type=int)
    sp.add_argument("--conv-tol", dest="conv_tol", type=float)
    sp.add_argument("--zero-tol", dest="zero_tol", type=float)
    sp.add_argument("--weight-mode", dest="weight_mode", choices=["hard", "epsilon"])
    sp.add_argument("--epsilon", type=float)
    sp.set_defaults(handler=cmd_sparsify)

    sp = sub.add_parser("exhaustive", help="brute-force the minimal pattern")
    _add_common(sp)
    _add_data(sp)
    _add_solver(sp)
    sp.add_argument("--search", choices=["rows", "blockdiag"])
    sp.add_argument("--budget", type=int, help="max patterns to try")
    sp.add_argument("--force", action="store_true", default=None,
                    help="lift the pattern-count guard")
    sp.add_argument("--zero-tol", dest="zero_tol", type=float)
    sp.set_defaults(handler=cmd_exhaustive)

    sp = sub.add_parser("verify", help="re-check a saved certificate")
    _add_common(sp)
    _add_data(sp)
    _add_solver(sp)
    sp.add_argument("--certificate", help="certificate JSON to verify")
    sp.set_defaults(handler=cmd_verify)

    sp = sub.add_parser("reproduce-paper",
                        help="run the bundled benchmark against all acceptance checks")
    sp.add_argument("--json", action="store_true", help="machine-readable verdict")
    sp.add_argument("--out-dir", dest="out_dir")
    sp.add_argument("--corrupt-fixture", dest="corrupt_fixture",
                    action="store_true", help=argparse.SUPPRESS)
    sp.set_defaults(handler=cmd_reproduce_paper, raw_args=True)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "raw_args", False):
            return args.handler(args)
        cfg = build_config(args)
        return args.handler(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NotInformativeError as exc:
        print(f"{exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except DegenerateConsistencySetError as exc:
        print(f"{exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SolverFailureError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
