"""Command-line driver: ``riesz-trace run | sweep | verify-mp | mesh``.

Exit codes: 0 when every hard check passes, 1 when a check fails (reports
are still written), 2 for unusable configuration or mesh input.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import hilbert as hb
from .assembly import assemble_forms
from .geometry import MeshParseError, MeshValidationError, generate_structured_mesh, load_mesh, validate_mesh, write_mesh
from .operators import ConsistencyError, build_core, harmonic_lift, rellich_ratio
from .riesz import (
    RankCollapseError,
    basis_residuals,
    biorthogonality_residual,
    build_bases,
    reconstruction_check,
    riesz_bounds,
)
from .solver import regularity_report, step_datum, very_weak_solve, weak_form_residual
from .spectral import eigendecompose_core, h1_equivalence_check, hs_norm, spectrum_table

logger = logging.getLogger("riesz_trace")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

# (report key, tolerance): the check passes when the value is <= tolerance
HARD_CHECKS = [
    ("structural_residual", 1e-8),
    ("self_adjoint_residual", 1e-8),
    ("e1_factorization_residual", 1e-9),
    ("basis_gamma0_star_g", 1e-8),
    ("basis_k_y", 1e-8),
    ("biorthogonality", 1e-8),
    ("recon_sy_ag_identity", 1e-8),
    ("recon_sg_ay_identity", 1e-8),
    ("recon_ay_kstar_vs_mk_aphi", 1e-8),
    ("recon_ag_gamma0_vs_mk_aphi", 1e-8),
    ("recon_gamma0_sy_ay_kstar", 1e-8),
    ("recon_gamma0_sy_ag_gamma0", 1e-8),
    ("recon_kstar_sg_ag_gamma0", 1e-8),
    ("recon_kstar_sg_ay_kstar", 1e-8),
    ("recon_expansion_in_y", 1e-8),
    ("recon_expansion_in_g", 1e-8),
    ("sandwich_failures", 0),
    ("half_norm_path_gap", 1e-9),
    ("weak_form_residual", 1e-7),
    ("full_truncation_gap", 1e-8),
]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    domain: str = "unit_square"
    mesh: str | None = None
    n: int = 8
    n_list: tuple = (4, 8, 16)
    seed: int = 0
    rank_tol: float = hb.DEFAULT_RANK_TOL
    out: str = "out"
    truncation: int | None = None
    samples: int = 100
    s_values: tuple = (0.5, 1.0)

    def validate(self) -> "RunConfig":
        if self.n < 1 or any(k < 1 for k in self.n_list):
            raise ConfigError("refinement n must be >= 1")
        if not 0.0 < self.rank_tol <= 1e-4:
            raise ConfigError(f"rank_tol must lie in (0, 1e-4], got {self.rank_tol}")
        if any(not 0.0 <= s <= 1.0 for s in self.s_values):
            raise ConfigError("s values must lie in [0, 1]")
        if self.samples < 1:
            raise ConfigError("samples must be >= 1")
        if self.truncation is not None and self.truncation < 1:
            raise ConfigError("truncation must be >= 1")
        return self


def _int_list(text: str) -> tuple:
    return tuple(int(t) for t in str(text).replace(",", " ").split())


def _float_list(text: str) -> tuple:
    return tuple(float(t) for t in str(text).replace(",", " ").split())


_CASTS = {
    "domain": str, "mesh": str, "n": int, "n_list": _int_list, "seed": int,
    "rank_tol": float, "out": str, "truncation": int, "samples": int, "s_values": _float_list,
}


def read_config_file(path) -> dict:
    """``key = value`` lines, ``#`` comments; keys may use dashes."""
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, val = (t.strip() for t in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _CASTS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = val
    return values


def build_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the config file, then explicit flags."""
    raw = read_config_file(args.config) if getattr(args, "config", None) else {}
    for f in fields(RunConfig):
        val = getattr(args, f.name, None)
        if val is not None:
            raw[f.name] = val
    typed = {}
    for key, val in raw.items():
        try:
            typed[key] = val if not isinstance(val, str) or _CASTS[key] is str else _CASTS[key](val)
        except ValueError:
            raise ConfigError(f"bad value for {key}: {val!r}") from None
    if "domain" in typed:
        typed["domain"] = typed["domain"].replace("-", "_")
    return RunConfig(**typed).validate()


# ---------------------------------------------------------------- output


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if value is None:
        return "null"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return "%.17g" % v if math.isfinite(v) else "null"
    return json.dumps(str(value))


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_json(path, obj: dict) -> None:
    """Flat JSON object, floats with 17 significant digits."""
    body = ",\n".join(f"  {json.dumps(k)}: {_fmt(v)}" for k, v in obj.items())
    _atomic_write(Path(path), "{\n" + body + "\n}\n")


def write_csv(path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join("" if v is None else _fmt(v).strip('"') for v in row))
    _atomic_write(Path(path), "\n".join(lines) + "\n")


# -------------------------------------------------------------- pipeline


@dataclass
class PipelineResult:
    residuals: dict
    regularity: dict
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def _load(config: RunConfig, n: int):
    if config.mesh:
        return load_mesh(config.mesh)
    try:
        return generate_structured_mesh(config.domain, n)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def run_pipeline(config: RunConfig, n: int | None = None, out: Path | None = None) -> PipelineResult:
    """mesh, forms, operators, spectrum, bases, checks, reports."""
    n = config.n if n is None else n
    out = Path(config.out) if out is None else out
    mesh = _load(config, n)
    forms = assemble_forms(mesh)
    suite = build_core(forms, config.rank_tol)
    eig = eigendecompose_core(suite)
    pair = build_bases(suite, eig)
    L2, L2b = suite.l2_omega, suite.l2_boundary
    bg = riesz_bounds(pair.g_cols, L2b, config.rank_tol)
    by = riesz_bounds(pair.y_cols, L2b, config.rank_tol)

    res = {
        "seed": config.seed,
        "rank_tol": config.rank_tol,
        "n_nodes": forms.n_nodes,
        "n_boundary": forms.n_boundary,
        "N": pair.N,
        "kappa_min": float(eig.kappa.min()),
        "kappa_max": float(eig.kappa.max()),
        "structural_residual": suite.structural_residual,
        "self_adjoint_residual": suite.self_adjoint_residual(),
        "e1_factorization_residual": suite.thm_residual(),
    }
    res.update({f"basis_{k}": v for k, v in basis_residuals(suite, eig, pair).items()})
    res["biorthogonality"] = biorthogonality_residual(pair, eig.clusters())
    rc = reconstruction_check(pair, suite, eig, sample_count=min(config.samples, 20), seed=config.seed)
    res.update({f"recon_{k}": v for k, v in rc.items()})
    res.update({"a_G": bg.lower, "b_G": bg.upper, "a_Y": by.lower, "b_Y": by.upper})

    rng = np.random.default_rng(config.seed)
    samples = rng.standard_normal((config.samples, forms.n_boundary))
    samples[0] = 1.0
    fails, worst_low, path_gap, trunc_gap, weak = 0, math.inf, 0.0, 0.0, 0.0
    for k, g in enumerate(samples):
        rep = regularity_report(g, pair, eig, bg)
        fails += not rep["sandwich_holds"]
        worst_low = min(worst_low, rep["slack_low"], rep["slack_high"])
        sol = very_weak_solve(g, pair, eig)
        lift = harmonic_lift(forms, g)
        path_gap = max(path_gap, abs(sol.h_half_norm - hs_norm(lift, 0.5, eig)))
        trunc_gap = max(trunc_gap, L2.norm(sol.field - lift))
        if k < 10:
            weak = max(weak, weak_form_residual(sol, g, forms, test_count=20, seed=config.seed + k))
    res.update({
        "sandwich_failures": fails,
        "sandwich_min_slack": worst_low,
        "half_norm_path_gap": path_gap,
        "weak_form_residual": weak,
        "full_truncation_gap": trunc_gap,
        "rellich_ratio": rellich_ratio(forms, seed=config.seed),
    })
    lo, hi = h1_equivalence_check(suite, eig, sample_count=min(config.samples, 50), seed=config.seed)
    res.update({"h1_ratio_min": lo, "h1_ratio_max": hi})

    failures = [k for k, tol in HARD_CHECKS if not res[k] <= tol]
    if not (bg.full_rank and by.full_rank and bg.lower > 0 and by.lower > 0):
        failures.append("riesz_bounds")
    res["all_passed"] = not failures

    step = step_datum(mesh)
    reg = regularity_report(step, pair, eig, bg)
    if config.truncation is not None:
        sol = very_weak_solve(step, pair, eig, min(config.truncation, pair.N))
        reg["truncated_N"] = sol.n_used
        reg["truncated_norm_v_half"] = sol.h_half_norm
    v = very_weak_solve(step, pair, eig).field
    for s in config.s_values:
        reg[f"hs_norm_s{s:g}"] = hs_norm(v, s, eig)

    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "spectrum.csv", ["n", "kappa", "kappa_squared"], spectrum_table(eig))
    header = ["n", "kappa"] + [f"node_{i}" for i in forms.boundary]
    for name, cols in (("bases_g.csv", pair.g_cols), ("bases_y.csv", pair.y_cols)):
        rows = [[j + 1, pair.kappa[j], *cols[:, j]] for j in range(pair.N)]
        write_csv(out / name, header, rows)
    write_json(out / "residuals.json", res)
    write_json(out / "regularity.json", reg)
    return PipelineResult(res, reg, failures)


SWEEP_COLUMNS = [
    "n", "a_G", "b_G", "a_Y", "b_Y", "rellich_ratio", "h1_ratio_min", "h1_ratio_max",
    "step_s_half_sum", "step_s_one_sum", "all_passed",
]


def run_sweep(config: RunConfig) -> tuple[list[dict], dict]:
    """One pipeline per level under ``out/n<k>``; failing levels keep a row."""
    if len(config.n_list) < 2:
        raise ConfigError("a sweep needs at least two refinement levels")
    out = Path(config.out)
    rows = []
    for n in config.n_list:
        row = {"n": n}
        try:
            r = run_pipeline(config, n, out / f"n{n}")
        except (ConsistencyError, RankCollapseError, np.linalg.LinAlgError) as exc:
            logger.error("level n=%d failed: %s", n, exc)
            row["all_passed"] = False
        else:
            row.update({k: r.residuals[k] for k in ("a_G", "b_G", "a_Y", "b_Y", "rellich_ratio",
                                                    "h1_ratio_min", "h1_ratio_max")})
            row["step_s_half_sum"] = r.regularity["s_half_sum"]
            row["step_s_one_sum"] = r.regularity["s_one_sum"]
            row["all_passed"] = r.passed
        rows.append(row)
    write_csv(out / "sweep.csv", SWEEP_COLUMNS, [[row.get(c) for c in SWEEP_COLUMNS] for row in rows])
    drift = {}
    for key in ("a_G", "b_G", "a_Y", "b_Y", "rellich_ratio"):
        vals = [row[key] for row in rows if key in row]
        drift[f"{key}_drift"] = max(vals) / min(vals) if vals and min(vals) > 0 else math.nan
    write_json(out / "sweep_drift.json", drift)
    return rows, drift


def run_verify_mp(config: RunConfig) -> tuple[list, float]:
    rng = np.random.default_rng(config.seed)
    rows, worst = [], 0.0
    for k in range(config.samples):
        op = hb.random_operator(rng)
        rep = hb.verify_mp_identities(op, config.rank_tol, seed=config.seed + k)
        rows.append([k, op.dom.dim, op.cod.dim, rep.rank, rep.max()])
        worst = max(worst, rep.max())
    out = Path(config.out)
    write_csv(out / "mp.csv", ["index", "dom_dim", "cod_dim", "rank", "max_residual"], rows)
    write_json(out / "mp.json", {"seed": config.seed, "operators": config.samples, "max_residual": worst})
    return rows, worst


# -------------------------------------------------------------------- main


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value file; flags override it")
    common.add_argument("--domain", help="unit-square or l-shape")
    common.add_argument("--mesh", help="mesh file instead of a structured domain")
    common.add_argument("--n", type=int, help="cells per side")
    common.add_argument("--n-list", dest="n_list", help="refinement levels for sweep, e.g. 4,8,16")
    common.add_argument("--seed", type=int)
    common.add_argument("--rank-tol", dest="rank_tol", type=float)
    common.add_argument("--out", help="output directory")
    common.add_argument("--truncation", type=int)
    common.add_argument("--samples", type=int)
    common.add_argument("--s-values", dest="s_values", help="smoothness indices in [0, 1], e.g. 0.5,1")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="riesz-trace", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="full pipeline on one mesh")
    sub.add_parser("sweep", parents=[common], help="pipeline over several refinements")
    sub.add_parser("verify-mp", parents=[common], help="pseudo-inverse identities on random operators")
    sub.add_parser("mesh", parents=[common], help="generate or inspect a mesh")
    return p


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = build_config(args)
        if args.command == "mesh":
            mesh = _load(config, config.n)
            report = validate_mesh(mesh)
            report = {k: (json.dumps(v) if isinstance(v, (list, tuple)) else v) for k, v in report.items()}
            if args.out:
                Path(config.out).mkdir(parents=True, exist_ok=True)
                write_mesh(mesh, Path(config.out) / "mesh.msh")
                write_json(Path(config.out) / "mesh.json", report)
            for k, v in report.items():
                print(f"{k}: {v}")
            return EXIT_OK
        if args.command == "verify-mp":
            if args.samples is None:
                config = replace(config, samples=100)
            t0 = time.perf_counter()
            _, worst = run_verify_mp(config)
            ok = worst <= 1e-9
            print(f"verify-mp: {config.samples} operators, max residual {worst:.3e}, "
                  f"{time.perf_counter() - t0:.2f} s: {'PASS' if ok else 'FAIL'}")
            return EXIT_OK if ok else EXIT_FAIL
        if args.command == "sweep":
            rows, drift = run_sweep(config)
            for key, val in drift.items():
                print(f"{key}: {val:.6g}")
            return EXIT_OK if all(r["all_passed"] for r in rows) else EXIT_FAIL
        result = run_pipeline(config)
    except (ConsistencyError, RankCollapseError) as exc:
        print(f"riesz-trace: invariant failure: {exc}", file=sys.stderr)
        write_json(Path(config.out) / "residuals.json", {"all_passed": False, "error": str(exc)})
        return EXIT_FAIL
    except (ConfigError, MeshParseError, MeshValidationError, OSError) as exc:
        print(f"riesz-trace: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for key in result.failures:
        print(f"FAIL {key}: {result.residuals.get(key)}", file=sys.stderr)
    print(f"run: N={result.residuals['N']}, a_G={result.residuals['a_G']:.6g}, "
          f"b_G={result.residuals['b_G']:.6g}: {'PASS' if result.passed else 'FAIL'}")
    return EXIT_OK if result.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
