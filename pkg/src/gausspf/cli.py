"""Command-line driver.

Every subcommand writes into a run directory: one or more CSV files for
arrays and ``record.txt`` with ``key = value`` lines for scalars.  Each file
starts with the resolved configuration as ``#`` comment lines, and nothing
time- or host-dependent is written, so identical configurations (including
the seed) give byte-identical outputs.

Exit codes: 0 success, 1 usage or configuration error, 2 a verification
tolerance was exceeded.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

LOGGER = logging.getLogger("gausspf")

EXIT_OK, EXIT_USAGE, EXIT_TOLERANCE = 0, 1, 2

COMMANDS = ("invariant-density", "spectrum", "annihilator", "minkowski",
            "periodic-points", "kg", "orbit")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Resolved settings of one run; ``None`` budgets take per-command defaults."""

    command: str = "invariant-density"
    kind: str = "two-sided"
    parameter: float = 3.0
    n_cells: int | None = None
    n_cells_f2: int | None = None
    j_trunc: int = 10_000
    k_trunc: int = 200
    radius_factor: float = 1e3
    tol: float | None = None
    n_max: int = 20
    out_dir: str = "run"
    seed: int = 0
    shape: str = "hat"
    psi0: bool = False
    k: int = 6
    k_max: int = 4
    quotient_max: int = 5
    n_samples: int = 50
    h: float = 1e-3
    band: float = 100.0
    x0: float = 0.3
    steps: int = 50

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.kind not in ("two-sided", "one-sided"):
            raise UsageError(f"kind must be two-sided or one-sided, not {self.kind!r}")
        if not (isinstance(self.parameter, (int, float)) and math.isfinite(self.parameter)):
            raise UsageError("parameter must be a finite number")
        needs_gt1 = self.command in ("annihilator", "kg")
        if needs_gt1 and not self.parameter > 1:
            raise UsageError(f"{self.command} needs a parameter > 1")
        if self.command in ("invariant-density", "spectrum", "orbit") and self.parameter < 1:
            raise UsageError("the maps are defined here for parameter >= 1")
        for name in ("n_cells", "n_cells_f2", "j_trunc", "k_trunc", "n_max", "k",
                     "k_max", "quotient_max", "n_samples", "steps"):
            val = getattr(self, name)
            if val is not None and (int(val) != val or val < 1):
                raise UsageError(f"{name} must be a positive integer")
        for name in ("radius_factor", "h", "band"):
            if not getattr(self, name) > 0:
                raise UsageError(f"{name} must be positive")
        if self.tol is not None and not self.tol > 0:
            raise UsageError("tol must be positive")

    # file round trip -------------------------------------------------------
    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        data = json.loads(text)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def header_lines(self) -> list[str]:
        """Config echo for output files; ``out_dir`` is left out so that
        identical runs into different directories give identical bytes."""
        items = sorted(dataclasses.asdict(self).items())
        return [f"# {k} = {v!r}" for k, v in items if k != "out_dir"]

    def spec(self):
        from .core_maps import GaussMapSpec
        return GaussMapSpec(self.kind, float(self.parameter))


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (complex, np.complexfloating)):
        return f"{float(np.real(v))!r}{float(np.imag(v)):+.17g}j"
    return str(v)


def _write_csv(cfg: RunConfig, name: str, header: list[str], rows) -> Path:
    path = Path(cfg.out_dir) / name
    with open(path, "w", newline="") as fh:
        for line in cfg.header_lines():
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def _write_record(cfg: RunConfig, record: dict) -> Path:
    path = Path(cfg.out_dir) / "record.txt"
    with open(path, "w") as fh:
        for line in cfg.header_lines():
            fh.write(line + "\n")
        for k, v in record.items():
            fh.write(f"{k} = {_fmt(v)}\n")
    return path


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _closed_form_for(spec):
    from .closed_form import ClosedFormDensity
    p = spec.parameter
    if spec.is_two_sided:
        if p.is_integer() and int(p) % 2 == 1 and p >= 3:
            return ClosedFormDensity.odd_beta(p)
        if p == 1.5:
            return ClosedFormDensity.beta_3_2()
    elif p.is_integer():
        return ClosedFormDensity.integer_gamma(p)
    return None


def cmd_invariant_density(cfg: RunConfig) -> int:
    from .closed_form import residual_invariance
    from .transfer import GridDensity, build_ulam, power_iterate
    spec = cfg.spec()
    if spec.is_two_sided and spec.parameter == 1.0:
        raise UsageError("beta = 1 has no invariant probability density")
    n = cfg.n_cells or 4096
    tol = cfg.tol or 1e-3
    U = build_ulam(spec, n)
    rho = power_iterate(U)
    cf = _closed_form_for(spec)
    record = {"map": spec.describe(), "n_cells": n, "row_sum_error": U.row_sum_error,
              "fixed_point_residual": U.apply(rho).distance_l1(rho)}
    rows_cf = np.full(n, np.nan)
    status = EXIT_OK
    if cf is not None:
        ref = GridDensity.from_function(cf.restricted(), *spec.domain, n)
        rows_cf = ref.values
        l1 = rho.distance_l1(ref)
        record.update({"closed_form": cf.kind, "normalizer": cf.normalizer,
                       "stated_normalizer": cf.stated_normalizer, "l1_to_closed_form": l1,
                       "residual_invariance": residual_invariance(spec, cf)})
        if l1 > tol:
            status = EXIT_TOLERANCE
    record["status"] = "pass" if status == EXIT_OK else "fail"
    _write_csv(cfg, "density.csv", ["x", "ulam", "closed_form"],
               zip(rho.midpoints, rho.values, rows_cf))
    _write_record(cfg, record)
    return status


def cmd_spectrum(cfg: RunConfig) -> int:
    from .transfer import build_ulam, leading_spectrum
    spec = cfg.spec()
    n = cfg.n_cells or 1024
    U = build_ulam(spec, n)
    s = leading_spectrum(U, k=cfg.k)
    _write_csv(cfg, "eigenvalues.csv", ["index", "re", "im", "modulus"],
               [(i, v.real, v.imag, abs(v)) for i, v in enumerate(s.eigenvalues)])
    record = {"map": spec.describe(), "n_cells": n, "k": cfg.k, "gap": s.gap,
              "n_peripheral": s.n_peripheral, "second_modulus_power": s.second_modulus_power,
              "fixed_point_residual": s.residual}
    ok = s.n_peripheral == 1 or cfg.k == 1
    record["status"] = "pass" if ok else "fail"
    _write_record(cfg, record)
    return EXIT_OK if ok else EXIT_TOLERANCE


def _budget(cfg: RunConfig):
    from .annihilator import Budget
    return Budget(n_cells=cfg.n_cells or 2**14, n_cells_f2=cfg.n_cells_f2 or 2**14,
                  j_trunc=cfg.j_trunc, radius_factor=cfg.radius_factor)


def _build(cfg: RunConfig):
    from .annihilator import build_annihilator, build_annihilator_plus, f2_shape, psi_zero
    budget = _budget(cfg)
    half = cfg.kind == "one-sided"
    if cfg.psi0:
        return psi_zero(cfg.parameter, budget, half_line=half)
    try:
        shape = f2_shape(cfg.shape, cfg.parameter)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if half and cfg.shape == "indicator-left":
        raise UsageError("indicator-left needs the two-sided construction")
    build = build_annihilator_plus if half else build_annihilator
    return build(cfg.parameter, shape, budget)


def cmd_annihilator(cfg: RunConfig) -> int:
    from .annihilator import check_necsuf, verify_annihilation, weighted_l2_norm
    f = _build(cfg)
    tol = cfg.tol or 1e-6
    rep = verify_annihilation(f, cfg.n_max)
    _write_csv(cfg, "fourier.csv", ["n", "re_x", "im_x", "re_inv", "im_inv"],
               [(n, a.real, a.imag, b.real, b.imag) for n, a, b in rep.rows()])
    P = f.parameter
    norm = weighted_l2_norm(f, radii=(10 * P, 100 * P, cfg.radius_factor * P))
    nec = check_necsuf(f)
    record = {"map": f.spec.describe(), "f2": "psi0" if cfg.psi0 else cfg.shape,
              "max_family_x": rep.max_x, "max_family_inv": rep.max_inv,
              "rounding_budget": rep.rounding_budget, "neumann_terms": f.info.get("neumann_terms"),
              "series_terms": f.f3.terms, "weighted_norm": norm.total,
              "weighted_norm_tail_bound": norm.tail_bound,
              "condition_i_residual": nec.residual_i, "condition_ii_residual": nec.residual_ii}
    for r, v in norm.far_partials.items():
        record[f"far_partial_{r:g}"] = v
    ok = rep.max_residual <= tol
    record["status"] = "pass" if ok else "fail"
    _write_record(cfg, record)
    return EXIT_OK if ok else EXIT_TOLERANCE


def cmd_minkowski(cfg: RunConfig) -> int:
    from .singular_measures import minkowski_invariance_residual, minkowski_q
    tol = cfg.tol or 1e-8
    xs = np.linspace(0.0, 1.0, cfg.n_samples + 1)
    _write_csv(cfg, "minkowski.csv", ["x", "q"], [(x, minkowski_q(x)) for x in xs])
    rng = np.random.default_rng(cfg.seed)
    ts = rng.uniform(0.0, 1.0, cfg.n_samples)
    res = [minkowski_invariance_residual(t, 40) for t in ts]
    _write_csv(cfg, "invariance.csv", ["t", "residual"], zip(ts, res))
    worst = max(res)
    record = {"q_half": minkowski_q(0.5), "q_golden": minkowski_q((math.sqrt(5) - 1) / 2),
              "max_invariance_residual": worst}
    ok = worst <= tol
    record["status"] = "pass" if ok else "fail"
    _write_record(cfg, record)
    return EXIT_OK if ok else EXIT_TOLERANCE


def cmd_periodic(cfg: RunConfig) -> int:
    from .singular_measures import TEST_FUNCTIONS, invariance_check, periodic_points
    tol = cfg.tol or 1e-12
    ms = periodic_points(cfg.k_max, cfg.quotient_max)
    rows, worst_inv, worst_quad = [], 0.0, 0.0
    for m in ms:
        inv = max(invariance_check(m, g) for g in TEST_FUNCTIONS)
        quad = m.quadratic_residual()
        worst_inv, worst_quad = max(worst_inv, inv), max(worst_quad, quad)
        p, q, r = m.quadratics[0]
        rows.append(("-".join(map(str, m.word)), m.period, m.base_point, p, q, r, inv, quad))
    _write_csv(cfg, "orbits.csv", ["word", "period", "base_point", "p", "q", "r",
                                   "invariance", "quadratic_residual"], rows)
    record = {"n_orbits": len(ms), "max_invariance": worst_inv, "max_quadratic": worst_quad}
    ok = worst_inv <= tol and worst_quad <= 1e-9
    record["status"] = "pass" if ok else "fail"
    _write_record(cfg, record)
    return EXIT_OK if ok else EXIT_TOLERANCE


def cmd_kg(cfg: RunConfig) -> int:
    from .kg_fourier import HyperbolaMeasure, LatticeCross, kg_ladder, lattice_report, scan_grid
    f = _build(cfg)
    m = HyperbolaMeasure(f, band=cfg.band)
    tol = cfg.tol or 1e-5
    two = f.spec.is_two_sided
    alpha = 1.0 if two else 2.0
    beta = f.parameter if two else 2.0 * f.parameter
    lat = lattice_report(m, LatticeCross(alpha, beta, min(cfg.n_max, 10)))
    _write_csv(cfg, "lattice.csv", ["t", "x", "re_psi", "im_psi"],
               [(r["t"], r["x"], r["psi"].real, r["psi"].imag) for r in lat])
    rng = np.random.default_rng(cfg.seed)
    pts = rng.uniform(-3.0, 3.0, size=(10, 2))
    ladders = [kg_ladder(m, t, x, cfg.h) for t, x in pts]
    _write_csv(cfg, "kg_ladder.csv", ["t", "x", "r_h", "r_h2", "r_h4", "ratio1", "ratio2"],
               [(L.t, L.x, *[abs(z) for z in L.residuals], *L.ratios) for L in ladders])
    grid = np.linspace(-2.0, 2.0, 5)
    scan = scan_grid(m, grid, grid)
    _write_csv(cfg, "psi_scan.csv", ["t", "x", "re_psi", "im_psi"], scan)
    worst_lat = max(r["abs"] for r in lat)
    ratios = [L.ratios[0] for L in ladders]
    record = {"map": f.spec.describe(), "max_lattice_psi": worst_lat,
              "min_ratio": min(ratios), "max_ratio": max(ratios)}
    ok = worst_lat <= tol and all(3.5 <= r <= 4.5 for r in ratios)
    record["status"] = "pass" if ok else "fail"
    _write_record(cfg, record)
    return EXIT_OK if ok else EXIT_TOLERANCE


def cmd_orbit(cfg: RunConfig) -> int:
    from .core_maps import orbit
    spec = cfg.spec()
    a, b = spec.domain
    if not a <= cfg.x0 <= b:
        raise UsageError(f"x0 must lie in {spec.domain}")
    o = orbit(spec, cfg.x0, cfg.steps)
    _write_csv(cfg, "orbit.csv", ["step", "x"], enumerate(o.points))
    _write_record(cfg, {"map": spec.describe(), "event": o.event, "event_step": o.event_step})
    return EXIT_OK


HANDLERS = {
    "invariant-density": cmd_invariant_density,
    "spectrum": cmd_spectrum,
    "annihilator": cmd_annihilator,
    "minkowski": cmd_minkowski,
    "periodic-points": cmd_periodic,
    "kg": cmd_kg,
    "orbit": cmd_orbit,
}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gausspf", description="Transfer operators of Gauss-type maps.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON config file; flags override its values")
        s.add_argument("--save-config", help="write the resolved config to this path")
        s.add_argument("--kind", choices=("two-sided", "one-sided"))
        s.add_argument("--beta", type=float, help="parameter of the two-sided map")
        s.add_argument("--gamma", type=float, help="parameter of the one-sided map")
        s.add_argument("--n-cells", type=int)
        s.add_argument("--n-cells-f2", type=int)
        s.add_argument("--j-trunc", type=int)
        s.add_argument("--k-trunc", type=int)
        s.add_argument("--radius-factor", type=float)
        s.add_argument("--tol", type=float)
        s.add_argument("--n-max", type=int)
        s.add_argument("--out-dir")
        s.add_argument("--seed", type=int)
        s.add_argument("--shape")
        s.add_argument("--psi0", action="store_true", default=None)
        s.add_argument("--k", type=int)
        s.add_argument("--k-max", type=int)
        s.add_argument("--quotient-max", type=int)
        s.add_argument("--n-samples", type=int)
        s.add_argument("--h", type=float)
        s.add_argument("--band", type=float)
        s.add_argument("--x0", type=float)
        s.add_argument("--steps", type=int)
    return p


def resolve_config(args: argparse.Namespace) -> RunConfig:
    if args.config:
        try:
            cfg = RunConfig.from_json(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError, TypeError) as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
    else:
        cfg = RunConfig()
    cfg.command = args.command
    if args.beta is not None and args.gamma is not None:
        raise UsageError("give --beta or --gamma, not both")
    if args.beta is not None:
        cfg.kind, cfg.parameter = "two-sided", args.beta
    if args.gamma is not None:
        cfg.kind, cfg.parameter = "one-sided", args.gamma
    if args.kind is not None:
        cfg.kind = args.kind
    for f in dataclasses.fields(RunConfig):
        if f.name in ("command", "kind", "parameter"):
            continue
        val = getattr(args, f.name, None)
        if val is not None:
            setattr(cfg, f.name, val)
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
        if args.save_config:
            Path(args.save_config).write_text(cfg.to_json() + "\n")
        status = HANDLERS[cfg.command](cfg)
    except UsageError as exc:
        print(f"gausspf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"gausspf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(cfg.out_dir) / "record.txt"
    if out.exists():
        for line in out.read_text().splitlines():
            if not line.startswith("#"):
                print(line)
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
