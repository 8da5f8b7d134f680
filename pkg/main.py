"""
hardyscope command line
Every subcommand writes <out>/<command>.csv and <out>/manifest.json.
Exit codes: 0 success, 2 inequality violations, 1 errors.
"""

import argparse
import sys
import time
from importlib import metadata
from pathlib import Path
from typing import Dict, List, Optional

from pydantic import BaseModel

from core.analytic_catalog import MAP_FACTORIES, LittlewoodPaleyIntegrator, get_map, sector_map
from core.config import HardyScopeConfig, WalkConfig, load_config
from core.domain_builder import DomainBuilder, arc_domain_spec
from core.domain_geometry import DomainSpec, class_d_check, largest_inscribed_radius
from core.errors import HardyScopeError
from core.number_estimator import (
    DEFAULT_GRID,
    NumberEstimator,
    consistency_report,
    inclusion_bergman,
    inclusion_hardy,
    inclusion_hardy_in_bergman,
)
from core.spec_store import SpecStore
from core.walk_engine import write_profile_csv
from utils.helpers import DataFormatter, ExportHelper, LogHelper

VERSION = "0.1.0"
EXIT_OK, EXIT_ERROR, EXIT_VIOLATIONS = 0, 1, 2

logger = LogHelper.get_logger("CLI")


class RunManifest(BaseModel):
    """Reproducibility record; identical command, spec_hash and cfg give identical CSV bodies"""

    command: str
    argv: List[str]
    spec_hash: Optional[str] = None
    cfg: dict
    versions: Dict[str, str]
    wall_time: float


def _versions() -> Dict[str, str]:
    found = {"hardyscope": VERSION}
    for package in ("numpy", "scipy", "pandas", "pydantic"):
        try:
            found[package] = metadata.version(package)
        except metadata.PackageNotFoundError:
            found[package] = "unknown"
    return found


def _grid(text: Optional[str]) -> List[float]:
    if not text:
        return list(DEFAULT_GRID)
    return [float(part) for part in text.split(",") if part.strip()]


def _b_alpha(items: Optional[List[str]]) -> Dict[float, Optional[float]]:
    values: Dict[float, Optional[float]] = {}
    for item in items or []:
        alpha, _, value = item.partition("=")
        if not value:
            raise ValueError(f"--b-alpha expects alpha=value, got {item!r}")
        values[float(alpha)] = float(value)
    return values


class CommandRunner:
    """Runs one subcommand and records what it produced"""

    def __init__(self, args: argparse.Namespace, config: HardyScopeConfig):
        self.args = args
        self.config = config
        self.out = Path(args.out)
        self.spec_hash: Optional[str] = None

    def _spec(self) -> DomainSpec:
        spec = SpecStore.load(self.args.spec)
        self.spec_hash = SpecStore.spec_hash(spec)
        return spec

    def _csv(self, rows: List[dict], suffix: str = "") -> Path:
        return ExportHelper.to_csv(rows, self.out / f"{self.args.command}{suffix}.csv")

    def estimate_hardy(self) -> int:
        spec = self._spec()
        estimator = NumberEstimator(self.config)
        report = estimator.number_report(spec, R_grid=_grid(self.args.grid), r_grid=_grid(self.args.grid),
                                         method=self.args.method)
        self._csv(report.rows())
        for estimate in (report.h, report.h_cross):
            if estimate is not None and estimate.profile is not None:
                write_profile_csv(estimate.profile, self.out / f"{self.args.command}-{estimate.method}.csv")
        print(report.text())
        return EXIT_VIOLATIONS if report.inequality_violations else EXIT_OK

    def estimate_green_profile(self) -> int:
        spec = self._spec()
        estimator = NumberEstimator(self.config)
        profile = estimator.engine.psi_profile(spec, _grid(self.args.grid))
        write_profile_csv(profile, self.out / f"{self.args.command}.csv")
        rows = []
        for p in self.args.p or []:
            trend = estimator.integral_trend(None, p, power=self.args.alpha + 2.0 if self.args.alpha is not None else 1.0,
                                             profile=profile)
            rows.append({"p": p, "alpha": self.args.alpha, "verdict": trend.verdict.value,
                         "growth_exponent": trend.growth_exponent})
            print(f"p={p:g}: {trend.verdict.value}")
        if rows:
            self._csv(rows, "-trend")
        for entry in profile.entries:
            print(f"r={entry.radius:g} psi={DataFormatter.format_estimate(entry.estimate.mean, entry.estimate.stderr)}")
        return EXIT_OK

    def bloch_check(self) -> int:
        spec = self._spec()
        scan = self.config.scan
        found = largest_inscribed_radius(spec, scan.bloch_search_radius * spec.scale_hint,
                                         scan.bloch_grid_step * spec.scale_hint)
        bloch = not found.unbounded_hint
        self._csv([{"label": spec.label, "bloch": bloch, "inscribed_radius": found.value,
                    "doublings": " ".join(f"{v:.6g}" for v in found.doublings)}])
        b = "+inf" if bloch else "n/a"
        print(f"Bloch: {DataFormatter.format_bool(bloch)}; b={b}")
        return EXIT_OK

    def class_d(self) -> int:
        spec = self._spec()
        scan = self.config.scan
        low, high = scan.class_d_powers
        radii = [spec.scale_hint * 2.0 ** k for k in range(low, high + 1)]
        report = class_d_check(spec, radii, scan.angular_resolution, scan.contact_samples)
        row = {"label": spec.label, "class_d": report.is_class_d, "R": report.R_constant,
               "failures": len(report.failures), "note": report.note}
        print(f"class D: {DataFormatter.format_bool(report.is_class_d)}; R={DataFormatter.format_number(report.R_constant)}")
        if report.is_class_d and self.args.constants:
            constants = DomainBuilder(self.config).class_d_constants(spec, R=report.R_constant)
            row.update(rho=constants.rho, sigma=constants.sigma, spot_ok=constants.spot_ok)
            print(f"rho={constants.rho:g} sigma={constants.sigma:g} spot checks ok: "
                  f"{DataFormatter.format_bool(constants.spot_ok)}")
        self._csv([row])
        return EXIT_OK

    def build_arc_domain(self) -> int:
        builder = DomainBuilder(self.config)
        A = self.args.A
        if A is None:
            A, _ = builder.calibrate_A()
        params, certificates = builder.search_arc_widths(A, self.args.rings)
        spec = arc_domain_spec(params)
        self.spec_hash = SpecStore.spec_hash(spec)
        path = SpecStore.save(spec, self.args.spec_out or self.out / "arc_domain.dom")
        rows = [{"radius": c.radius, "omega": c.omega.mean, "stderr": c.omega.stderr, "target": c.target,
                 "satisfied": c.satisfied} for c in certificates]
        self._csv(rows)
        print(f"A={A:.6g}; rings={params.n_max}; spec written to {path}")
        for c in certificates:
            print(f"R={c.radius:g} omega={DataFormatter.format_estimate(c.omega.mean, c.omega.stderr)} "
                  f"target={c.target:.4g} satisfied={DataFormatter.format_bool(c.satisfied)}")
        return EXIT_OK

    def classify_map(self) -> int:
        fmap = sector_map(self.args.opening) if self.args.map == "sector" and self.args.opening else get_map(self.args.map)
        integrator = LittlewoodPaleyIntegrator(self.config.quadrature)
        rows = []
        for p in self.args.p or []:
            result = integrator.classify_detail(fmap, p, self.args.alpha)
            rows.append({"label": result.label, "p": p, "alpha": result.alpha, "verdict": result.verdict.value,
                         "ladder": " ".join(f"{v:.10g}" for v in result.ladder)})
            print(f"{fmap.label} p={p:g}: {result.verdict.value}")
        if self.args.bracket:
            if self.args.alpha is None:
                found = integrator.estimate_h_of_map(fmap, tuple(self.args.bracket))
            else:
                found = integrator.estimate_b_alpha_of_map(fmap, self.args.alpha, tuple(self.args.bracket))
            rows.append({"label": fmap.label, "p": None, "alpha": self.args.alpha,
                         "verdict": f"transition in [{found.p_low:.4f}, {found.p_high:.4f}]", "ladder": ""})
            print(f"transition in [{found.p_low:.4f}, {found.p_high:.4f}]"
                  + ("" if found.upper_found else " (no divergence found)"))
        self._csv(rows)
        return EXIT_OK

    def check_inclusion(self) -> int:
        args = self.args
        if args.bergman:
            p, alpha, q, beta = args.bergman
            result, claim = inclusion_bergman(p, alpha, q, beta), f"A^{p:g}_{alpha:g} in A^{q:g}_{beta:g}"
        elif args.hardy_bergman:
            q, p, alpha = args.hardy_bergman
            result, claim = inclusion_hardy_in_bergman(q, p, alpha), f"H^{q:g} in A^{p:g}_{alpha:g}"
        else:
            q, p = args.hardy
            result, claim = inclusion_hardy(q, p), f"H^{q:g} in H^{p:g}"
        self._csv([{"inclusion": claim, "holds": result}])
        print(DataFormatter.format_bool(result))
        return EXIT_OK

    def consistency(self) -> int:
        b_alpha = _b_alpha(self.args.b_alpha)
        violations = consistency_report(self.args.h, self.args.b, b_alpha, self.config.fit.consistency_tol)
        self._csv([{"violation": v} for v in violations] or [{"violation": ""}])
        if not violations:
            print("no violations")
        for v in violations:
            print(f"violation: {v}")
        return EXIT_VIOLATIONS if violations else EXIT_OK

    def list_maps(self) -> int:
        rows = []
        for label, factory in MAP_FACTORIES.items():
            fmap = factory()
            rows.append({"label": label, "known_h": fmap.known_h, "target": fmap.known_target or ""})
            print(f"{label}: h={DataFormatter.format_number(fmap.known_h, 2)}")
        self._csv(rows)
        return EXIT_OK


COMMANDS = {
    "estimate-hardy": CommandRunner.estimate_hardy,
    "estimate-green-profile": CommandRunner.estimate_green_profile,
    "bloch-check": CommandRunner.bloch_check,
    "class-d": CommandRunner.class_d,
    "build-arc-domain": CommandRunner.build_arc_domain,
    "classify-map": CommandRunner.classify_map,
    "check-inclusion": CommandRunner.check_inclusion,
    "consistency": CommandRunner.consistency,
    "list-maps": CommandRunner.list_maps,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hardyscope", description="Hardy and Bergman numbers of planar domains")
    parser.add_argument("--config", type=Path, help="JSON config file (default: $HARDYSCOPE_CONFIG, then built-ins)")
    parser.add_argument("--out", type=Path, default=Path("results"), help="results directory")
    parser.add_argument("--seed", type=int, help="override the walk seed")
    parser.add_argument("--samples", type=int, help="override walks per estimate")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    hardy = sub.add_parser("estimate-hardy", help="h(D) by harmonic measure and/or the Green profile")
    hardy.add_argument("--spec", type=Path, required=True)
    hardy.add_argument("--method", choices=("eks", "green", "both"), default="both")
    hardy.add_argument("--grid", help="comma-separated radii")

    green = sub.add_parser("estimate-green-profile", help="psi(r) profile and integral trends")
    green.add_argument("--spec", type=Path, required=True)
    green.add_argument("--grid", help="comma-separated radii")
    green.add_argument("--p", type=float, nargs="*", help="exponents to classify")
    green.add_argument("--alpha", type=float, help="Bergman weight; omit for the Hardy diagnostic")

    bloch = sub.add_parser("bloch-check", help="largest inscribed disk scan")
    bloch.add_argument("--spec", type=Path, required=True)

    class_d = sub.add_parser("class-d", help="class-D scan, optionally with the constants R < rho < sigma")
    class_d.add_argument("--spec", type=Path, required=True)
    class_d.add_argument("--constants", action="store_true")

    arcs = sub.add_parser("build-arc-domain", help="certified arc-ring domain")
    arcs.add_argument("--A", type=float, help="target constant; calibrated from the slit plane when omitted")
    arcs.add_argument("--rings", type=int, required=True)
    arcs.add_argument("--spec-out", type=Path)

    classify = sub.add_parser("classify-map", help="Littlewood-Paley classification of a catalog map")
    classify.add_argument("--map", required=True, choices=sorted(MAP_FACTORIES))
    classify.add_argument("--p", type=float, nargs="*")
    classify.add_argument("--alpha", type=float)
    classify.add_argument("--opening", type=float, help="sector opening in radians")
    classify.add_argument("--bracket", type=float, nargs=2, metavar=("P_MIN", "P_MAX"))

    inclusion = sub.add_parser("check-inclusion", help="exact inclusion calculus")
    which = inclusion.add_mutually_exclusive_group(required=True)
    which.add_argument("--hardy", type=float, nargs=2, metavar=("Q", "P"))
    which.add_argument("--hardy-bergman", type=float, nargs=3, metavar=("Q", "P", "ALPHA"))
    which.add_argument("--bergman", type=float, nargs=4, metavar=("P", "ALPHA", "Q", "BETA"))

    consistency = sub.add_parser("consistency", help="check h <= b_alpha/(alpha+2) <= b")
    consistency.add_argument("--h", type=float)
    consistency.add_argument("--b", type=float)
    consistency.add_argument("--b-alpha", nargs="*", metavar="ALPHA=VALUE")

    sub.add_parser("list-maps", help="analytic map catalog")
    return parser


def _configure(args: argparse.Namespace) -> HardyScopeConfig:
    config = load_config(args.config)
    walk = {}
    if args.seed is not None:
        walk["seed"] = args.seed
    if args.samples is not None:
        walk["n_samples"] = args.samples
    if walk:
        config = config.model_copy(update={"walk": WalkConfig.model_validate({**config.walk.model_dump(), **walk})})
    return config


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    LogHelper.configure(args.verbose)
    started = time.perf_counter()
    try:
        config = _configure(args)
        runner = CommandRunner(args, config)
        code = COMMANDS[args.command](runner)
    except (HardyScopeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    manifest = RunManifest(
        command=args.command,
        argv=argv,
        spec_hash=runner.spec_hash,
        cfg=config.model_dump(mode="json"),
        versions=_versions(),
        wall_time=time.perf_counter() - started,
    )
    ExportHelper.to_json(manifest.model_dump(), Path(args.out) / "manifest.json")
    logger.debug("%s finished in %.2fs", args.command, manifest.wall_time)
    return code


if __name__ == "__main__":
    sys.exit(main())
