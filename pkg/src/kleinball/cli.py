"""Command-line interface.

Group sources:
  builtin:real-fuchsian:P,Q,R     triangle group on a totally real plane
  builtin:complex-fuchsian:P,Q,R  triangle group on a complex line
  builtin:cyclic:T                loxodromic of translation length T
  builtin:sanov                   integer free group of rank 2
  builtin:trivial                 identity only
  PATH.json                       GroupSpec JSON ({name, n, generators, ...})

Exit codes: 0 ok, 1 repro tolerance failure, 2 invalid configuration,
3 element cap exceeded (partial outputs are still written).
Set KLEINBALL_CACHE to a directory to reuse orbit dumps across commands.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import groups, limitset, psh, repro, series
from .orbit import DEFAULT_CAP, OrbitCapExceeded, cached_enumerate

EXIT_OK, EXIT_TOLERANCE, EXIT_CONFIG, EXIT_CAP = 0, 1, 2, 3
COMMANDS = ("group", "orbit", "delta", "series", "psh", "limitset", "repro")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    group: str | None = None
    dim: int = 2
    max_word_len: int = 10_000
    max_radius: float = float("inf")
    cap: int = DEFAULT_CAP
    out: str | None = None
    seed: int = 0
    workers: int = 1
    # command specific
    action: str | None = None  # group build|show
    perturb: float = 0.0
    window: list[float] | None = None
    n_radii: int = 8
    method: str = "log-count-slope"
    s: float = 2.0
    radii: list[float] | None = None
    modulus: int | None = None
    points: int = 50
    directions: int = 10
    word_len: int = 40
    count: int = 20_000
    metric: str = "koranyi"
    scales: list[float] | None = None
    sample_out: str | None = None
    fixture: str | None = None

    @classmethod
    def from_json(cls, data: dict) -> RunConfig:
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        if "command" not in data:
            raise ConfigError("config needs a 'command'")
        return cls(**data)

    def validate(self) -> RunConfig:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.command not in ("repro",) and not self.group:
            raise ConfigError(f"{self.command} needs --group")
        if self.command == "group" and self.action not in ("build", "show"):
            raise ConfigError("group action must be build or show")
        if self.command == "repro" and self.fixture not in repro.FIXTURES:
            raise ConfigError(f"unknown fixture {self.fixture!r}; choose from {', '.join(repro.FIXTURES)}")
        if self.dim < 1:
            raise ConfigError("--dim must be >= 1")
        if self.max_word_len < 1:
            raise ConfigError("--max-word-len must be >= 1")
        if not self.max_radius > 0:
            raise ConfigError("--max-radius must be positive")
        if self.cap < 1 or self.workers < 1:
            raise ConfigError("--cap and --workers must be positive")
        if self.window is not None and len(self.window) != 2:
            raise ConfigError("--window takes two radii")
        if self.method not in series.METHODS:
            raise ConfigError(f"--method must be one of {series.METHODS}")
        if self.metric not in limitset.METRICS:
            raise ConfigError(f"--metric must be one of {limitset.METRICS}")
        if self.s < 0:
            raise ConfigError("--s must be nonnegative")
        if self.modulus is not None and self.modulus < 2:
            raise ConfigError("--modulus must be >= 2")
        if not 0 <= self.perturb <= 0.5:
            raise ConfigError("--perturb must lie in [0, 0.5]")
        if self.command in ("orbit", "delta", "series", "psh") and not np.isfinite(self.max_radius) \
                and self.max_word_len >= 10_000:
            raise ConfigError(f"{self.command} needs a finite --max-radius or a small --max-word-len")
        if self.group:
            parse_group(self.group, self.dim)  # raises ConfigError
        return self


def _ints(text: str, k: int) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",")]
    except ValueError:
        raise ConfigError(f"expected {k} comma-separated integers, got {text!r}") from None
    if len(vals) != k:
        raise ConfigError(f"expected {k} comma-separated integers, got {text!r}")
    return vals


def parse_group(source: str, dim: int = 2) -> groups.GroupSpec:
    try:
        if source.startswith("builtin:"):
            family, _, params = source[len("builtin:"):].partition(":")
            if family == "real-fuchsian":
                return groups.real_fuchsian_triangle(*_ints(params, 3), n=dim)
            if family == "complex-fuchsian":
                return groups.complex_fuchsian(*_ints(params, 3), n=dim)
            if family == "cyclic":
                return groups.cyclic_loxodromic(float(params), n=dim)
            if family == "sanov":
                return groups.sanov_group(dim)
            if family == "trivial":
                return groups.trivial_group(dim)
            raise ConfigError(f"unknown builtin family {family!r}")
        return groups.GroupSpec.load(source)
    except ConfigError:
        raise
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot build group from {source!r}: {exc}") from exc


def _spec(cfg: RunConfig) -> groups.GroupSpec:
    spec = parse_group(cfg.group, cfg.dim)
    if cfg.perturb:
        spec = groups.quasi_fuchsian_perturb(spec, cfg.perturb, cfg.seed)
    return spec


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _orbit(cfg: RunConfig):
    """(orbit, capped)."""
    try:
        return cached_enumerate(_spec(cfg), cfg.max_word_len, cfg.max_radius, cap=cfg.cap, workers=cfg.workers), False
    except OrbitCapExceeded as exc:
        print(f"warning: {exc}", file=sys.stderr)
        return exc.partial, True


def cmd_group(cfg: RunConfig) -> int:
    spec = _spec(cfg)
    if cfg.action == "build":
        _emit(spec.dumps() + "\n", cfg.out)
        return EXIT_OK
    info = dict(name=spec.name, n=spec.ambient_dim, generators=len(spec.generators),
                integer_entries=spec.integer_entries, expected_delta=spec.expected_delta,
                provenance=spec.provenance,
                residuals=[g.unitarity_residual for g in spec.generators])
    _emit(json.dumps(info, indent=2) + "\n", cfg.out)
    return EXIT_OK


def cmd_orbit(cfg: RunConfig) -> int:
    orbit, capped = _orbit(cfg)
    _emit(orbit.to_csv(), cfg.out)
    return EXIT_CAP if capped else EXIT_OK


def cmd_delta(cfg: RunConfig) -> int:
    orbit, capped = _orbit(cfg)
    try:
        est = series.critical_exponent(orbit, tuple(cfg.window) if cfg.window else None, cfg.n_radii, cfg.method)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    d = est.to_json()
    d["cap_reached"] = capped
    _emit(json.dumps(d, indent=2, sort_keys=True) + "\n", cfg.out)
    return EXIT_CAP if capped else EXIT_OK


def cmd_series(cfg: RunConfig) -> int:
    orbit, capped = _orbit(cfg)
    radii = cfg.radii or list(np.linspace(0.0, orbit.complete_radius, 9)[1:])
    _emit(series.series_csv(orbit, cfg.s, radii), cfg.out)
    return EXIT_CAP if capped else EXIT_OK


def cmd_psh(cfg: RunConfig) -> int:
    orbit, capped = _orbit(cfg)
    pred = None
    if cfg.modulus is not None:
        try:
            pred = groups.congruence_filter(orbit.spec, cfg.modulus)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    field = psh.TruncatedField(orbit, pred)
    cert = psh.certify(field, n_points=cfg.points, n_dirs=cfg.directions, seed=cfg.seed)
    _emit(cert.dumps() + "\n", cfg.out)
    return EXIT_CAP if capped else EXIT_OK


def cmd_limitset(cfg: RunConfig) -> int:
    sample = limitset.sample_limit_set(_spec(cfg), cfg.word_len, cfg.count, cfg.seed, cfg.workers)
    if cfg.sample_out:
        Path(cfg.sample_out).write_text(sample.to_csv())
    try:
        est = limitset.box_dimension(sample, cfg.scales, cfg.metric)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    _emit(est.dumps() + "\n", cfg.out)
    return EXIT_OK


def cmd_repro(cfg: RunConfig) -> int:
    res = repro.run(cfg.fixture, workers=cfg.workers)
    _emit(res.dumps() + "\n", cfg.out)
    for c in res.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.value} ({c.bound})", file=sys.stderr)
    return EXIT_OK if res.passed else EXIT_TOLERANCE


HANDLERS = {
    "group": cmd_group, "orbit": cmd_orbit, "delta": cmd_delta, "series": cmd_series,
    "psh": cmd_psh, "limitset": cmd_limitset, "repro": cmd_repro,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="kleinball", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--config", help="JSON RunConfig; command-line flags are ignored when given")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, orbit=True):
        sp.add_argument("--group", help="builtin:<family>:<params> or a GroupSpec JSON path")
        sp.add_argument("--dim", type=int, default=2, help="ambient complex dimension n")
        sp.add_argument("--perturb", type=float, default=0.0, help="quasi-Fuchsian perturbation size")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--out", help="output file (default stdout)")
        if orbit:
            sp.add_argument("--max-word-len", type=int, default=10_000)
            sp.add_argument("--max-radius", type=float, default=float("inf"))
            sp.add_argument("--cap", type=int, default=DEFAULT_CAP)

    g = sub.add_parser("group", help="build or show a GroupSpec")
    g.add_argument("action", choices=["build", "show"])
    common(g, orbit=False)
    common(sub.add_parser("orbit", help="enumerate the orbit of the origin, CSV out"))
    d = sub.add_parser("delta", help="critical exponent estimate, JSON out")
    common(d)
    d.add_argument("--window", type=float, nargs=2)
    d.add_argument("--n-radii", type=int, default=8)
    d.add_argument("--method", default="log-count-slope", choices=series.METHODS)
    s = sub.add_parser("series", help="Poincare partial sums at increasing radii, CSV out")
    common(s)
    s.add_argument("--s", type=float, default=2.0)
    s.add_argument("--radii", type=float, nargs="+")
    h = sub.add_parser("psh", help="plurisubharmonicity certificate, JSON out")
    common(h)
    h.add_argument("--modulus", type=int)
    h.add_argument("--points", type=int, default=50)
    h.add_argument("--directions", type=int, default=10)
    ls = sub.add_parser("limitset", help="limit-set sample and box dimension, JSON out")
    common(ls, orbit=False)
    ls.add_argument("--word-len", type=int, default=40)
    ls.add_argument("--count", type=int, default=20_000)
    ls.add_argument("--metric", default="koranyi", choices=limitset.METRICS)
    ls.add_argument("--scales", type=float, nargs="+")
    ls.add_argument("--sample-out", help="CSV dump of the boundary sample")
    r = sub.add_parser("repro", help="run a named acceptance fixture")
    r.add_argument("fixture", help=", ".join(repro.FIXTURES))
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--out")
    return p


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    if ns.config:
        try:
            data = json.loads(Path(ns.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {ns.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return RunConfig.from_json(data)
    if not ns.command:
        raise ConfigError("no command given")
    names = {f.name for f in dataclasses.fields(RunConfig)}
    return RunConfig(**{k: v for k, v in vars(ns).items() if k in names})


def main(argv=None) -> int:
    try:
        ns = build_parser().parse_args(argv)
        cfg = config_from_args(ns).validate()
    except (ConfigError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return HANDLERS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
