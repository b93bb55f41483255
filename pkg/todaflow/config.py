from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, List, Optional, Union
import copy
import math

import numpy as np
import yaml

from .errors import ConfigError
from .hierarchy import HierarchyPolynomial
from .lattice import K_MAX, JacobiWindow

CHECK_NAMES = (
    "master",
    "curvature",
    "cocycle",
    "shiftcomm",
    "pq",
    "vanishing",
    "mfunc",
    "equivalence",
    "spectrum",
)
PERIODIC_ONLY = {"shiftcomm", "equivalence", "spectrum"}
FREE_ONLY = {"mfunc"}
REQUIRED_FIELDS = ("operator", "polynomial", "t_final", "dt")

DEFAULT_CONFIG: Dict[str, Any] = {
    "seed": 0,
    "site": 0,
    "fd_step": 1e-4,
    "workers": 1,
    "output": "runs/default",
    "checks": [],
    "identity_polynomials": [],
    "lax_polynomial": None,
    "z_grid": {
        "radius": 3.0,
        "count": 8,
        "min_imag": 0.5,
        "points": [],
    },
    "tolerances": {
        "exact": 1e-9,
        "single": 1e-6,
        "double": 1e-5,
        "mfunc": 1e-4,
        "det": 1e-9,
        "spectrum": 1e-8,
        "order_band": 0.2,
    },
    "flow": {
        "buffer_per_unit_time": 10.0,
        "drift_every": 1,
    },
    "curvature": {
        "steps": [1e-3, 5e-4, 2.5e-4],
    },
    "mfunc": {
        "times": [],
        "site": None,
    },
}


def _parse_complex(value: Any) -> complex:
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, str):
        return complex(value.replace(" ", ""))
    return complex(value)


def _read_yaml(path: Path, field_name: Optional[str] = None) -> Any:
    try:
        with path.open("r", encoding="utf-8") as handle:
            return yaml.safe_load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror or exc}", field=field_name) from exc
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"cannot parse {path}: {problem}", field=field_name, line=line) from exc


@dataclass
class RunConfig:
    raw: Dict[str, Any]
    base_dir: Path = field(default_factory=lambda: Path("."))

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def dt(self) -> float:
        return float(self.raw["dt"])

    @property
    def t_final(self) -> float:
        return float(self.raw["t_final"])

    @property
    def site(self) -> int:
        return int(self.raw.get("site", 0))

    @property
    def fd_step(self) -> float:
        return float(self.raw["fd_step"])

    @property
    def workers(self) -> int:
        return max(1, int(self.raw.get("workers", 1)))

    @property
    def output_dir(self) -> Path:
        return Path(self.raw["output"])

    @property
    def checks(self) -> List[str]:
        return list(self.raw.get("checks") or [])

    @property
    def tolerances(self) -> Dict[str, float]:
        return {key: float(value) for key, value in self.raw["tolerances"].items()}

    @property
    def flow(self) -> Dict[str, Any]:
        return self.raw["flow"]

    @property
    def curvature(self) -> Dict[str, Any]:
        return self.raw["curvature"]

    @property
    def mfunc(self) -> Dict[str, Any]:
        return self.raw["mfunc"]

    def polynomial(self) -> HierarchyPolynomial:
        return HierarchyPolynomial.from_sequence(self.raw["polynomial"])

    def lax_polynomial(self) -> HierarchyPolynomial:
        value = self.raw.get("lax_polynomial")
        return self.polynomial() if value is None else HierarchyPolynomial.from_sequence(value)

    def identity_polynomials(self) -> List[HierarchyPolynomial]:
        values = self.raw.get("identity_polynomials") or []
        if not values:
            return [self.polynomial()]
        return [HierarchyPolynomial.from_sequence(value) for value in values]

    @cached_property
    def window(self) -> JacobiWindow:
        return build_operator(self.raw["operator"], self.seed, self.base_dir)

    def operator(self) -> JacobiWindow:
        return self.window

    def z_grid(self) -> List[complex]:
        spec = self.raw["z_grid"]
        points = spec.get("points") or []
        if points:
            return [_parse_complex(point) for point in points]
        radius = float(spec["radius"])
        count = int(spec["count"])
        start = math.asin(min(1.0, float(spec["min_imag"]) / radius))
        angles = np.linspace(start, math.pi - start, count)
        return [complex(radius * math.cos(theta), radius * math.sin(theta)) for theta in angles]


def build_operator(spec: Any, seed: int = 0, base_dir: Path = Path(".")) -> JacobiWindow:
    perturb: List[Dict[str, Any]] = []
    if isinstance(spec, str):
        record = _read_yaml(base_dir / spec, "operator")
        if isinstance(record, dict) and "J" in record:
            record = record["J"]
        if not isinstance(record, dict):
            raise ConfigError(f"operator file {spec} does not hold a record", field="operator")
        window = JacobiWindow.from_record(record)
    elif isinstance(spec, dict):
        perturb = list(spec.get("perturb") or [])
        if "random" in spec:
            options = spec["random"]
            window = JacobiWindow.random(
                int(options["sites"]),
                np.random.default_rng(seed),
                options.get("boundary", "periodic"),
                tuple(options.get("a_range", (0.5, 0.8))),
                tuple(options.get("b_range", (-0.3, 0.3))),
            )
        elif "free" in spec:
            options = spec["free"]
            window = JacobiWindow.free(int(options["sites"]), options.get("boundary", "eventually_free"))
        else:
            window = JacobiWindow.from_record(spec)
    else:
        raise ConfigError("operator must be a mapping or a file path", field="operator")

    if not perturb:
        return window
    a, b = np.array(window.a), np.array(window.b)
    for item in perturb:
        site = int(item["site"])
        if "a" in item:
            a[site] = float(item["a"])
        if "b" in item:
            b[site] = float(item["b"])
    return window.with_entries(a, b)


def validate(cfg: RunConfig) -> None:
    for name in REQUIRED_FIELDS:
        if cfg.raw.get(name) is None:
            raise ConfigError("missing required field", field=name)
    try:
        dt, t_final = cfg.dt, cfg.t_final
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"dt and t_final must be numbers: {exc}", field="dt") from exc
    if not dt > 0:
        raise ConfigError(f"dt must be positive, got {dt}", field="dt")
    if not math.isfinite(t_final):
        raise ConfigError("t_final must be finite", field="t_final")

    for name, getter in (
        ("polynomial", cfg.polynomial),
        ("lax_polynomial", cfg.lax_polynomial),
        ("identity_polynomials", cfg.identity_polynomials),
    ):
        try:
            polys = getter()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), field=name) from exc
        for poly in polys if isinstance(polys, list) else [polys]:
            if poly.degree > K_MAX:
                raise ConfigError(f"degree {poly.degree} exceeds K_max={K_MAX}", field=name)

    sites = [("site", cfg.raw.get("site"))]
    if cfg.mfunc.get("site") is not None:
        sites.append(("mfunc.site", cfg.mfunc["site"]))
    for name, value in sites:
        try:
            int(value)
        except (TypeError, ValueError, OverflowError) as exc:
            raise ConfigError(f"site must be an integer, got {value!r}", field=name) from exc

    try:
        zs = cfg.z_grid()
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad z grid: {exc}", field="z_grid") from exc
    if not zs or any(not z.imag > 0 for z in zs):
        raise ConfigError("z-grid points need Im z > 0", field="z_grid")

    try:
        window = cfg.operator()
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"cannot build operator: {exc}", field="operator") from exc

    unknown = [name for name in cfg.checks if name not in CHECK_NAMES]
    if unknown:
        raise ConfigError(f"unknown checks {unknown}; choose from {list(CHECK_NAMES)}", field="checks")
    misplaced = PERIODIC_ONLY if not window.periodic else FREE_ONLY
    clash = sorted(set(cfg.checks) & misplaced)
    if clash:
        raise ConfigError(f"checks {clash} do not apply to a {window.boundary.value} window", field="checks")


def load_config(path: Union[str, Path] = "config.yaml", overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}", field="--config")
    user = _read_yaml(path) or {}
    if not isinstance(user, dict):
        raise ConfigError("top level of a config must be a mapping")

    merged: Dict[str, Any] = copy.deepcopy(DEFAULT_CONFIG)

    for key, value in user.items():
        if isinstance(value, dict) and key in merged and isinstance(merged[key], dict):
            merged[key].update(value)
        else:
            merged[key] = value

    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value

    cfg = RunConfig(merged, base_dir=path.parent)
    validate(cfg)
    return cfg
