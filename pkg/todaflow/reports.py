import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

import yaml

from .hierarchy import DriftSample, FlowState
from .lattice import SpectrumReport
from .weyl import MRow

DRIFT_HEADER = ["step", "t", "eig_drift", "trace1_drift", "trace2_drift"]
MFUNC_HEADER = ["branch", "re_z", "im_z", "re_m", "im_m", "t"]
SPECTRUM_HEADER = ["index", "eigenvalue"]


def plain(value: Any) -> Any:
    """Convert numpy scalars, complex numbers and tuples to YAML-safe values."""
    if isinstance(value, dict):
        return {str(key): plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(item) for item in value]
    if isinstance(value, complex):
        return [float(value.real), float(value.imag)]
    if isinstance(value, bool):
        return value
    if hasattr(value, "item"):
        return plain(value.item())
    return value


@dataclass(frozen=True)
class CheckRecord:
    check_name: str
    parameters: Dict[str, Any]
    residual: float
    tolerance: float
    passed: bool

    @classmethod
    def evaluate(
        cls,
        check_name: str,
        parameters: Dict[str, Any],
        residual: float,
        tolerance: float,
        extra_ok: bool = True,
    ) -> "CheckRecord":
        residual = float(residual)
        passed = bool(extra_ok and math.isfinite(residual) and residual < tolerance)
        return cls(check_name, plain(parameters), residual, float(tolerance), passed)

    @property
    def sort_key(self) -> tuple:
        return self.check_name, yaml.safe_dump(self.parameters, sort_keys=True)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "check_name": self.check_name,
            "parameters": self.parameters,
            "residual": self.residual,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


def format_number(value: Any) -> str:
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def write_csv(destination: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    destination = destination.resolve()
    destination.parent.mkdir(parents=True, exist_ok=True)
    with destination.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([format_number(value) for value in row])
    return destination


def write_yaml(destination: Path, payload: Dict[str, Any]) -> Path:
    destination = destination.resolve()
    destination.parent.mkdir(parents=True, exist_ok=True)
    with destination.open("w", encoding="utf-8") as handle:
        yaml.safe_dump(plain(payload), handle, sort_keys=True, default_flow_style=False)
    return destination


def build_manifest(records: Sequence[CheckRecord], header: Dict[str, Any]) -> Dict[str, Any]:
    manifest = dict(header)
    manifest["checks"] = [record.to_dict() for record in sorted(records, key=lambda r: r.sort_key)]
    manifest["passed"] = all(record.passed for record in records)
    return manifest


def write_manifest(destination: Path, records: Sequence[CheckRecord], header: Dict[str, Any]) -> Path:
    return write_yaml(destination, build_manifest(records, header))


def write_flow_state(destination: Path, state: FlowState) -> Path:
    return write_yaml(destination, state.to_record())


def write_drift(destination: Path, samples: Sequence[DriftSample]) -> Path:
    rows = ([s.step, s.t, s.eig_drift, s.trace1_drift, s.trace2_drift] for s in samples)
    return write_csv(destination, DRIFT_HEADER, rows)


def write_mfunc(destination: Path, rows: Sequence[MRow]) -> Path:
    out = ([r.branch, r.z.real, r.z.imag, r.m.real, r.m.imag, r.t] for r in rows)
    return write_csv(destination, MFUNC_HEADER, out)


def write_spectrum(destination: Path, report: SpectrumReport) -> Path:
    return write_csv(destination, SPECTRUM_HEADER, ([i, float(v)] for i, v in enumerate(report.eigenvalues)))


def build_summary_text(records: Sequence[CheckRecord]) -> str:
    by_name: Dict[str, List[CheckRecord]] = {}
    for record in records:
        by_name.setdefault(record.check_name, []).append(record)

    lines: List[str] = ["todaflow verification", "=====================", ""]
    lines.append(f"Checks: {len(records)}, failed: {sum(not r.passed for r in records)}")
    for name in sorted(by_name):
        group = by_name[name]
        worst = max(group, key=lambda r: r.residual / r.tolerance if r.tolerance else math.inf)
        failed = sum(not r.passed for r in group)
        lines.append(
            f"  - {name}: {len(group)} records, {failed} failed, worst residual {worst.residual:.3g}"
            f" (tolerance {worst.tolerance:.3g})"
        )
    return "\n".join(lines)
