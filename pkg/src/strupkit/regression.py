"""Recover a Hamiltonian from a trained P model by truncated backward error analysis."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

from .bch import backward_error_map, _check_order
from .errors import CapabilityError
from .model import SympNetModel, layer_polynomial
from .poly import MultiPoly, coefficient_mae

PRETTY_CUTOFF = 1e-12


def extract_basis(model: SympNetModel) -> list[MultiPoly]:
    """One polynomial per layer, in application order."""
    if model.method != "P":
        raise CapabilityError(f"basis extraction needs a P model, got method {model.method}")
    return [layer_polynomial(layer) for layer in model.layers]


@dataclass
class RegressionRow:
    order: int
    poly: MultiPoly
    mae: Optional[float] = None

    @property
    def n_terms(self) -> int:
        return len(self.poly)

    @property
    def max_degree(self) -> int:
        return self.poly.degree()


@dataclass
class RegressionReport:
    h: float
    rows: list[RegressionRow]
    metadata: dict = field(default_factory=dict)

    def maes(self) -> list[Optional[float]]:
        return [r.mae for r in self.rows]

    def to_dict(self) -> dict:
        return {
            "h": self.h,
            "metadata": self.metadata,
            "rows": [{
                "order": r.order,
                "mae": r.mae,
                "terms": r.n_terms,
                "max_degree": r.max_degree,
                "polynomial": r.poly.pretty(rel_cutoff=PRETTY_CUTOFF),
                "coefficients": r.poly.to_text().splitlines(),
            } for r in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    def to_table(self) -> str:
        header = ("p", "terms", "max deg", "MAE", "recovered Hamiltonian")
        body = []
        for r in self.rows:
            mae = "-" if r.mae is None else f"{r.mae:.1e}"
            body.append((str(r.order), str(r.n_terms), str(r.max_degree), mae,
                         r.poly.pretty(rel_cutoff=PRETTY_CUTOFF)))
        widths = [max(len(row[i]) for row in [header] + body) for i in range(4)]
        lines = []
        for row in [header] + body:
            cells = [row[i].rjust(widths[i]) for i in range(4)] + [row[4]]
            lines.append("  ".join(cells))
        lines.insert(1, "  ".join("-" * w for w in widths) + "  " + "-" * 21)
        return "\n".join(lines) + "\n"


def regress(model: SympNetModel, h: float, max_order: int, truth: MultiPoly | None = None,
            support: str = "union") -> RegressionReport:
    """Backward error map of the learned basis at every order ``0..max_order``."""
    p_max = _check_order(max_order)
    basis = extract_basis(model)
    rows = []
    for p in range(p_max + 1):
        poly = backward_error_map(basis, h, p)
        mae = coefficient_mae(poly, truth, support) if truth is not None else None
        rows.append(RegressionRow(p, poly, mae))
    meta = {"method": model.method, "layers": len(model.layers), "dim": 2 * model.dim_n}
    for key in ("train_loss", "test_loss", "epochs"):
        if key in model.metadata:
            v = model.metadata[key]
            meta[key] = None if isinstance(v, float) and math.isnan(v) else v
    return RegressionReport(h, rows, meta)
