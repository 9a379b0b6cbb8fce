"""Dispersion tables and their CSV / JSON serialization."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

CSV_HEADER = ("bimaterial", "f", "N_h", "psi_deg", "k", "v_s", "status", "residual")

STATUS_OK = "ok"
STATUS_NO_ROOT = "no_root"
STATUS_WINDOW_EMPTY = "window_empty"
STATUS_ERROR = "error"


def fmt(x) -> str:
    """17 significant digits in scientific notation; ``nan`` for missing values."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return f"{float(x):.16e}"


@dataclass
class DispersionRow:
    bimaterial: str
    f: float
    N_h: int
    psi_deg: float
    k: float
    v_s: float
    status: str
    residual: float = math.nan
    diagnostics: dict = field(default_factory=dict)

    def csv_fields(self) -> list[str]:
        return [
            self.bimaterial,
            fmt(self.f),
            str(self.N_h),
            fmt(self.psi_deg),
            fmt(self.k),
            fmt(self.v_s),
            self.status,
            fmt(self.residual),
        ]


@dataclass
class DispersionTable:
    rows: list[DispersionRow]
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.rows)

    def curve(self, psi_deg: float) -> list[DispersionRow]:
        return sorted((r for r in self.rows if r.psi_deg == psi_deg), key=lambda r: r.k)

    @property
    def psi_values(self) -> list[float]:
        return sorted({r.psi_deg for r in self.rows})

    @property
    def k_values(self) -> list[float]:
        return sorted({r.k for r in self.rows})

    def lookup(self, psi_deg: float, k: float) -> DispersionRow:
        for r in self.rows:
            if r.psi_deg == psi_deg and r.k == k:
                return r
        raise KeyError((psi_deg, k))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow(r.csv_fields())
        return buf.getvalue()

    def to_json(self) -> str:
        payload = {"metadata": self.metadata, "rows": [_row_to_json(r) for r in self.rows]}
        return json.dumps(payload, indent=2, sort_keys=True, allow_nan=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> DispersionTable:
        payload = json.loads(text)
        rows = [DispersionRow(**r) for r in payload["rows"]]
        return cls(rows, payload.get("metadata", {}))

    @classmethod
    def from_csv(cls, text: str) -> DispersionTable:
        reader = csv.DictReader(io.StringIO(text))
        rows = []
        for rec in reader:
            rows.append(
                DispersionRow(
                    bimaterial=rec["bimaterial"],
                    f=float(rec["f"]),
                    N_h=int(rec["N_h"]),
                    psi_deg=float(rec["psi_deg"]),
                    k=float(rec["k"]),
                    v_s=float(rec["v_s"]),
                    status=rec["status"],
                    residual=float(rec["residual"]),
                )
            )
        return cls(rows)


def _row_to_json(r: DispersionRow) -> dict:
    return asdict(r)
