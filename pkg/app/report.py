# app/report.py
"""
Report Builder

✔ JSON report, schema v1 (stable key order, floats at 6 significant digits)
✔ Self-contained HTML view: Original panel (removed units struck through)
  and Filtered panel, each unit shaded by its self-information
"""

import json
import math
import os
from typing import Any, Dict, List, Optional, Sequence

from jinja2 import Environment, FileSystemLoader, select_autoescape

from .datatypes import CompressionResult
from .selection import render_retained

# ---------------------------
# CONFIG
# ---------------------------
SCHEMA_VERSION = 1
SIGNIFICANT_DIGITS = 6
TEMPLATE_DIR = os.path.join(os.path.dirname(__file__), "templates")
HTML_TEMPLATE = "report.html.j2"

_env = Environment(
    loader=FileSystemLoader(TEMPLATE_DIR),
    autoescape=select_autoescape(["html", "j2"]),
    trim_blocks=True,
    lstrip_blocks=True,
    keep_trailing_newline=True,
)


def _sig(value: Optional[float]) -> Optional[float]:
    """Round to 6 significant digits; non-finite values become null."""
    if value is None or not math.isfinite(value):
        return None
    return float(f"{value:.{SIGNIFICANT_DIGITS}g}")


def retained_text(result: CompressionResult, final_turn: Optional[str] = None) -> str:
    text = render_retained(result)
    if final_turn:
        return f"{text}\n\n{final_turn}" if text else final_turn
    return text


# =====================================================
# JSON report
# =====================================================
def build_report(doc_id: str, result: CompressionResult, final_turn: Optional[str] = None) -> Dict[str, Any]:
    return {
        "schema": SCHEMA_VERSION,
        "id": doc_id,
        "requested_ratio": _sig(result.requested_ratio),
        "achieved_token_ratio": _sig(result.achieved_token_ratio),
        "achieved_unit_ratio": _sig(result.achieved_unit_ratio),
        "threshold_bits": _sig(result.threshold),
        "level": result.level.value,
        "baseline": result.baseline.value,
        "units": [
            {"text": u.text, "self_info": _sig(u.self_info), "retained": bool(keep)}
            for u, keep in zip(result.units, result.retained_mask)
        ],
        "retained_text": retained_text(result, final_turn),
    }


def dump_report(report: Dict[str, Any], indent: Optional[int] = 2) -> str:
    """Serialize a report; parsing and re-dumping the output is byte-identical."""
    return json.dumps(report, ensure_ascii=False, indent=indent, allow_nan=False) + "\n"


# =====================================================
# HTML view
# =====================================================
def unit_intensities(values: Sequence[float]) -> List[float]:
    """
    Min-max normalize values onto [0, 1]. All-equal input maps to 0.
    +inf maps to 1; min and max are taken over the finite values.
    """
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        return [1.0 if v > 0 else 0.0 for v in values]
    lo, hi = min(finite), max(finite)
    span = hi - lo
    out: List[float] = []
    for v in values:
        if not math.isfinite(v):
            out.append(1.0 if v > 0 else 0.0)
        elif span == 0:
            out.append(0.0)
        else:
            out.append((v - lo) / span)
    return out


def render_html(result: CompressionResult, doc_id: str = "document", final_turn: Optional[str] = None) -> str:
    intensities = unit_intensities([u.self_info for u in result.units])
    units = [
        {
            "text": u.text,
            "self_info": f"{u.self_info:.{SIGNIFICANT_DIGITS}g}",
            "intensity": f"{x:.{SIGNIFICANT_DIGITS}g}",
            "alpha": f"{x:.4f}",
            "retained": keep,
        }
        for u, x, keep in zip(result.units, intensities, result.retained_mask)
    ]
    threshold = "n/a" if result.threshold is None else f"{result.threshold:.4g}"
    return _env.get_template(HTML_TEMPLATE).render(
        doc_id=doc_id,
        units=units,
        level=result.level.value,
        baseline=result.baseline.value,
        requested_ratio=f"{result.requested_ratio:.4g}",
        achieved_token_ratio=f"{result.achieved_token_ratio:.4g}",
        achieved_unit_ratio=f"{result.achieved_unit_ratio:.4g}",
        threshold=threshold,
        final_turn=final_turn,
    )
