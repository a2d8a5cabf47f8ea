"""
pdf_export.py
=============
Print-ready run summary for a community health pipeline run.
White page, dark ink. Requires: fpdf2
"""

from datetime import datetime
from typing import Dict, List, Optional, Sequence

from fpdf import FPDF
from fpdf.enums import XPos, YPos

# ── Unicode sanitiser ─────────────────────────────────────────────────────────
_UMAP = {
    "—": "--",  "–": "-",   "‘": "'",   "’": "'",
    "“": '"',   "”": '"',   "…": "...", "→": "->",
    "≈": "~",   "≥": ">=",  "≤": "<=",  "τ": "tau",
    "·": ".",
}
_TRANS = str.maketrans(_UMAP)


def _safe(v) -> str:
    """Sanitise any value to a Latin-1-safe string for Helvetica."""
    s = str(v) if v is not None else ""
    s = s.translate(_TRANS)
    return s.encode("latin-1", errors="ignore").decode("latin-1")


def _fmt(v) -> str:
    if v is None:
        return "--"
    if isinstance(v, float):
        return f"{v:.4f}"
    return _safe(v)


# ── Colour palette ────────────────────────────────────────────────────────────
WHITE      = (255, 255, 255)
ROW_ALT    = (245, 247, 250)
RULE_GRAY  = (200, 205, 210)
INK        = (20,  25,  30)
SUB        = (75,  85,  100)
CAP        = (140, 150, 160)
NAVY       = (18,  45,  85)
GOLD       = (160, 110, 20)
GOLD_BG    = (255, 245, 215)
R_INK      = (180,  35, 30)

LEFT = 14
WIDTH = 182
NEXT_LINE = dict(new_x=XPos.LMARGIN, new_y=YPos.NEXT)


# ── PDF class ─────────────────────────────────────────────────────────────────

class RunReportPDF(FPDF):

    def __init__(self, network: str, generated_at: str):
        super().__init__()
        self.network = _safe(network or "network")
        self.generated_at = _safe(generated_at)
        self.set_auto_page_break(True, margin=22)
        self.set_margins(LEFT, 28, LEFT)
        self.add_page()

    def header(self):
        self.set_fill_color(*NAVY)
        self.rect(0, 0, 210, 19, "F")
        self.set_fill_color(*GOLD)
        self.rect(0, 19, 210, 2.5, "F")

        self.set_xy(LEFT, 5)
        self.set_font("Helvetica", "B", 13)
        self.set_text_color(*WHITE)
        self.cell(130, 8, f"COMMUNITY HEALTH  |  {self.network}")
        self.set_font("Helvetica", "", 7)
        self.set_text_color(190, 205, 220)
        self.cell(0, 8, f"Generated: {self.generated_at}", align="R", **NEXT_LINE)
        self.set_text_color(*INK)
        self.ln(9)

    def footer(self):
        self.set_y(-14)
        self.set_draw_color(*RULE_GRAY)
        self.line(LEFT, self.get_y(), LEFT + WIDTH, self.get_y())
        self.ln(1)
        self.set_font("Helvetica", "", 7)
        self.set_text_color(*CAP)
        self.cell(0, 6, f"{self.network}  |  Page {self.page_no()}", align="C")

    def section_label(self, title: str):
        self.set_fill_color(*GOLD_BG)
        self.set_font("Helvetica", "B", 9)
        self.set_text_color(*GOLD)
        self.set_x(LEFT)
        self.cell(WIDTH, 6, f"  {_safe(title)}", fill=True, **NEXT_LINE)
        self.ln(2)

    def key_values(self, items: Dict[str, object]):
        for key, value in items.items():
            self.set_x(LEFT)
            self.set_font("Helvetica", "", 8)
            self.set_text_color(*SUB)
            self.cell(60, 5, _safe(key))
            self.set_font("Helvetica", "B", 8)
            self.set_text_color(*INK)
            self.cell(0, 5, _fmt(value), **NEXT_LINE)
        self.ln(4)

    def table(self, headers: Sequence[str], rows: Sequence[Sequence[object]],
              widths: Optional[Sequence[float]] = None):
        widths = list(widths or [WIDTH / len(headers)] * len(headers))
        self.set_fill_color(*NAVY)
        self.set_text_color(*WHITE)
        self.set_font("Helvetica", "B", 7.5)
        self.set_x(LEFT)
        for w, h in zip(widths, headers):
            self.cell(w, 7, f"  {_safe(h)}", fill=True)
        self.ln(7)

        alt = False
        self.set_font("Helvetica", "", 7.5)
        for row in rows:
            self.set_fill_color(*(ROW_ALT if alt else WHITE))
            alt = not alt
            self.set_text_color(*INK)
            self.set_x(LEFT)
            for w, v in zip(widths, row):
                self.cell(w, 7, f"  {_fmt(v)}", fill=True)
            self.ln(7)
        self.ln(4)

    def note(self, text: str, color=SUB):
        self.set_x(LEFT)
        self.set_font("Helvetica", "", 8)
        self.set_text_color(*color)
        self.multi_cell(WIDTH, 5, _safe(text))
        self.set_text_color(*INK)
        self.ln(2)


# ── Public API ────────────────────────────────────────────────────────────────

def generate_pdf(network: str, params: Dict[str, object], stats: Dict[str, float],
                 top_communities: List[Dict[str, object]],
                 evaluation: Optional[Dict[str, object]] = None) -> bytes:
    """
    Run parameters, community statistics, the most vulnerable communities and,
    when spreaders were given, the evaluation headline. Returns the PDF bytes.
    """
    pdf = RunReportPDF(network=network, generated_at=datetime.now().strftime("%d %b %Y  %H:%M"))

    pdf.section_label("RUN PARAMETERS")
    pdf.key_values(params)

    pdf.section_label("COMMUNITY STATISTICS")
    pdf.key_values(stats)

    pdf.section_label("MOST VULNERABLE COMMUNITIES")
    if top_communities:
        pdf.table(
            ["COMMUNITY", "V~(C)", "BOUNDARY NODES", "SPREADER BOUNDARY"],
            [[c["community"], c["V_tilde"], c["boundary_count"], c.get("spreader_boundary_count")]
             for c in top_communities],
            widths=[35, 55, 46, 46],
        )
    else:
        pdf.note("No communities.")

    if evaluation is not None:
        pdf.section_label("EVALUATION")
        ap = evaluation.get("ap", {})
        pdf.table([f"AP@{k}" for k in ap] + ["MAP"],
                  [list(ap.values()) + [evaluation.get("map")]])
        tau = evaluation.get("tau", {})
        if tau.get("value") == "undefined":
            pdf.note("Kendall's tau is undefined for this network.", color=R_INK)
        else:
            pdf.note(f"Kendall's tau {tau.get('value', 0.0):.4f}  "
                     f"(P={tau.get('P')}, Q={tau.get('Q')}, T={tau.get('T')}, U={tau.get('U')})")
        pdf.note(f"{evaluation.get('eligible_communities')} eligible and "
                 f"{evaluation.get('skipped_communities')} skipped communities.")

    return bytes(pdf.output())
