"""Service for writing result tables as CSV, Excel workbooks and manifests."""

import csv
from dataclasses import dataclass, field
from numbers import Integral, Real
from pathlib import Path
from typing import List, Optional, Sequence

from openpyxl import Workbook
from openpyxl.styles import Alignment, Font, PatternFill

from config import settings
from fdode.logger import get_logger
from fdode.schemas import RunManifest

logger = get_logger(__name__)

MANIFEST_NAME = "manifest.json"


@dataclass
class Table:
    """One result table: a file stem, a header row and data rows."""

    name: str
    headers: List[str]
    rows: List[list] = field(default_factory=list)

    @property
    def filename(self) -> str:
        return f"{self.name}.csv"


def format_value(value, float_format: Optional[str] = None) -> str:
    """Locale-independent text for one cell."""
    float_format = float_format or settings.output.float_format
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Integral):
        return str(int(value))
    if isinstance(value, Real):
        return format(float(value), float_format)
    return str(value)


def write_csv(directory: Path, table: Table) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / table.filename
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(table.headers)
        for row in table.rows:
            writer.writerow([format_value(value) for value in row])
    logger.debug("csv_written", path=str(path), rows=len(table.rows))
    return path


def _cell(value):
    if isinstance(value, Real) and not isinstance(value, Integral):
        return float(value)
    return value


def write_workbook(path: Path, tables: Sequence[Table]) -> Path:
    """
    Export tables to an Excel workbook, one sheet per table.

    Args:
        path: Target ``.xlsx`` file
        tables: Tables to export, in sheet order

    Returns:
        Path: The written workbook
    """
    wb = Workbook()
    wb.remove(wb.active)

    header_fill = PatternFill(
        start_color="4472C4", end_color="4472C4", fill_type="solid"
    )
    header_font = Font(bold=True, color="FFFFFF", size=10)
    header_alignment = Alignment(horizontal="center", vertical="center")

    for table in tables:
        # Sheet titles are limited to 31 characters
        ws = wb.create_sheet(title=table.name[:31])
        ws.append(table.headers)
        for cell in ws[1]:
            cell.fill = header_fill
            cell.font = header_font
            cell.alignment = header_alignment
        for row in table.rows:
            ws.append([_cell(value) for value in row])

        for column in ws.columns:
            column_letter = column[0].column_letter
            width = max(len(str(cell.value or "")) for cell in column)
            ws.column_dimensions[column_letter].width = min(width + 2, 30)

    path.parent.mkdir(parents=True, exist_ok=True)
    wb.save(path)
    logger.info("workbook_written", path=str(path), sheets=len(tables))
    return path


def write_manifest(directory: Path, manifest: RunManifest) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / MANIFEST_NAME
    path.write_text(
        manifest.model_dump_json(indent=2) + "\n", encoding="utf-8"
    )
    return path
