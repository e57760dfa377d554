"""cmdpfig: renders comparison figures from cmdplab run-log CSVs."""

from .figures import FigureSpec, PanelSeries, extract_series, render_figure1, render_panel, verify_extraction
from .readers import CSV_COLUMNS, METRICS, RunLog, SchemaError, load_glob, load_run
