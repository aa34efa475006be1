"""
Output Writer

Tables go out as CSV (17 significant digits, '.' decimal, ',' delimiter)
or JSON. Files are written once through a temporary sibling and
os.replace, so a reader never sees a partial file.
"""

import json
import logging
import os
import sys
import tempfile
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'


def _plain(value: Any) -> Any:
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    return value


def render(df: pd.DataFrame, fmt: str, summary: Optional[Dict[str, Any]] = None) -> str:
    """
    Render a table (plus optional summary fields) as text.

    CSV puts the summary on a final `key=value ...` line; JSON nests the
    table under "rows" next to the summary fields.
    """
    if fmt == 'json':
        rows = [{key: _plain(v) for key, v in row.items()} for row in df.to_dict(orient='records')]
        if summary is None:
            return json.dumps(rows, indent=2) + '\n'
        payload = {key: _plain(v) for key, v in summary.items()}
        payload['rows'] = rows
        return json.dumps(payload, indent=2) + '\n'

    text = df.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    if summary:
        text += ' '.join(f"{key}={format_value(v)}" for key, v in summary.items()) + '\n'
    return text


def format_value(value: Any) -> str:
    value = _plain(value)
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return FLOAT_FORMAT % value
    return str(value)


def write_text(text: str, path: Optional[str]) -> None:
    """Write text atomically to path, or to standard output when path is None."""
    if path is None:
        sys.stdout.write(text)
        return

    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix='.tmp_', suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, 'w', newline='') as f:
            f.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise
    logger.info(f"Wrote {path}")


def write_table(df: pd.DataFrame, path: Optional[str], fmt: str = 'csv',
                summary: Optional[Dict[str, Any]] = None) -> None:
    write_text(render(df, fmt, summary), path)
