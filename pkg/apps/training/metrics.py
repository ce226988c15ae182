"""
Per-epoch loss log with CSV serialization.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import pandas as pd

from apps.core.exceptions import DataFormatError, DataIOError

FLOAT_FORMAT = '%.17g'
COLUMNS = (
    'epoch',
    'lr_backbone',
    'lr_tsh',
    'backbone_train_mse',
    'backbone_val_mse',
    'tsh_train_mse',
    'tsh_val_mse',
)


@dataclass
class MetricsLog:
    """
    One row per completed epoch; ``test`` holds the final test metrics.

    Columns, in order: epoch, lr_backbone, lr_tsh, backbone_train_mse,
    backbone_val_mse, tsh_train_mse, tsh_val_mse.
    """

    rows: list[dict[str, float]] = field(default_factory=list)
    test: dict[str, float] = field(default_factory=dict)

    def append(self, **row: float) -> None:
        missing = [c for c in COLUMNS if c not in row]
        if missing:
            raise DataFormatError(f'metrics row is missing {missing}')
        self.rows.append({c: row[c] for c in COLUMNS})

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def last(self) -> dict[str, float]:
        return self.rows[-1] if self.rows else {}

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=list(COLUMNS))

    def write_csv(self, path: Path) -> None:
        try:
            self.to_frame().to_csv(path, index=False, float_format=FLOAT_FORMAT)
        except OSError as exc:
            raise DataIOError(f'cannot write {path}: {exc}') from exc

    @classmethod
    def read_csv(cls, path: Path) -> 'MetricsLog':
        """
        Raises:
            DataIOError: If the file is missing.
            DataFormatError: If the header does not match.
        """
        try:
            frame = pd.read_csv(path, float_precision='round_trip')
        except FileNotFoundError as exc:
            raise DataIOError(f'{path} does not exist') from exc
        except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
            raise DataFormatError(f'cannot parse {path}: {exc}') from exc
        if tuple(frame.columns) != COLUMNS:
            raise DataFormatError(f'{path} has columns {list(frame.columns)}, expected {list(COLUMNS)}')
        log = cls()
        for record in frame.to_dict(orient='records'):
            log.append(**record)
        return log

    def summary(self) -> dict[str, Any]:
        return {'epochs': len(self.rows), 'last': self.last, 'test': self.test}
